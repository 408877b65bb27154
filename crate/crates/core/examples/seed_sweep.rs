//! Runs the synthetic fleet scenario over a range of seeds and prints the
//! per-seed totals for theta 3 and 4.
//!
//! cargo run --release -p rollaid --example seed_sweep -- [seeds] [min_support]

use rollaid::datagen::{generate, GenConfig};
use rollaid::{compare_policies, train, EvalConfig, MinerConfig, PreprocessConfig};

fn main() -> Result<(), rollaid::Error> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let k: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    for theta in [3, 4] {
        let mut wins = 0;
        let mut savings = Vec::new();
        for seed in 0..seeds {
            let cfg = GenConfig {
                seed,
                ..GenConfig::default()
            };
            let data = generate(&cfg)?;
            let end = cfg.train_end();
            let model = train(
                &data.log.filter_dates(|d| d <= end),
                &PreprocessConfig::default(),
                &MinerConfig::new(k)?,
            )?;
            let cmp = compare_policies(&data.log, &model, &data.costs, &EvalConfig::new(theta)?)?;
            if cmp.supaid_total < cmp.supervisor_total {
                wins += 1;
            }
            savings.push(cmp.savings_pct());
            println!(
                "theta={theta} seed={seed:2} keys={:5} errors={:3} supervisor={:10.1} model={:10.1} savings={:6.2}%",
                model.len(),
                data.truth.supervisor_errors.len(),
                cmp.supervisor_total,
                cmp.supaid_total,
                cmp.savings_pct()
            );
        }
        let mean = savings.iter().sum::<f64>() / savings.len() as f64;
        println!("theta={theta}: model cheaper in {wins}/{seeds} seeds, mean savings {mean:.2}%");
    }
    Ok(())
}
