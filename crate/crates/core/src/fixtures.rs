//! The small worked example used throughout the docs and tests: an eight-row
//! log of two vehicles, and the labeled multisets derived from a variant of it
//! that has one extra Available day for vehicle 2.

use crate::model::DefectState;

/// Eight observations of two vehicles, in the log CSV schema.
pub const WORKED_LOG_CSV: &str = "\
vehicle_id,timestamp,defect_state,status
1,2017-01-01,d1;d2;d3,Available
1,2017-01-02,d1;d2;d3;d4,Available
1,2017-01-03,d1;d2;d3;d4;d6,Down
1,2017-01-04,d1;d2,Available
1,2017-01-05,d1;d2,Available
2,2017-03-12,d6;d7,Available
2,2017-03-14,d6;d7;d8,Available
2,2017-03-15,d6;d7;d8;d9,Down
";

fn states(items: &[&str]) -> Vec<DefectState> {
    items
        .iter()
        .map(|s| DefectState::parse(s).expect("fixture states are valid"))
        .collect()
}

/// Remains-available states of the labeled worked example (seven transition rows).
pub fn labeled_alpha() -> Vec<DefectState> {
    states(&["d1;d2;d3", "d1;d2", "d1;d2", "d6;d7", "d6;d7"])
}

/// Becomes-down states of the labeled worked example.
pub fn labeled_beta() -> Vec<DefectState> {
    states(&["d1;d2;d3;d4", "d6;d7;d8"])
}
