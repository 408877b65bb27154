//! Versioned model files and what-if rescoring.
//!
//! The model file is pretty-printed JSON with entries sorted by itemset. It
//! stores raw support pairs, never divided ratios, so exact ordering survives a
//! round trip.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::miner::{IsrModel, ModelConfig, ModelEntry, Provenance};
use crate::model::{DefectId, DefectState};
use crate::scorer::{score_state, ScoreResult};

pub const MODEL_FORMAT: &str = "rollaid-isr-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PersistedModel {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub provenance: Provenance,
    /// SHA-256 over the canonical entry lines, checked on load.
    pub entries_digest: String,
    pub entries: Vec<ModelEntry>,
}

fn entries_digest(entries: &[ModelEntry]) -> String {
    let mut hasher = Sha256::new();
    for e in entries {
        hasher.update(format!(
            "{}\t{}\t{}\n",
            e.itemset, e.beta_support, e.alpha_support
        ));
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl From<&IsrModel> for PersistedModel {
    fn from(model: &IsrModel) -> Self {
        let entries = model.entries().to_vec();
        PersistedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config: model.config,
            provenance: model.provenance.clone(),
            entries_digest: entries_digest(&entries),
            entries,
        }
    }
}

pub fn save_model<W: Write>(model: &IsrModel, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, &PersistedModel::from(model))?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn model_to_string(model: &IsrModel) -> String {
    let mut buf = Vec::new();
    // Vec sinks do not fail
    let _ = save_model(model, &mut buf);
    String::from_utf8(buf).unwrap_or_default()
}

#[derive(Debug)]
pub struct LoadedModel {
    pub model: IsrModel,
    /// Set when the stored entry digest does not match the entries.
    pub digest_mismatch: bool,
}

/// Reads a model file, rejecting unknown formats and versions and corrupted
/// entries. A digest mismatch is reported, not fatal.
pub fn load_model_checked<R: Read>(mut source: R) -> Result<LoadedModel> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let header: Header = serde_json::from_value(value.clone())?;
    if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
        return Err(Error::UnsupportedModelVersion(format!(
            "{}/{}",
            header.format, header.version
        )));
    }
    let persisted: PersistedModel = serde_json::from_value(value)?;
    let digest_mismatch = entries_digest(&persisted.entries) != persisted.entries_digest;
    if digest_mismatch {
        log::warn!("model entry digest mismatch; file may have been edited by hand");
    }
    let model = IsrModel::from_entries(persisted.entries, persisted.config, persisted.provenance)?;
    Ok(LoadedModel {
        model,
        digest_mismatch,
    })
}

pub fn load_model<R: Read>(source: R) -> Result<IsrModel> {
    load_model_checked(source).map(|l| l.model)
}

// ── What-if ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub state: DefectState,
    #[serde(default)]
    pub add: Vec<DefectId>,
    #[serde(default)]
    pub remove: Vec<DefectId>,
}

impl WhatIfRequest {
    /// Additions first, then removals.
    pub fn toggled_state(&self) -> DefectState {
        let mut s = self.state.clone();
        for id in &self.add {
            s.insert(id.clone());
        }
        for id in &self.remove {
            s.remove(id);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatIfResult {
    pub state_after: DefectState,
    pub before: ScoreResult,
    pub after: ScoreResult,
}

pub fn whatif(model: &IsrModel, req: &WhatIfRequest) -> WhatIfResult {
    let state_after = req.toggled_state();
    WhatIfResult {
        before: score_state(model, &req.state),
        after: score_state(model, &state_after),
        state_after,
    }
}
