//! Versioned snapshots and per-step export records.
//!
//! A snapshot is a pretty-printed JSON document:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "model": {
//!     "config":       { ...full experiment config... },
//!     "encoder":      { "category": { universe_size, active_bits, symbols, rng } }
//!                   | { "scalar": { min, max, universe_size, active_bits } },
//!     "tm":           { config, proximal, segments, prev_active, prev_winners, rng, t },
//!     "pool":         null | { config, base, active_prev },
//!     "column_codes": { "<symbol>": { universe_size, active } }
//!   }
//! }
//! ```
//!
//! SDRs are `{universe_size, active[]}`. Permanences and duty cycles are
//! written as shortest round-trip decimals and parsed back bit-exactly.
//! Random streams are `{seed, word_pos}` so a resumed run draws the same
//! numbers an uninterrupted run would.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Model;
use crate::sdr::Sdr;
use crate::transition_memory::LayerOutput;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct SnapshotOut<'a> {
    format_version: u64,
    model: &'a Model,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotIn {
    #[allow(dead_code)]
    format_version: u64,
    model: Model,
}

pub fn to_string(model: &Model) -> Result<String> {
    serde_json::to_string_pretty(&SnapshotOut {
        format_version: FORMAT_VERSION,
        model,
    })
    .map_err(|e| Error::Invariant(format!("model is not serializable: {e}")))
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let text = to_string(model)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    from_str(&text, path)
}

/// Parses a snapshot document. `origin` is only used in error messages.
pub fn from_str(text: &str, origin: &Path) -> Result<Model> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: origin.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };

    #[derive(Deserialize)]
    struct Header {
        format_version: Option<u64>,
    }
    let header: Header = serde_json::from_str(text).map_err(parse_err)?;
    match header.format_version {
        Some(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::Version {
                found,
                supported: FORMAT_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: 1,
                column: 1,
                message: "missing format_version".into(),
            })
        }
    }
    let snapshot: SnapshotIn = serde_json::from_str(text).map_err(parse_err)?;
    snapshot.model.validate()?;
    Ok(snapshot.model)
}

/// One line of the per-step export stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepExport {
    pub t: u64,
    pub active_columns: Vec<u32>,
    pub pred_cells: Vec<u32>,
    pub burst_cells: Vec<u32>,
    pub anomaly: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pooled: Option<Vec<u32>>,
}

impl StepExport {
    pub fn new(out: &LayerOutput, pooled: Option<&Sdr>) -> Self {
        StepExport {
            t: out.t,
            active_columns: out.active_columns.active().to_vec(),
            pred_cells: out.predicted_cells.active().to_vec(),
            burst_cells: out.burst_cells.active().to_vec(),
            anomaly: out.anomaly,
            pooled: pooled.map(|p| p.active().to_vec()),
        }
    }
}
