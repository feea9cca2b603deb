//! Run metrics and per-step reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sdr::Sdr;
use crate::transition_memory::LayerOutput;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyLevel {
    #[default]
    Column,
    Cell,
}

/// Fraction of the current step's active units that were predicted at the
/// previous step. `prev` is `None` on the first step after a reset. A step
/// with nothing active counts as fully predicted, so at column level this
/// is always `1 - anomaly`.
pub fn prediction_accuracy(prev: Option<&LayerOutput>, cur: &LayerOutput) -> f64 {
    prediction_accuracy_at(prev, cur, AccuracyLevel::Column)
}

pub fn prediction_accuracy_at(
    prev: Option<&LayerOutput>,
    cur: &LayerOutput,
    level: AccuracyLevel,
) -> f64 {
    let actual = match level {
        AccuracyLevel::Column => &cur.active_columns,
        AccuracyLevel::Cell => &cur.active_cells,
    };
    if actual.is_empty() {
        return 1.0;
    }
    let Some(prev) = prev else {
        return 0.0;
    };
    let predicted = match level {
        AccuracyLevel::Column => prev.predicted_columns_next(),
        AccuracyLevel::Cell => prev.predictive_cells_next.clone(),
    };
    let hit = predicted.overlap(actual).unwrap_or(0);
    hit as f64 / actual.cardinality() as f64
}

/// `overlap(reference, probe) / |reference|` for each probe. An empty
/// reference yields zeros.
pub fn sdr_overlap_curve(reference: &Sdr, probes: &[Sdr]) -> Result<Vec<f64>> {
    probes
        .iter()
        .map(|p| {
            let o = reference.overlap(p)?;
            Ok(if reference.is_empty() {
                0.0
            } else {
                o as f64 / reference.cardinality() as f64
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub anomaly: f64,
    pub prediction_accuracy: f64,
    pub active_cell_count: usize,
    /// Bursting cells as a fraction of active cells.
    pub burst_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reconstruction_error: Option<f64>,
}

impl StepRecord {
    pub fn from_output(prev: Option<&LayerOutput>, out: &LayerOutput) -> Self {
        let active = out.active_cells.cardinality();
        StepRecord {
            t: out.t,
            anomaly: out.anomaly,
            prediction_accuracy: prediction_accuracy(prev, out),
            active_cell_count: active,
            burst_fraction: if active == 0 {
                0.0
            } else {
                out.burst_cells.cardinality() as f64 / active as f64
            },
            reconstruction_error: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let last = *values.last()?;
        Some(MetricSummary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            last,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub anomaly: Option<MetricSummary>,
    pub prediction_accuracy: Option<MetricSummary>,
    pub active_cell_count: Option<MetricSummary>,
    pub burst_fraction: Option<MetricSummary>,
    pub reconstruction_error: Option<MetricSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
}

impl RunReport {
    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    fn column(&self, f: impl Fn(&StepRecord) -> Option<f64>) -> Option<MetricSummary> {
        let v: Vec<f64> = self.records.iter().filter_map(f).collect();
        MetricSummary::of(&v)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            steps: self.records.len(),
            anomaly: self.column(|r| Some(r.anomaly)),
            prediction_accuracy: self.column(|r| Some(r.prediction_accuracy)),
            active_cell_count: self.column(|r| Some(r.active_cell_count as f64)),
            burst_fraction: self.column(|r| Some(r.burst_fraction)),
            reconstruction_error: self.column(|r| r.reconstruction_error),
        }
    }

    /// One JSON object per line.
    pub fn write_records<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Tab-separated table with a header row, for plotting.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "t\tanomaly\tprediction_accuracy\tactive_cell_count\tburst_fraction\treconstruction_error"
        )?;
        for r in &self.records {
            let rec = r
                .reconstruction_error
                .map_or_else(String::new, |e| e.to_string());
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.t, r.anomaly, r.prediction_accuracy, r.active_cell_count, r.burst_fraction, rec
            )?;
        }
        Ok(())
    }
}
