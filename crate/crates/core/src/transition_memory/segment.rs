use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A distal dendrite segment: a coincidence detector over the layer's
/// previous cell activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistalSegment {
    pub sources: Vec<u32>,
    pub permanences: Vec<f64>,
    pub connect_threshold: f64,
    pub activation_threshold: u32,
    pub spike_size: f64,
}

/// Overlaps of one segment with a set of active cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SegmentOverlap {
    /// Connected synapses whose source is active.
    pub connected: u32,
    /// Synapses of any permanence whose source is active.
    pub potential: u32,
}

impl DistalSegment {
    pub fn overlap_dense(&self, active: &[bool]) -> SegmentOverlap {
        let mut o = SegmentOverlap::default();
        for (&s, &p) in self.sources.iter().zip(&self.permanences) {
            if active[s as usize] {
                o.potential += 1;
                if p >= self.connect_threshold {
                    o.connected += 1;
                }
            }
        }
        o
    }

    pub fn is_active(&self, overlap: SegmentOverlap) -> bool {
        overlap.connected >= self.activation_threshold
    }

    /// Reinforces synapses from `active` sources and decays the rest.
    pub(crate) fn reinforce(&mut self, active: &[bool], inc: f64, dec: f64) {
        for (&s, p) in self.sources.iter().zip(self.permanences.iter_mut()) {
            *p = if active[s as usize] {
                ((1.0 + inc) * *p).min(1.0)
            } else {
                ((1.0 - dec) * *p).max(0.0)
            };
        }
    }

    /// Decays only the synapses whose source is in `active`.
    pub(crate) fn punish(&mut self, active: &[bool], dec: f64) {
        for (&s, p) in self.sources.iter().zip(self.permanences.iter_mut()) {
            if active[s as usize] {
                *p = ((1.0 - dec) * *p).max(0.0);
            }
        }
    }

    pub fn total_permanence(&self) -> f64 {
        self.permanences.iter().sum()
    }

    pub(crate) fn validate(&self, owner: usize, cells: usize, max_synapses: usize) -> Result<()> {
        if self.sources.len() != self.permanences.len() {
            return Err(Error::Invariant(format!(
                "segment on cell {owner} has mismatched sources/permanences"
            )));
        }
        if self.sources.len() > max_synapses {
            return Err(Error::Invariant(format!(
                "segment on cell {owner} has {} synapses (limit {max_synapses})",
                self.sources.len()
            )));
        }
        if let Some(p) = self.permanences.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Invariant(format!(
                "segment on cell {owner} has permanence {p} outside [0,1]"
            )));
        }
        for &s in &self.sources {
            if s as usize >= cells {
                return Err(Error::IndexOutOfRange {
                    index: s as usize,
                    size: cells,
                });
            }
            if s as usize == owner {
                return Err(Error::Invariant(format!(
                    "segment on cell {owner} connects to itself"
                )));
            }
        }
        Ok(())
    }
}
