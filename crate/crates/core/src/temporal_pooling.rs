//! Temporal pooling over a transition-memory layer's cellular output.
//!
//! Pooling cells are proximal-only. Their synapses learn faster from
//! predicted sources than from bursting ones, and a cell that was active on
//! the previous step gets a carry-over bonus proportional to its overlap
//! with the currently predicted cells, so the pooled SDR holds steady while
//! the input sequence stays predictable.

use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::inhibition::top_k;
use crate::pattern_memory::{PatternConfig, PatternLayer};
use crate::sdr::{dense_mask, Sdr};
use crate::transition_memory::LayerOutput;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingConfig {
    /// Proximal parameters; `input_size` must equal the source layer's
    /// cell count.
    pub base: PatternConfig,
    pub delta_inc_pred: f64,
    pub delta_dec_pred: f64,
    pub delta_inc_burst: f64,
    pub delta_dec_burst: f64,
    /// Weight of the carry-over term, in `[0,1)`.
    pub persistence: f64,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig {
            base: PatternConfig {
                min_overlap: 2,
                ..PatternConfig::default()
            },
            delta_inc_pred: 0.10,
            delta_dec_pred: 0.003,
            delta_inc_burst: 0.02,
            delta_dec_burst: 0.02,
            persistence: 0.5,
        }
    }
}

impl PoolingConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.base.problems("pool.base.");
        if !(0.0..1.0).contains(&self.persistence) {
            out.push(format!("pool.persistence {} must lie in [0,1)", self.persistence));
        }
        for (name, v) in [
            ("delta_inc_pred", self.delta_inc_pred),
            ("delta_dec_pred", self.delta_dec_pred),
            ("delta_inc_burst", self.delta_inc_burst),
            ("delta_dec_burst", self.delta_dec_burst),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("pool.{name} must lie in [0,1]"));
            }
        }
        if self.delta_inc_pred < self.delta_inc_burst {
            out.push("pool.delta_inc_pred must not be below delta_inc_burst".into());
        }
        if self.delta_dec_pred > self.delta_dec_burst {
            out.push("pool.delta_dec_pred must not exceed delta_dec_burst".into());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingLayer {
    config: PoolingConfig,
    base: PatternLayer,
    active_prev: Sdr,
}

impl PoolingLayer {
    pub fn new(config: PoolingConfig) -> Result<Self> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let base = PatternLayer::new(config.base.clone())?;
        Ok(PoolingLayer {
            active_prev: Sdr::empty(config.base.size),
            base,
            config,
        })
    }

    pub fn config(&self) -> &PoolingConfig {
        &self.config
    }

    pub fn base(&self) -> &PatternLayer {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut PatternLayer {
        &mut self.base
    }

    pub fn active_prev(&self) -> &Sdr {
        &self.active_prev
    }

    pub fn reset(&mut self) {
        self.active_prev = Sdr::empty(self.config.base.size);
    }

    fn scores(&self, l4: &LayerOutput) -> Result<(Vec<u32>, Sdr)> {
        let overlaps = self.base.overlaps(&l4.active_cells)?;
        let mut scores = self.base.boosted_scores(&overlaps);
        if self.config.persistence > 0.0 && !self.active_prev.is_empty() {
            let mask = dense_mask(&l4.predicted_cells);
            check_width(self.base.input_size(), mask.len())?;
            for j in self.active_prev.iter() {
                let carried = self.base.dendrites()[j].overlap_dense(&mask);
                scores[j] += self.config.persistence * carried as f64;
            }
        }
        let winners = top_k(
            &scores,
            &self.base.eligible(&overlaps),
            self.base.active_count(),
        );
        Ok((overlaps, winners))
    }

    /// Computes the pooled SDR for one step of the source layer and records
    /// it as the previous activity.
    pub fn tp_step(&mut self, l4: &LayerOutput) -> Result<Sdr> {
        let (_, winners) = self.scores(l4)?;
        self.active_prev = winners.clone();
        Ok(winners)
    }

    /// Permanence update with rates chosen per synapse by whether its
    /// source cell was predicted or bursting.
    pub fn tp_learn(&mut self, l4: &LayerOutput, winners: &Sdr) -> Result<()> {
        check_width(self.base.input_size(), l4.active_cells.size())?;
        check_width(self.base.size(), winners.size())?;
        let pred = dense_mask(&l4.predicted_cells);
        let burst = dense_mask(&l4.burst_cells);
        let c = &self.config;
        let rates = move |s: usize| {
            if pred[s] {
                (true, c.delta_inc_pred, c.delta_dec_pred)
            } else if burst[s] {
                (true, c.delta_inc_burst, c.delta_dec_burst)
            } else {
                (false, 0.0, c.delta_dec_burst)
            }
        };
        let dendrites = self.base.dendrites_mut();
        for j in winners.iter() {
            dendrites[j].adapt(&rates);
        }
        Ok(())
    }

    /// Pools one step and, when `learn` is set, trains and updates boosts.
    pub fn step(&mut self, l4: &LayerOutput, learn: bool) -> Result<Sdr> {
        let (overlaps, winners) = self.scores(l4)?;
        if learn {
            self.tp_learn(l4, &winners)?;
            self.base.boost_update(&winners, &overlaps)?;
        }
        self.active_prev = winners.clone();
        Ok(winners)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let problems = self.config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        self.base.validate()?;
        if self.base.config() != &self.config.base {
            return Err(Error::Invariant(
                "pooling base layer config disagrees with pool config".into(),
            ));
        }
        check_width(self.config.base.size, self.active_prev.size())
    }
}

/// Mean fraction of bits that change between consecutive SDRs: 0 means
/// perfectly stable, 1 means every step is disjoint from the last.
///
/// Each pair is normalised by the larger of its two cardinalities; a pair
/// of empty SDRs counts as unchanged.
pub fn stability(history: &[Sdr]) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::Config(vec![
            "stability needs at least two SDRs".into(),
        ]));
    }
    let mut total = 0.0;
    for pair in history.windows(2) {
        let denom = pair[0].cardinality().max(pair[1].cardinality());
        if denom > 0 {
            total += 1.0 - pair[0].overlap(&pair[1])? as f64 / denom as f64;
        }
    }
    Ok(total / (history.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l4_output(cells: usize, pred: &[usize], burst: &[usize]) -> LayerOutput {
        let p = Sdr::new(cells, pred.iter().copied()).unwrap();
        let b = Sdr::new(cells, burst.iter().copied()).unwrap();
        LayerOutput {
            t: 0,
            active_columns: Sdr::empty(cells),
            active_cells: p.union(&b).unwrap(),
            predicted_cells: p,
            burst_cells: b,
            winner_cells: Sdr::empty(cells),
            firing_sequence: Vec::new(),
            predictive_cells_next: Sdr::empty(cells),
            anomaly: 0.0,
        }
    }

    fn config() -> PoolingConfig {
        PoolingConfig {
            base: PatternConfig {
                input_size: 8,
                size: 2,
                sparsity: 0.5,
                synapses_per_neuron: 4,
                min_overlap: 1,
                ..PatternConfig::default()
            },
            delta_inc_pred: 0.12,
            delta_inc_burst: 0.02,
            ..PoolingConfig::default()
        }
    }

    #[test]
    fn modulated_rates() {
        let mut pool = PoolingLayer::new(config()).unwrap();
        for d in pool.base_mut().dendrites_mut() {
            d.sources = vec![0, 1, 2, 3];
            d.permanences = vec![0.4; 4];
        }
        let l4 = l4_output(8, &[0], &[1]);
        pool.tp_learn(&l4, &Sdr::new(2, [0]).unwrap()).unwrap();
        let p = &pool.base().dendrites()[0].permanences;
        assert!((p[0] - 0.448).abs() < 1e-12);
        assert!((p[1] - 0.408).abs() < 1e-12);
        assert!((p[2] - 0.4 * (1.0 - 0.02)).abs() < 1e-12);
        assert_eq!(pool.base().dendrites()[1].permanences, vec![0.4; 4]);
    }

    #[test]
    fn bursting_input_gets_no_carry_over() {
        let mut pool = PoolingLayer::new(config()).unwrap();
        for d in pool.base_mut().dendrites_mut() {
            d.sources = vec![0, 1, 2, 3];
            d.permanences = vec![0.4; 4];
        }
        pool.base_mut().dendrites_mut()[1].permanences = vec![0.4, 0.4, 0.4, 0.0];
        let first = pool.tp_step(&l4_output(8, &[], &[0, 1, 2, 3])).unwrap();
        assert_eq!(first.active(), &[0]);
        // Neuron 1 now has equal overlap; carry-over from a fully bursting
        // step is zero, so the lower index wins either way.
        let l4 = l4_output(8, &[], &[0, 1, 2]);
        assert_eq!(pool.tp_step(&l4).unwrap().active(), &[0]);
    }

    #[test]
    fn carry_over_keeps_previous_winner() {
        let run = |persistence: f64| {
            let mut cfg = config();
            cfg.persistence = persistence;
            let mut pool = PoolingLayer::new(cfg).unwrap();
            for d in pool.base_mut().dendrites_mut() {
                d.sources = vec![0, 1, 2, 3];
            }
            pool.base_mut().dendrites_mut()[0].permanences = vec![0.0, 0.4, 0.4, 0.0];
            pool.base_mut().dendrites_mut()[1].permanences = vec![0.4; 4];
            let a = pool.tp_step(&l4_output(8, &[], &[0, 1, 2, 3])).unwrap();
            assert_eq!(a.active(), &[1]);
            pool.base_mut().dendrites_mut()[0].permanences = vec![0.4, 0.4, 0.4, 0.0];
            // Both overlap 3; neuron 1 adds persistence * 3 carried bits.
            pool.tp_step(&l4_output(8, &[0, 1, 2], &[])).unwrap()
        };
        assert_eq!(run(0.5).active(), &[1]);
        assert_eq!(run(0.0).active(), &[0]);
    }

    #[test]
    fn stability_examples() {
        let a = Sdr::new(10, [0, 1, 2, 3]).unwrap();
        let b = Sdr::new(10, [4, 5, 6, 7]).unwrap();
        let h = Sdr::new(10, [2, 3, 4, 5]).unwrap();
        assert_eq!(stability(&[a.clone(), a.clone(), a.clone()]).unwrap(), 0.0);
        assert_eq!(stability(&[a.clone(), b.clone(), a.clone()]).unwrap(), 1.0);
        assert_eq!(stability(&[a.clone(), h.clone(), a.clone(), h]).unwrap(), 0.5);
        assert!(stability(&[a]).is_err());
    }

    #[test]
    fn rejects_inverted_modulation() {
        let cfg = PoolingConfig {
            delta_inc_pred: 0.01,
            delta_inc_burst: 0.02,
            ..PoolingConfig::default()
        };
        assert!(PoolingLayer::new(cfg).is_err());
    }
}
