//! Pattern memory: proximal overlap, global k-WTA inhibition, Hebbian
//! permanence learning, boosting and input reconstruction.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::exec::map_range;
use crate::inhibition::top_k;
use crate::rng::SeededRng;
use crate::sdr::{dense_mask, Sdr};

/// Default synapse connection threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// A neuron's feedforward dendrite: a sampled subspace of the input plus
/// one permanence per sampled bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximalDendrite {
    pub sources: Vec<u32>,
    pub permanences: Vec<f64>,
    pub connect_threshold: f64,
}

impl ProximalDendrite {
    pub fn new(sources: Vec<u32>, permanences: Vec<f64>, connect_threshold: f64) -> Result<Self> {
        let d = ProximalDendrite {
            sources,
            permanences,
            connect_threshold,
        };
        d.validate(usize::MAX)?;
        Ok(d)
    }

    /// A synapse is connected when its permanence is at least the threshold.
    pub fn connection_vector(&self) -> Vec<bool> {
        self.permanences
            .iter()
            .map(|&p| p >= self.connect_threshold)
            .collect()
    }

    pub fn ff_overlap(&self, input: &Sdr, input_size: usize) -> Result<u32> {
        check_width(input_size, input.size())?;
        Ok(self.overlap_dense(&dense_mask(input)))
    }

    pub(crate) fn overlap_dense(&self, mask: &[bool]) -> u32 {
        self.sources
            .iter()
            .zip(&self.permanences)
            .filter(|&(&s, &p)| p >= self.connect_threshold && mask[s as usize])
            .count() as u32
    }

    /// Hebbian update. `rates(source)` returns whether the source bit is on
    /// and the `(inc, dec)` pair to use for that synapse.
    pub(crate) fn adapt<F>(&mut self, rates: F)
    where
        F: Fn(usize) -> (bool, f64, f64),
    {
        let theta = self.connect_threshold;
        for (&s, p) in self.sources.iter().zip(self.permanences.iter_mut()) {
            let (on, inc, dec) = rates(s as usize);
            *p = if on && *p >= theta {
                ((1.0 + inc) * *p).min(1.0)
            } else {
                ((1.0 - dec) * *p).max(0.0)
            };
        }
    }

    pub(crate) fn validate(&self, input_size: usize) -> Result<()> {
        if self.sources.len() != self.permanences.len() {
            return Err(Error::Invariant(format!(
                "dendrite has {} sources but {} permanences",
                self.sources.len(),
                self.permanences.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.connect_threshold) {
            return Err(Error::Invariant(format!(
                "connect threshold {} outside [0,1]",
                self.connect_threshold
            )));
        }
        if let Some(p) = self.permanences.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Invariant(format!("permanence {p} outside [0,1]")));
        }
        let mut seen = self.sources.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invariant("duplicate proximal source".into()));
        }
        if let Some(&s) = seen.last() {
            if s as usize >= input_size {
                return Err(Error::IndexOutOfRange {
                    index: s as usize,
                    size: input_size,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    /// Width of the feedforward input.
    pub input_size: usize,
    /// Number of neurons (or columns).
    pub size: usize,
    pub sparsity: f64,
    /// Synapses sampled per neuron; clamped to `input_size`.
    pub synapses_per_neuron: usize,
    pub connect_threshold: f64,
    pub delta_inc: f64,
    pub delta_dec: f64,
    pub duty_period: f64,
    pub boost_strength: f64,
    pub min_overlap: u32,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            input_size: 1024,
            size: 2048,
            sparsity: 0.02,
            synapses_per_neuron: 512,
            connect_threshold: DEFAULT_THRESHOLD,
            delta_inc: 0.05,
            delta_dec: 0.008,
            duty_period: 1000.0,
            boost_strength: 0.0,
            min_overlap: 1,
            seed: 0,
            parallel: true,
        }
    }
}

impl PatternConfig {
    pub fn active_count(&self) -> usize {
        (self.sparsity * self.size as f64).round() as usize
    }

    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |cond: bool, msg: String| {
            if cond {
                out.push(format!("{prefix}{msg}"));
            }
        };
        bad(self.input_size == 0, "input_size must be positive".into());
        bad(self.size == 0, "size must be positive".into());
        bad(
            !(self.sparsity > 0.0 && self.sparsity < 1.0),
            format!("sparsity {} must lie in (0,1)", self.sparsity),
        );
        bad(
            self.size > 0 && self.sparsity > 0.0 && self.active_count() == 0,
            format!("sparsity {} x size {} rounds to zero winners", self.sparsity, self.size),
        );
        bad(self.synapses_per_neuron == 0, "synapses_per_neuron must be positive".into());
        bad(
            !(0.0..=1.0).contains(&self.connect_threshold),
            format!("connect_threshold {} must lie in [0,1]", self.connect_threshold),
        );
        bad(
            !(0.0..=1.0).contains(&self.delta_inc) || !(0.0..=1.0).contains(&self.delta_dec),
            "delta_inc and delta_dec must lie in [0,1]".into(),
        );
        bad(!(self.duty_period >= 1.0), "duty_period must be >= 1".into());
        bad(!(self.boost_strength >= 0.0), "boost_strength must be >= 0".into());
        out
    }
}

/// A layer of neurons forming SDRs of its input by global inhibition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternLayer {
    config: PatternConfig,
    dendrites: Vec<ProximalDendrite>,
    boost: Vec<f64>,
    active_duty: Vec<f64>,
    overlap_duty: Vec<f64>,
}

impl PatternLayer {
    /// Samples each neuron's projection and draws initial permanences
    /// uniformly from `[θ−0.1, θ+0.1]`.
    pub fn new(config: PatternConfig) -> Result<Self> {
        let problems = config.problems("");
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let mut rng = SeededRng::new(config.seed);
        let n_s = config.synapses_per_neuron.min(config.input_size);
        let theta = config.connect_threshold;
        let (lo, hi) = ((theta - 0.1).max(0.0), (theta + 0.1).min(1.0));
        let dendrites = (0..config.size)
            .map(|_| {
                let mut sources: Vec<u32> = sample(&mut rng, config.input_size, n_s)
                    .into_iter()
                    .map(|i| i as u32)
                    .collect();
                sources.sort_unstable();
                let permanences = (0..n_s).map(|_| rng.gen_range(lo..=hi)).collect();
                ProximalDendrite {
                    sources,
                    permanences,
                    connect_threshold: theta,
                }
            })
            .collect();
        let n = config.size;
        Ok(PatternLayer {
            config,
            dendrites,
            boost: vec![1.0; n],
            active_duty: vec![0.0; n],
            overlap_duty: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &PatternConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn input_size(&self) -> usize {
        self.config.input_size
    }

    pub fn active_count(&self) -> usize {
        self.config.active_count()
    }

    pub fn dendrites(&self) -> &[ProximalDendrite] {
        &self.dendrites
    }

    pub fn dendrites_mut(&mut self) -> &mut [ProximalDendrite] {
        &mut self.dendrites
    }

    pub fn boost(&self) -> &[f64] {
        &self.boost
    }

    pub fn active_duty(&self) -> &[f64] {
        &self.active_duty
    }

    pub fn overlap_duty(&self) -> &[f64] {
        &self.overlap_duty
    }

    pub fn set_parallel(&mut self, parallel: bool) {
        self.config.parallel = parallel;
    }

    /// Feedforward overlap of every neuron with `input`.
    pub fn overlaps(&self, input: &Sdr) -> Result<Vec<u32>> {
        check_width(self.config.input_size, input.size())?;
        let mask = dense_mask(input);
        Ok(map_range(self.config.parallel, self.dendrites.len(), |j| {
            self.dendrites[j].overlap_dense(&mask)
        }))
    }

    /// `boost_j × overlap_j` for every neuron.
    pub fn boosted_scores(&self, overlaps: &[u32]) -> Vec<f64> {
        overlaps
            .iter()
            .zip(&self.boost)
            .map(|(&o, &b)| b * o as f64)
            .collect()
    }

    pub(crate) fn eligible(&self, overlaps: &[u32]) -> Vec<bool> {
        overlaps.iter().map(|&o| o >= self.config.min_overlap).collect()
    }

    /// Selects the top `n_sdr` neurons from precomputed overlaps.
    pub fn select(&self, overlaps: &[u32]) -> Sdr {
        top_k(
            &self.boosted_scores(overlaps),
            &self.eligible(overlaps),
            self.active_count(),
        )
    }

    pub fn compute_sdr(&self, input: &Sdr) -> Result<Sdr> {
        Ok(self.select(&self.overlaps(input)?))
    }

    /// Applies the permanence rule to every winning neuron's synapses.
    pub fn learn(&mut self, input: &Sdr, winners: &Sdr) -> Result<()> {
        check_width(self.config.input_size, input.size())?;
        check_width(self.config.size, winners.size())?;
        let mask = dense_mask(input);
        let (inc, dec) = (self.config.delta_inc, self.config.delta_dec);
        for j in winners.iter() {
            self.dendrites[j].adapt(|s| (mask[s], inc, dec));
        }
        Ok(())
    }

    /// Updates duty-cycle averages, recomputes boost factors and nudges
    /// permanences of neurons whose average overlap is far below the median.
    pub fn boost_update(&mut self, winners: &Sdr, overlaps: &[u32]) -> Result<()> {
        check_width(self.config.size, winners.size())?;
        check_width(self.config.size, overlaps.len())?;
        let a = 1.0 / self.config.duty_period;
        let active = dense_mask(winners);
        for j in 0..self.config.size {
            let on = if active[j] { 1.0 } else { 0.0 };
            self.active_duty[j] = (1.0 - a) * self.active_duty[j] + a * on;
            self.overlap_duty[j] = (1.0 - a) * self.overlap_duty[j] + a * overlaps[j] as f64;
        }
        let (strength, target) = (self.config.boost_strength, self.config.sparsity);
        for (b, &duty) in self.boost.iter_mut().zip(&self.active_duty) {
            *b = boost_factor(strength, target, duty);
        }

        let floor = 0.1 * median(&self.overlap_duty);
        let bump = 0.1 * self.config.connect_threshold;
        for (d, &duty) in self.dendrites.iter_mut().zip(&self.overlap_duty) {
            if duty < floor {
                for p in &mut d.permanences {
                    *p = (*p + bump).min(1.0);
                }
            }
        }
        Ok(())
    }

    /// One full step: select winners, and optionally learn and update boosts.
    pub fn step(&mut self, input: &Sdr, learn: bool) -> Result<Sdr> {
        let overlaps = self.overlaps(input)?;
        let winners = self.select(&overlaps);
        if learn {
            self.learn(input, &winners)?;
            self.boost_update(&winners, &overlaps)?;
        }
        Ok(winners)
    }

    /// Sum of the winners' connection vectors projected back into input
    /// space.
    pub fn reconstruct(&self, winners: &Sdr) -> Result<Vec<u32>> {
        check_width(self.config.size, winners.size())?;
        let mut out = vec![0u32; self.config.input_size];
        for j in winners.iter() {
            let d = &self.dendrites[j];
            for (&s, &p) in d.sources.iter().zip(&d.permanences) {
                if p >= d.connect_threshold {
                    out[s as usize] += 1;
                }
            }
        }
        Ok(out)
    }

    /// Reconstruction restricted to the input's on-bits: the sum of the
    /// winners' overlap vectors.
    pub fn masked_reconstruct(&self, winners: &Sdr, input: &Sdr) -> Result<Vec<u32>> {
        check_width(self.config.input_size, input.size())?;
        let mut out = self.reconstruct(winners)?;
        let mask = dense_mask(input);
        for (v, on) in out.iter_mut().zip(mask) {
            if !on {
                *v = 0;
            }
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let problems = self.config.problems("");
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let n = self.config.size;
        if self.dendrites.len() != n
            || self.boost.len() != n
            || self.active_duty.len() != n
            || self.overlap_duty.len() != n
        {
            return Err(Error::Invariant(format!(
                "pattern layer arrays do not all have length {n}"
            )));
        }
        for d in &self.dendrites {
            d.validate(self.config.input_size)?;
        }
        if self.boost.iter().any(|&b| !(b >= 1.0) || !b.is_finite()) {
            return Err(Error::Invariant("boost factors must be finite and >= 1".into()));
        }
        Ok(())
    }
}

/// `exp(strength × (target − duty))`, floored at 1.
pub fn boost_factor(strength: f64, target: f64, duty: f64) -> f64 {
    (strength * (target - duty)).exp().max(1.0)
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// L1 distance between the input's indicator and the binarized
/// reconstruction.
pub fn reconstruction_error(input: &Sdr, reconstruction: &[u32]) -> Result<f64> {
    check_width(input.size(), reconstruction.len())?;
    let mask = dense_mask(input);
    let err = mask
        .iter()
        .zip(reconstruction)
        .filter(|&(&on, &r)| on != (r >= 1))
        .count();
    Ok(err as f64)
}
