//! Prediction-assisted transition memory.
//!
//! Each column owns one proximal dendrite shared by its cells; each cell
//! owns distal segments sampling the layer's previous activity. A step
//! ranks columns by feedforward overlap mixed with their best predictive
//! potential, then partitions each active column's firing: cells whose
//! distal input makes them fire ahead of the column's inhibitory sheath
//! are *predicted*; otherwise the sheath fires on feedforward input alone
//! and cells inside the vertical-inhibition window *burst*.

mod capacity;
mod segment;

pub use capacity::{capacity, log10_binomial, mantissa_exponent, scientific, Capacity};
pub use segment::{DistalSegment, SegmentOverlap};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::exec::map_range;
use crate::inhibition::top_k;
use crate::pattern_memory::{PatternConfig, PatternLayer};
use crate::rng::SeededRng;
use crate::sdr::{dense_mask, Sdr};

/// How a column folds its cells' predictive potentials into its score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnScore {
    Max,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TmConfig {
    /// Proximal (column) parameters; `size` is the column count.
    pub columns: PatternConfig,
    pub cells_per_column: usize,
    /// Feedforward mixing weight.
    pub alpha: f64,
    /// Predictive mixing weight.
    pub beta: f64,
    /// Weight of sub-threshold distal input (segments at or above half their
    /// activation threshold) in the cell depolarisation rate.
    pub beta_sub: f64,
    /// Feedforward weight of the inhibitory sheath.
    pub alpha_sheath: f64,
    pub gamma_pyramidal: f64,
    pub gamma_sheath: f64,
    /// Vertical inhibition delay. `None` means unbounded: every cell of an
    /// unpredicted column bursts.
    pub vertical_delay: Option<f64>,
    pub column_score: ColumnScore,
    /// Minimum predictive potential for a cell to count as predictive.
    pub predictive_threshold: f64,
    pub synapses_per_segment: usize,
    pub segments_per_cell: usize,
    pub activation_threshold: u32,
    /// Minimum potential overlap for a segment to count as matching.
    pub min_learn_threshold: u32,
    pub spike_size: f64,
    pub connect_threshold: f64,
    pub sigma_inc: f64,
    pub sigma_dec: f64,
    pub sigma_punish: f64,
    /// Also train the columns' proximal dendrites while learning.
    pub learn_proximal: bool,
    pub seed: u64,
}

impl Default for TmConfig {
    fn default() -> Self {
        TmConfig {
            columns: PatternConfig::default(),
            cells_per_column: 32,
            alpha: 1.0,
            beta: 0.5,
            beta_sub: 0.5,
            alpha_sheath: 1.5,
            gamma_pyramidal: 1.0,
            gamma_sheath: 1.0,
            vertical_delay: None,
            column_score: ColumnScore::Max,
            predictive_threshold: 1.0,
            synapses_per_segment: 32,
            segments_per_cell: 32,
            activation_threshold: 8,
            min_learn_threshold: 5,
            spike_size: 1.0,
            connect_threshold: 0.2,
            sigma_inc: 0.1,
            sigma_dec: 0.02,
            sigma_punish: 0.004,
            learn_proximal: true,
            seed: 0,
        }
    }
}

impl TmConfig {
    pub fn cell_count(&self) -> usize {
        self.columns.size * self.cells_per_column
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.columns.problems("columns.");
        let mut bad = |cond: bool, msg: &str| {
            if cond {
                out.push(msg.to_owned());
            }
        };
        bad(self.cells_per_column == 0, "cells_per_column must be positive");
        bad(!(self.alpha > 0.0), "alpha must be > 0");
        bad(!(self.beta >= 0.0), "beta must be >= 0");
        bad(!(self.beta_sub >= 0.0), "beta_sub must be >= 0");
        bad(
            !(self.gamma_pyramidal > 0.0 && self.gamma_sheath > 0.0),
            "gamma_pyramidal and gamma_sheath must be > 0",
        );
        bad(
            !(self.alpha_sheath * self.gamma_pyramidal > self.alpha * self.gamma_sheath),
            "alpha_sheath must exceed alpha * gamma_sheath / gamma_pyramidal",
        );
        bad(
            self.vertical_delay.map_or(false, |d| !(d > 0.0)),
            "vertical_delay must be > 0 when set",
        );
        bad(!(self.predictive_threshold > 0.0), "predictive_threshold must be > 0");
        bad(self.synapses_per_segment == 0, "synapses_per_segment must be positive");
        bad(self.segments_per_cell == 0, "segments_per_cell must be positive");
        bad(self.activation_threshold == 0, "activation_threshold must be positive");
        bad(!(self.spike_size > 0.0), "spike_size must be > 0");
        bad(
            !(0.0..=0.95).contains(&self.connect_threshold),
            "connect_threshold must lie in [0, 0.95]",
        );
        for (name, v) in [
            ("sigma_inc", self.sigma_inc),
            ("sigma_dec", self.sigma_dec),
            ("sigma_punish", self.sigma_punish),
        ] {
            bad(!(0.0..=1.0).contains(&v), &format!("{name} must lie in [0,1]"));
        }
        out
    }
}

/// Role of a unit in the firing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiringClass {
    /// Pyramidal cell firing ahead of its sheath on predictive input.
    PyramidalPredicted,
    /// Sheath triggered by its column's predicted cells.
    SheathPredicted,
    /// Sheath firing on feedforward input alone.
    SheathFeedforward,
    /// Pyramidal cell firing before vertical inhibition reaches it.
    PyramidalBurst,
    /// Sheath of a column suppressed by the inhibition wave.
    SheathSpread,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Cell(u32),
    Sheath(u32),
}

impl Unit {
    fn id(self) -> u32 {
        match self {
            Unit::Cell(i) | Unit::Sheath(i) => i,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Firing {
    pub unit: Unit,
    pub class: FiringClass,
    /// Prospective firing time; `inf` for units that never reach threshold.
    pub time: f64,
}

/// One timestep's result.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerOutput {
    pub t: u64,
    pub active_columns: Sdr,
    pub active_cells: Sdr,
    pub predicted_cells: Sdr,
    pub burst_cells: Sdr,
    pub winner_cells: Sdr,
    pub firing_sequence: Vec<Firing>,
    /// Cells depolarised by this step's activity, i.e. predicted for t+1.
    pub predictive_cells_next: Sdr,
    pub anomaly: f64,
}

/// Projections of a [`LayerOutput`] at each level of representation.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationViews {
    pub columnar: Sdr,
    pub cellular: Sdr,
    pub pred_columnar: Sdr,
    pub burst_columnar: Sdr,
    pub pred_cellular: Sdr,
    pub burst_cellular: Sdr,
    /// Predicted cells then bursting cells, each in firing order.
    pub ordered: Vec<Firing>,
}

impl LayerOutput {
    pub fn cells_per_column(&self) -> usize {
        self.active_cells.size() / self.active_columns.size().max(1)
    }

    /// Columns containing at least one cell of `cells`.
    pub fn columns_of(&self, cells: &Sdr) -> Sdr {
        columns_of(cells, self.cells_per_column(), self.active_columns.size())
    }

    /// Columns predicted to become active at t+1.
    pub fn predicted_columns_next(&self) -> Sdr {
        self.columns_of(&self.predictive_cells_next)
    }

    pub fn is_perfect_prediction(&self) -> bool {
        self.burst_cells.is_empty()
    }

    pub fn views(&self) -> RepresentationViews {
        let ordered = self
            .firing_sequence
            .iter()
            .filter(|f| {
                matches!(
                    f.class,
                    FiringClass::PyramidalPredicted | FiringClass::PyramidalBurst
                )
            })
            .copied()
            .collect();
        RepresentationViews {
            columnar: self.active_columns.clone(),
            cellular: self.active_cells.clone(),
            pred_columnar: self.columns_of(&self.predicted_cells),
            burst_columnar: self.columns_of(&self.burst_cells),
            pred_cellular: self.predicted_cells.clone(),
            burst_cellular: self.burst_cells.clone(),
            ordered,
        }
    }
}

pub(crate) fn columns_of(cells: &Sdr, per_column: usize, columns: usize) -> Sdr {
    let mut cols: Vec<u32> = cells.active().iter().map(|&c| c / per_column as u32).collect();
    cols.dedup();
    Sdr::from_sorted(columns, cols)
}

/// Distal response of every cell to a set of active cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DendriteActivity {
    /// Total spike size of active segments, per cell.
    pub predictive: Vec<f64>,
    /// Spike size of sub-threshold segments (at least half the activation
    /// threshold), per cell.
    pub subthreshold: Vec<f64>,
    /// Per cell, per segment overlaps.
    pub segments: Vec<Vec<SegmentOverlap>>,
}

/// Depolarisation rates for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Depolarisation {
    /// Raw proximal overlap per column.
    pub feedforward: Vec<u32>,
    /// Boosted proximal score per column.
    pub boosted: Vec<f64>,
    /// `α·o_ff + β·o_pred + β_sub·o_sub` per cell.
    pub cell_rate: Vec<f64>,
    /// `α_I·o_ff` per column.
    pub sheath_rate: Vec<f64>,
    /// Predictive potential per cell.
    pub predictive: Vec<f64>,
}

/// Firing time `γ / d`, infinite when the rate is zero.
pub fn firing_time(gamma: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        gamma / rate
    } else {
        f64::INFINITY
    }
}

/// Active sets and firing order for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub active_columns: Sdr,
    pub predicted_cells: Sdr,
    pub burst_cells: Sdr,
    pub firing_sequence: Vec<Firing>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TmLayer {
    config: TmConfig,
    proximal: PatternLayer,
    segments: Vec<Vec<DistalSegment>>,
    prev_active: Sdr,
    prev_winners: Sdr,
    rng: SeededRng,
    t: u64,
    #[serde(skip)]
    cache: Option<DendriteActivity>,
}

impl PartialEq for TmLayer {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.proximal == other.proximal
            && self.segments == other.segments
            && self.prev_active == other.prev_active
            && self.prev_winners == other.prev_winners
            && self.rng == other.rng
            && self.t == other.t
    }
}

impl TmLayer {
    pub fn new(config: TmConfig) -> Result<Self> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let proximal = PatternLayer::new(config.columns.clone())?;
        let cells = config.cell_count();
        Ok(TmLayer {
            rng: SeededRng::new(config.seed),
            proximal,
            segments: vec![Vec::new(); cells],
            prev_active: Sdr::empty(cells),
            prev_winners: Sdr::empty(cells),
            t: 0,
            cache: None,
            config,
        })
    }

    pub fn config(&self) -> &TmConfig {
        &self.config
    }

    pub fn proximal(&self) -> &PatternLayer {
        &self.proximal
    }

    pub fn proximal_mut(&mut self) -> &mut PatternLayer {
        &mut self.proximal
    }

    pub fn column_count(&self) -> usize {
        self.config.columns.size
    }

    pub fn cells_per_column(&self) -> usize {
        self.config.cells_per_column
    }

    pub fn cell_count(&self) -> usize {
        self.config.cell_count()
    }

    pub fn input_size(&self) -> usize {
        self.config.columns.input_size
    }

    pub fn segments(&self, cell: usize) -> &[DistalSegment] {
        &self.segments[cell]
    }

    pub fn segments_mut(&mut self, cell: usize) -> &mut Vec<DistalSegment> {
        self.cache = None;
        &mut self.segments[cell]
    }

    pub fn segment_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn prev_active(&self) -> &Sdr {
        &self.prev_active
    }

    pub fn prev_winners(&self) -> &Sdr {
        &self.prev_winners
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn set_parallel(&mut self, parallel: bool) {
        self.config.columns.parallel = parallel;
        self.proximal.set_parallel(parallel);
    }

    /// Clears the temporal context. Learned permanences are kept.
    pub fn reset(&mut self) {
        let cells = self.cell_count();
        self.prev_active = Sdr::empty(cells);
        self.prev_winners = Sdr::empty(cells);
        self.cache = None;
    }

    /// Sets the previous-step context directly.
    pub fn set_context(&mut self, prev_active: Sdr, prev_winners: Sdr) -> Result<()> {
        check_width(self.cell_count(), prev_active.size())?;
        check_width(self.cell_count(), prev_winners.size())?;
        self.prev_active = prev_active;
        self.prev_winners = prev_winners;
        self.cache = None;
        Ok(())
    }

    /// Segment overlaps and predictive potentials against `active` cells.
    pub fn dendrite_activity(&self, active: &Sdr) -> Result<DendriteActivity> {
        check_width(self.cell_count(), active.size())?;
        let n = self.config.cells_per_column;
        if active.is_empty() {
            let cells = self.cell_count();
            return Ok(DendriteActivity {
                predictive: vec![0.0; cells],
                subthreshold: vec![0.0; cells],
                segments: self
                    .segments
                    .iter()
                    .map(|s| vec![SegmentOverlap::default(); s.len()])
                    .collect(),
            });
        }
        let mask = dense_mask(active);
        let per_column = map_range(self.config.columns.parallel, self.column_count(), |col| {
            (col * n..(col + 1) * n)
                .map(|cell| {
                    let mut predictive = 0.0;
                    let mut sub = 0.0;
                    let overlaps: Vec<SegmentOverlap> = self.segments[cell]
                        .iter()
                        .map(|seg| {
                            let o = seg.overlap_dense(&mask);
                            if seg.is_active(o) {
                                predictive += seg.spike_size;
                            } else if 2 * o.connected >= seg.activation_threshold {
                                sub += seg.spike_size;
                            }
                            o
                        })
                        .collect();
                    (predictive, sub, overlaps)
                })
                .collect::<Vec<_>>()
        });
        let cells = self.cell_count();
        let mut out = DendriteActivity {
            predictive: Vec::with_capacity(cells),
            subthreshold: Vec::with_capacity(cells),
            segments: Vec::with_capacity(cells),
        };
        for (p, s, o) in per_column.into_iter().flatten() {
            out.predictive.push(p);
            out.subthreshold.push(s);
            out.segments.push(o);
        }
        Ok(out)
    }

    /// Cells whose predictive potential reaches the threshold.
    pub fn predictive_cells(&self, activity: &DendriteActivity) -> Sdr {
        let thr = self.config.predictive_threshold;
        Sdr::from_sorted(
            self.cell_count(),
            (0..self.cell_count() as u32)
                .filter(|&c| activity.predictive[c as usize] >= thr)
                .collect(),
        )
    }

    /// Depolarisation rates for input `input` given previous activity
    /// `prev_active`.
    pub fn depolarisation_rates(&self, input: &Sdr, prev_active: &Sdr) -> Result<Depolarisation> {
        let activity = self.dendrite_activity(prev_active)?;
        let overlaps = self.proximal.overlaps(input)?;
        Ok(self.depolarisation(overlaps, &activity))
    }

    fn depolarisation(&self, feedforward: Vec<u32>, activity: &DendriteActivity) -> Depolarisation {
        let c = &self.config;
        let n = c.cells_per_column;
        let cell_rate = (0..self.cell_count())
            .map(|cell| {
                c.alpha * feedforward[cell / n] as f64
                    + c.beta * activity.predictive[cell]
                    + c.beta_sub * activity.subthreshold[cell]
            })
            .collect();
        let sheath_rate = feedforward
            .iter()
            .map(|&o| c.alpha_sheath * o as f64)
            .collect();
        Depolarisation {
            boosted: self.proximal.boosted_scores(&feedforward),
            feedforward,
            cell_rate,
            sheath_rate,
            predictive: activity.predictive.clone(),
        }
    }

    /// Column selection and the within-column firing partition.
    pub fn firing_partition(&self, dep: &Depolarisation) -> Partition {
        let c = &self.config;
        let n = c.cells_per_column;
        let columns = self.column_count();

        let scores: Vec<f64> = (0..columns)
            .map(|m| {
                let cells = &dep.predictive[m * n..(m + 1) * n];
                let pred = match c.column_score {
                    ColumnScore::Max => cells.iter().copied().fold(0.0, f64::max),
                    ColumnScore::Sum => cells.iter().sum(),
                };
                c.alpha * dep.boosted[m] + c.beta * pred
            })
            .collect();
        let active_columns = top_k(
            &scores,
            &self.proximal.eligible(&dep.feedforward),
            self.proximal.active_count(),
        );

        let cell_time = |cell: usize| firing_time(c.gamma_pyramidal, dep.cell_rate[cell]);
        let sheath_time = |m: usize| firing_time(c.gamma_sheath, dep.sheath_rate[m]);

        let mut p_pred = Vec::new();
        let mut i_pred = Vec::new();
        let mut i_ff = Vec::new();
        let mut p_burst = Vec::new();
        let mut predicted = Vec::new();
        let mut burst = Vec::new();

        for m in active_columns.iter() {
            let cells = m * n..(m + 1) * n;
            let column_pred: Vec<usize> = cells
                .clone()
                .filter(|&cell| dep.predictive[cell] >= c.predictive_threshold)
                .collect();
            if !column_pred.is_empty() {
                let mut first = f64::INFINITY;
                for &cell in &column_pred {
                    let t = cell_time(cell);
                    first = first.min(t);
                    p_pred.push(Firing {
                        unit: Unit::Cell(cell as u32),
                        class: FiringClass::PyramidalPredicted,
                        time: t,
                    });
                    predicted.push(cell as u32);
                }
                i_pred.push(Firing {
                    unit: Unit::Sheath(m as u32),
                    class: FiringClass::SheathPredicted,
                    time: first,
                });
                continue;
            }

            let t_sheath = sheath_time(m);
            i_ff.push(Firing {
                unit: Unit::Sheath(m as u32),
                class: FiringClass::SheathFeedforward,
                time: t_sheath,
            });
            let mut bursting: Vec<usize> = match c.vertical_delay {
                None => cells.clone().collect(),
                Some(delay) => cells
                    .clone()
                    .filter(|&cell| cell_time(cell) < t_sheath + delay)
                    .collect(),
            };
            if bursting.is_empty() {
                // An active column always fires at least its fastest cell.
                let fastest = cells
                    .clone()
                    .min_by(|&a, &b| cell_time(a).total_cmp(&cell_time(b)).then(a.cmp(&b)))
                    .expect("columns have at least one cell");
                bursting.push(fastest);
            }
            for cell in bursting {
                p_burst.push(Firing {
                    unit: Unit::Cell(cell as u32),
                    class: FiringClass::PyramidalBurst,
                    time: cell_time(cell),
                });
                burst.push(cell as u32);
            }
        }

        let active_mask = dense_mask(&active_columns);
        let i_spread: Vec<Firing> = (0..columns)
            .filter(|&m| !active_mask[m])
            .map(|m| Firing {
                unit: Unit::Sheath(m as u32),
                class: FiringClass::SheathSpread,
                time: sheath_time(m),
            })
            .collect();

        let mut firing_sequence = Vec::new();
        for mut part in [p_pred, i_pred, i_ff, p_burst, i_spread] {
            part.sort_by(|a, b| {
                a.time
                    .total_cmp(&b.time)
                    .then(a.unit.id().cmp(&b.unit.id()))
            });
            firing_sequence.extend(part);
        }

        let cells = self.cell_count();
        Partition {
            active_columns,
            predicted_cells: Sdr::from_sorted(cells, predicted),
            burst_cells: Sdr::from_sorted(cells, burst),
            firing_sequence,
        }
    }

    /// Best matching segment among `cells`: highest potential overlap at or
    /// above the learning threshold. Ties go to the lower cell, then the
    /// lower segment.
    fn best_matching(&self, cells: &[usize], activity: &DendriteActivity) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, u32)> = None;
        for &cell in cells {
            for (s, o) in activity.segments[cell].iter().enumerate() {
                if o.potential >= self.config.min_learn_threshold
                    && best.map_or(true, |(_, _, b)| o.potential > b)
                {
                    best = Some((cell, s, o.potential));
                }
            }
        }
        best.map(|(cell, s, _)| (cell, s))
    }

    /// One winner per active column: the most predictive cell, or for a
    /// bursting column the cell with the best matching segment, else a
    /// seeded-random cell among those with the fewest segments.
    pub fn select_winner_cells(
        &mut self,
        partition: &Partition,
        activity: &DendriteActivity,
    ) -> Vec<Winner> {
        let n = self.config.cells_per_column;
        let pred = dense_mask(&partition.predicted_cells);
        let burst = dense_mask(&partition.burst_cells);
        let mut winners = Vec::with_capacity(partition.active_columns.cardinality());
        for m in partition.active_columns.iter() {
            let cells = m * n..(m + 1) * n;
            let predicted: Vec<usize> = cells.clone().filter(|&c| pred[c]).collect();
            if !predicted.is_empty() {
                let mut best = predicted[0];
                for &c in &predicted[1..] {
                    if activity.predictive[c] > activity.predictive[best] {
                        best = c;
                    }
                }
                winners.push(Winner {
                    cell: best,
                    kind: WinnerKind::Predicted,
                });
                continue;
            }
            let bursting: Vec<usize> = cells.filter(|&c| burst[c]).collect();
            if let Some((cell, segment)) = self.best_matching(&bursting, activity) {
                winners.push(Winner {
                    cell,
                    kind: WinnerKind::Matching(segment),
                });
                continue;
            }
            let fewest = bursting
                .iter()
                .map(|&c| self.segments[c].len())
                .min()
                .unwrap_or(0);
            let candidates: Vec<usize> = bursting
                .into_iter()
                .filter(|&c| self.segments[c].len() == fewest)
                .collect();
            let cell = candidates[self.rng.gen_range(0..candidates.len())];
            winners.push(Winner {
                cell,
                kind: WinnerKind::Unmatched,
            });
        }
        winners
    }

    /// Distal learning for one step.
    ///
    /// `activity` must be the dendrite response to `prev_active`.
    pub fn learn_distal(
        &mut self,
        winners: &[Winner],
        active_columns: &Sdr,
        activity: &DendriteActivity,
        prev_active: &Sdr,
        prev_winners: &Sdr,
    ) {
        let c = self.config.clone();
        let prev_mask = dense_mask(prev_active);

        for w in winners {
            match w.kind {
                WinnerKind::Predicted => {
                    for (s, o) in activity.segments[w.cell].iter().enumerate() {
                        let seg = &mut self.segments[w.cell][s];
                        if seg.is_active(*o) {
                            seg.reinforce(&prev_mask, c.sigma_inc, c.sigma_dec);
                        }
                    }
                }
                WinnerKind::Matching(s) => {
                    self.segments[w.cell][s].reinforce(&prev_mask, c.sigma_inc, c.sigma_dec);
                    self.grow_synapses(w.cell, s, prev_winners);
                }
                WinnerKind::Unmatched => self.grow_segment(w.cell, prev_winners),
            }
        }

        if c.sigma_punish > 0.0 {
            let n = c.cells_per_column;
            let active_cols = dense_mask(active_columns);
            for cell in 0..self.cell_count() {
                if activity.predictive[cell] < c.predictive_threshold || active_cols[cell / n] {
                    continue;
                }
                for (s, o) in activity.segments[cell].iter().enumerate() {
                    let seg = &mut self.segments[cell][s];
                    if seg.is_active(*o) {
                        seg.punish(&prev_mask, c.sigma_punish);
                    }
                }
            }
        }
    }

    fn sample_sources(&mut self, cell: usize, exclude: &[u32], pool: &Sdr, count: usize) -> Vec<u32> {
        let candidates: Vec<u32> = pool
            .active()
            .iter()
            .copied()
            .filter(|&s| s as usize != cell && !exclude.contains(&s))
            .collect();
        let count = count.min(candidates.len());
        let mut picked: Vec<u32> = sample(&mut self.rng, candidates.len(), count)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        picked
    }

    fn initial_permanence(&self) -> f64 {
        (self.config.connect_threshold + 0.05).min(1.0)
    }

    /// Adds synapses from previous winners not yet sampled by the segment,
    /// up to the per-segment limit.
    fn grow_synapses(&mut self, cell: usize, segment: usize, prev_winners: &Sdr) {
        let room = self.config.synapses_per_segment - self.segments[cell][segment].sources.len();
        if room == 0 {
            return;
        }
        let existing = self.segments[cell][segment].sources.clone();
        let new = self.sample_sources(cell, &existing, prev_winners, room);
        let p = self.initial_permanence();
        let seg = &mut self.segments[cell][segment];
        for s in new {
            seg.sources.push(s);
            seg.permanences.push(p);
        }
    }

    /// Grows a new segment on `cell` sampling the previous winners,
    /// replacing the weakest segment when the cell is at its budget.
    fn grow_segment(&mut self, cell: usize, prev_winners: &Sdr) {
        let count = self.config.synapses_per_segment.min(prev_winners.cardinality());
        let sources = self.sample_sources(cell, &[], prev_winners, count);
        if sources.is_empty() {
            return;
        }
        let seg = DistalSegment {
            permanences: vec![self.initial_permanence(); sources.len()],
            sources,
            connect_threshold: self.config.connect_threshold,
            activation_threshold: self.config.activation_threshold,
            spike_size: self.config.spike_size,
        };
        let budget = self.config.segments_per_cell;
        let list = &mut self.segments[cell];
        if list.len() < budget {
            list.push(seg);
        } else {
            let weakest = (0..list.len())
                .min_by(|&a, &b| {
                    list[a]
                        .total_permanence()
                        .total_cmp(&list[b].total_permanence())
                        .then(a.cmp(&b))
                })
                .expect("budget is positive");
            list[weakest] = seg;
        }
    }

    /// Runs one timestep on `input`, learning when `learn` is set.
    pub fn step(&mut self, input: &Sdr, learn: bool) -> Result<LayerOutput> {
        check_width(self.input_size(), input.size())?;
        let activity = match self.cache.take() {
            Some(a) => a,
            None => self.dendrite_activity(&self.prev_active)?,
        };
        let overlaps = self.proximal.overlaps(input)?;
        let dep = self.depolarisation(overlaps, &activity);
        let partition = self.firing_partition(&dep);
        let winners = self.select_winner_cells(&partition, &activity);

        let cells = self.cell_count();
        let active_cells = partition.predicted_cells.union(&partition.burst_cells)?;
        let winner_cells = Sdr::new(cells, winners.iter().map(|w| w.cell))?;

        let active_count = partition.active_columns.cardinality();
        let anomaly = if active_count == 0 {
            0.0
        } else {
            let predicted_cols = columns_of(
                &partition.predicted_cells,
                self.config.cells_per_column,
                self.column_count(),
            );
            1.0 - predicted_cols.cardinality() as f64 / active_count as f64
        };

        if learn {
            let prev_active = std::mem::replace(&mut self.prev_active, Sdr::empty(0));
            let prev_winners = std::mem::replace(&mut self.prev_winners, Sdr::empty(0));
            self.learn_distal(
                &winners,
                &partition.active_columns,
                &activity,
                &prev_active,
                &prev_winners,
            );
            if self.config.learn_proximal {
                self.proximal.learn(input, &partition.active_columns)?;
                self.proximal
                    .boost_update(&partition.active_columns, &dep.feedforward)?;
            }
        }

        self.prev_active = active_cells.clone();
        self.prev_winners = winner_cells.clone();
        self.t += 1;

        let next = self.dendrite_activity(&self.prev_active)?;
        let predictive_cells_next = self.predictive_cells(&next);
        self.cache = Some(next);

        Ok(LayerOutput {
            t: self.t - 1,
            active_columns: partition.active_columns,
            active_cells,
            predicted_cells: partition.predicted_cells,
            burst_cells: partition.burst_cells,
            winner_cells,
            firing_sequence: partition.firing_sequence,
            predictive_cells_next,
            anomaly,
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let problems = self.config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        self.proximal.validate()?;
        if self.proximal.config() != &self.config.columns {
            return Err(Error::Invariant(
                "proximal layer config disagrees with columns config".into(),
            ));
        }
        let cells = self.cell_count();
        if self.segments.len() != cells {
            return Err(Error::Invariant(format!(
                "expected segment lists for {cells} cells, found {}",
                self.segments.len()
            )));
        }
        for (cell, list) in self.segments.iter().enumerate() {
            if list.len() > self.config.segments_per_cell {
                return Err(Error::Invariant(format!(
                    "cell {cell} exceeds the segment budget"
                )));
            }
            for seg in list {
                seg.validate(cell, cells, self.config.synapses_per_segment)?;
            }
        }
        check_width(cells, self.prev_active.size())?;
        check_width(cells, self.prev_winners.size())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WinnerKind {
    Predicted,
    /// Bursting column; the cell's segment at this index matched.
    Matching(usize),
    /// Bursting column with no matching segment.
    Unmatched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Winner {
    pub cell: usize,
    pub kind: WinnerKind,
}
