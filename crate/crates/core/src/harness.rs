//! Experiment configuration and the end-to-end runs behind the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoders::{best_match, CategoryEncoder, ScalarEncoder};
use crate::error::{Error, Result};
use crate::metrics::{RunReport, StepRecord};
use crate::persistence::StepExport;
use crate::sdr::Sdr;
use crate::temporal_pooling::{stability, PoolingConfig, PoolingLayer};
use crate::transition_memory::{LayerOutput, TmConfig, TmLayer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Category,
    Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub size: usize,
    pub active_bits: usize,
    /// Scalar range; ignored for categories.
    pub min: f64,
    pub max: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Category,
            size: 1024,
            active_bits: 20,
            min: 0.0,
            max: 100.0,
        }
    }
}

/// A symbol sequence. `text` is shorthand for one symbol per character.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSpec {
    pub symbols: Vec<String>,
    pub text: Option<String>,
    /// Overrides `training.repeats` for this sequence.
    pub repeats: Option<usize>,
}

impl SequenceSpec {
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SequenceSpec {
            symbols: symbols.into_iter().map(Into::into).collect(),
            ..SequenceSpec::default()
        }
    }

    pub fn from_text(text: &str) -> Self {
        SequenceSpec {
            text: Some(text.to_owned()),
            ..SequenceSpec::default()
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        match &self.text {
            Some(t) => t.chars().map(String::from).collect(),
            None => self.symbols.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub repeats: usize,
    /// Clear temporal context before each presentation of a sequence.
    pub reset_between: bool,
    /// Passes over the sequences, without learning, after training.
    pub evaluation_cycles: usize,
    /// Learn while scoring an anomaly stream.
    pub learn_online: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            repeats: 20,
            reset_between: true,
            evaluation_cycles: 1,
            learn_online: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Fraction of on-bits moved in every evaluation input.
    pub flip_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Everything a run depends on.
///
/// The master `seed` is expanded into the encoder, column, layer and pool
/// seeds, and the layers' input widths are derived from the encoder and the
/// layer geometry, so those fields need not be set by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub layer: TmConfig,
    pub pool: Option<PoolingConfig>,
    pub sequences: Vec<SequenceSpec>,
    pub training: TrainingConfig,
    pub noise: NoiseConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            encoder: EncoderConfig::default(),
            layer: TmConfig::default(),
            pool: None,
            sequences: Vec::new(),
            training: TrainingConfig::default(),
            noise: NoiseConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Sequence,
    Anomaly,
    Pool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse {
                path: origin.to_owned(),
                line,
                column,
                message: e.message().to_owned(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Applies the master seed and derived widths.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.layer.columns.seed = c.seed.wrapping_add(1);
        c.layer.seed = c.seed.wrapping_add(2);
        c.layer.columns.input_size = c.encoder.size;
        let cells = c.layer.cell_count();
        if let Some(pool) = &mut c.pool {
            pool.base.seed = c.seed.wrapping_add(3);
            pool.base.input_size = cells;
        }
        c
    }

    /// All problems with this config for `command`, collected at once.
    pub fn problems(&self, command: Command) -> Vec<String> {
        let c = self.resolved();
        let mut out = Vec::new();
        let e = &c.encoder;
        match e.kind {
            EncoderKind::Category => {
                if e.active_bits == 0 || e.active_bits > e.size {
                    out.push(format!(
                        "encoder.active_bits ({}) must lie in 1..=encoder.size ({})",
                        e.active_bits, e.size
                    ));
                }
            }
            EncoderKind::Scalar => {
                if e.active_bits == 0 || e.active_bits >= e.size {
                    out.push(format!(
                        "encoder.active_bits ({}) must lie in 1..encoder.size ({})",
                        e.active_bits, e.size
                    ));
                }
                if !(e.min < e.max) {
                    out.push(format!("encoder.min ({}) must be below encoder.max ({})", e.min, e.max));
                }
            }
        }
        out.extend(c.layer.problems().into_iter().map(|p| format!("layer.{p}")));
        if let Some(pool) = &c.pool {
            out.extend(pool.problems());
        }
        if !(0.0..=1.0).contains(&c.noise.flip_fraction) {
            out.push("noise.flip_fraction must lie in [0,1]".into());
        }
        if matches!(command, Command::Sequence | Command::Pool) {
            if c.sequences.is_empty() {
                out.push("at least one sequence is required".into());
            }
            for (i, s) in c.sequences.iter().enumerate() {
                if s.tokens().is_empty() {
                    out.push(format!("sequences[{i}] is empty"));
                }
                if s.text.is_some() && !s.symbols.is_empty() {
                    out.push(format!("sequences[{i}] sets both text and symbols"));
                }
            }
            if e.kind != EncoderKind::Category {
                out.push("symbol sequences need a category encoder".into());
            }
        }
        if command == Command::Pool && c.pool.is_none() {
            out.push("the pool command needs a [pool] section".into());
        }
        out
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        let problems = self.problems(command);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    Category(CategoryEncoder),
    Scalar(ScalarEncoder),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Token {
    Symbol(String),
    Scalar(f64),
}

impl Encoder {
    pub fn width(&self) -> usize {
        match self {
            Encoder::Category(e) => e.universe_size(),
            Encoder::Scalar(e) => e.universe_size,
        }
    }

    pub fn encode(&mut self, token: &Token) -> Result<Sdr> {
        match (self, token) {
            (Encoder::Category(e), Token::Symbol(s)) => Ok(e.encode(s)),
            (Encoder::Scalar(e), Token::Scalar(v)) => Ok(e.encode(*v)),
            (Encoder::Category(_), Token::Scalar(_)) => Err(Error::Config(vec![
                "scalar token given to a category encoder".into(),
            ])),
            (Encoder::Scalar(_), Token::Symbol(_)) => Err(Error::Config(vec![
                "symbol token given to a scalar encoder".into(),
            ])),
        }
    }
}

/// Parses a token stream, one token per line. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_stream(text: &str, kind: EncoderKind, origin: &Path) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match kind {
            EncoderKind::Category => tokens.push(Token::Symbol(t.to_owned())),
            EncoderKind::Scalar => match t.parse::<f64>() {
                Ok(v) if v.is_finite() => tokens.push(Token::Scalar(v)),
                _ => {
                    return Err(Error::Parse {
                        path: origin.to_owned(),
                        line: i + 1,
                        column: line.find(t).unwrap_or(0) + 1,
                        message: format!("{t:?} is not a finite number"),
                    })
                }
            },
        }
    }
    Ok(tokens)
}

/// An encoder plus the layers it feeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub config: ExperimentConfig,
    pub encoder: Encoder,
    pub tm: TmLayer,
    pub pool: Option<PoolingLayer>,
    /// Column SDR of each known symbol, used to decode predictions.
    pub column_codes: BTreeMap<String, Sdr>,
}

impl Model {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let c = config.resolved();
        let problems = c.problems(Command::Anomaly);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let encoder = match c.encoder.kind {
            EncoderKind::Category => Encoder::Category(CategoryEncoder::new(
                c.encoder.size,
                c.encoder.active_bits,
                c.seed,
            )?),
            EncoderKind::Scalar => Encoder::Scalar(ScalarEncoder::new(
                c.encoder.min,
                c.encoder.max,
                c.encoder.size,
                c.encoder.active_bits,
            )?),
        };
        let tm = TmLayer::new(c.layer.clone())?;
        let pool = c.pool.clone().map(PoolingLayer::new).transpose()?;
        Ok(Model {
            config: c,
            encoder,
            tm,
            pool,
            column_codes: BTreeMap::new(),
        })
    }

    pub fn reset(&mut self) {
        self.tm.reset();
        if let Some(p) = &mut self.pool {
            p.reset();
        }
    }

    /// Recomputes each known symbol's column SDR from the current proximal
    /// weights.
    pub fn refresh_column_codes(&mut self) -> Result<()> {
        if let Encoder::Category(enc) = &self.encoder {
            let mut codes = BTreeMap::new();
            for (symbol, code) in enc.symbols() {
                codes.insert(symbol.clone(), self.tm.proximal().compute_sdr(code)?);
            }
            self.column_codes = codes;
        }
        Ok(())
    }

    /// The symbol whose column code best matches `columns`.
    pub fn decode(&self, columns: &Sdr) -> Result<Option<(String, usize)>> {
        Ok(best_match(&self.column_codes, columns)?.map(|(s, o)| (s.to_owned(), o)))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.tm.validate()?;
        if let Encoder::Category(e) = &self.encoder {
            e.validate()?;
        }
        if self.encoder.width() != self.tm.input_size() {
            return Err(Error::Invariant(format!(
                "encoder width {} does not match layer input {}",
                self.encoder.width(),
                self.tm.input_size()
            )));
        }
        if let Some(p) = &self.pool {
            p.validate()?;
            if p.base().input_size() != self.tm.cell_count() {
                return Err(Error::Invariant(
                    "pool input width does not match layer cell count".into(),
                ));
            }
        }
        for code in self.column_codes.values() {
            if code.size() != self.tm.column_count() {
                return Err(Error::Invariant("column code has wrong width".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sequence: usize,
    pub position: usize,
    pub symbol: String,
    pub expected_next: Option<String>,
    pub predicted_next: Option<String>,
    pub overlap: usize,
}

#[derive(Clone, Debug)]
pub struct SequenceRun {
    pub training: RunReport,
    pub evaluation: RunReport,
    pub predictions: Vec<Prediction>,
    /// Evaluation outputs, one list per sequence.
    pub outputs: Vec<Vec<LayerOutput>>,
    pub exports: Vec<StepExport>,
}

fn noisy(x: Sdr, fraction: f64, seed: u64, step: u64) -> Sdr {
    if fraction > 0.0 {
        x.flip_noise(fraction, seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    } else {
        x
    }
}

/// Trains on every configured sequence, interleaving presentations, and
/// returns a learning-free evaluation pass with decoded predictions.
pub fn run_sequence(model: &mut Model) -> Result<SequenceRun> {
    model.config.validate(Command::Sequence)?;
    let c = model.config.clone();
    let sequences: Vec<Vec<String>> = c.sequences.iter().map(SequenceSpec::tokens).collect();
    let repeats: Vec<usize> = c
        .sequences
        .iter()
        .map(|s| s.repeats.unwrap_or(c.training.repeats))
        .collect();

    let mut training = RunReport::default();
    let mut prev: Option<LayerOutput> = None;
    for rep in 0..repeats.iter().copied().max().unwrap_or(0) {
        for (seq, &reps) in sequences.iter().zip(&repeats) {
            if rep >= reps {
                continue;
            }
            if c.training.reset_between {
                model.reset();
                prev = None;
            }
            for sym in seq {
                let x = model.encoder.encode(&Token::Symbol(sym.clone()))?;
                let out = model.tm.step(&x, true)?;
                training.push(StepRecord::from_output(prev.as_ref(), &out));
                prev = Some(out);
            }
        }
    }
    model.refresh_column_codes()?;

    let mut evaluation = RunReport::default();
    let mut predictions = Vec::new();
    let mut outputs = Vec::new();
    let mut exports = Vec::new();
    let mut step = 0u64;
    for (si, seq) in sequences.iter().enumerate() {
        let mut seq_out = Vec::new();
        model.reset();
        let mut prev: Option<LayerOutput> = None;
        for _ in 0..c.training.evaluation_cycles.max(1) {
            for (pos, sym) in seq.iter().enumerate() {
                let x = model.encoder.encode(&Token::Symbol(sym.clone()))?;
                let x = noisy(x, c.noise.flip_fraction, c.seed, step);
                step += 1;
                let out = model.tm.step(&x, false)?;
                evaluation.push(StepRecord::from_output(prev.as_ref(), &out));
                exports.push(StepExport::new(&out, None));
                let decoded = model.decode(&out.predicted_columns_next())?;
                let expected_next = seq.get(pos + 1).cloned();
                let (predicted_next, overlap) = match decoded {
                    Some((s, o)) if o > 0 => (Some(s), o),
                    _ => (None, 0),
                };
                predictions.push(Prediction {
                    sequence: si,
                    position: pos,
                    symbol: sym.clone(),
                    expected_next,
                    predicted_next,
                    overlap,
                });
                prev = Some(out.clone());
                seq_out.push(out);
            }
        }
        outputs.push(seq_out);
    }

    Ok(SequenceRun {
        training,
        evaluation,
        predictions,
        outputs,
        exports,
    })
}

#[derive(Clone, Debug)]
pub struct AnomalyRun {
    pub report: RunReport,
    pub exports: Vec<StepExport>,
}

impl AnomalyRun {
    pub fn anomalies(&self) -> Vec<f64> {
        self.report.records.iter().map(|r| r.anomaly).collect()
    }
}

/// Scores a token stream step by step without resets.
pub fn run_anomaly(model: &mut Model, stream: &[Token]) -> Result<AnomalyRun> {
    model.config.validate(Command::Anomaly)?;
    let learn = model.config.training.learn_online;
    let mut report = RunReport::default();
    let mut exports = Vec::new();
    let mut prev: Option<LayerOutput> = None;
    for token in stream {
        let x = model.encoder.encode(token)?;
        let out = model.tm.step(&x, learn)?;
        report.push(StepRecord::from_output(prev.as_ref(), &out));
        exports.push(StepExport::new(&out, None));
        prev = Some(out);
    }
    if learn {
        model.refresh_column_codes()?;
    }
    Ok(AnomalyRun { report, exports })
}

#[derive(Clone, Debug)]
pub struct PoolRun {
    pub training: RunReport,
    pub evaluation: RunReport,
    /// Source-layer cellular SDRs during evaluation.
    pub cellular: Vec<Sdr>,
    pub pooled: Vec<Sdr>,
    pub stability_cellular: f64,
    pub stability_pooled: f64,
    pub exports: Vec<StepExport>,
}

/// Trains the layer and pool stack on the configured (cyclic) sequences and
/// measures pooled versus cellular stability over learning-free cycles.
pub fn run_pool(model: &mut Model) -> Result<PoolRun> {
    model.config.validate(Command::Pool)?;
    let c = model.config.clone();
    let sequences: Vec<Vec<String>> = c.sequences.iter().map(SequenceSpec::tokens).collect();
    let repeats: Vec<usize> = c
        .sequences
        .iter()
        .map(|s| s.repeats.unwrap_or(c.training.repeats))
        .collect();

    let mut training = RunReport::default();
    let mut prev: Option<LayerOutput> = None;
    model.reset();
    for rep in 0..repeats.iter().copied().max().unwrap_or(0) {
        for (seq, &reps) in sequences.iter().zip(&repeats) {
            if rep >= reps {
                continue;
            }
            if c.training.reset_between {
                model.reset();
                prev = None;
            }
            for sym in seq {
                let x = model.encoder.encode(&Token::Symbol(sym.clone()))?;
                let out = model.tm.step(&x, true)?;
                let pool = model.pool.as_mut().expect("validated");
                pool.step(&out, true)?;
                training.push(StepRecord::from_output(prev.as_ref(), &out));
                prev = Some(out);
            }
        }
    }
    model.refresh_column_codes()?;

    let mut evaluation = RunReport::default();
    let mut cellular = Vec::new();
    let mut pooled = Vec::new();
    let mut exports = Vec::new();
    for seq in &sequences {
        if c.training.reset_between {
            model.reset();
            prev = None;
        }
        for _ in 0..c.training.evaluation_cycles.max(1) {
            for sym in seq {
                let x = model.encoder.encode(&Token::Symbol(sym.clone()))?;
                let out = model.tm.step(&x, false)?;
                let pool = model.pool.as_mut().expect("validated");
                let p = pool.step(&out, false)?;
                evaluation.push(StepRecord::from_output(prev.as_ref(), &out));
                exports.push(StepExport::new(&out, Some(&p)));
                cellular.push(out.active_cells.clone());
                pooled.push(p);
                prev = Some(out);
            }
        }
    }
    let stability_cellular = stability(&cellular)?;
    let stability_pooled = stability(&pooled)?;
    Ok(PoolRun {
        training,
        evaluation,
        cellular,
        pooled,
        stability_cellular,
        stability_pooled,
        exports,
    })
}

/// Capacity table with six significant figures.
pub fn capacity_table(columns: u64, active: u64, cells: u64) -> Result<String> {
    use crate::transition_memory::{capacity, scientific};
    let cap = capacity(columns, active, cells)?;
    Ok(format!(
        "quantity\tlog10\tvalue\n\
         columnar SDRs C({columns},{active})\t{:.6}\t{}\n\
         contexts per columnar SDR {cells}^{active}\t{:.6}\t{}\n\
         cellular SDRs\t{:.6}\t{}\n",
        cap.columnar,
        scientific(cap.columnar),
        cap.contexts,
        scientific(cap.contexts),
        cap.cellular,
        scientific(cap.cellular),
    ))
}

/// Human-readable summary of a model.
pub fn inspect(model: &Model) -> String {
    let tm = &model.tm;
    let synapses: usize = (0..tm.cell_count())
        .flat_map(|c| tm.segments(c))
        .map(|s| s.sources.len())
        .sum();
    let cells_with_segments = (0..tm.cell_count())
        .filter(|&c| !tm.segments(c).is_empty())
        .count();
    let encoder = match &model.encoder {
        Encoder::Category(e) => format!(
            "category ({} bits, {} active, {} symbols)",
            e.universe_size(),
            e.active_bits(),
            e.symbols().len()
        ),
        Encoder::Scalar(e) => format!(
            "scalar [{}, {}] ({} bits, {} active)",
            e.min, e.max, e.universe_size, e.active_bits
        ),
    };
    let mut s = format!(
        "format_version: {}\nseed: {}\nencoder: {encoder}\n\
         layer: {} columns x {} cells, {} active columns\n\
         steps: {}\nsegments: {} on {} cells, {} distal synapses\n",
        crate::persistence::FORMAT_VERSION,
        model.config.seed,
        tm.column_count(),
        tm.cells_per_column(),
        tm.proximal().active_count(),
        tm.steps(),
        tm.segment_count(),
        cells_with_segments,
        synapses,
    );
    if let Some(p) = &model.pool {
        s.push_str(&format!(
            "pool: {} cells, {} active, persistence {}\n",
            p.base().size(),
            p.base().active_count(),
            p.config().persistence
        ));
    }
    s
}
