// Shared fixtures and property checks for the integration tests.
#![allow(dead_code)]

use std::path::Path;

use pacla::harness::{EncoderConfig, EncoderKind, ExperimentConfig, Model, Token};
use pacla::inhibition::top_k;
use pacla::metrics::prediction_accuracy;
use pacla::pattern_memory::{PatternConfig, PatternLayer};
use pacla::persistence;
use pacla::transition_memory::{FiringClass, LayerOutput, TmConfig, TmLayer, Unit};
use pacla::Sdr;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn small_layer(seed: u64, cells: usize) -> TmConfig {
    TmConfig {
        columns: PatternConfig {
            input_size: 128,
            size: 64,
            sparsity: 0.125,
            synapses_per_neuron: 48,
            seed,
            ..PatternConfig::default()
        },
        cells_per_column: cells,
        activation_threshold: 3,
        min_learn_threshold: 2,
        seed: seed.wrapping_add(7),
        ..TmConfig::default()
    }
}

pub fn small_experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        encoder: EncoderConfig {
            kind: EncoderKind::Category,
            size: 128,
            active_bits: 12,
            ..EncoderConfig::default()
        },
        layer: small_layer(seed, 4),
        ..ExperimentConfig::default()
    }
}

/// Random SDR strategy over `size` bits with up to `max_on` on-bits.
pub fn sdr(size: usize, max_on: usize) -> impl Strategy<Value = Sdr> {
    proptest::collection::btree_set(0..size, 0..=max_on)
        .prop_map(move |bits| Sdr::new(size, bits).unwrap())
}

pub fn symbols(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(
        proptest::sample::select(vec!["A", "B", "C", "D", "E"]).prop_map(String::from),
        1..=max_len,
    )
}

/// Predicted and bursting cells partition the active cells, the firing
/// sequence is class-ordered, and anomaly agrees with the partition.
pub fn check_partition(seed: u64, inputs: &[Sdr]) -> Result<(), TestCaseError> {
    let mut tm = TmLayer::new(small_layer(seed, 4)).unwrap();
    let mut prev: Option<LayerOutput> = None;
    for x in inputs {
        let out = tm.step(x, true).unwrap();
        let acc = prediction_accuracy(prev.as_ref(), &out);
        prop_assert!((acc - (1.0 - out.anomaly)).abs() < 1e-12, "{} vs {}", acc, out.anomaly);
        prop_assert_eq!(out.predicted_cells.overlap(&out.burst_cells).unwrap(), 0);
        prop_assert_eq!(
            out.predicted_cells.union(&out.burst_cells).unwrap(),
            out.active_cells.clone()
        );
        prop_assert_eq!(out.columns_of(&out.active_cells), out.active_columns.clone());
        let pc = out.columns_of(&out.predicted_cells);
        let bc = out.columns_of(&out.burst_cells);
        prop_assert_eq!(pc.overlap(&bc).unwrap(), 0);
        prop_assert!(out.winner_cells.cardinality() == out.active_columns.cardinality());

        let rank = |c: FiringClass| match c {
            FiringClass::PyramidalPredicted => 0,
            FiringClass::SheathPredicted => 1,
            FiringClass::SheathFeedforward => 2,
            FiringClass::PyramidalBurst => 3,
            FiringClass::SheathSpread => 4,
        };
        let ranks: Vec<_> = out.firing_sequence.iter().map(|f| rank(f.class)).collect();
        prop_assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        let mut fired: Vec<u32> = out
            .firing_sequence
            .iter()
            .filter_map(|f| match (f.unit, f.class) {
                (Unit::Cell(c), _) => Some(c),
                _ => None,
            })
            .collect();
        fired.sort_unstable();
        prop_assert_eq!(&fired[..], out.active_cells.active());

        let expected = if out.active_columns.is_empty() {
            0.0
        } else {
            1.0 - pc.cardinality() as f64 / out.active_columns.cardinality() as f64
        };
        prop_assert!((out.anomaly - expected).abs() < 1e-12);
        prev = Some(out);
    }
    Ok(())
}

/// Global inhibition returns `min(k, eligible)` winners, all of them
/// eligible and none outscored by a loser.
pub fn check_top_k(scores: &[u8], eligible: &[bool], k: usize) -> Result<(), TestCaseError> {
    let scores: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    let eligible = &eligible[..scores.len()];
    let n_eligible = eligible.iter().filter(|&&e| e).count();
    let w = top_k(&scores, eligible, k);
    prop_assert_eq!(w.cardinality(), k.min(n_eligible));
    let on = w.to_dense();
    let min_win = w.iter().map(|i| scores[i]).fold(f64::INFINITY, f64::min);
    for i in 0..scores.len() {
        if on[i] {
            prop_assert!(eligible[i]);
        } else if eligible[i] {
            prop_assert!(scores[i] <= min_win);
        }
    }
    Ok(())
}

/// Permanences stay in [0,1] however hard the layers are driven.
pub fn check_clamping(seed: u64, inputs: &[Sdr], inc: f64, dec: f64) -> Result<(), TestCaseError> {
    let mut cfg = small_layer(seed, 4);
    cfg.columns.delta_inc = inc;
    cfg.columns.delta_dec = dec;
    cfg.sigma_inc = inc;
    cfg.sigma_dec = dec;
    cfg.sigma_punish = dec;
    let mut tm = TmLayer::new(cfg).unwrap();
    for _ in 0..3 {
        for x in inputs {
            tm.step(x, true).unwrap();
        }
    }
    for d in tm.proximal().dendrites() {
        prop_assert!(d.permanences.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    for c in 0..tm.cell_count() {
        for s in tm.segments(c) {
            prop_assert!(s.permanences.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
    Ok(())
}

/// Two models built from the same config and fed the same stream agree
/// step for step.
pub fn check_determinism(seed: u64, stream: &[String]) -> Result<(), TestCaseError> {
    let cfg = small_experiment(seed);
    let mut a = Model::new(&cfg).unwrap();
    let mut b = Model::new(&cfg).unwrap();
    for s in stream {
        let t = Token::Symbol(s.clone());
        let xa = a.encoder.encode(&t).unwrap();
        let xb = b.encoder.encode(&t).unwrap();
        prop_assert_eq!(&xa, &xb);
        prop_assert_eq!(a.tm.step(&xa, true).unwrap(), b.tm.step(&xb, true).unwrap());
    }
    prop_assert!(a == b);
    Ok(())
}

/// A saved and reloaded model equals the original and continues
/// identically.
pub fn check_round_trip(seed: u64, train: &[String], tail: &[String]) -> Result<(), TestCaseError> {
    let mut a = Model::new(&small_experiment(seed)).unwrap();
    for s in train {
        let x = a.encoder.encode(&Token::Symbol(s.clone())).unwrap();
        a.tm.step(&x, true).unwrap();
    }
    let text = persistence::to_string(&a).unwrap();
    let mut b = persistence::from_str(&text, Path::new("snapshot")).unwrap();
    prop_assert!(a == b);
    for s in tail {
        let t = Token::Symbol(s.clone());
        let xa = a.encoder.encode(&t).unwrap();
        let xb = b.encoder.encode(&t).unwrap();
        prop_assert_eq!(a.tm.step(&xa, true).unwrap(), b.tm.step(&xb, true).unwrap());
    }
    prop_assert!(a == b);
    Ok(())
}

pub fn pattern_layer(seed: u64) -> PatternLayer {
    PatternLayer::new(small_layer(seed, 1).columns).unwrap()
}
