mod common;

use std::path::Path;

use pacla::harness::{Model, SequenceSpec, Token};
use pacla::persistence::{self, FORMAT_VERSION};
use pacla::Error;

fn feed(model: &mut Model, text: &str, learn: bool) -> Vec<pacla::transition_memory::LayerOutput> {
    text.chars()
        .map(|c| {
            let x = model.encoder.encode(&Token::Symbol(c.to_string())).unwrap();
            model.tm.step(&x, learn).unwrap()
        })
        .collect()
}

fn reload(model: &Model) -> Model {
    let text = persistence::to_string(model).unwrap();
    persistence::from_str(&text, Path::new("mem")).unwrap()
}

fn assert_resumes(mut a: Model) {
    let mut b = reload(&a);
    assert_eq!(a, b);
    let tail = "ABCDXBCYAB";
    assert_eq!(feed(&mut a, tail, true), feed(&mut b, tail, true));
    assert_eq!(a, b);
}

#[test]
fn fresh_model_round_trips() {
    assert_resumes(Model::new(&common::small_experiment(1)).unwrap());
}

#[test]
fn mid_training_model_round_trips() {
    let mut m = Model::new(&common::small_experiment(2)).unwrap();
    feed(&mut m, "ABCDAB", true);
    assert_resumes(m);
}

#[test]
fn model_with_grown_segments_round_trips() {
    let mut m = Model::new(&common::small_experiment(3)).unwrap();
    for _ in 0..5 {
        m.reset();
        feed(&mut m, "ABCDXBCY", true);
    }
    assert!(m.tm.segment_count() > 0);
    m.refresh_column_codes().unwrap();
    assert_resumes(m);
}

#[test]
fn pooled_model_round_trips() {
    let mut cfg = common::small_experiment(4);
    cfg.pool = Some(Default::default());
    cfg.sequences = vec![SequenceSpec::from_text("ABC")];
    cfg.training.repeats = 3;
    let mut m = Model::new(&cfg).unwrap();
    pacla::harness::run_pool(&mut m).unwrap();
    assert_eq!(m, reload(&m));
}

#[test]
fn save_and_load_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let mut m = Model::new(&common::small_experiment(5)).unwrap();
    feed(&mut m, "ABAB", true);
    persistence::save(&m, &path).unwrap();
    assert_eq!(persistence::load(&path).unwrap(), m);
    assert!(matches!(
        persistence::load(&dir.path().join("missing.json")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn permanence_survives_exactly() {
    let mut m = Model::new(&common::small_experiment(6)).unwrap();
    m.tm.proximal_mut().dendrites_mut()[0].permanences[0] = 0.123456789;
    let back = reload(&m);
    assert_eq!(back.tm.proximal().dendrites()[0].permanences[0], 0.123456789);
}

#[test]
fn newer_format_version_is_rejected() {
    let m = Model::new(&common::small_experiment(7)).unwrap();
    let text = persistence::to_string(&m).unwrap().replacen(
        &format!("\"format_version\": {FORMAT_VERSION}"),
        "\"format_version\": 99",
        1,
    );
    match persistence::from_str(&text, Path::new("mem")) {
        Err(Error::Version { found: 99, supported }) => assert_eq!(supported, FORMAT_VERSION),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_documents_are_rejected() {
    let m = Model::new(&common::small_experiment(8)).unwrap();
    let text = persistence::to_string(&m).unwrap();

    match persistence::from_str("{\n  \"format_version\": 1,\n  \"model\": [}", Path::new("bad")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["model"]["tm"]["proximal"]["dendrites"][0]["permanences"][0] = serde_json::json!(1.5);
    let bad = serde_json::to_string(&v).unwrap();
    assert!(matches!(
        persistence::from_str(&bad, Path::new("bad")),
        Err(Error::Invariant(_))
    ));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["model"]["tm"]["prev_active"]["active"] = serde_json::json!([5, 3]);
    let bad = serde_json::to_string(&v).unwrap();
    assert!(persistence::from_str(&bad, Path::new("bad")).is_err());
}
