use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use pacla::harness::{
    self, capacity_table, inspect, parse_stream, ExperimentConfig, Model, Prediction,
};
use pacla::metrics::{RunReport, Summary};
use pacla::persistence::{self, StepExport};
use pacla::{Error, Result};

/// Pattern memory, high-order sequence memory and temporal pooling
/// experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on symbol sequences and decode next-symbol predictions.
    Sequence(RunArgs),
    /// Score a token stream (one symbol or number per line) for anomalies.
    Anomaly {
        #[command(flatten)]
        run: RunArgs,
        /// Token stream to score.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
    /// Train a layer plus pooling stack and compare representation stability.
    Pool(RunArgs),
    /// Print the capacity of a layer at each level of representation.
    Capacity {
        #[arg(long, default_value_t = 2048)]
        cols: u64,
        #[arg(long, default_value_t = 40)]
        k: u64,
        #[arg(long, default_value_t = 32)]
        cells: u64,
    },
    /// Summarise a saved snapshot.
    Inspect {
        #[arg(value_name = "SNAPSHOT")]
        path: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH", required_unless_present = "resume")]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, conflicts_with = "resume")]
    seed: Option<u64>,
    /// Directory for reports; defaults to the config's output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Save the model here when the run finishes.
    #[arg(long, value_name = "PATH")]
    snapshot: Option<PathBuf>,
    /// Continue from a saved model instead of building a fresh one.
    #[arg(long, value_name = "PATH", conflicts_with = "config")]
    resume: Option<PathBuf>,
}

impl RunArgs {
    fn model(&self, command: harness::Command) -> Result<Model> {
        if let Some(path) = &self.resume {
            return persistence::load(path);
        }
        let path = self.config.as_ref().expect("clap enforces --config or --resume");
        let mut config = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate(command)?;
        Model::new(&config)
    }

    fn out_dir(&self, model: &Model) -> Option<PathBuf> {
        self.out.clone().or_else(|| model.config.output.dir.clone())
    }

    fn finish(&self, model: &Model) -> Result<()> {
        if let Some(path) = &self.snapshot {
            persistence::save(model, path)?;
        }
        Ok(())
    }
}

struct Reports<'a> {
    dir: Option<PathBuf>,
    training: Option<&'a RunReport>,
    records: &'a RunReport,
    steps: &'a [StepExport],
}

impl Reports<'_> {
    fn write(&self, summary: &serde_json::Value) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        write_file(&dir.join("records.jsonl"), |w| self.records.write_records(w))?;
        write_file(&dir.join("table.tsv"), |w| self.records.write_table(w))?;
        if let Some(t) = self.training {
            write_file(&dir.join("training.jsonl"), |w| t.write_records(w))?;
        }
        write_file(&dir.join("steps.jsonl"), |w| write_lines(w, self.steps))?;
        write_file(&dir.join("summary.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, summary)?;
            w.write_all(b"\n")
        })
    }
}

fn write_lines<T: Serialize>(w: &mut dyn Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn summary_json(command: &str, summary: Summary, extra: serde_json::Value) -> serde_json::Value {
    let mut v = json!({ "command": command, "metrics": summary });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

fn decoded_accuracy(predictions: &[Prediction]) -> Option<f64> {
    let scored: Vec<_> = predictions
        .iter()
        .filter(|p| p.expected_next.is_some())
        .collect();
    if scored.is_empty() {
        return None;
    }
    let hits = scored
        .iter()
        .filter(|p| p.predicted_next == p.expected_next)
        .count();
    Some(hits as f64 / scored.len() as f64)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sequence(args) => {
            let mut model = args.model(harness::Command::Sequence)?;
            let run = harness::run_sequence(&mut model)?;
            let summary = summary_json(
                "sequence",
                run.evaluation.summary(),
                json!({
                    "training": run.training.summary(),
                    "decoded_accuracy": decoded_accuracy(&run.predictions),
                }),
            );
            let dir = args.out_dir(&model);
            Reports {
                dir: dir.clone(),
                training: Some(&run.training),
                records: &run.evaluation,
                steps: &run.exports,
            }
            .write(&summary)?;
            if let Some(dir) = dir {
                write_file(&dir.join("predictions.jsonl"), |w| write_lines(w, &run.predictions))?;
            }
            args.finish(&model)?;
            print_json(&summary);
        }
        Command::Anomaly { run: args, input } => {
            let mut model = args.model(harness::Command::Anomaly)?;
            let text = fs::read_to_string(&input).map_err(|source| Error::Io {
                path: input.clone(),
                source,
            })?;
            let stream = parse_stream(&text, model.config.encoder.kind, &input)?;
            let run = harness::run_anomaly(&mut model, &stream)?;
            let summary = summary_json("anomaly", run.report.summary(), json!({}));
            Reports {
                dir: args.out_dir(&model),
                training: None,
                records: &run.report,
                steps: &run.exports,
            }
            .write(&summary)?;
            args.finish(&model)?;
            print_json(&summary);
        }
        Command::Pool(args) => {
            let mut model = args.model(harness::Command::Pool)?;
            let run = harness::run_pool(&mut model)?;
            let summary = summary_json(
                "pool",
                run.evaluation.summary(),
                json!({
                    "training": run.training.summary(),
                    "stability_pooled": run.stability_pooled,
                    "stability_cellular": run.stability_cellular,
                }),
            );
            Reports {
                dir: args.out_dir(&model),
                training: Some(&run.training),
                records: &run.evaluation,
                steps: &run.exports,
            }
            .write(&summary)?;
            args.finish(&model)?;
            print_json(&summary);
        }
        Command::Capacity { cols, k, cells } => {
            print_out(&capacity_table(cols, k, cells)?);
        }
        Command::Inspect { path } => {
            print_out(&inspect(&persistence::load(&path)?));
        }
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    print_out(&serde_json::to_string_pretty(v).expect("summary is plain data"));
}

// Ignores a closed stdout so piping into `head` is not an error.
fn print_out(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", text.trim_end());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
