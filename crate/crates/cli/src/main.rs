mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fairegm::io::load_dataset;
use fairegm::DatasetSpec;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "fairegm", version, about = "Fair graph autoencoder embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every model on every split.
    Train(RunArgs),
    /// Train CFO for each value of --c.
    SweepC(RunArgs),
    /// Write the held-out splits only.
    Split(RunArgs),
    /// DP@k of an exported embedding file.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `kind:path`, repeatable. Kinds: content-cites, snap-ego, generic-csv,
    /// pubmed-tab, synthetic.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    /// Comma-separated models, e.g. Base,GFO,CFO,FEW,AUG or CFO:10,AUG:100.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "lambda-f")]
    lambda_f: Option<f64>,
    /// CFO inner width(s); a bare CFO model expands to one run per value.
    #[arg(long, value_delimiter = ',')]
    c: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 (the default) is the reproducible mode.
    #[arg(long)]
    threads: Option<usize>,
    /// DP@k cutoffs.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long = "test-fraction")]
    test_fraction: Option<f64>,
}

impl RunArgs {
    fn into_config(self) -> Result<FileConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            datasets: self.datasets,
            models: self.models,
            splits: self.splits,
            epochs: self.epochs,
            lr: self.lr,
            lambda_f: self.lambda_f,
            c: self.c,
            seed: self.seed,
            threads: self.threads,
            k: self.k,
            test_fraction: self.test_fraction,
            out: self.out,
        };
        Ok(file.overlay(flags))
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding CSV written by `train`.
    #[arg(long)]
    embeddings: PathBuf,
    /// Dataset supplying the sensitive classes; defaults to the file's column.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    k: Vec<usize>,
    /// Write the report here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Train(args) => {
            let plan = args.into_config()?.resolve(false)?;
            commands::run_grid(&plan, "train")
        }
        Command::SweepC(args) => {
            let plan = args.into_config()?.resolve(true)?;
            commands::run_grid(&plan, "sweep-c")
        }
        Command::Split(args) => {
            let plan = args.into_config()?.resolve(false)?;
            commands::run_split(&plan)
        }
        Command::Eval(args) => {
            let dataset = match &args.dataset {
                Some(d) => {
                    let spec: DatasetSpec = d.parse().with_context(|| format!("dataset '{d}'"))?;
                    Some(load_dataset(&spec)?)
                }
                None => None,
            };
            let report = commands::run_eval(&args.embeddings, dataset.as_ref(), &args.k)?;
            commands::print_or_write(&report, args.out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} cell(s) failed; see manifest.json");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
