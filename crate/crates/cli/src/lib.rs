//! Pipeline orchestration behind the `adrc` binary.

pub mod commands;
pub mod config;
pub mod workdir;

use std::path::PathBuf;

use adrc_core::corpus::Task;
use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::SynthKind;
use crate::config::{Overrides, Precision, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "adrc",
    version,
    about = "Classify drug reviews with a committee of CNNs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Raw corpus CSV.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, env = "ADRC_WORKDIR")]
    pub workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// binary or multi.
    #[arg(long, global = true)]
    pub task: Option<Task>,
    /// Committee size.
    #[arg(long, global = true)]
    pub members: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Train and evaluate networks in 64-bit floats.
    #[arg(long, global = true, conflicts_with = "f32")]
    pub f64: bool,
    /// Train and evaluate networks in 32-bit floats.
    #[arg(long, global = true)]
    pub f32: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainMode {
    Single,
    Ensemble,
    Baselines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthArg {
    Binary,
    Ordinal,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the corpus and write the stratified train/test split.
    Ingest,
    /// Build the vocabulary and train word embeddings.
    Embed,
    /// Train a single CNN, the committee, or the baselines.
    Train {
        #[arg(long, value_enum)]
        mode: TrainMode,
    },
    /// Evaluate trained models on the test split.
    Eval {
        /// single, committee, a baseline name, or a model/manifest path.
        /// Defaults to every trained artifact.
        targets: Vec<String>,
    },
    /// Run ingest, embed, train (all modes) and eval.
    Pipeline,
    /// Write a synthetic corpus.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthArg,
        #[arg(long, default_value_t = 2000)]
        reviews: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let precision = match (self.f64, self.f32) {
            (_, true) => Some(Precision::F32),
            (true, _) => Some(Precision::F64),
            _ => None,
        };
        base.resolve(Overrides {
            corpus: self.corpus.clone(),
            workdir: self.workdir.clone(),
            seed: self.seed,
            task: self.task,
            members: self.members,
            workers: self.workers,
            precision,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Command::Synth { kind, reviews, out } = &cli.command {
        let kind = match kind {
            SynthArg::Binary => SynthKind::Binary,
            SynthArg::Ordinal => SynthKind::Ordinal,
        };
        return commands::synth(kind, *reviews, cli.global.seed.unwrap_or(1), out);
    }
    let cfg = cli.global.resolve()?;
    match cli.command {
        Command::Ingest => {
            commands::ingest(&cfg)?;
        }
        Command::Embed => {
            commands::embed(&cfg)?;
        }
        Command::Train { mode } => match mode {
            TrainMode::Single => {
                commands::train_single(&cfg)?;
            }
            TrainMode::Ensemble => {
                commands::train_ensemble(&cfg)?;
            }
            TrainMode::Baselines => {
                commands::train_baselines(&cfg)?;
            }
        },
        Command::Eval { targets } => {
            commands::eval(&cfg, &targets)?;
        }
        Command::Pipeline => {
            commands::pipeline(&cfg)?;
        }
        Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}
