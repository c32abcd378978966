//! Command-line arguments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use piconvae_core::attacks::{AttackKind, Placement};
use piconvae_core::model::UpdateMode;
use piconvae_core::scoring::{PhysicsSource, SolvedForm};
use piconvae_core::telemetry::{Aggregation, Channel};

use crate::commands::{self, ReplayReport};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{Invocation, Manifest};

#[derive(Debug, Parser)]
#[command(name = "piconvae", version, about = "Physics-informed autoencoder detection of false data injection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic telemetry series.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Inject an attack campaign into the test split of a series.
    Inject {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a clean series.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score the test split and write verdicts and metrics.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Labels of an already attacked series; without it the configured
        /// campaign is injected into `--data`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute metrics from a verdicts file.
    Evaluate {
        #[arg(long)]
        verdicts: PathBuf,
        /// Also report the best-F1 threshold (uses the labels).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Detection over a grid of fixed attack magnitudes.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a recorded run and compare output checksums.
    Replay {
        /// Manifest file or run directory.
        manifest: PathBuf,
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
}

fn parse_with<T>(f: fn(&str) -> Option<T>, what: &'static str) -> impl Fn(&str) -> Result<T, String> + Clone {
    move |s| f(s).ok_or_else(|| format!("unknown {what} {s:?}"))
}

fn channel(s: &str) -> Option<Channel> {
    Channel::from_name(s)
}

fn kind(s: &str) -> Option<AttackKind> {
    match s {
        "additive" => Some(AttackKind::Additive),
        "deductive" => Some(AttackKind::Deductive),
        "combined" => Some(AttackKind::Combined),
        _ => None,
    }
}

fn placement(s: &str) -> Option<Placement> {
    match s {
        "random" => Some(Placement::Random),
        "contiguous" => Some(Placement::Contiguous),
        _ => None,
    }
}

fn update(s: &str) -> Option<UpdateMode> {
    match s {
        "alternating" => Some(UpdateMode::Alternating),
        "joint" => Some(UpdateMode::Joint),
        _ => None,
    }
}

fn aggregation(s: &str) -> Option<Aggregation> {
    match s {
        "mean" => Some(Aggregation::Mean),
        "median" => Some(Aggregation::Median),
        _ => None,
    }
}

fn solved_form(s: &str) -> Option<SolvedForm> {
    match s {
        "divide" => Some(SolvedForm::Divide),
        "multiply" => Some(SolvedForm::Multiply),
        _ => None,
    }
}

fn physics_source(s: &str) -> Option<PhysicsSource> {
    match s {
        "measured" => Some(PhysicsSource::Measured),
        "substituted" => Some(PhysicsSource::Substituted),
        _ => None,
    }
}

/// Options shared by every run command; each overrides a config field.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exact output directory (default: a timestamped directory under the
    /// configured output_dir).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, value_parser = parse_with(channel, "channel"))]
    pub channel: Option<Channel>,
    #[arg(long, value_parser = parse_with(kind, "attack kind"))]
    pub kind: Option<AttackKind>,
    #[arg(long)]
    pub max_magnitude: Option<f64>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, value_parser = parse_with(placement, "placement"))]
    pub placement: Option<Placement>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train the plain ConvAE baseline.
    #[arg(long)]
    pub no_physics: bool,
    #[arg(long, value_parser = parse_with(update, "update mode"))]
    pub update: Option<UpdateMode>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long, value_parser = parse_with(aggregation, "aggregation"))]
    pub aggregation: Option<Aggregation>,
    #[arg(long, value_parser = parse_with(solved_form, "solved form"))]
    pub solved_form: Option<SolvedForm>,
    #[arg(long, value_parser = parse_with(physics_source, "physics source"))]
    pub physics_source: Option<PhysicsSource>,
    /// Score by reconstruction error alone.
    #[arg(long)]
    pub no_physics_score: bool,
    #[arg(long)]
    pub sweep_min: Option<f64>,
    #[arg(long)]
    pub sweep_max: Option<f64>,
    #[arg(long)]
    pub sweep_steps: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    /// The effective configuration: file (or defaults), then flags.
    pub fn config(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        set(&mut c.output_dir, self.output_dir.clone());
        set(&mut c.generator.length, self.length);
        set(&mut c.attack.channel, self.channel);
        set(&mut c.attack.kind, self.kind);
        set(&mut c.attack.max_magnitude, self.max_magnitude);
        if self.magnitude.is_some() {
            c.attack.magnitude = self.magnitude;
        }
        set(&mut c.attack.fraction, self.fraction);
        set(&mut c.attack.placement, self.placement);
        set(&mut c.model.epochs, self.epochs);
        if self.steps_per_epoch.is_some() {
            c.model.steps_per_epoch = self.steps_per_epoch;
        }
        set(&mut c.model.batch_size, self.batch_size);
        set(&mut c.model.patience, self.patience);
        if self.no_physics {
            c.model = c.model.baseline();
        }
        set(&mut c.model.update, self.update);
        set(&mut c.scoring.quantile, self.quantile);
        set(&mut c.scoring.aggregation, self.aggregation);
        set(&mut c.scoring.solved_form, self.solved_form);
        set(&mut c.scoring.physics_source, self.physics_source);
        if self.no_physics_score {
            c.scoring.physics = false;
        }
        set(&mut c.sweep.min, self.sweep_min);
        set(&mut c.sweep.max, self.sweep_max);
        set(&mut c.sweep.steps, self.sweep_steps);
        c.resolve()
    }
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(p).map_err(CliError::io(p))
}

/// A fresh timestamped directory under `root`.
pub fn timestamped_dir(root: &Path, command: &str) -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = root.join(format!("{stamp}-{command}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

/// What a successful command produced.
pub enum Outcome {
    Run { dir: PathBuf, manifest: Manifest },
    Replay { dir: PathBuf, report: ReplayReport },
}

pub fn dispatch(cmd: Command) -> CliResult<Outcome> {
    let (inv, common) = match cmd {
        Command::Replay { manifest, run_dir } => {
            let recorded = Manifest::read(&manifest)?;
            let dir = run_dir.unwrap_or_else(|| timestamped_dir(&recorded.config.output_dir, "replay"));
            let report = commands::replay(&recorded, &dir)?;
            return Ok(Outcome::Replay { dir, report });
        }
        Command::Generate { common } => (Invocation::Generate, common),
        Command::Inject { data, common } => (Invocation::Inject { data: absolute(&data)? }, common),
        Command::Train { data, common } => (Invocation::Train { data: absolute(&data)? }, common),
        Command::Detect {
            model,
            data,
            labels,
            common,
        } => (
            Invocation::Detect {
                model: absolute(&model)?,
                data: absolute(&data)?,
                labels: labels.as_deref().map(absolute).transpose()?,
            },
            common,
        ),
        Command::Evaluate { verdicts, oracle, common } => (
            Invocation::Evaluate {
                verdicts: absolute(&verdicts)?,
                oracle,
            },
            common,
        ),
        Command::Sweep { model, data, common } => (
            Invocation::Sweep {
                model: absolute(&model)?,
                data: absolute(&data)?,
            },
            common,
        ),
    };
    let cfg = common.config()?;
    let dir = common
        .run_dir
        .clone()
        .unwrap_or_else(|| timestamped_dir(&cfg.output_dir, inv.name()));
    let manifest = commands::run(inv, cfg, &dir)?;
    Ok(Outcome::Run { dir, manifest })
}
