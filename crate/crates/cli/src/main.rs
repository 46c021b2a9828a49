use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsm_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, RunOptions, TrialOutcome};

#[derive(Parser)]
#[command(name = "lsm", version, about = "Run liquid state machine plasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separation of one input pair across fresh liquids, before and after training.
    Pairwise(RunArgs),
    /// One liquid, many input pairs at a fixed distance.
    SameLiquidDiffInput(RunArgs),
    /// End-state distance against input distance, random vs trained.
    DistanceSweep(RunArgs),
    /// Separation and generalization rank against number of training patterns.
    RankSweep(RunArgs),
    /// Generalization rank before and after training.
    Generalization(RunArgs),
    /// Separation of unseen pairs on trained liquids.
    Generality(RunArgs),
    /// Time of last spike after an input burst, random vs trained.
    FadingMemory(RunArgs),
    /// Degree distributions before and after training.
    ConnectivityHistogram(RunArgs),
    /// Multi-class spike pattern classification with a perceptron readout.
    Classify(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Self::Pairwise(a) => (ExperimentKind::Pairwise, a),
            Self::SameLiquidDiffInput(a) => (ExperimentKind::SameLiquidDiffInput, a),
            Self::DistanceSweep(a) => (ExperimentKind::DistanceSweep, a),
            Self::RankSweep(a) => (ExperimentKind::RankSweep, a),
            Self::Generalization(a) => (ExperimentKind::Generalization, a),
            Self::Generality(a) => (ExperimentKind::Generality, a),
            Self::FadingMemory(a) => (ExperimentKind::FadingMemory, a),
            Self::ConnectivityHistogram(a) => (ExperimentKind::ConnectivityHistogram, a),
            Self::Classify(a) => (ExperimentKind::Classify, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; its `kind` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the larger trial counts and pattern sets of the original protocols.
    #[arg(long)]
    full_scale: bool,
    /// Run trials one at a time.
    #[arg(long)]
    serial: bool,
    /// Recompute every trial even when stored results exist.
    #[arg(long)]
    no_resume: bool,
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> lsm_core::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let config = ExperimentConfig::from_file(path)?;
            if config.kind != kind {
                return Err(lsm_core::Error::Config(format!(
                    "config kind {} does not match subcommand {kind}",
                    config.kind
                )));
            }
            config
        }
        None => ExperimentConfig::new(kind),
    };
    if args.full_scale {
        config.apply_full_scale();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    let result = build_config(kind, &args).and_then(|config| {
        run_experiment(&config, RunOptions { parallel: !args.serial, resume: !args.no_resume })
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for outcome in &report.outcomes {
        if let TrialOutcome::Failed { trial, error } = outcome {
            eprintln!("trial {trial} failed: {error}");
        }
    }
    println!(
        "{kind}: {}/{} trials completed",
        report.completed().count(),
        report.config.trials
    );
    for s in &report.summaries {
        println!(
            "{:<40} x={:<8} mean={:<14.6} std={:<12.6} n={}",
            s.metric, s.x, s.summary.mean, s.summary.std, s.summary.n
        );
    }
    if let Some(out) = &report.config.out {
        println!("results written to {}", out.display());
    }
    ExitCode::SUCCESS
}
