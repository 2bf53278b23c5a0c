//! `grasplab`: scene generation, blind collection, planner training,
//! evaluation, friction ablation, probability maps and reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "grasplab", version, about = "Simulated multi-finger bin grasping benchmark")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Key-value config file with sections; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required here or in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run name under the runs directory.
    #[arg(long, global = true)]
    pub name: Option<String>,
    /// R3, P3, R4, P4 or a gripper file.
    #[arg(long, global = true)]
    pub gripper: Option<String>,
    /// Object catalog file instead of the shipped one.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub(crate) enum Command {
    /// Generate a scene and render it.
    Scene {
        #[arg(long)]
        objects: Option<usize>,
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Blind grasps at random poses.
    Collect {
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long)]
        objects: Option<usize>,
        #[arg(long)]
        spacing: Option<f64>,
        /// Skip writing color images.
        #[arg(long)]
        no_images: bool,
    },
    /// Train a planner on the run's dataset.
    Train {
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
        /// Dataset directory; defaults to the run's.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Train on a `POS:NEG` subsample.
        #[arg(long)]
        compose: Option<String>,
    },
    /// Run evaluation plans 1-5.
    Eval {
        /// Plan number, comma list or `all`.
        #[arg(long)]
        plan: Option<String>,
        /// Planner checkpoints; one per bin count in use.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
    /// Skinned against bare fingers on plan 2.
    Ablate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Per-bin heatmaps and an overlay for one scene.
    Maps {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scene file; otherwise one is generated.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Color PNG to evaluate instead of a scene.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        objects: Option<usize>,
    },
    /// Summarize every plan report of the run.
    Report,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
}

impl From<grasplab::Error> for CliError {
    fn from(e: grasplab::Error) -> Self {
        match e {
            grasplab::Error::PlacementInfeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::RunConfig::resolve(&cli.global).and_then(|cfg| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        commands::run(cfg, cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(3)
        }
    }
}
