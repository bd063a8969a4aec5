//! Command-line orchestration of the twin experiment.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use error::{CliError, CliResult};
pub use pipeline::{load_config, Method, Outcome, Stage, Workspace};

#[derive(Debug, Parser)]
#[command(name = "shmked", version, about = "Sparse-coded seismic history matching twin experiment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "configs/twin.json")]
    pub config: PathBuf,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Re-run stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; defaults to `output_dir` next to the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the configuration and list every problem found.
    Validate,
    /// Draw the prior model library.
    GeneratePrior,
    /// Train the K-SVD dictionary on the prior library.
    LearnDict,
    /// Simulate the truth model and build the noisy observations.
    RunTruth,
    /// Run one assimilation arm.
    Assimilate {
        #[arg(long, value_enum)]
        method: Method,
    },
    /// Metric tables and per-well series for both arms.
    Report,
    /// SVG charts from the report.
    Plot,
    /// Every stage in order.
    Run,
}

fn stages(command: &Command) -> Vec<Stage> {
    match command {
        Command::Validate => vec![],
        Command::GeneratePrior => vec![Stage::GeneratePrior],
        Command::LearnDict => vec![Stage::LearnDict],
        Command::RunTruth => vec![Stage::RunTruth],
        Command::Assimilate { method } => vec![Stage::Assimilate(*method)],
        Command::Report => vec![Stage::Report],
        Command::Plot => vec![Stage::Plot],
        Command::Run => Stage::ALL.to_vec(),
    }
}

/// Executes a parsed command line, reporting progress on stderr.
pub fn run(cli: &Cli) -> CliResult<()> {
    let ws = Workspace::open(&cli.config, cli.seed, cli.out.as_deref(), cli.force)?;
    if matches!(cli.command, Command::Validate) {
        eprintln!("{}: configuration ok", cli.config.display());
        return Ok(());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config(vec!["--threads must be at least 1".into()]));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::other(e.to_string()))?;
    pool.install(|| {
        for stage in stages(&cli.command) {
            let outcome = ws.run(stage)?;
            let note = match outcome {
                Outcome::Ran => "done",
                Outcome::UpToDate => "up to date",
            };
            eprintln!("{stage}: {note} ({})", ws.dir(stage).display());
        }
        Ok(())
    })
}
