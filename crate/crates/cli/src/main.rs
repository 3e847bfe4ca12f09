//! `contact-fisher`: simulate toss datasets, rank and curate them by contact
//! Fisher information, fit contact parameters, run curation experiments and
//! design new tosses.
//!
//! Exit status is 0 on success, 1 for invalid inputs and 2 for numerical
//! failures such as a diverging fit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contact_fisher::curate::Method;

/// Environment variable consulted when `--config` is absent.
pub const CONFIG_ENV: &str = "CONTACT_FISHER_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "contact-fisher", version, about = "Contact-aware Fisher information for rigid-body toss data")]
pub struct Cli {
    /// Experiment configuration (JSON). Defaults apply when absent.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Caps worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Parameter estimate to evaluate at (default: the configured initial estimate).
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate tosses under the configured ground truth and write a dataset.
    Simulate {
        /// Number of tosses (default: data.n_tosses).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Rank trajectories by information and report the top k.
    Rank {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Select a subset and write it as a new manifest.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Fit contact parameters to a dataset.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Held-out dataset for trajectory and penetration errors.
        #[arg(long)]
        test_manifest: Option<PathBuf>,
        /// Ground-truth params file, for vertex RMSE.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Curation experiment: selection method x subset size x seed.
    Experiment {
        /// Dataset to split; simulated from the configuration when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Design tosses that maximize expected information and execute them in simulation.
    Design {
        /// Dataset whose initial states define the sampling distribution.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Parameter estimate to design at (default: the configured initial estimate).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        n_exp: usize,
        #[arg(long)]
        n_candidates: Option<usize>,
    },
    /// Render a report as text tables and plot-ready CSV.
    Report {
        /// Report JSON written by another command.
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
