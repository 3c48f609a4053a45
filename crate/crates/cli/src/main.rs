use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use steward_core::config::ExperimentConfig;
use steward_core::experiments::{cmd_equilibrium, cmd_platform, cmd_policy, cmd_steward};
use steward_core::Error;

/// Opinion-expression game, organizational stewarding and platform experiments.
#[derive(Debug, Parser)]
#[command(name = "steward", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Best-response curves and the symmetric equilibrium sweep.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Also run the randomized silence-condition battery.
        #[arg(long)]
        check_theorem: bool,
    },
    /// Solve the signaling MDPs and export policies and reward heatmaps.
    Policy {
        #[command(flatten)]
        common: Common,
    },
    /// Single-organization stewarding runs across modes and cost levels.
    Steward {
        #[command(flatten)]
        common: Common,
    },
    /// Recommender platform runs and community statistics.
    Platform {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; defaults are used for anything it leaves out.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain { .. } => 2,
        Error::Solver { .. } | Error::ValueIteration { .. } | Error::UndefinedEffect => 3,
        Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Error> {
    let common = match &cli.command {
        Command::Equilibrium { common, .. }
        | Command::Policy { common }
        | Command::Steward { common }
        | Command::Platform { common } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config { key: "--threads".into(), message: "must be >= 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config { key: "--threads".into(), message: e.to_string() })?;
    }
    let cfg = common.resolve()?;
    let out = &common.out;
    match cli.command {
        Command::Equilibrium { check_theorem, .. } => cmd_equilibrium(&cfg, out, check_theorem),
        Command::Policy { .. } => cmd_policy(&cfg, out),
        Command::Steward { .. } => cmd_steward(&cfg, out),
        Command::Platform { .. } => cmd_platform(&cfg, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
