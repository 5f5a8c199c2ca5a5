use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bridgesim::config::load_config;
use bridgesim::runner::{load_external, run_to_dir, seed_from_env, split_values, sweep, RunError, SeedOverrides};
use bridgesim_core::harness::ScenarioConfig;
use bridgesim_core::writers::ExternalSubmission;
use clap::{Parser, Subcommand};

/// Deterministic simulator for a bridging-scored community notes ecosystem.
#[derive(Parser)]
#[command(name = "bridgesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Protocol file of external submissions to replay.
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Run one scenario per value of a config parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config path, e.g. `policy_update.novelty_weight`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, each JSON or a bare string.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn external_for(config: &ScenarioConfig, config_path: &Path, flag: Option<&Path>) -> Result<Vec<ExternalSubmission>, RunError> {
    let path = match (flag, &config.ingest_file) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        (None, None) => return Ok(Vec::new()),
    };
    load_external(&path)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let env = seed_from_env()?;
    match cli.command {
        Command::Run {
            config: path,
            out,
            seed,
            ingest,
        } => {
            let mut config = load_config(&path)?;
            SeedOverrides { flag: seed, env }.apply(&mut config);
            let external = external_for(&config, &path, ingest.as_deref())?;
            run_to_dir(&config, &external, &out)?;
        }
        Command::Sweep {
            config: path,
            param,
            values,
            out,
            seed,
        } => {
            let config = load_config(&path)?;
            let external = external_for(&config, &path, None)?;
            let base = serde_json::to_value(&config).expect("config serializes");
            let dirs = sweep(
                &base,
                &param,
                &split_values(&values),
                SeedOverrides { flag: seed, env },
                &external,
                &out,
            )?;
            for d in dirs {
                println!("{}", d.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bridgesim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
