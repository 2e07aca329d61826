use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lvctl::config::Config;
use lvctl::scenario::run_scenario;
use lvctl::Error;

#[derive(Parser)]
#[command(name = "lvctl", version, about = "Controlled Lotka-Volterra competition scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `[preset] name`.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (default: `[output] dir`, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweeps and multi-start probes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `[preset] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<String, Error> {
    let Command::Run {
        config,
        preset,
        out,
        jobs,
        seed,
    } = cli.command;
    let mut cfg = Config::from_path(&config)?;
    if let Some(name) = preset {
        cfg.set("preset", "name", &name);
    }
    if let Some(seed) = seed {
        cfg.set("preset", "seed", &seed.to_string());
    }
    let out = out
        .or_else(|| cfg.get_str("output", "dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    // probes use the global pool; sweeps build their own
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    Ok(run_scenario(&cfg, &out, jobs)?.summary)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
