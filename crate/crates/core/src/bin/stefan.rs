use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stefan_spde::config::{Mode, RunConfig};
use stefan_spde::io::{execute, exit, ExecOptions};
use stefan_spde::Error;

/// Run a simulation, ensemble, obstacle solve, Picard iteration, kernel
/// sweep or trajectory diagnosis described by a TOML file.
#[derive(Debug, Parser)]
#[command(name = "stefan", version)]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// simulate, ensemble, obstacle, picard, verify-kernel or diagnose.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_seeds: Option<u64>,
    /// Output directory; overrides the configuration file.
    #[arg(long, env = "STEFAN_OUT_DIR")]
    out: Option<PathBuf>,
    /// Ensemble worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    allow_outside_theory: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::from_name(s).ok_or_else(|| format!("unknown mode {s:?}"))
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(mode) = cli.mode {
        config.mode = mode;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.n_seeds {
        config.n_seeds = n;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.flags.allow_outside_theory |= cli.allow_outside_theory;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|c| execute(&c, ExecOptions { workers: cli.workers }));
    let code = match result {
        Ok(outcome) => {
            if outcome.exit_code != exit::OK {
                eprintln!("stefan: finished with status {}", outcome.status);
            }
            println!("{}", outcome.manifest_path.display());
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("stefan: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
