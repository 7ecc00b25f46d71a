//! Drive any mode from a TOML document, as the `stefan` binary does, and
//! list the artifacts recorded in the manifest.
//!
//! cargo run --release --example run_config -- path/to/run.toml

use stefan_spde::config::{parse_config, RunConfig};
use stefan_spde::io::{execute, ExecOptions};

const DEFAULT: &str = r#"
mode = "ensemble"
preset = "sigma_b"
seed = 5
n_seeds = 8
output_dir = "out/ensemble_sigma_b"

[grid]
n = 64
t = 0.05
"#;

fn main() -> stefan_spde::Result<()> {
    let config: RunConfig = match std::env::args().nth(1) {
        Some(path) => parse_config(&std::fs::read_to_string(&path).expect("readable config"))?,
        None => parse_config(DEFAULT)?,
    };
    let outcome = execute(&config, ExecOptions::default())?;
    println!("status {} (exit code {})", outcome.status, outcome.exit_code);
    for (file, hash) in outcome.manifest.hashes() {
        println!("{file:<28} {}", &hash[..16]);
    }
    println!("manifest: {}", outcome.manifest_path.display());
    Ok(())
}
