//! Command-line driver: dataset generation, model training, and the
//! diagnostic suites. Every run resolves its configuration first, writes
//! it to `manifest.json` in the output directory, and only then starts
//! computing, so any output can be reproduced from its manifest alone.
//!
//! Exit codes: 0 success, 1 invalid arguments, 2 numerical failure,
//! 3 I/O error.

mod diagnose;
mod gen_data;
mod train_cmd;

use clap::{Parser, Subcommand};
use meshfree_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "meshfree",
    about = "Mesh-free discrete differential operators: classical and learned stencil weights, diagnostics, and a Taylor-Green vortex solver",
    version
)]
struct Cli {
    /// Worker threads for parallel diagnostics (1 forces the fully
    /// deterministic sequential path).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample normalized stencil geometries into a training dataset.
    GenData(gen_data::GenDataArgs),
    /// Train a stencil-weight model on a dataset.
    Train(train_cmd::TrainArgs),
    /// Run one of the diagnostic suites.
    Diagnose(diagnose::DiagnoseArgs),
}

/// Default output root: `$MESHFREE_OUT` or `./out`.
fn default_out(subcommand: &str) -> PathBuf {
    let root = std::env::var_os("MESHFREE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    root.join(subcommand)
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Write the run manifest before any computation starts and return the
/// resolved config hash referenced by every output sidecar.
fn write_manifest(
    out_dir: &std::path::Path,
    subcommand: &str,
    seed: u64,
    config: serde_json::Value,
) -> Result<u64, Error> {
    std::fs::create_dir_all(out_dir)?;
    let config_hash = fnv64(config.to_string().as_bytes());
    let manifest = serde_json::json!({
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": format!("{config_hash:016x}"),
        "output_dir": out_dir.to_string_lossy(),
    });
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(out_dir.join("manifest.json"), body)?;
    Ok(config_hash)
}

fn run(cli: Cli) -> Result<(), Error> {
    if cli.threads == 0 {
        return Err(Error::invalid("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    match cli.command {
        Command::GenData(args) => gen_data::run(args),
        Command::Train(args) => train_cmd::run(args),
        Command::Diagnose(args) => diagnose::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap also lands here for --help/--version, which are success
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
