//! `mspk`: file-driven runs of the multi-species SK toolkit.
//!
//! Exit codes: 0 success, 1 verification failure or rerun mismatch, 2 input
//! or configuration error.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::Cli;
use commands::{ensure_dir, execute, write_manifest, Context};

fn resolve_seed(flag: u64) -> Result<u64, String> {
    match std::env::var("MSPK_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("MSPK_SEED={v:?} is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    let seed = resolve_seed(cli.seed)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("cannot start {n} threads: {e}"))?;
    }
    let ctx = Context { seed, out_dir: cli.out_dir };
    ensure_dir(&ctx.out_dir).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let outcome = execute(&cli.command, &ctx).map_err(|e| e.to_string())?;
    write_manifest(&cli.command, &ctx, &outcome, start.elapsed().as_secs_f64()).map_err(|e| e.to_string())?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
