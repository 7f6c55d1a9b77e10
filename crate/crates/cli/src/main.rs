mod args;
mod commands;
mod error;
mod output;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use crate::args::{Cli, Command, ReplayArgs};
use crate::commands::{run_check, run_exact, run_simulate, Outcome};
use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, RunManifest};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("glosten: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(threads);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Replay(args) => replay(&args),
        command => run(command),
    })
}

fn replay(args: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    let mut command = manifest.invocation;
    let dir = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .manifest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    };
    match command.output_mut() {
        Some(output) => output.out = dir,
        None => return Err(CliError::Usage("a manifest cannot record a replay".into())),
    }
    run(command)
}

/// Runs one command, then writes its manifest even when a check fails.
fn run(command: Command) -> CliResult<()> {
    let start = Instant::now();
    let mut command = command;
    let dir = command.output_mut().expect("replay is dispatched separately").out.clone();
    let mut out = OutputDir::create(&dir)?;
    let outcome: Outcome = match &command {
        Command::Simulate(a) => run_simulate(a, &mut out)?,
        Command::Exact(a) => run_exact(a, &mut out)?,
        Command::Verify(check) => run_check(check, &mut out)?,
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    };
    let manifest = RunManifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: command.seed(),
        outputs: out.written().to_vec(),
        passed: outcome.passed,
        threads: rayon::current_num_threads(),
        duration_seconds: start.elapsed().as_secs_f64(),
        invocation: command.clone(),
    };
    out.write_json(&RunManifest::file_name(&command), &manifest)?;
    println!("{}: {}", command.name(), outcome.summary);
    println!("wrote {} files to {}", manifest.outputs.len() + 1, out.path().display());
    match outcome.passed {
        Some(false) => Err(CliError::CheckFailed(command.name().to_string())),
        _ => Ok(()),
    }
}
