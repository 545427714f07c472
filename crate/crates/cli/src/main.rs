//! `qvelab` command-line front end.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
//! Grid commands that lose some points still write every row (failed rows
//! carry `converged=false`/`ok=false`) and exit with 3.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use commands::{build_context, load_model, run, Failure};
use output::{manifest_path, model_hash, to_json, versions, write_atomic, RunManifest};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()))
}

fn fail(code: u8, msg: &str) -> u8 {
    eprintln!("qvelab: {msg}");
    code
}

fn run_cli(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => EXIT_VALIDATION,
            };
        }
    };
    if cli.common.threads == 0 {
        return fail(EXIT_VALIDATION, "--threads must be at least 1");
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.common.threads).build_global() {
        return fail(EXIT_VALIDATION, &format!("cannot start thread pool: {e}"));
    }
    let model = match load_model(&cli.common) {
        Ok(m) => m,
        Err(f) => return report_failure(f),
    };
    let hash = model_hash(&model);
    let ctx = match build_context(&cli.common, &cli.command, model, hash) {
        Ok(c) => c,
        Err(f) => return report_failure(f),
    };
    let emission = match run(&cli.command, &ctx) {
        Ok(e) => e,
        Err(f) => return report_failure(f),
    };
    let failed = emission.failed_points();
    match &cli.common.out {
        Some(path) => {
            let config = match serde_json::to_value(&cli) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_VALIDATION, &e.to_string()),
            };
            let manifest = RunManifest {
                command: cli.command.name(),
                model_hash: &ctx.hash,
                config: &config,
                seed: ctx.seed,
                versions: versions(),
                outputs: vec![path.display().to_string()],
                failure_mask: emission.failure_mask.as_deref().filter(|_| failed > 0),
            };
            let written = to_json(&manifest)
                .map_err(|e| e.to_string())
                .and_then(|m| {
                    write_atomic(path, &emission.text).map_err(|e| e.to_string())?;
                    write_atomic(&manifest_path(path), &m).map_err(|e| e.to_string())
                });
            if let Err(e) = written {
                return fail(EXIT_VALIDATION, &format!("cannot write {}: {e}", path.display()));
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            if out.write_all(emission.text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return fail(EXIT_VALIDATION, "cannot write to stdout");
            }
        }
    }
    if failed > 0 {
        return fail(EXIT_NUMERIC, &format!("{failed} grid point(s) failed; rows are marked in the output"));
    }
    0
}

fn report_failure(f: Failure) -> u8 {
    match f {
        Failure::Validation(msg) => fail(EXIT_VALIDATION, &msg),
        Failure::Numeric(msg) => fail(EXIT_NUMERIC, &msg),
    }
}
