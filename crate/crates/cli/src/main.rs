//! `deltaqi` command-line front end.

mod config;
mod emit;
mod report;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Cli, RunConfig, UsageError};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Variant name of a library error, e.g. `QuadratureFailure`.
fn error_kind(e: &deltaqi::Error) -> String {
    let debug = format!("{e:?}");
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn failure(kind: &str, message: String, config: Option<&RunConfig>) -> ExitCode {
    let doc = json!({
        "status": "error",
        "error": { "kind": kind, "message": message },
        "config": config,
    });
    eprintln!("{}", serde_json::to_string_pretty(&doc).expect("json serializes"));
    ExitCode::from(EXIT_FAILURE)
}

fn usage_failure(e: &UsageError) -> ExitCode {
    eprintln!("error: {e}\n\nFor more information, try '--help'.");
    ExitCode::from(EXIT_USAGE)
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var("DELTAQI_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| UsageError {
        parameter: "DELTAQI_THREADS".into(),
        message: format!("expected a positive integer, got `{raw}`"),
    })?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = configure_threads() {
        return usage_failure(&e);
    }
    let cfg = match RunConfig::from_cli(cli) {
        Ok(cfg) => cfg,
        Err(e) => return usage_failure(&e),
    };
    let report = match report::run(&cfg) {
        Ok(r) => r,
        Err(e) => return failure(&error_kind(&e), e.to_string(), Some(&cfg)),
    };
    if let Err(e) = emit::emit(&report, &cfg) {
        let target = cfg.output.as_ref().map_or("stdout".to_string(), |p| p.display().to_string());
        return failure("Io", format!("cannot write {target}: {e}"), Some(&cfg));
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("invariant check `{}` failed: value {} vs threshold {}", c.name, c.value, c.threshold);
        }
        ExitCode::from(EXIT_FAILURE)
    }
}
