//! The `cstk` command-line front-end.
//!
//! Exit codes: 0 on success, 2 for invalid input (the diagnostic names the
//! offending flag), 3 when a solver does not converge and 1 for any other
//! runtime failure. Failures after validation print a JSON object.

pub mod args;
pub mod commands;
pub mod config;
pub mod emit;
pub mod inputs;

use std::ffi::OsString;
use std::io::Write;

use clap::{CommandFactory, FromArgMatches};
use serde_json::json;

use args::Cli;
use emit::{emit, Format};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", flag.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
pub struct UsageError {
    pub flag: Option<String>,
    pub message: String,
}

impl UsageError {
    pub fn flag(flag: &str, message: String) -> Self {
        Self { flag: Some(flag.to_string()), message }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Core(#[from] cstk::Error),
}

/// Output of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(message: String) -> Self {
        Self { code: EXIT_USAGE, stdout: String::new(), stderr: message }
    }
}

fn failure(e: &cstk::Error) -> Outcome {
    use cstk::Error as E;
    let validation = matches!(
        e,
        E::DegreeTooHigh { .. }
            | E::DegreeMismatch { .. }
            | E::GridMismatch
            | E::DimMismatch { .. }
            | E::InvalidGrid(_)
            | E::RoughGauge { .. }
            | E::NotFlat { .. }
            | E::Parse { .. }
            | E::InvalidInput(_)
            | E::Format(_)
            | E::Io(_)
    );
    if validation {
        return Outcome::usage(format!("error: {e}\n"));
    }
    let (code, kind) = match e {
        E::NonConvergence { .. } | E::FlatSearch { .. } | E::ConvergenceFailure(_) => (EXIT_NON_CONVERGENCE, "non_convergence"),
        E::NotInteger { .. } => (EXIT_RUNTIME, "not_integer"),
        E::IllConditioned { .. } => (EXIT_RUNTIME, "ill_conditioned"),
        E::StepTooCoarse(_) => (EXIT_RUNTIME, "step_too_coarse"),
        E::BranchPoint { .. } => (EXIT_RUNTIME, "branch_point"),
        _ => (EXIT_RUNTIME, "runtime"),
    };
    let mut body = json!({"error": kind, "message": e.to_string()});
    match e {
        E::NonConvergence { residual, iterations } | E::FlatSearch { residual, iterations, .. } => {
            body["residual"] = json!(residual);
            body["iterations"] = json!(iterations);
        }
        E::IllConditioned { gap } => body["gap"] = json!(gap),
        _ => {}
    }
    Outcome { code, stdout: emit::to_json(&body), stderr: format!("error: {e}\n") }
}

fn parse(argv: Vec<OsString>) -> Result<Cli, Outcome> {
    let clap_error = |e: clap::Error| {
        let text = e.render().to_string();
        if e.use_stderr() {
            Outcome { code: e.exit_code(), stdout: String::new(), stderr: text }
        } else {
            Outcome { code: e.exit_code(), stdout: text, stderr: String::new() }
        }
    };
    let config = match config::config_path(&argv) {
        Some(path) => Some(config::load(path.as_ref()).map_err(|e| Outcome::usage(format!("error: {e}\n")))?),
        None => None,
    };
    let argv = match &config {
        Some(c) => config::with_command(argv, c).map_err(|e| Outcome::usage(format!("error: {e}\n")))?,
        None => argv,
    };
    let argv = match &config {
        Some(c) => {
            let extra = config::injected_args(c, &argv).map_err(|e| Outcome::usage(format!("error: {e}\n")))?;
            argv.into_iter().chain(extra).collect()
        }
        None => argv,
    };
    let matches = Cli::command().try_get_matches_from(&argv).map_err(clap_error)?;
    Cli::from_arg_matches(&matches).map_err(clap_error)
}

/// Runs one invocation and captures its output.
pub fn run(argv: Vec<OsString>) -> Outcome {
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(outcome) => return outcome,
    };
    let format = if cli.global.json { Format::Json } else { cli.global.format };
    let pool = match cli.global.jobs {
        Some(0) => return Outcome::usage("error: --jobs: must be at least 1\n".into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => return Outcome::usage(format!("error: --jobs: {e}\n")),
    };
    let result = pool.install(|| commands::execute(&cli));
    match result {
        Ok(report) => {
            let text = emit(&report, format);
            match &cli.global.out {
                Some(path) => match std::fs::write(path, &text) {
                    Ok(()) => Outcome { code: 0, stdout: String::new(), stderr: String::new() },
                    Err(e) => Outcome::usage(format!("error: --out: cannot write {}: {e}\n", path.display())),
                },
                None => Outcome { code: 0, stdout: text, stderr: String::new() },
            }
        }
        Err(CliError::Usage(e)) => Outcome::usage(format!("error: {e}\n")),
        Err(CliError::Core(e)) => failure(&e),
    }
}

/// Runs and writes to the process streams; returns the exit code.
pub fn main_with(argv: Vec<OsString>) -> i32 {
    let outcome = run(argv);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    outcome.code
}
