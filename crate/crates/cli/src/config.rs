//! TOML scenario files.
//!
//! Top-level keys and the keys of the `[group.sub]` table matching the
//! invoked command are flag names (`-` or `_` separated). A top-level
//! `command = "cs eval"` supplies the subcommand when the command line has
//! none. Values reach the parser as if typed, after the explicit flags, and
//! only for flags the command line did not set.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;
use toml::{Table, Value};

use crate::args::Cli;
use crate::UsageError;

const GROUPS: [&str; 6] = ["cs", "gauge", "hol", "rep", "lines", "spec"];

pub fn load(path: &Path) -> Result<Table, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::flag("--config", format!("cannot read {}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| UsageError::flag("--config", format!("{}: {e}", path.display())))
}

/// The `--config` value, if present on the command line.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Inserts the scenario's `command` when the command line names none.
pub fn with_command(argv: Vec<OsString>, config: &Table) -> Result<Vec<OsString>, UsageError> {
    let Some(command) = config.get("command") else {
        return Ok(argv);
    };
    let command = command
        .as_str()
        .ok_or_else(|| UsageError::flag("--config", "`command` must be a string such as \"cs eval\"".into()))?;
    if argv.iter().skip(1).any(|a| GROUPS.contains(&a.to_string_lossy().as_ref())) {
        return Ok(argv);
    }
    let mut out = vec![argv[0].clone()];
    out.extend(command.split_whitespace().map(OsString::from));
    out.extend(argv.into_iter().skip(1));
    Ok(out)
}

/// `[group, sub]` named on the command line.
fn command_path(argv: &[OsString]) -> Vec<String> {
    let tokens: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match tokens.iter().position(|t| GROUPS.contains(&t.as_str())) {
        Some(i) => tokens[i..].iter().take(2).cloned().collect(),
        None => Vec::new(),
    }
}

fn given(argv: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefixed = format!("--{long}=");
    argv.iter().skip(1).any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&prefixed)
    })
}

fn render(key: &str, v: &Value) -> Result<Option<String>, UsageError> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Integer(i) => Ok(Some(i.to_string())),
        Value::Float(f) => Ok(Some(format!("{f:e}"))),
        Value::Boolean(_) => Ok(None),
        _ => Err(UsageError::flag("--config", format!("key `{key}` must be a string, number or boolean"))),
    }
}

/// Extra argv entries contributed by `config` for the command in `argv`.
pub fn injected_args(config: &Table, argv: &[OsString]) -> Result<Vec<OsString>, UsageError> {
    let path = command_path(argv);
    let mut cmd = Cli::command();
    cmd.build();
    let mut leaf_cmd = &cmd;
    for name in &path {
        match leaf_cmd.find_subcommand(name) {
            Some(sub) => leaf_cmd = sub,
            // Unknown names are reported by the parser.
            None => return Ok(Vec::new()),
        }
    }
    let mut entries: Vec<(String, Value)> = Vec::new();
    for (k, v) in config {
        if k == "command" {
            continue;
        }
        match v {
            Value::Table(t) if GROUPS.contains(&k.as_str()) => {
                if path.first() == Some(k) {
                    for (k2, v2) in t {
                        match v2 {
                            Value::Table(t2) if path.get(1) == Some(k2) => {
                                entries.extend(t2.iter().map(|(a, b)| (a.clone(), b.clone())));
                            }
                            Value::Table(_) => {}
                            other => entries.push((k2.clone(), other.clone())),
                        }
                    }
                }
            }
            other => entries.push((k.clone(), other.clone())),
        }
    }
    let mut out = Vec::new();
    for (key, value) in entries {
        let long = key.replace('_', "-");
        if long == "config" {
            return Err(UsageError::flag("--config", "a scenario cannot name another config".into()));
        }
        let arg = leaf_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| UsageError::flag("--config", format!("key `{key}` is not a flag of `{}`", path.join(" "))))?;
        let from_env = arg.get_env().is_some_and(|var| std::env::var_os(var).is_some());
        if given(argv, &long) || from_env {
            continue;
        }
        match render(&key, &value)? {
            Some(text) => out.push(OsString::from(format!("--{long}={text}"))),
            None => {
                if value.as_bool() == Some(true) {
                    out.push(OsString::from(format!("--{long}")));
                }
            }
        }
    }
    Ok(out)
}
