//! `--config FILE` support: `key = value` lines become command-line flags
//! unless the same flag was given explicitly.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Command};
use diurnal_core::{Error, Result};

/// One `key = value` entry; keys are long flag names without the dashes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        out.push(Entry {
            line: i + 1,
            key: key.trim().trim_start_matches("--").replace('_', "-"),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn given(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefixed = format!("--{long}=");
    args.iter().skip(1).any(|a| {
        let s = a.to_string_lossy();
        s == flag.as_str() || s.starts_with(&prefixed)
    })
}

/// Appends flags from the config file named by `--config`, if any.
pub fn expand_args(cmd: &Command, args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let entries = parse(&text)?;

    let sub = args
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()));
    let lookup = |key: &str| {
        cmd.get_arguments()
            .chain(sub.into_iter().flat_map(|s| s.get_arguments()))
            .find(|a| a.get_long() == Some(key))
    };

    let mut out = args.clone();
    for entry in entries {
        if entry.key == "config" {
            return Err(Error::Contract(format!("line {}: config files cannot nest", entry.line)));
        }
        let arg = lookup(&entry.key).ok_or_else(|| {
            Error::Contract(format!(
                "{} line {}: unknown key {:?}",
                path.display(),
                entry.line,
                entry.key
            ))
        })?;
        if given(&args, &entry.key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match entry.value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{}", entry.key).into()),
                "false" | "no" | "0" => {}
                v => {
                    return Err(Error::Contract(format!(
                        "line {}: {} expects true or false, got {v:?}",
                        entry.line, entry.key
                    )))
                }
            },
            _ => out.push(format!("--{}={}", entry.key, entry.value).into()),
        }
    }
    Ok(out)
}
