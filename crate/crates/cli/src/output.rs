use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::args::Output;
use crate::{internal_err, CliResult, OUT_ENV};

/// Resolves and creates the output directory of `command`.
pub fn out_dir(output: &Output, command: &str) -> CliResult<PathBuf> {
    let dir = match &output.out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("sigdetect-out"))
            .join(command),
    };
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(internal_err)?;
    Ok(dir)
}

#[derive(Serialize)]
struct Replay<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
}

fn config_json<C: Serialize>(command: &str, config: &C) -> String {
    serde_json::to_string(&Replay {
        tool: "sigdetect",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    })
    .expect("config serializes")
}

/// Header lines recording the command and its full configuration.
pub fn header<C: Serialize>(command: &str, config: &C) -> String {
    format!("# {}\n\n", config_json(command, config))
}

pub fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal_err)
}

/// Writes `config.json` for replay.
pub fn write_config<C: Serialize>(dir: &Path, command: &str, config: &C) -> CliResult<()> {
    write(dir, "config.json", &(config_json(command, config) + "\n"))
}

/// Writes `<name>.txt` (with header) and prints it.
pub fn write_report<C: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    config: &C,
    body: &str,
) -> CliResult<()> {
    print!("{body}");
    write(dir, &format!("{name}.txt"), &(header(command, config) + body))
}
