//! The pipeline stages. Each submodule exposes `run(&RunConfig) ->
//! anyhow::Result<StageManifest>`; shared row types live next to the stage
//! that produces them, and this module holds the small I/O helpers they
//! all use.

pub mod aggregate;
pub mod anchor;
pub mod calibrate;
pub mod controls;
pub mod disclose;
pub mod features;
pub mod ingest;
pub mod periodicity;
pub mod report;

use crate::config::{ConfigError, RunConfig};
use anyhow::Context;
use dicc_core::anchor::llm::{CassetteGenerator, HttpGenerator, RecordingGenerator, TextGenerator};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Write rows as JSON Lines (one compact JSON object per line).
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a JSON Lines artifact produced by [`write_jsonl`].
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Write a pretty-printed JSON artifact with a trailing newline.
pub(crate) fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    std::fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// An optional float as a CSV cell (empty when absent).
pub(crate) fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Build the text generator the anchor and calibrate stages talk to.
///
/// With `llm.base_url` set the stage calls the live endpoint — and records
/// replies into `paths.cassette` when one is configured, so the run can be
/// replayed offline later. Without an endpoint the cassette is mandatory
/// and replies come from it verbatim.
pub(crate) fn make_generator(
    config: &RunConfig,
    stage: &str,
) -> anyhow::Result<Box<dyn TextGenerator>> {
    match &config.llm.base_url {
        Some(url) => {
            let http = HttpGenerator::new(
                url,
                std::time::Duration::from_secs(config.llm.timeout_secs),
                config.llm.retries,
            );
            match &config.paths.cassette {
                Some(path) => Ok(Box::new(RecordingGenerator::new(http, path)?)),
                None => Ok(Box::new(http)),
            }
        }
        None => {
            let path = config.require_cassette(stage)?;
            if !path.exists() {
                return Err(ConfigError::Missing {
                    key: "paths.cassette".to_string(),
                    stage: stage.to_string(),
                }
                .into());
            }
            Ok(Box::new(CassetteGenerator::load(path)?))
        }
    }
}
