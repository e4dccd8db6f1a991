//! Stage 9 — `report`: verify the whole artifact chain and summarize the
//! run in one JSON document.
//!
//! Verification re-hashes every artifact every upstream stage recorded and
//! confirms all manifests were produced by the same config. The report
//! then carries each stage's manifest hash and tallies, plus a flat index
//! of artifact hashes, so the run can be audited from this one file.

use crate::config::RunConfig;
use crate::manifest::{config_hash, verify_chain, StageManifest};
use crate::pipeline::{artifacts, Stage};
use crate::stages::write_json_pretty;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
struct StageSummary {
    manifest_sha256: String,
    outputs: BTreeMap<String, String>,
    counts: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
struct Report {
    config_hash: String,
    master_seed: u64,
    verified_artifacts: u64,
    stages: BTreeMap<String, StageSummary>,
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("report", config);
    let dir = &config.paths.output_dir;
    let upstream: Vec<&str> = Stage::ALL
        .iter()
        .map(|s| s.name())
        .filter(|n| *n != "report")
        .collect();

    let chain = verify_chain(dir, &upstream)?;

    let mut stages = BTreeMap::new();
    for name in &upstream {
        let stage_manifest = StageManifest::load(dir, name)?;
        if stage_manifest.config_hash != config_hash(config) {
            return Err(anyhow::anyhow!(
                "stage `{name}` was run with a different config; re-run the pipeline"
            ));
        }
        manifest.record_input(dir, &StageManifest::file_name(name))?;
        stages.insert(
            name.to_string(),
            StageSummary {
                manifest_sha256: chain.manifest_hashes[*name].clone(),
                outputs: stage_manifest.outputs,
                counts: stage_manifest.counts,
            },
        );
    }

    let report = Report {
        config_hash: config_hash(config),
        master_seed: config.master_seed,
        verified_artifacts: chain.verified_artifacts,
        stages,
    };
    write_json_pretty(&dir.join(artifacts::REPORT), &report)?;
    manifest.record_output(dir, artifacts::REPORT)?;

    manifest.count("stages_verified", upstream.len() as u64);
    manifest.count("artifacts_verified", chain.verified_artifacts);
    Ok(manifest)
}
