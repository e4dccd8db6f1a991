//! Per-stage manifests: what a stage read, what it wrote, and the content
//! hashes of both, so any later stage (and the final report) can verify
//! that the artifact chain is intact and was produced by this config.
//!
//! Manifests are deliberately free of timestamps, host names, and absolute
//! paths: two runs of the same config over the same inputs produce
//! byte-identical manifests. Artifacts are keyed by file name within the
//! run's output directory; external inputs (archives, models) are keyed by
//! their file name as well.

use crate::config::RunConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    /// No manifest file for `stage` — it has not been run in this output
    /// directory yet.
    #[error("no manifest for stage `{stage}` in {dir}: run the `{stage}` stage first")]
    MissingStage { stage: String, dir: PathBuf },
    /// An artifact a stage depends on is absent.
    #[error("artifact `{name}` is missing from {dir}: run the `{stage}` stage first")]
    MissingArtifact {
        name: String,
        stage: String,
        dir: PathBuf,
    },
    #[error("cannot access {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("manifest {path} is not valid JSON: {message}")]
    Corrupt { path: PathBuf, message: String },
    /// An artifact on disk no longer matches the hash its producing stage
    /// recorded — something rewrote it after the stage ran.
    #[error(
        "artifact `{artifact}` does not match the hash recorded by stage `{stage}` \
         (recorded {expected}, found {actual})"
    )]
    HashMismatch {
        stage: String,
        artifact: String,
        expected: String,
        actual: String,
    },
    /// Two manifests in the same output directory came from different
    /// configs.
    #[error("stages `{a}` and `{b}` were run with different configs; re-run the pipeline")]
    ConfigMismatch { a: String, b: String },
}

/// The record one stage leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    /// Hash of the config (less the output location) the stage ran under.
    pub config_hash: String,
    pub master_seed: u64,
    /// Input name → SHA-256 of its content at read time.
    pub inputs: BTreeMap<String, String>,
    /// Output name → SHA-256 of its content at write time.
    pub outputs: BTreeMap<String, String>,
    /// Stage-specific tallies for the report (counts, exclusions, …).
    pub counts: BTreeMap<String, serde_json::Value>,
}

/// SHA-256 of a file's content, streamed, as lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String, ManifestError> {
    let mut file = std::fs::File::open(path).map_err(|e| ManifestError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| ManifestError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Identity hash of a run configuration.
///
/// The output directory is blanked before hashing so the same study run
/// into two different directories carries the same identity — that is what
/// lets byte-identical reruns land in a fresh directory.
pub fn config_hash(config: &RunConfig) -> String {
    let mut canonical = config.clone();
    canonical.paths.output_dir = PathBuf::new();
    let json = serde_json::to_string(&canonical).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl StageManifest {
    pub fn new(stage: &str, config: &RunConfig) -> StageManifest {
        StageManifest {
            stage: stage.to_string(),
            config_hash: config_hash(config),
            master_seed: config.master_seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
        }
    }

    /// `<stage>.manifest.json`
    pub fn file_name(stage: &str) -> String {
        format!("{stage}.manifest.json")
    }

    /// Record an artifact in the output directory as an input.
    pub fn record_input(&mut self, dir: &Path, name: &str) -> Result<(), ManifestError> {
        let hash = file_sha256(&dir.join(name))?;
        self.inputs.insert(name.to_string(), hash);
        Ok(())
    }

    /// Record an upstream artifact as an input, first checking that its
    /// producing stage has actually run — so a skipped stage surfaces as
    /// "run `X` first" rather than as a missing file.
    pub fn record_artifact_input(
        &mut self,
        dir: &Path,
        name: &str,
        producer_stage: &str,
    ) -> Result<(), ManifestError> {
        require_artifact(dir, name, producer_stage)?;
        self.record_input(dir, name)
    }

    /// Record an external file (archive, model, cassette) as an input,
    /// keyed by its file name.
    pub fn record_input_path(&mut self, path: &Path) -> Result<(), ManifestError> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let hash = file_sha256(path)?;
        self.inputs.insert(name, hash);
        Ok(())
    }

    /// Record an artifact this stage just wrote.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<(), ManifestError> {
        let hash = file_sha256(&dir.join(name))?;
        self.outputs.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn count(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.counts.insert(key.to_string(), value.into());
    }

    /// Write `<stage>.manifest.json` into `dir` and return its path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, ManifestError> {
        let path = dir.join(Self::file_name(&self.stage));
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| ManifestError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(path)
    }

    /// Load the manifest a previous stage left in `dir`.
    pub fn load(dir: &Path, stage: &str) -> Result<StageManifest, ManifestError> {
        let path = dir.join(Self::file_name(stage));
        if !path.exists() {
            return Err(ManifestError::MissingStage {
                stage: stage.to_string(),
                dir: dir.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(&path).map_err(|e| ManifestError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ManifestError::Corrupt {
            path,
            message: e.to_string(),
        })
    }
}

/// Path of an artifact a stage depends on, or an error telling the user
/// which stage produces it.
pub fn require_artifact(
    dir: &Path,
    name: &str,
    producer_stage: &str,
) -> Result<PathBuf, ManifestError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(ManifestError::MissingArtifact {
            name: name.to_string(),
            stage: producer_stage.to_string(),
            dir: dir.to_path_buf(),
        });
    }
    Ok(path)
}

/// Result of [`verify_chain`].
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    /// Stage → hash of its manifest file, in verification order.
    pub manifest_hashes: BTreeMap<String, String>,
    /// Artifacts re-hashed and confirmed against their manifests.
    pub verified_artifacts: u64,
}

/// Re-hash every recorded output of every listed stage and confirm the
/// manifests agree with the files on disk and with each other.
pub fn verify_chain(dir: &Path, stages: &[&str]) -> Result<ChainReport, ManifestError> {
    let mut manifest_hashes = BTreeMap::new();
    let mut verified = 0u64;
    let mut first: Option<(String, String)> = None;
    for &stage in stages {
        let manifest = StageManifest::load(dir, stage)?;
        match &first {
            None => first = Some((stage.to_string(), manifest.config_hash.clone())),
            Some((first_stage, hash)) if *hash != manifest.config_hash => {
                return Err(ManifestError::ConfigMismatch {
                    a: first_stage.clone(),
                    b: stage.to_string(),
                });
            }
            Some(_) => {}
        }
        for (name, expected) in &manifest.outputs {
            let path = require_artifact(dir, name, stage)?;
            let actual = file_sha256(&path)?;
            if actual != *expected {
                return Err(ManifestError::HashMismatch {
                    stage: stage.to_string(),
                    artifact: name.clone(),
                    expected: expected.clone(),
                    actual,
                });
            }
            verified += 1;
        }
        manifest_hashes.insert(
            stage.to_string(),
            file_sha256(&dir.join(StageManifest::file_name(stage)))?,
        );
    }
    Ok(ChainReport {
        manifest_hashes,
        verified_artifacts: verified,
    })
}
