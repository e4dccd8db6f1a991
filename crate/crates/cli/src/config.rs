//! Run configuration: one TOML file describing inputs, outputs, windows,
//! and analysis settings for a whole pipeline run.
//!
//! Every stochastic step in the pipeline derives its RNG stream from
//! `master_seed`, so the config file plus the input archives fully
//! determine every artifact. Relative paths are resolved against the
//! config file's own directory, which keeps runs relocatable.
//!
//! Optional service endpoints can be supplied through the environment
//! (`DICC_LLM_URL`, `DICC_EMBED_URL`); everything else lives in the file.

use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

/// Configuration problems, phrased so the offending TOML key is named.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// A structurally valid config with an out-of-range or inconsistent
    /// value; `key` is the TOML path of the offending entry.
    #[error("config key `{key}` is invalid: {message}")]
    Invalid { key: String, message: String },
    /// A key that is optional in general but required by the stage being
    /// run (for example `paths.topic_model` for the features stage).
    #[error("config key `{key}` must be set to run the `{stage}` stage")]
    Missing { key: String, stage: String },
}

/// The whole run configuration. `master_seed` has no default on purpose:
/// a run must state its seed so results are attributable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Root seed for every derived RNG stream in the run.
    pub master_seed: u64,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub periodicity: PeriodicitySection,
    #[serde(default)]
    pub synth: SynthSection,
}

/// Input and output locations. Optional entries stay `None` when the run
/// does not need them (e.g. no cassette when a live LLM endpoint is used).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    /// Post archives (JSONL, optionally `.zst`), read in the given order.
    /// The clinical cohorts and the control candidate pool both come from
    /// this corpus.
    pub archives: Vec<PathBuf>,
    /// Directory all artifacts and manifests are written to.
    pub output_dir: PathBuf,
    /// Topic model TSV (required by the features stage).
    pub topic_model: Option<PathBuf>,
    /// LLM response cassette TSV. Required when `llm.base_url` is unset;
    /// with a live endpoint it records replies for later offline runs.
    pub cassette: Option<PathBuf>,
    /// Precomputed sentence embeddings (for `embedding.provider =
    /// "precomputed"`).
    pub embeddings: Option<PathBuf>,
    /// Lexicon overrides; the bundled lexica are used when unset.
    pub sentiment_lexicon: Option<PathBuf>,
    pub age_lexicon: Option<PathBuf>,
    pub gender_lexicon: Option<PathBuf>,
    /// Where `dicc synth` writes the generated ground truth. The pipeline
    /// stages never read it; tests compare artifacts against it.
    pub ground_truth: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            archives: Vec::new(),
            output_dir: PathBuf::from("out"),
            topic_model: None,
            cassette: None,
            embeddings: None,
            sentiment_lexicon: None,
            age_lexicon: None,
            gender_lexicon: None,
            ground_truth: None,
        }
    }
}

/// Archive-reading settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// Salt for username hashing. Fixed per study so the same account maps
    /// to the same pseudonym across archives.
    pub salt: String,
    /// Override for the stopword-density threshold of the English check.
    pub english_threshold: Option<f64>,
    /// Optional `[min, max)` bound on post timestamps (epoch seconds).
    pub time_bounds: Option<[i64; 2]>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            salt: "dicc".to_string(),
            english_threshold: None,
            time_bounds: None,
        }
    }
}

/// Text-generation service settings for the anchor and calibrate stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    pub model: String,
    /// Generation endpoint. When unset the run replays `paths.cassette`.
    pub base_url: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            model: "llama3.1:8b".to_string(),
            base_url: None,
            temperature: 0.0,
            max_tokens: 10,
            timeout_secs: 60,
            retries: 2,
        }
    }
}

/// Which sentence-embedding backend the features stage uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProvider {
    /// Deterministic feature-hashed embeddings; no external service.
    #[default]
    Hashed,
    /// Vectors loaded from `paths.embeddings`.
    Precomputed,
    /// An embedding endpoint at `embedding.base_url`.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    pub provider: EmbeddingProvider,
    /// Vector dimension; must match the topic model's.
    pub dim: usize,
    /// Endpoint for `provider = "http"`.
    pub base_url: Option<String>,
    /// Model name sent to the HTTP embedder.
    pub model: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            provider: EmbeddingProvider::Hashed,
            dim: 64,
            base_url: None,
            model: "nomic-embed-text".to_string(),
        }
    }
}

/// Anchor-relative month windows, each as `[first, last]` inclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowsSection {
    /// Pre-diagnosis baseline window.
    pub pre: [i64; 2],
    /// Acute window around the anchor.
    pub acute: [i64; 2],
    /// Post-diagnosis window the periodicity analysis runs over.
    pub post_diagnosis: [i64; 2],
}

impl Default for WindowsSection {
    fn default() -> Self {
        WindowsSection {
            pre: [-45, -7],
            acute: [0, 6],
            post_diagnosis: [1, 253],
        }
    }
}

impl WindowsSection {
    pub fn pre_range(&self) -> RangeInclusive<i64> {
        self.pre[0]..=self.pre[1]
    }

    pub fn acute_range(&self) -> RangeInclusive<i64> {
        self.acute[0]..=self.acute[1]
    }

    pub fn post_range(&self) -> RangeInclusive<i64> {
        self.post_diagnosis[0]..=self.post_diagnosis[1]
    }
}

/// Veridicality balancing parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSection {
    /// Desired false-positive proportion after balancing.
    pub target_false_proportion: f64,
    /// Negative predictive value assumed for the judged negatives.
    pub npv: f64,
    /// Positive predictive value assumed for the judged positives.
    pub ppv: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            target_false_proportion: 0.25,
            npv: 0.88,
            ppv: 0.78,
        }
    }
}

/// Control-sampling budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSection {
    /// Total identification-post budget `b` spread over the cells.
    pub b: u64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { b: 50_000 }
    }
}

/// Periodicity-analysis settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodicitySection {
    /// Feature whose monthly trajectory is analyzed (e.g. `topic.0`).
    pub feature: String,
    /// Autocorrelation lag range `[first, last]`, in months.
    pub lags: [usize; 2],
    /// Bootstrap iterations for the autocorrelation distributions.
    pub iterations: usize,
    /// Significance level for BH-corrected lag comparisons.
    pub alpha: f64,
    /// False-alarm probability for the periodogram threshold.
    pub false_alarm_alpha: f64,
    /// Permutations behind the false-alarm threshold.
    pub false_alarm_permutations: usize,
    /// Per-group quantile above which heavy posters are dropped during
    /// curation.
    pub curation_quantile: f64,
    /// Periodogram frequency-grid oversampling factor.
    pub oversampling: u32,
    /// Bins for phase-folding the dominant frequency.
    pub phase_bins: usize,
}

impl Default for PeriodicitySection {
    fn default() -> Self {
        PeriodicitySection {
            feature: "topic.0".to_string(),
            lags: [2, 18],
            iterations: 1000,
            alpha: 0.05,
            false_alarm_alpha: 0.01,
            false_alarm_permutations: 200,
            curation_quantile: 0.99,
            oversampling: 5,
            phase_bins: 12,
        }
    }
}

/// Settings for `dicc synth` (synthetic input generation). Sizes are kept
/// modest by default so a full run stays interactive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub bd_users: usize,
    pub ud_users: usize,
    pub control_users: usize,
    /// Months of history generated before each user's anchor.
    pub months_before: i64,
    /// Months of history generated after each user's anchor.
    pub months_after: i64,
    /// Mean posts per active month, by group.
    pub rate_bd: f64,
    pub rate_ud: f64,
    pub rate_control: f64,
    /// Chance a user posts at all in a given month.
    pub post_probability: f64,
    /// Groups whose post-diagnosis histories carry the annual topic pulse.
    pub pulse_groups: Vec<String>,
    /// Fraction of UD disclosures the scripted judge marks non-veridical.
    pub ud_negative_fraction: f64,
    /// Inclusive year range anchors are drawn from.
    pub anchor_years: [i32; 2],
    /// Inclusive year range control histories may start in.
    pub control_years: [i32; 2],
    /// Fraction of posts emitted as submissions rather than comments.
    pub submission_fraction: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            bd_users: 40,
            ud_users: 60,
            control_users: 120,
            months_before: 36,
            months_after: 60,
            rate_bd: 3.0,
            rate_ud: 2.0,
            rate_control: 2.5,
            post_probability: 0.85,
            pulse_groups: vec!["BD".to_string(), "UD".to_string()],
            ud_negative_fraction: 0.3,
            anchor_years: [2012, 2016],
            control_years: [2010, 2020],
            submission_fraction: 0.3,
        }
    }
}

impl RunConfig {
    /// Parse `path`, resolve relative paths against its directory, apply
    /// environment overrides, and validate.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    /// Resolve every relative path in `[paths]` against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        for p in &mut self.paths.archives {
            resolve(p);
        }
        resolve(&mut self.paths.output_dir);
        for p in [
            &mut self.paths.topic_model,
            &mut self.paths.cassette,
            &mut self.paths.embeddings,
            &mut self.paths.sentiment_lexicon,
            &mut self.paths.age_lexicon,
            &mut self.paths.gender_lexicon,
            &mut self.paths.ground_truth,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }

    /// Apply environment overrides. Only service endpoints may come from
    /// the environment; everything else must be in the file.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get("DICC_LLM_URL").filter(|u| !u.is_empty()) {
            self.llm.base_url = Some(url);
        }
        if let Some(url) = get("DICC_EMBED_URL").filter(|u| !u.is_empty()) {
            self.embedding.base_url = Some(url);
        }
    }

    /// Cross-field checks that TOML typing cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ordered = |key: &str, w: &[i64; 2]| -> Result<(), ConfigError> {
            if w[0] > w[1] {
                return Err(ConfigError::Invalid {
                    key: key.to_string(),
                    message: format!("window [{}, {}] has first > last", w[0], w[1]),
                });
            }
            Ok(())
        };
        ordered("windows.pre", &self.windows.pre)?;
        ordered("windows.acute", &self.windows.acute)?;
        ordered("windows.post_diagnosis", &self.windows.post_diagnosis)?;
        if self.windows.pre[1] >= self.windows.acute[0] {
            return Err(ConfigError::Invalid {
                key: "windows.pre".to_string(),
                message: "pre window must end before the acute window starts".to_string(),
            });
        }
        let unit = |key: &str, v: f64| -> Result<(), ConfigError> {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ConfigError::Invalid {
                    key: key.to_string(),
                    message: format!("{v} is not in (0, 1]"),
                });
            }
            Ok(())
        };
        unit("periodicity.alpha", self.periodicity.alpha)?;
        unit("periodicity.false_alarm_alpha", self.periodicity.false_alarm_alpha)?;
        unit("periodicity.curation_quantile", self.periodicity.curation_quantile)?;
        if self.periodicity.lags[0] < 1 || self.periodicity.lags[0] > self.periodicity.lags[1] {
            return Err(ConfigError::Invalid {
                key: "periodicity.lags".to_string(),
                message: format!(
                    "[{}, {}] is not an ascending range of positive lags",
                    self.periodicity.lags[0], self.periodicity.lags[1]
                ),
            });
        }
        if self.periodicity.iterations == 0 {
            return Err(ConfigError::Invalid {
                key: "periodicity.iterations".to_string(),
                message: "at least one bootstrap iteration is required".to_string(),
            });
        }
        if self.periodicity.phase_bins == 0 {
            return Err(ConfigError::Invalid {
                key: "periodicity.phase_bins".to_string(),
                message: "at least one phase bin is required".to_string(),
            });
        }
        if !(self.calibration.target_false_proportion > 0.0
            && self.calibration.target_false_proportion < 1.0)
        {
            return Err(ConfigError::Invalid {
                key: "calibration.target_false_proportion".to_string(),
                message: format!(
                    "{} is not in (0, 1)",
                    self.calibration.target_false_proportion
                ),
            });
        }
        if let Some(b) = &self.ingest.time_bounds {
            if b[0] >= b[1] {
                return Err(ConfigError::Invalid {
                    key: "ingest.time_bounds".to_string(),
                    message: format!("[{}, {}] has min >= max", b[0], b[1]),
                });
            }
        }
        Ok(())
    }

    /// The archive list, or a stage-specific error when it is empty.
    pub fn require_archives(&self, stage: &str) -> Result<&[PathBuf], ConfigError> {
        if self.paths.archives.is_empty() {
            return Err(ConfigError::Missing {
                key: "paths.archives".to_string(),
                stage: stage.to_string(),
            });
        }
        Ok(&self.paths.archives)
    }

    pub fn require_topic_model(&self, stage: &str) -> Result<&Path, ConfigError> {
        self.require_path(&self.paths.topic_model, "paths.topic_model", stage)
    }

    pub fn require_cassette(&self, stage: &str) -> Result<&Path, ConfigError> {
        self.require_path(&self.paths.cassette, "paths.cassette", stage)
    }

    pub fn require_embeddings(&self, stage: &str) -> Result<&Path, ConfigError> {
        self.require_path(&self.paths.embeddings, "paths.embeddings", stage)
    }

    pub fn require_ground_truth(&self, stage: &str) -> Result<&Path, ConfigError> {
        self.require_path(&self.paths.ground_truth, "paths.ground_truth", stage)
    }

    fn require_path<'a>(
        &self,
        value: &'a Option<PathBuf>,
        key: &str,
        stage: &str,
    ) -> Result<&'a Path, ConfigError> {
        value.as_deref().ok_or_else(|| ConfigError::Missing {
            key: key.to_string(),
            stage: stage.to_string(),
        })
    }
}
