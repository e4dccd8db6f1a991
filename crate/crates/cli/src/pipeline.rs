//! Stage graph: names, order, artifact file names, and the dispatcher.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::stages;

/// Artifact file names within the run's output directory. Centralized so
/// producers and consumers cannot drift apart.
pub mod artifacts {
    /// Cleaned, pseudonymized, eligibility-filtered posts.
    pub const POSTS: &str = "posts.jsonl";
    /// One earliest qualifying self-disclosure per clinical user.
    pub const DISCLOSURES: &str = "disclosures.jsonl";
    /// Normalized diagnosis anchors (no post text).
    pub const ANCHORS: &str = "anchors.jsonl";
    /// Users whose disclosure produced no usable anchor, with reasons.
    pub const ANCHOR_REJECTIONS: &str = "anchor_rejections.csv";
    /// Final clinical cohort membership after veridicality balancing.
    pub const COHORTS: &str = "cohorts.jsonl";
    /// Veridicality balancing arithmetic and tallies.
    pub const CALIBRATION: &str = "calibration.json";
    /// Control users with identification posts and pseudo-anchors.
    pub const CONTROLS: &str = "controls.jsonl";
    /// Per-cell sampling plan and acceptance tallies.
    pub const SAMPLING_CELLS: &str = "sampling_cells.csv";
    /// Per-post language features for all cohort members.
    pub const FEATURES: &str = "features.jsonl";
    /// Per-user demographic estimates.
    pub const DEMOGRAPHICS: &str = "demographics.csv";
    /// Monthly feature timelines in long form.
    pub const TIMELINE: &str = "timeline.csv";
    /// Pre/acute window means per user and feature.
    pub const DICHOTOMY: &str = "dichotomy.csv";
    /// Anchor-relative months surviving the density trim.
    pub const KEPT_MONTHS: &str = "kept_months.csv";
    /// Users kept by the periodicity curation (post-downsampling).
    pub const CURATION_USERS: &str = "curation_users.csv";
    /// Post-thinning per-user-month post counts for the focal feature.
    pub const CURATION_MONTHS: &str = "curation_user_months.csv";
    /// Bootstrap autocorrelation summaries per group and lag.
    pub const AUTOCORRELATION: &str = "autocorrelation.csv";
    /// Clinical-vs-control lag comparisons with FDR correction.
    pub const AC_COMPARISONS: &str = "ac_comparisons.csv";
    /// Per-user maximum periodogram power with confounds.
    pub const LSP_POWERS: &str = "lsp_powers.csv";
    /// Covariate-adjusted group comparison of maximum powers.
    pub const LSP_COMPARISON: &str = "lsp_comparison.json";
    /// Group-level periodograms, false-alarm levels, and phase folds.
    pub const GROUP_SPECTRA: &str = "group_spectra.json";
    /// Diagnosis-month counts and chi-square profiles per clinical group.
    pub const SEASONAL: &str = "seasonal_profiles.csv";
    /// Month-by-month two-proportion contrasts between clinical groups.
    pub const SEASONAL_CONTRASTS: &str = "seasonal_contrasts.csv";
    /// Chain-verified run summary.
    pub const REPORT: &str = "report.json";
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Disclose,
    Anchor,
    Calibrate,
    SampleControls,
    Features,
    Aggregate,
    Periodicity,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Disclose,
        Stage::Anchor,
        Stage::Calibrate,
        Stage::SampleControls,
        Stage::Features,
        Stage::Aggregate,
        Stage::Periodicity,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Disclose => "disclose",
            Stage::Anchor => "anchor",
            Stage::Calibrate => "calibrate",
            Stage::SampleControls => "sample-controls",
            Stage::Features => "features",
            Stage::Aggregate => "aggregate",
            Stage::Periodicity => "periodicity",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Run one stage and persist its manifest in the output directory.
pub fn run_stage(stage: Stage, config: &RunConfig) -> anyhow::Result<StageManifest> {
    std::fs::create_dir_all(&config.paths.output_dir)?;
    let manifest = match stage {
        Stage::Ingest => stages::ingest::run(config)?,
        Stage::Disclose => stages::disclose::run(config)?,
        Stage::Anchor => stages::anchor::run(config)?,
        Stage::Calibrate => stages::calibrate::run(config)?,
        Stage::SampleControls => stages::controls::run(config)?,
        Stage::Features => stages::features::run(config)?,
        Stage::Aggregate => stages::aggregate::run(config)?,
        Stage::Periodicity => stages::periodicity::run(config)?,
        Stage::Report => stages::report::run(config)?,
    };
    manifest.save(&config.paths.output_dir)?;
    Ok(manifest)
}

/// Run every stage in order.
pub fn run_all(config: &RunConfig) -> anyhow::Result<Vec<StageManifest>> {
    let mut manifests = Vec::with_capacity(Stage::ALL.len());
    for stage in Stage::ALL {
        manifests.push(run_stage(stage, config)?);
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_order_and_names() {
        let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
        assert_eq!(
            names,
            [
                "ingest",
                "disclose",
                "anchor",
                "calibrate",
                "sample-controls",
                "features",
                "aggregate",
                "periodicity",
                "report"
            ]
        );
    }
}
