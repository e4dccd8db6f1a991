//! Stage 4 — `calibrate`: judge the veridicality of the UD anchors, then
//! balance the cohort's expected false-diagnosis-time proportion by adding
//! back a computed number of negatively judged users.
//!
//! BD users pass through unjudged. The final clinical membership (BD plus
//! balanced UD) is written to `cohorts.jsonl`; the balancing arithmetic
//! and tallies go to `calibration.json`.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{
    anchor::{llm_config, read_anchors},
    disclose::read_disclosures,
    make_generator, write_json_pretty, write_jsonl,
};
use chrono::NaiveDate;
use dicc_core::anchor::AnchorPrecision;
use dicc_core::calibration::{augment_cohort, calibrate, judge_veridicality, CalibrationInput};
use dicc_core::cohort::Group;
use dicc_core::derive_rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One member of the final clinical cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortRow {
    pub user: String,
    pub group: Group,
    pub anchor: NaiveDate,
    pub precision: AnchorPrecision,
    pub source_post_id: String,
}

/// Tallies and arithmetic written to `calibration.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub judged: u64,
    pub positives: u64,
    pub negatives: u64,
    pub unparseable: u64,
    pub input: CalibrationInput,
    pub negatives_added: u64,
    pub achieved_false_proportion: f64,
}

/// Read `cohorts.jsonl` back.
pub fn read_cohorts(config: &RunConfig) -> anyhow::Result<Vec<CohortRow>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::COHORTS,
        "calibrate",
    )?;
    crate::stages::read_jsonl(&path)
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("calibrate", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::ANCHORS, "anchor")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::DISCLOSURES, "disclose")?;
    let anchors = read_anchors(config)?;
    let disclosures = read_disclosures(config)?;
    let bodies: BTreeMap<&str, &str> = disclosures
        .iter()
        .map(|d| (d.post_id.as_str(), d.body.as_str()))
        .collect();
    let generator = make_generator(config, "calibrate")?;
    let llm = llm_config(config);

    // Judge every anchored UD user; anchors.jsonl is sorted by group then
    // user, so the positive/negative lists are deterministic.
    let mut positives: Vec<String> = Vec::new();
    let mut negatives: Vec<String> = Vec::new();
    let mut unparseable = 0u64;
    for row in &anchors {
        if row.group != Group::Ud {
            continue;
        }
        let body = bodies.get(row.source_post_id.as_str()).copied().ok_or_else(|| {
            anyhow::anyhow!(
                "anchor for `{}` references post `{}` absent from disclosures",
                row.user,
                row.source_post_id
            )
        })?;
        let judgement = judge_veridicality(body, &row.phrase, &llm, generator.as_ref())?;
        if judgement.unparseable {
            unparseable += 1;
        }
        if judgement.veridical {
            positives.push(row.user.clone());
        } else {
            negatives.push(row.user.clone());
        }
    }

    let input = CalibrationInput {
        positives: positives.len() as u64,
        expected_false_positives: (1.0 - config.calibration.ppv) * positives.len() as f64,
        npv: config.calibration.npv,
        target_false_proportion: config.calibration.target_false_proportion,
    };
    let report = calibrate(input)?;
    let mut rng = derive_rng(config.master_seed, "calibrate/augment", 0);
    let ud_members = augment_cohort(&positives, &negatives, report.negatives_to_add, &mut rng)?;

    let ud_set: std::collections::BTreeSet<&str> =
        ud_members.iter().map(|u| u.as_str()).collect();
    let mut rows: Vec<CohortRow> = Vec::new();
    for row in &anchors {
        let keep = match row.group {
            Group::Bd => true,
            Group::Ud => ud_set.contains(row.user.as_str()),
            Group::Hc => false,
        };
        if keep {
            rows.push(CohortRow {
                user: row.user.clone(),
                group: row.group,
                anchor: row.date,
                precision: row.precision,
                source_post_id: row.source_post_id.clone(),
            });
        }
    }
    // Consistency: every balanced UD member must have an anchor row.
    debug_assert_eq!(
        rows.iter().filter(|r| r.group == Group::Ud).count(),
        ud_members.len()
    );

    let out = config.paths.output_dir.join(artifacts::COHORTS);
    write_jsonl(&out, &rows)?;
    manifest.record_output(&config.paths.output_dir, artifacts::COHORTS)?;

    let artifact = CalibrationArtifact {
        judged: (positives.len() + negatives.len()) as u64,
        positives: positives.len() as u64,
        negatives: negatives.len() as u64,
        unparseable,
        input: report.input,
        negatives_added: report.negatives_to_add,
        achieved_false_proportion: report.achieved_false_proportion,
    };
    write_json_pretty(
        &config.paths.output_dir.join(artifacts::CALIBRATION),
        &artifact,
    )?;
    manifest.record_output(&config.paths.output_dir, artifacts::CALIBRATION)?;

    let bd = rows.iter().filter(|r| r.group == Group::Bd).count() as u64;
    manifest.count("bd_users", bd);
    manifest.count("ud_positive", artifact.positives);
    manifest.count("ud_negative", artifact.negatives);
    manifest.count("ud_unparseable", artifact.unparseable);
    manifest.count("ud_negatives_added", artifact.negatives_added);
    manifest.count("ud_users", ud_members.len() as u64);
    Ok(manifest)
}
