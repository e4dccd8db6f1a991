//! Stage 5 — `sample-controls`: draw the HC cohort so its identification
//! posts mirror the BD group's distribution over calendar-month ×
//! post-type cells.
//!
//! The candidate pool is every ingested post by a non-clinical user. Each
//! candidate is accepted with its cell's probability, accepted users are
//! deduplicated to one identification post, and every control user gets a
//! pseudo-diagnosis date drawn from the BD anchor-date pool.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{calibrate::read_cohorts, ingest::read_posts, write_jsonl};
use chrono::NaiveDate;
use dicc_core::cohort::{
    assign_pseudo_anchors, build_sampling_plan, sample_controls, CellKey, ControlCandidate,
    Group,
};
use dicc_core::derive_rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One control-cohort member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlRow {
    pub user: String,
    pub ident_post_id: String,
    pub ident_created_at: i64,
    /// Pseudo-diagnosis date drawn from the BD anchor pool.
    pub anchor: NaiveDate,
}

/// Read `controls.jsonl` back.
pub fn read_controls(config: &RunConfig) -> anyhow::Result<Vec<ControlRow>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::CONTROLS,
        "sample-controls",
    )?;
    crate::stages::read_jsonl(&path)
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("sample-controls", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::POSTS, "ingest")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::COHORTS, "calibrate")?;
    let posts = read_posts(config)?;
    let cohorts = read_cohorts(config)?;

    let clinical_users: BTreeSet<String> = cohorts.iter().map(|c| c.user.clone()).collect();
    let bd_users: BTreeSet<&str> = cohorts
        .iter()
        .filter(|c| c.group == Group::Bd)
        .map(|c| c.user.as_str())
        .collect();
    let anchor_pool: Vec<NaiveDate> = cohorts
        .iter()
        .filter(|c| c.group == Group::Bd)
        .map(|c| c.anchor)
        .collect();

    // Cell histogram of BD posts, and the candidate pool (posts by anyone
    // outside the clinical cohort — their names are already hashed and the
    // deleted/non-human filters ran at ingest).
    let mut clinical_counts: BTreeMap<CellKey, u64> = BTreeMap::new();
    let mut available_counts: BTreeMap<CellKey, u64> = BTreeMap::new();
    let mut candidates: Vec<ControlCandidate> = Vec::new();
    for post in &posts {
        let key = CellKey::from_timestamp(post.created_at, post.kind);
        if bd_users.contains(post.user.as_str()) {
            *clinical_counts.entry(key).or_default() += 1;
        }
        if !clinical_users.contains(&post.user) {
            *available_counts.entry(key).or_default() += 1;
            candidates.push(ControlCandidate {
                post_id: post.post_id.clone(),
                username: post.user.clone(),
                created_at: post.created_at,
                kind: post.kind,
            });
        }
    }

    let plan = build_sampling_plan(&clinical_counts, &available_counts, config.sampling.b)?;
    let mut rng = derive_rng(config.master_seed, "controls/sample", 0);
    let sample = sample_controls(&plan, candidates, &clinical_users, &mut rng);

    let hc_users: Vec<String> = sample.users.keys().cloned().collect();
    let mut rng = derive_rng(config.master_seed, "controls/pseudo-anchors", 0);
    let pseudo = assign_pseudo_anchors(&hc_users, &anchor_pool, &mut rng)?;

    let rows: Vec<ControlRow> = sample
        .users
        .iter()
        .map(|(user, post)| ControlRow {
            user: user.clone(),
            ident_post_id: post.post_id.clone(),
            ident_created_at: post.created_at,
            anchor: pseudo[user],
        })
        .collect();

    let out = config.paths.output_dir.join(artifacts::CONTROLS);
    write_jsonl(&out, &rows)?;
    manifest.record_output(&config.paths.output_dir, artifacts::CONTROLS)?;

    // Per-cell audit table: plan and acceptance tallies side by side.
    let cells_path = config.paths.output_dir.join(artifacts::SAMPLING_CELLS);
    let mut w = csv::Writer::from_path(&cells_path)?;
    w.write_record([
        "year",
        "month",
        "kind",
        "proportion",
        "available",
        "probability",
        "clamped",
        "candidates",
        "accepted",
    ])?;
    for (key, cell) in &plan.cells {
        let kind = match key.kind {
            dicc_core::ingest::PostKind::Submission => "submission",
            dicc_core::ingest::PostKind::Comment => "comment",
        };
        w.write_record([
            key.year.to_string(),
            key.month.to_string(),
            kind.to_string(),
            cell.proportion.to_string(),
            cell.available.to_string(),
            cell.probability.to_string(),
            cell.clamped.to_string(),
            sample.candidates_per_cell.get(key).copied().unwrap_or(0).to_string(),
            sample.accepted_per_cell.get(key).copied().unwrap_or(0).to_string(),
        ])?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::SAMPLING_CELLS)?;

    let accepted_posts: u64 = sample.accepted_per_cell.values().sum();
    manifest.count("b", config.sampling.b);
    manifest.count("cells", plan.cells.len() as u64);
    manifest.count("clamped_cells", plan.clamped_cells().len() as u64);
    manifest.count("candidates", sample.candidates_per_cell.values().sum::<u64>());
    manifest.count("accepted_posts", accepted_posts);
    manifest.count("hc_users", rows.len() as u64);
    manifest.count("excluded_overlap", sample.excluded_overlap);
    Ok(manifest)
}
