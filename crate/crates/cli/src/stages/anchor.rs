//! Stage 3 — `anchor`: extract each disclosure's diagnosis-time phrase via
//! the text-generation service, parse it, and normalize it to a calendar
//! anchor date.
//!
//! Output rows carry the anchor, its precision, and the extracted time
//! phrase — but not the disclosure text. Phrases that name only a season
//! or a fiscal year, or stay vague, are rejected with a reason code.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{disclose::read_disclosures, make_generator, write_jsonl};
use chrono::NaiveDate;
use dicc_core::anchor::{
    extract_time_phrase, normalize_anchor, parse_temporal, reference_date, AnchorPrecision,
    LlmConfig,
};
use dicc_core::cohort::{Disorder, Group};
use serde::{Deserialize, Serialize};

/// One user's normalized diagnosis anchor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorRow {
    pub user: String,
    pub group: Group,
    pub date: NaiveDate,
    pub precision: AnchorPrecision,
    pub source_post_id: String,
    /// Creation time (epoch seconds) of the source post.
    pub reference_time: i64,
    /// The extracted time phrase (needed again by the veridicality judge).
    pub phrase: String,
}

/// Read `anchors.jsonl` back.
pub fn read_anchors(config: &RunConfig) -> anyhow::Result<Vec<AnchorRow>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::ANCHORS,
        "anchor",
    )?;
    crate::stages::read_jsonl(&path)
}

/// The LLM settings the anchor and calibrate stages share.
pub(crate) fn llm_config(config: &RunConfig) -> LlmConfig {
    LlmConfig {
        model: config.llm.model.clone(),
        temperature: config.llm.temperature,
        max_tokens: config.llm.max_tokens,
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("anchor", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::DISCLOSURES, "disclose")?;
    let disclosures = read_disclosures(config)?;
    let generator = make_generator(config, "anchor")?;
    let llm = llm_config(config);

    let mut anchors = Vec::new();
    let mut rejections: Vec<(String, Group, String)> = Vec::new();
    let mut no_time = 0u64;
    for row in &disclosures {
        let disorder = match row.group {
            Group::Bd => Disorder::Bipolar,
            Group::Ud | Group::Hc => Disorder::Depression,
        };
        let phrase = match extract_time_phrase(&row.body, disorder, &llm, generator.as_ref())? {
            Some(p) => p,
            None => {
                no_time += 1;
                rejections.push((row.user.clone(), row.group, "no_time".to_string()));
                continue;
            }
        };
        let Some(reference) = reference_date(row.created_at) else {
            rejections.push((row.user.clone(), row.group, "bad_timestamp".to_string()));
            continue;
        };
        let value = parse_temporal(&phrase, reference);
        match normalize_anchor(&value, &row.post_id, row.created_at) {
            Ok(anchor) => anchors.push(AnchorRow {
                user: row.user.clone(),
                group: row.group,
                date: anchor.date,
                precision: anchor.precision,
                source_post_id: anchor.source_post_id,
                reference_time: anchor.reference_time,
                phrase,
            }),
            Err(reason) => {
                rejections.push((row.user.clone(), row.group, reason.to_string()));
            }
        }
    }

    let out = config.paths.output_dir.join(artifacts::ANCHORS);
    write_jsonl(&out, &anchors)?;
    manifest.record_output(&config.paths.output_dir, artifacts::ANCHORS)?;

    let rej_path = config.paths.output_dir.join(artifacts::ANCHOR_REJECTIONS);
    let mut w = csv::Writer::from_path(&rej_path)?;
    w.write_record(["user", "group", "reason"])?;
    let mut by_reason: std::collections::BTreeMap<String, u64> = Default::default();
    for (user, group, reason) in &rejections {
        w.write_record([user.as_str(), &group.to_string(), reason.as_str()])?;
        *by_reason.entry(reason.clone()).or_default() += 1;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::ANCHOR_REJECTIONS)?;

    manifest.count("disclosures", disclosures.len() as u64);
    manifest.count("anchored", anchors.len() as u64);
    manifest.count("no_time", no_time);
    for (reason, n) in by_reason {
        manifest.count(&format!("rejected_{reason}"), n);
    }
    Ok(manifest)
}
