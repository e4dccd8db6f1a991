//! Stage 2 — `disclose`: find each user's earliest qualifying
//! self-disclosure for each disorder and resolve the clinical groups.
//!
//! The output rows keep the cleaned disclosure body: the anchor stage
//! needs the exact text for its LLM calls. Anchor outputs onward carry no
//! post text.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{ingest::read_posts, write_jsonl};
use dicc_core::cohort::{
    earliest_hits, match_disclosure, resolve_groups, DisclosureHit, Disorder, Group,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One clinical user's qualifying disclosure post.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisclosureRow {
    pub user: String,
    pub group: Group,
    pub post_id: String,
    pub created_at: i64,
    /// Index of the matched pattern template.
    pub pattern_id: usize,
    /// Cleaned body of the disclosure post (consumed by the anchor stage).
    pub body: String,
}

/// Read `disclosures.jsonl` back.
pub fn read_disclosures(config: &RunConfig) -> anyhow::Result<Vec<DisclosureRow>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::DISCLOSURES,
        "disclose",
    )?;
    crate::stages::read_jsonl(&path)
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("disclose", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::POSTS, "ingest")?;
    let posts = read_posts(config)?;

    let mut bd_hits = Vec::new();
    let mut ud_hits = Vec::new();
    let mut bodies: BTreeMap<String, &str> = BTreeMap::new();
    for post in &posts {
        for (disorder, sink) in [
            (Disorder::Bipolar, &mut bd_hits),
            (Disorder::Depression, &mut ud_hits),
        ] {
            if let Some(m) = match_disclosure(&post.body, disorder) {
                sink.push(DisclosureHit {
                    username: post.user.clone(),
                    post_id: post.post_id.clone(),
                    created_at: post.created_at,
                    pattern_id: m.pattern_id,
                });
                bodies.insert(post.post_id.clone(), &post.body);
            }
        }
    }
    let raw_bd = bd_hits.len() as u64;
    let raw_ud = ud_hits.len() as u64;

    let resolved = resolve_groups(earliest_hits(bd_hits), earliest_hits(ud_hits));

    let mut rows = Vec::new();
    for (group, members) in [(Group::Bd, &resolved.bd), (Group::Ud, &resolved.ud)] {
        for (user, hit) in members {
            rows.push(DisclosureRow {
                user: user.clone(),
                group,
                post_id: hit.post_id.clone(),
                created_at: hit.created_at,
                pattern_id: hit.pattern_id,
                body: bodies
                    .get(&hit.post_id)
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
            });
        }
    }

    let out = config.paths.output_dir.join(artifacts::DISCLOSURES);
    write_jsonl(&out, &rows)?;
    manifest.record_output(&config.paths.output_dir, artifacts::DISCLOSURES)?;

    manifest.count("posts_scanned", posts.len() as u64);
    manifest.count("bd_matching_posts", raw_bd);
    manifest.count("ud_matching_posts", raw_ud);
    manifest.count("bd_users", resolved.bd.len() as u64);
    manifest.count("ud_users", resolved.ud.len() as u64);
    manifest.count("excluded_overlap", resolved.excluded_overlap);
    manifest.count("excluded_nonhuman", resolved.excluded_nonhuman);
    manifest.count("excluded_deleted", resolved.excluded_deleted);
    Ok(manifest)
}
