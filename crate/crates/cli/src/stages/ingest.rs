//! Stage 1 — `ingest`: stream the archives into one cleaned, pseudonymized,
//! eligibility-filtered post table.
//!
//! Privacy boundary: raw usernames exist only inside this stage. Deleted
//! and non-human accounts are filtered on the *raw* name (the markers are
//! invisible after hashing), then every surviving author is replaced by a
//! salted hash. No later stage sees a raw name.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::write_jsonl;
use dicc_core::cohort::is_nonhuman;
use dicc_core::ingest::{
    check_eligibility, clean_markup, duplicate_ids, hash_username, is_deleted_author,
    stream_posts, EligibilityReason, EnglishDetector, FieldMap, PostKind, TimeBounds,
};
use serde::{Deserialize, Serialize};

/// One post as every later stage sees it: hashed author, cleaned body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanPost {
    pub post_id: String,
    /// Salted hash of the author name.
    pub user: String,
    /// UTC seconds since the epoch.
    pub created_at: i64,
    pub kind: PostKind,
    /// Markup-cleaned body text.
    pub body: String,
}

/// Read `posts.jsonl` back (for downstream stages).
pub fn read_posts(config: &RunConfig) -> anyhow::Result<Vec<CleanPost>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::POSTS,
        "ingest",
    )?;
    crate::stages::read_jsonl(&path)
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("ingest", config);
    let archives = config.require_archives("ingest")?.to_vec();
    let detector = match config.ingest.english_threshold {
        Some(t) => EnglishDetector::with_threshold(t),
        None => EnglishDetector::default(),
    };
    let bounds = config
        .ingest
        .time_bounds
        .map(|[min, max]| TimeBounds { min, max });
    let map = FieldMap::default();

    let mut posts: Vec<CleanPost> = Vec::new();
    let mut parsed = 0u64;
    let mut malformed = 0u64;
    let mut out_of_bounds = 0u64;
    let mut author_deleted = 0u64;
    let mut author_nonhuman = 0u64;
    let mut rejected: std::collections::BTreeMap<&'static str, u64> = Default::default();

    for archive in &archives {
        manifest.record_input_path(archive)?;
        let mut stream = stream_posts(archive, &map, bounds)?;
        for record in &mut stream {
            parsed += 1;
            let cleaned = clean_markup(&record.body);
            let verdict = check_eligibility(&record.body, &cleaned, &detector);
            if verdict.reason != EligibilityReason::Ok {
                let label = match verdict.reason {
                    EligibilityReason::Ok => unreachable!(),
                    EligibilityReason::Empty => "empty",
                    EligibilityReason::Deleted => "deleted_body",
                    EligibilityReason::Removed => "removed_body",
                    EligibilityReason::ContainsUrl => "contains_url",
                    EligibilityReason::Quoted => "quoted",
                    EligibilityReason::NonEnglish => "non_english",
                    EligibilityReason::DuplicateText => "duplicate_text",
                };
                *rejected.entry(label).or_default() += 1;
                continue;
            }
            if is_deleted_author(&record.author) {
                author_deleted += 1;
                continue;
            }
            if is_nonhuman(&record.author) {
                author_nonhuman += 1;
                continue;
            }
            posts.push(CleanPost {
                post_id: record.post_id,
                user: hash_username(&config.ingest.salt, &record.author),
                created_at: record.created_at,
                kind: record.kind,
                body: cleaned,
            });
        }
        let stats = stream.stats();
        malformed += stats.skipped_malformed;
        out_of_bounds += stats.skipped_out_of_bounds;
    }

    // Corpus-global exact-duplicate pass: the earliest copy of a text
    // survives.
    let dupes = duplicate_ids(
        posts
            .iter()
            .map(|p| (p.post_id.as_str(), p.body.as_str(), p.created_at)),
    );
    let duplicate_text = dupes.len() as u64;
    posts.retain(|p| !dupes.contains(&p.post_id));

    // Canonical artifact order, independent of archive file boundaries.
    posts.sort_by(|a, b| (a.created_at, &a.post_id).cmp(&(b.created_at, &b.post_id)));

    let out = config.paths.output_dir.join(artifacts::POSTS);
    write_jsonl(&out, &posts)?;
    manifest.record_output(&config.paths.output_dir, artifacts::POSTS)?;

    manifest.count("parsed", parsed);
    manifest.count("malformed", malformed);
    manifest.count("out_of_bounds", out_of_bounds);
    for (label, n) in rejected {
        manifest.count(&format!("rejected_{label}"), n);
    }
    manifest.count("author_deleted", author_deleted);
    manifest.count("author_nonhuman", author_nonhuman);
    manifest.count("duplicate_text", duplicate_text);
    manifest.count("written", posts.len() as u64);
    Ok(manifest)
}
