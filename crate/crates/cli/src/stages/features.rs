//! Stage 6 — `features`: per-post language features and topic scores for
//! every cohort member, plus per-user demographic estimates.
//!
//! Sentence embeddings come from the configured provider; each post's
//! document vector (mean of its sentence vectors) is scored against every
//! topic in the model, keyed `topic.<id>`.

use crate::config::{ConfigError, EmbeddingProvider, RunConfig};
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{
    calibrate::read_cohorts, controls::read_controls, ingest::read_posts, opt_cell, write_jsonl,
};
use chrono::NaiveDate;
use dicc_core::anchor::reference_date;
use dicc_core::cohort::Group;
use dicc_core::demography::{apply_lexicon, Lexicon, Target};
use dicc_core::embed::{
    mean_embedding, HashedEmbedder, HttpEmbedder, PrecomputedEmbeddings, SentenceEmbedder,
};
use dicc_core::features::{
    compute_post_features, pos::BaselineTagger, sentiment::SentimentLexicon, tokenize,
};
use dicc_core::topics::{score_topics, TopicEmbeddingMode, TopicModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One post's feature vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user: String,
    pub post_id: String,
    /// UTC calendar day the post was created.
    pub date: NaiveDate,
    /// Feature id → value; absent features are missing keys.
    pub values: BTreeMap<String, f64>,
}

/// Read `features.jsonl` back.
pub fn read_features(config: &RunConfig) -> anyhow::Result<Vec<FeatureRow>> {
    let path = crate::manifest::require_artifact(
        &config.paths.output_dir,
        artifacts::FEATURES,
        "features",
    )?;
    crate::stages::read_jsonl(&path)
}

/// Group membership map (clinical cohorts plus controls).
pub fn member_groups(config: &RunConfig) -> anyhow::Result<BTreeMap<String, Group>> {
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for row in read_cohorts(config)? {
        groups.insert(row.user, row.group);
    }
    for row in read_controls(config)? {
        groups.insert(row.user, Group::Hc);
    }
    Ok(groups)
}

/// Anchor map (clinical anchors plus pseudo-anchors).
pub fn member_anchors(config: &RunConfig) -> anyhow::Result<BTreeMap<String, NaiveDate>> {
    let mut anchors: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for row in read_cohorts(config)? {
        anchors.insert(row.user, row.anchor);
    }
    for row in read_controls(config)? {
        anchors.insert(row.user, row.anchor);
    }
    Ok(anchors)
}

fn make_embedder(config: &RunConfig) -> anyhow::Result<Box<dyn SentenceEmbedder>> {
    match config.embedding.provider {
        EmbeddingProvider::Hashed => Ok(Box::new(HashedEmbedder::new(config.embedding.dim))),
        EmbeddingProvider::Precomputed => {
            let path = config.require_embeddings("features")?;
            Ok(Box::new(PrecomputedEmbeddings::load(path)?))
        }
        EmbeddingProvider::Http => {
            let url = config.embedding.base_url.as_deref().ok_or_else(|| {
                ConfigError::Missing {
                    key: "embedding.base_url".to_string(),
                    stage: "features".to_string(),
                }
            })?;
            Ok(Box::new(HttpEmbedder::new(
                url,
                &config.embedding.model,
                config.embedding.dim,
                std::time::Duration::from_secs(config.llm.timeout_secs),
            )))
        }
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("features", config);
    let topic_path = config.require_topic_model("features")?.to_path_buf();
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::POSTS, "ingest")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::COHORTS, "calibrate")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::CONTROLS, "sample-controls")?;

    manifest.record_input_path(&topic_path)?;
    let model = TopicModel::load(&topic_path, TopicEmbeddingMode::Centroid)?;
    let embedder = make_embedder(config)?;
    if embedder.dim() != model.dim {
        return Err(ConfigError::Invalid {
            key: "embedding.dim".to_string(),
            message: format!(
                "embedder dimension {} does not match the topic model's {}",
                embedder.dim(),
                model.dim
            ),
        }
        .into());
    }
    let sentiment_override;
    let sentiment = match &config.paths.sentiment_lexicon {
        Some(path) => {
            sentiment_override = SentimentLexicon::from_path(path)?;
            &sentiment_override
        }
        None => SentimentLexicon::bundled(),
    };
    let age_override;
    let age = match &config.paths.age_lexicon {
        Some(path) => {
            age_override = Lexicon::from_path(path, Target::Age)?;
            &age_override
        }
        None => Lexicon::bundled_age(),
    };
    let gender_override;
    let gender = match &config.paths.gender_lexicon {
        Some(path) => {
            gender_override = Lexicon::from_path(path, Target::Gender)?;
            &gender_override
        }
        None => Lexicon::bundled_gender(),
    };
    let tagger = BaselineTagger;

    let posts = read_posts(config)?;
    let groups = member_groups(config)?;

    let mut rows: Vec<FeatureRow> = Vec::new();
    let mut user_tokens: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut skipped_bad_timestamp = 0u64;
    let mut zero_vector_posts = 0u64;
    for post in &posts {
        if !groups.contains_key(&post.user) {
            continue;
        }
        let Some(date) = reference_date(post.created_at) else {
            skipped_bad_timestamp += 1;
            continue;
        };
        let tok = tokenize(&post.body);
        let vectors = embedder.embed_post(&post.post_id, &tok.sentences)?;
        let features =
            compute_post_features(&post.post_id, &post.body, Some(&vectors), &tagger, sentiment)?;
        let mut values = features.values;
        if !vectors.is_empty() {
            let doc = mean_embedding(&vectors)?;
            match score_topics(&doc, &model)? {
                Some(scores) => {
                    for (topic, score) in model.topics.iter().zip(scores) {
                        values.insert(format!("topic.{}", topic.id), score);
                    }
                }
                None => zero_vector_posts += 1,
            }
        }
        user_tokens
            .entry(post.user.as_str())
            .or_default()
            .extend(tok.words.iter().flatten().cloned());
        rows.push(FeatureRow {
            user: post.user.clone(),
            post_id: post.post_id.clone(),
            date,
            values,
        });
    }

    let out = config.paths.output_dir.join(artifacts::FEATURES);
    write_jsonl(&out, &rows)?;
    manifest.record_output(&config.paths.output_dir, artifacts::FEATURES)?;

    // Per-user demographic estimates over their pooled tokens.
    let demo_path = config.paths.output_dir.join(artifacts::DEMOGRAPHICS);
    let mut w = csv::Writer::from_path(&demo_path)?;
    w.write_record(["user", "group", "n_tokens", "age", "gender_logit"])?;
    for (user, group) in &groups {
        let tokens = user_tokens.get(user.as_str()).cloned().unwrap_or_default();
        w.write_record([
            user.clone(),
            group.to_string(),
            tokens.len().to_string(),
            opt_cell(apply_lexicon(&tokens, age)),
            opt_cell(apply_lexicon(&tokens, gender)),
        ])?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::DEMOGRAPHICS)?;

    manifest.count("members", groups.len() as u64);
    manifest.count("posts_featured", rows.len() as u64);
    manifest.count("skipped_bad_timestamp", skipped_bad_timestamp);
    manifest.count("zero_vector_posts", zero_vector_posts);
    manifest.count("topics", model.topics.len() as u64);
    Ok(manifest)
}
