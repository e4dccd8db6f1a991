//! Topic-model loading, topic embeddings, post scoring, and c-TF-IDF
//! keywords.
//!
//! Topic *discovery* (dimension reduction and density clustering) happens in
//! an external tool; this module consumes its output as a plain text file.
//! When the file carries member-document embeddings, the topic embeddings
//! are recomputed from them on load and verified against the stored vectors,
//! so a model produced under one aggregation mode cannot silently be scored
//! under another.
//!
//! A post is scored against every topic by cosine similarity in the
//! provider's original embedding space; higher similarity means the topic is
//! more present in the post. Keyword labels come from class-based TF-IDF
//! over per-topic term counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embed::{cosine, mean_embedding, EmbedError, EmbeddingVector};

/// Default cap on the number of topics kept for scoring, most frequent
/// first.
pub const DEFAULT_TOP_TOPICS: usize = 250;

/// Maximum keywords stored per topic.
pub const MAX_KEYWORDS: usize = 10;

/// Tolerance for verifying stored topic embeddings against ones recomputed
/// from member documents.
const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("topic model error at {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("topic cluster has no member documents")]
    EmptyCluster,
    #[error("duplicate topic id {id}")]
    DuplicateTopic { id: u64 },
    #[error("topic {id} has a zero-norm embedding; it cannot be scored")]
    ZeroNormTopic { id: u64 },
    #[error("topic {id}: stored embedding differs from recomputed {mode} by {delta:e}")]
    EmbeddingMismatch { id: u64, mode: TopicEmbeddingMode, delta: f64 },
    #[error("record references unknown topic id {id}")]
    UnknownTopic { id: u64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// How a topic's embedding aggregates its member-document embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopicEmbeddingMode {
    /// Component-wise mean of the member embeddings (the default).
    #[default]
    Centroid,
    /// The member embedding minimizing total cosine distance to the other
    /// members; ties break toward the earliest member.
    Medoid,
}

impl std::fmt::Display for TopicEmbeddingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TopicEmbeddingMode::Centroid => "centroid",
            TopicEmbeddingMode::Medoid => "medoid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: u64,
    pub label: Option<String>,
    pub doc_count: u64,
    pub embedding: EmbeddingVector,
    /// Up to [`MAX_KEYWORDS`] label unigrams, best first.
    pub keywords: Vec<String>,
}

/// A loaded, validated topic model. Topics keep the file's order until
/// [`TopicModel::truncated`] re-ranks them by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub dim: usize,
    pub topics: Vec<Topic>,
}

/// Aggregate member-document embeddings into one topic embedding.
pub fn topic_embedding(
    members: &[EmbeddingVector],
    mode: TopicEmbeddingMode,
) -> Result<EmbeddingVector, TopicError> {
    if members.is_empty() {
        return Err(TopicError::EmptyCluster);
    }
    match mode {
        TopicEmbeddingMode::Centroid => Ok(mean_embedding(members)?),
        TopicEmbeddingMode::Medoid => {
            let mut best: Option<(usize, f64)> = None;
            for (i, candidate) in members.iter().enumerate() {
                let mut total = 0.0f64;
                for (j, other) in members.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    total += 1.0 - cosine(candidate, other)?;
                }
                let better = match best {
                    None => true,
                    Some((_, best_total)) => total < best_total,
                };
                if better {
                    best = Some((i, total));
                }
            }
            let (i, _) = best.expect("non-empty members");
            Ok(members[i].clone())
        }
    }
}

/// Cosine similarity of one document against every topic, in model order.
/// Returns `None` for a zero-norm document (similarity undefined, scores
/// absent rather than zero).
pub fn score_topics(
    doc: &EmbeddingVector,
    model: &TopicModel,
) -> Result<Option<Vec<f64>>, EmbedError> {
    if doc.is_zero() {
        return Ok(None);
    }
    let mut scores = Vec::with_capacity(model.topics.len());
    for topic in &model.topics {
        scores.push(cosine(doc, &topic.embedding)?);
    }
    Ok(Some(scores))
}

/// Top-`k` keywords per cluster by class-based TF-IDF.
///
/// For term `t` in cluster `c`: `w(t, c) = tf(t, c) · ln(1 + A / f(t))`,
/// where `tf(t, c)` is the term's count in the cluster, `A` is the average
/// total term count per cluster, and `f(t)` is the term's total count
/// across clusters. Ranking is by weight descending with lexicographic
/// tie-breaks.
pub fn ctfidf_keywords(
    cluster_term_counts: &[BTreeMap<String, u64>],
    k: usize,
) -> Vec<Vec<String>> {
    let n_clusters = cluster_term_counts.len();
    if n_clusters == 0 {
        return Vec::new();
    }
    let total_tokens: u64 = cluster_term_counts
        .iter()
        .map(|c| c.values().sum::<u64>())
        .sum();
    let avg_per_cluster = total_tokens as f64 / n_clusters as f64;
    let mut corpus_freq: BTreeMap<&str, u64> = BTreeMap::new();
    for cluster in cluster_term_counts {
        for (term, count) in cluster {
            *corpus_freq.entry(term.as_str()).or_insert(0) += count;
        }
    }
    cluster_term_counts
        .iter()
        .map(|cluster| {
            let mut scored: Vec<(&str, f64)> = cluster
                .iter()
                .filter(|(_, count)| **count > 0)
                .map(|(term, count)| {
                    let f_t = corpus_freq[term.as_str()] as f64;
                    let weight = *count as f64 * (1.0 + avg_per_cluster / f_t).ln();
                    (term.as_str(), weight)
                })
                .collect();
            scored.sort_by(|(ta, wa), (tb, wb)| {
                wb.partial_cmp(wa).expect("finite weights").then_with(|| ta.cmp(tb))
            });
            scored.into_iter().take(k).map(|(t, _)| t.to_string()).collect()
        })
        .collect()
}

impl TopicModel {
    /// Keep the `n` most frequent topics (`doc_count` descending, id
    /// ascending on ties), in that rank order.
    pub fn truncated(mut self, n: usize) -> TopicModel {
        self.topics
            .sort_by(|a, b| b.doc_count.cmp(&a.doc_count).then_with(|| a.id.cmp(&b.id)));
        self.topics.truncate(n);
        self
    }

    fn validate(topics: &[Topic], dim: usize) -> Result<(), TopicError> {
        let mut seen = BTreeSet::new();
        for topic in topics {
            if !seen.insert(topic.id) {
                return Err(TopicError::DuplicateTopic { id: topic.id });
            }
            if topic.embedding.dim() != dim {
                return Err(TopicError::Embed(EmbedError::DimMismatch {
                    left: dim,
                    right: topic.embedding.dim(),
                }));
            }
            if topic.embedding.is_zero() {
                return Err(TopicError::ZeroNormTopic { id: topic.id });
            }
        }
        Ok(())
    }

    /// Build a model directly (tests, synthetic pipelines). Applies the same
    /// validation as [`TopicModel::load`], minus member verification.
    pub fn new(dim: usize, mut topics: Vec<Topic>) -> Result<TopicModel, TopicError> {
        for topic in &mut topics {
            topic.keywords.truncate(MAX_KEYWORDS);
        }
        Self::validate(&topics, dim)?;
        Ok(TopicModel { dim, topics })
    }

    /// Parse and validate a topic-model file.
    ///
    /// Format (tab-separated, `#` comments):
    ///
    /// ```text
    /// dim\t<D>
    /// topics\t<N>
    /// topic\t<id>\t<label or ->\t<doc_count>\t<c1 c2 ... cD>
    /// keywords\t<id>\t<w1 w2 ...>
    /// member\t<id>\t<c1 c2 ... cD>
    /// ```
    ///
    /// `keywords` and `member` records are optional. When a topic has
    /// `member` records its embedding is recomputed under `mode` and must
    /// match the stored vector to within 1e-9 per component.
    pub fn load(path: &Path, mode: TopicEmbeddingMode) -> Result<TopicModel, TopicError> {
        let file_err = |message: String| TopicError::File {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| file_err(e.to_string()))?;
        let mut dim: Option<usize> = None;
        let mut declared_topics: Option<usize> = None;
        let mut topics: Vec<Topic> = Vec::new();
        let mut members: BTreeMap<u64, Vec<EmbeddingVector>> = BTreeMap::new();

        let parse_floats = |field: &str, lineno: usize, d: usize| -> Result<Vec<f64>, TopicError> {
            let components: Vec<f64> = field
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| file_err(format!("line {lineno}: bad float")))?;
            if components.len() != d {
                return Err(file_err(format!(
                    "line {lineno}: expected {d} components, got {}",
                    components.len()
                )));
            }
            Ok(components)
        };

        for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| file_err(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                ["dim", d] if dim.is_none() => {
                    dim = Some(d.parse().map_err(|_| file_err(format!("bad dim header {d:?}")))?);
                }
                ["topics", n] if declared_topics.is_none() => {
                    declared_topics =
                        Some(n.parse().map_err(|_| file_err(format!("bad topic count {n:?}")))?);
                }
                ["topic", id, label, doc_count, floats] => {
                    let d = dim.ok_or_else(|| file_err("topic record before dim header".into()))?;
                    let id: u64 = id
                        .parse()
                        .map_err(|_| file_err(format!("line {lineno}: bad topic id")))?;
                    let doc_count: u64 = doc_count
                        .parse()
                        .map_err(|_| file_err(format!("line {lineno}: bad doc count")))?;
                    let label = match *label {
                        "-" | "" => None,
                        other => Some(other.to_string()),
                    };
                    topics.push(Topic {
                        id,
                        label,
                        doc_count,
                        embedding: EmbeddingVector::new(parse_floats(floats, lineno, d)?),
                        keywords: Vec::new(),
                    });
                }
                ["keywords", id, words] => {
                    let id: u64 = id
                        .parse()
                        .map_err(|_| file_err(format!("line {lineno}: bad topic id")))?;
                    let topic = topics
                        .iter_mut()
                        .find(|t| t.id == id)
                        .ok_or(TopicError::UnknownTopic { id })?;
                    topic.keywords = words
                        .split(' ')
                        .filter(|w| !w.is_empty())
                        .take(MAX_KEYWORDS)
                        .map(str::to_string)
                        .collect();
                }
                ["member", id, floats] => {
                    let d = dim.ok_or_else(|| file_err("member record before dim header".into()))?;
                    let id: u64 = id
                        .parse()
                        .map_err(|_| file_err(format!("line {lineno}: bad topic id")))?;
                    members
                        .entry(id)
                        .or_default()
                        .push(EmbeddingVector::new(parse_floats(floats, lineno, d)?));
                }
                _ => return Err(file_err(format!("line {lineno}: malformed record"))),
            }
        }

        let dim = dim.ok_or_else(|| file_err("missing dim header".into()))?;
        if let Some(n) = declared_topics {
            if n != topics.len() {
                return Err(file_err(format!(
                    "header declares {n} topics, file has {}",
                    topics.len()
                )));
            }
        }
        Self::validate(&topics, dim)?;
        for (id, member_vectors) in &members {
            let topic = topics
                .iter()
                .find(|t| t.id == *id)
                .ok_or(TopicError::UnknownTopic { id: *id })?;
            let recomputed = topic_embedding(member_vectors, mode)?;
            let delta = topic
                .embedding
                .components
                .iter()
                .zip(&recomputed.components)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if delta > VERIFY_TOLERANCE {
                return Err(TopicError::EmbeddingMismatch { id: *id, mode, delta });
            }
        }
        Ok(TopicModel { dim, topics })
    }

    /// Write the model (without member records; those live with the
    /// producing tool).
    pub fn save(&self, path: &Path) -> Result<(), TopicError> {
        let file_err = |message: String| TopicError::File {
            path: path.to_path_buf(),
            message,
        };
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| file_err(e.to_string()))?,
        );
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "# topic-model v1")?;
            writeln!(out, "dim\t{}", self.dim)?;
            writeln!(out, "topics\t{}", self.topics.len())?;
            for t in &self.topics {
                let floats: Vec<String> =
                    t.embedding.components.iter().map(|c| format!("{c}")).collect();
                writeln!(
                    out,
                    "topic\t{}\t{}\t{}\t{}",
                    t.id,
                    t.label.as_deref().unwrap_or("-"),
                    t.doc_count,
                    floats.join(" ")
                )?;
                if !t.keywords.is_empty() {
                    writeln!(out, "keywords\t{}\t{}", t.id, t.keywords.join(" "))?;
                }
            }
            out.flush()
        };
        write().map_err(|e| file_err(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn vec_of(components: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(components.to_vec())
    }

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
        let mut rng = crate::rngutil::derive_rng(seed, "topics/test", 0);
        (0..n)
            .map(|_| vec_of(&(0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect()
    }

    fn toy_model() -> TopicModel {
        TopicModel::new(
            3,
            vec![
                Topic {
                    id: 0,
                    label: Some("sleep".into()),
                    doc_count: 40,
                    embedding: vec_of(&[1.0, 0.0, 0.0]),
                    keywords: vec!["sleep".into(), "tired".into()],
                },
                Topic {
                    id: 1,
                    label: None,
                    doc_count: 25,
                    embedding: vec_of(&[0.0, 1.0, 0.0]),
                    keywords: Vec::new(),
                },
                Topic {
                    id: 2,
                    label: Some("meds".into()),
                    doc_count: 10,
                    embedding: vec_of(&[0.0, 0.0, 1.0]),
                    keywords: vec!["dose".into()],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn centroid_of_one_is_that_vector() {
        let v = vec_of(&[0.3, -0.4, 0.5]);
        let e = topic_embedding(&[v.clone()], TopicEmbeddingMode::Centroid).unwrap();
        assert_eq!(e, v);
    }

    #[test]
    fn opposed_members_make_a_degenerate_centroid() {
        let v = vec_of(&[0.6, -0.8]);
        let neg = vec_of(&[-0.6, 0.8]);
        let e = topic_embedding(&[v, neg], TopicEmbeddingMode::Centroid).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn centroid_matches_brute_force_mean() {
        let members = random_vectors(5, 7, 1);
        let e = topic_embedding(&members, TopicEmbeddingMode::Centroid).unwrap();
        for (j, c) in e.components.iter().enumerate() {
            let mean: f64 = members.iter().map(|m| m.components[j]).sum::<f64>() / 5.0;
            assert!((c - mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_cluster_is_fatal() {
        assert!(matches!(
            topic_embedding(&[], TopicEmbeddingMode::Centroid),
            Err(TopicError::EmptyCluster)
        ));
    }

    #[test]
    fn medoid_is_a_member_and_central() {
        // Two tight vectors near e1 and one outlier near e2: the medoid must
        // be one of the tight pair, and it must be an actual member.
        let members = vec![
            vec_of(&[1.0, 0.05]),
            vec_of(&[1.0, -0.05]),
            vec_of(&[0.0, 1.0]),
        ];
        let e = topic_embedding(&members, TopicEmbeddingMode::Medoid).unwrap();
        assert!(members.contains(&e));
        assert!(e.components[0] > 0.9, "outlier must not win: {e:?}");
    }

    #[test]
    fn scores_match_direct_cosines() {
        let model = toy_model();
        let doc = random_vectors(1, 3, 9).pop().unwrap();
        let scores = score_topics(&doc, &model).unwrap().unwrap();
        assert_eq!(scores.len(), 3);
        for (topic, score) in model.topics.iter().zip(&scores) {
            let oracle = cosine(&doc, &topic.embedding).unwrap();
            assert!((score - oracle).abs() <= 1e-12);
            assert!((-1.0..=1.0).contains(score));
        }
    }

    #[test]
    fn doc_equal_to_topic_scores_one() {
        let model = toy_model();
        let scores = score_topics(&vec_of(&[1.0, 0.0, 0.0]), &model).unwrap().unwrap();
        assert!((scores[0] - 1.0).abs() < 1e-12);
        assert!(scores[1].abs() < 1e-12 && scores[2].abs() < 1e-12);
    }

    #[test]
    fn zero_doc_has_absent_scores() {
        let model = toy_model();
        assert_eq!(score_topics(&vec_of(&[0.0, 0.0, 0.0]), &model).unwrap(), None);
    }

    #[test]
    fn scoring_is_scale_invariant() {
        let model = toy_model();
        let doc = vec_of(&[0.2, -0.5, 0.9]);
        let scaled = vec_of(&[0.2 * 3.7, -0.5 * 3.7, 0.9 * 3.7]);
        let a = score_topics(&doc, &model).unwrap().unwrap();
        let b = score_topics(&scaled, &model).unwrap().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn single_cluster_keywords_follow_term_frequency() {
        let cluster = counts(&[("alpha", 5), ("beta", 9), ("gamma", 2), ("delta", 9)]);
        let ranked = ctfidf_keywords(&[cluster], 10);
        // Equal counts tie-break lexicographically: beta before delta.
        assert_eq!(ranked, vec![vec!["beta", "delta", "alpha", "gamma"]]);
    }

    #[test]
    fn exclusive_terms_outrank_shared_terms() {
        let a = counts(&[("unique", 4), ("shared", 4)]);
        let b = counts(&[("shared", 4), ("noise", 1)]);
        let c = counts(&[("shared", 4), ("other", 1)]);
        let ranked = ctfidf_keywords(&[a, b, c], 2);
        assert_eq!(ranked[0], vec!["unique", "shared"]);
    }

    #[test]
    fn k_beyond_vocabulary_returns_everything() {
        let ranked = ctfidf_keywords(&[counts(&[("only", 1)])], 10);
        assert_eq!(ranked, vec![vec!["only"]]);
        assert!(ctfidf_keywords(&[], 10).is_empty());
        assert_eq!(ctfidf_keywords(&[BTreeMap::new()], 10), vec![Vec::<String>::new()]);
    }

    #[test]
    fn truncation_keeps_most_frequent_with_id_ties() {
        let mut topics = toy_model().topics;
        topics.push(Topic {
            id: 3,
            label: None,
            doc_count: 25,
            embedding: vec_of(&[0.0, 0.6, 0.8]),
            keywords: Vec::new(),
        });
        let model = TopicModel::new(3, topics).unwrap().truncated(2);
        let ids: Vec<u64> = model.topics.iter().map(|t| t.id).collect();
        // doc_counts 40, 25, 25, 10 → keep 40 and the lower-id 25.
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn file_roundtrip_preserves_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tsv");
        let model = toy_model();
        model.save(&path).unwrap();
        let loaded = TopicModel::load(&path, TopicEmbeddingMode::Centroid).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn member_verification_catches_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.tsv");
        std::fs::write(
            &good,
            "dim\t2\ntopic\t0\t-\t3\t0.5 0.5\nmember\t0\t1 0\nmember\t0\t0 1\n",
        )
        .unwrap();
        assert!(TopicModel::load(&good, TopicEmbeddingMode::Centroid).is_ok());

        let bad = dir.path().join("bad.tsv");
        std::fs::write(
            &bad,
            "dim\t2\ntopic\t0\t-\t3\t0.9 0.1\nmember\t0\t1 0\nmember\t0\t0 1\n",
        )
        .unwrap();
        assert!(matches!(
            TopicModel::load(&bad, TopicEmbeddingMode::Centroid),
            Err(TopicError::EmbeddingMismatch { id: 0, .. })
        ));
    }

    #[test]
    fn load_rejects_bad_models() {
        let dir = tempfile::tempdir().unwrap();
        let zero = dir.path().join("zero.tsv");
        std::fs::write(&zero, "dim\t2\ntopic\t0\t-\t3\t0 0\n").unwrap();
        assert!(matches!(
            TopicModel::load(&zero, TopicEmbeddingMode::Centroid),
            Err(TopicError::ZeroNormTopic { id: 0 })
        ));

        let dup = dir.path().join("dup.tsv");
        std::fs::write(&dup, "dim\t2\ntopic\t0\t-\t3\t1 0\ntopic\t0\t-\t2\t0 1\n").unwrap();
        assert!(matches!(
            TopicModel::load(&dup, TopicEmbeddingMode::Centroid),
            Err(TopicError::DuplicateTopic { id: 0 })
        ));

        let orphan = dir.path().join("orphan.tsv");
        std::fs::write(&orphan, "dim\t2\ntopic\t0\t-\t3\t1 0\nmember\t7\t1 0\n").unwrap();
        assert!(matches!(
            TopicModel::load(&orphan, TopicEmbeddingMode::Centroid),
            Err(TopicError::UnknownTopic { id: 7 })
        ));

        let badcount = dir.path().join("badcount.tsv");
        std::fs::write(&badcount, "dim\t2\ntopics\t2\ntopic\t0\t-\t3\t1 0\n").unwrap();
        assert!(matches!(
            TopicModel::load(&badcount, TopicEmbeddingMode::Centroid),
            Err(TopicError::File { .. })
        ));
    }

    #[test]
    fn medoid_mode_verifies_against_medoid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("medoid.tsv");
        // Stored embedding is the first member (the medoid of this trio).
        std::fs::write(
            &path,
            "dim\t2\ntopic\t0\t-\t3\t1 0.05\nmember\t0\t1 0.05\nmember\t0\t1 -0.05\nmember\t0\t0 1\n",
        )
        .unwrap();
        assert!(TopicModel::load(&path, TopicEmbeddingMode::Medoid).is_ok());
        // Under centroid mode the same file fails verification.
        assert!(matches!(
            TopicModel::load(&path, TopicEmbeddingMode::Centroid),
            Err(TopicError::EmbeddingMismatch { .. })
        ));
    }
}
