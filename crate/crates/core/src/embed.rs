//! Embedding vectors, cosine similarity, and pluggable sentence-embedding
//! providers.
//!
//! The pipeline never bundles a neural model. Vectors come from one of
//! three providers behind [`SentenceEmbedder`]:
//!
//! * [`PrecomputedEmbeddings`] — a file of vectors keyed by
//!   `(post_id, sentence_index)`, produced by any external tool;
//! * [`HttpEmbedder`] — a vectorization endpoint called at run time;
//! * [`HashedEmbedder`] — a deterministic feature-hashing embedder used for
//!   synthetic data and tests (fast, model-free, stable across platforms).
//!
//! All vectors in a run share one dimension; cosine against a zero-norm
//! vector is an error rather than a silent 0.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("undefined similarity: zero-norm vector")]
    UndefinedSimilarity,
    #[error("empty embedding set")]
    EmptySet,
    #[error("missing embedding for post {post_id} sentence {sentence_index}")]
    Missing {
        post_id: String,
        sentence_index: usize,
    },
    #[error("embedding file error at {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("embedding service transport failure: {0}")]
    Transport(String),
}

/// A fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub components: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| *c == 0.0)
    }
}

/// Cosine similarity, clamped into [-1, 1] against rounding spill.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::UndefinedSimilarity);
    }
    let dot: f64 = u
        .components
        .iter()
        .zip(&v.components)
        .map(|(a, b)| a * b)
        .sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Component-wise mean of a non-empty set of same-dimension vectors.
pub fn mean_embedding(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbedError> {
    let first = vectors.first().ok_or(EmbedError::EmptySet)?;
    let dim = first.dim();
    let mut acc = vec![0.0f64; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(EmbedError::DimMismatch {
                left: dim,
                right: v.dim(),
            });
        }
        for (a, c) in acc.iter_mut().zip(&v.components) {
            *a += c;
        }
    }
    let n = vectors.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(EmbeddingVector::new(acc))
}

/// Provider of per-sentence vectors for one post.
pub trait SentenceEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    /// Vectors for the sentences of `post_id`, in sentence order.
    fn embed_post(
        &self,
        post_id: &str,
        sentences: &[String],
    ) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

// ---------------------------------------------------------------------------
// Precomputed file provider
// ---------------------------------------------------------------------------

/// Vectors read from a file keyed by `(post_id, sentence_index)`.
///
/// File format (tab-separated text):
///
/// ```text
/// # sentence-embeddings v1
/// dim<TAB>D
/// post_id<TAB>sentence_index<TAB>c1 c2 ... cD
/// ```
///
/// Components are space-separated decimal floats; Rust's shortest-roundtrip
/// float formatting keeps save/load bit-exact.
pub struct PrecomputedEmbeddings {
    dim: usize,
    vectors: BTreeMap<(String, usize), EmbeddingVector>,
}

impl PrecomputedEmbeddings {
    pub fn new(dim: usize) -> PrecomputedEmbeddings {
        PrecomputedEmbeddings {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, post_id: &str, sentence_index: usize, v: EmbeddingVector) {
        self.vectors.insert((post_id.to_string(), sentence_index), v);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn load(path: &Path) -> Result<PrecomputedEmbeddings, EmbedError> {
        let file_err = |message: String| EmbedError::File {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| file_err(e.to_string()))?;
        let mut dim: Option<usize> = None;
        let mut vectors = BTreeMap::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| file_err(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match (dim, cols.as_slice()) {
                (None, ["dim", d]) => {
                    dim = Some(
                        d.parse()
                            .map_err(|_| file_err(format!("bad dim header {d:?}")))?,
                    );
                }
                (Some(d), [post_id, idx, floats]) => {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| file_err(format!("line {}: bad index", lineno + 1)))?;
                    let components: Vec<f64> = floats
                        .split(' ')
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| file_err(format!("line {}: bad float", lineno + 1)))?;
                    if components.len() != d {
                        return Err(file_err(format!(
                            "line {}: expected {d} components, got {}",
                            lineno + 1,
                            components.len()
                        )));
                    }
                    vectors.insert((post_id.to_string(), idx), EmbeddingVector::new(components));
                }
                _ => {
                    return Err(file_err(format!("line {}: malformed record", lineno + 1)));
                }
            }
        }
        let dim = dim.ok_or_else(|| file_err("missing dim header".into()))?;
        Ok(PrecomputedEmbeddings { dim, vectors })
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let file_err = |message: String| EmbedError::File {
            path: path.to_path_buf(),
            message,
        };
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| file_err(e.to_string()))?,
        );
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "# sentence-embeddings v1")?;
            writeln!(out, "dim\t{}", self.dim)?;
            for ((post_id, idx), v) in &self.vectors {
                let floats: Vec<String> = v.components.iter().map(|c| format!("{c}")).collect();
                writeln!(out, "{post_id}\t{idx}\t{}", floats.join(" "))?;
            }
            out.flush()
        };
        write().map_err(|e| file_err(e.to_string()))
    }
}

impl SentenceEmbedder for PrecomputedEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_post(
        &self,
        post_id: &str,
        sentences: &[String],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (0..sentences.len())
            .map(|i| {
                self.vectors
                    .get(&(post_id.to_string(), i))
                    .cloned()
                    .ok_or_else(|| EmbedError::Missing {
                        post_id: post_id.to_string(),
                        sentence_index: i,
                    })
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Deterministic hashing provider
// ---------------------------------------------------------------------------

/// Feature-hashing embedder: each word and character trigram of a sentence
/// flips one signed component. Deterministic across platforms (FNV-1a, no
/// process-seeded hashing), L2-normalized, zero vector for empty text.
/// Similar texts share buckets and therefore point in similar directions,
/// which is exactly what synthetic-data tests need from an embedding.
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> HashedEmbedder {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedEmbedder { dim }
    }

    fn fnv1a(bytes: &[u8]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Embed arbitrary text (shared by sentences and whole documents).
    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0.0f64; self.dim];
        let lower = text.to_lowercase();
        let mut bump = |feature: &[u8], weight: f64| {
            let h = Self::fnv1a(feature);
            let idx = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            acc[idx] += sign * weight;
        };
        for token in lower.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            bump(token.as_bytes(), 1.0);
            let chars: Vec<char> = token.chars().collect();
            for w in chars.windows(3) {
                let tri: String = w.iter().collect();
                bump(tri.as_bytes(), 0.25);
            }
        }
        let v = EmbeddingVector::new(acc);
        let n = v.norm();
        if n == 0.0 {
            v
        } else {
            EmbeddingVector::new(v.components.iter().map(|c| c / n).collect())
        }
    }
}

impl SentenceEmbedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_post(
        &self,
        _post_id: &str,
        sentences: &[String],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(sentences.iter().map(|s| self.embed_text(s)).collect())
    }
}

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

/// Client for an embedding endpoint (`POST {base}/api/embed` with
/// `{"model", "input": [texts]}` returning `{"embeddings": [[...]]}`).
pub struct HttpEmbedder {
    base_url: String,
    model: String,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, dim: usize, timeout: std::time::Duration) -> HttpEmbedder {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        HttpEmbedder {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            dim,
            agent: config.into(),
        }
    }
}

impl SentenceEmbedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_post(
        &self,
        _post_id: &str,
        sentences: &[String],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if sentences.is_empty() {
            return Ok(Vec::new());
        }
        let url = format!("{}/api/embed", self.base_url);
        let body = serde_json::json!({ "model": self.model, "input": sentences });
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        #[derive(Deserialize)]
        struct Reply {
            embeddings: Vec<Vec<f64>>,
        }
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Transport(format!("invalid response body: {e}")))?;
        if reply.embeddings.len() != sentences.len() {
            return Err(EmbedError::Transport(format!(
                "expected {} embeddings, got {}",
                sentences.len(),
                reply.embeddings.len()
            )));
        }
        reply
            .embeddings
            .into_iter()
            .map(|components| {
                if components.len() != self.dim {
                    Err(EmbedError::DimMismatch {
                        left: self.dim,
                        right: components.len(),
                    })
                } else {
                    Ok(EmbeddingVector::new(components))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(components: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(components.to_vec())
    }

    #[test]
    fn cosine_identities() {
        let u = v(&[1.0, 2.0, 2.0]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let a = v(&[1.0, 0.0]);
        let b = v(&[0.0, 1.0]);
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
        let neg = v(&[-1.0, -2.0, -2.0]);
        assert!((cosine(&u, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(EmbedError::DimMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            cosine(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])),
            Err(EmbedError::UndefinedSimilarity)
        ));
    }

    #[test]
    fn mean_embedding_oracle() {
        let vs = [v(&[1.0, 2.0]), v(&[3.0, 4.0]), v(&[5.0, 0.0])];
        let m = mean_embedding(&vs).unwrap();
        assert_eq!(m.components, vec![3.0, 2.0]);
        assert!(matches!(mean_embedding(&[]), Err(EmbedError::EmptySet)));
        assert!(matches!(
            mean_embedding(&[v(&[1.0]), v(&[1.0, 2.0])]),
            Err(EmbedError::DimMismatch { .. })
        ));
    }

    #[test]
    fn precomputed_roundtrip_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.tsv");
        let mut store = PrecomputedEmbeddings::new(3);
        store.insert("p1", 0, v(&[0.25, -1.5, 3.0]));
        store.insert("p1", 1, v(&[1.0 / 3.0, 0.1, -0.7]));
        store.insert("p2", 0, v(&[0.0, 0.0, 1.0]));
        store.save(&path).unwrap();

        let loaded = PrecomputedEmbeddings::load(&path).unwrap();
        assert_eq!(loaded.dim(), 3);
        assert_eq!(loaded.len(), 3);
        let sentences = vec!["a".to_string(), "b".to_string()];
        let got = loaded.embed_post("p1", &sentences).unwrap();
        // Bit-exact after the text roundtrip, including 1/3.
        assert_eq!(got[0].components, vec![0.25, -1.5, 3.0]);
        assert_eq!(got[1].components[0], 1.0 / 3.0);

        let err = loaded.embed_post("p3", &sentences).unwrap_err();
        assert!(matches!(err, EmbedError::Missing { sentence_index: 0, .. }));
    }

    #[test]
    fn hashed_embedder_is_deterministic_and_semantic_ish() {
        let emb = HashedEmbedder::new(64);
        let a = emb.embed_text("feeling very sad and hopeless today");
        let b = emb.embed_text("feeling very sad and hopeless today");
        assert_eq!(a, b, "same text, same vector");
        assert!((a.norm() - 1.0).abs() < 1e-12, "unit norm");

        let near = emb.embed_text("feeling sad and hopeless yesterday");
        let far = emb.embed_text("quarterly turbine maintenance schedule");
        let sim_near = cosine(&a, &near).unwrap();
        let sim_far = cosine(&a, &far).unwrap();
        assert!(
            sim_near > sim_far,
            "shared vocabulary should raise similarity ({sim_near} vs {sim_far})"
        );
        assert!(emb.embed_text("").is_zero());
        assert!(emb.embed_text("!!! ???").is_zero());
    }

    #[test]
    fn hashed_embedder_post_interface() {
        let emb = HashedEmbedder::new(32);
        let sents = vec!["one sentence".to_string(), "another one".to_string()];
        let vs = emb.embed_post("ignored", &sents).unwrap();
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[0].dim(), 32);
    }
}
