//! Per-post formal language features: tokenization, verbosity, sentiment
//! polarity, POS tag frequencies, and sentence-embedding coherence.
//!
//! Everything here is pure given the post text and (for coherence) the
//! sentence vectors supplied by an embedding provider, so feature extraction
//! parallelizes trivially across posts. The output is one wide record per
//! post with dotted feature keys (`verbosity.n_words`, `pos.PRP`,
//! `coherence.first.mean`, ...).

pub mod pos;
pub mod sentiment;

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::embed::{cosine, EmbedError, EmbeddingVector};
use crate::stats;

use pos::PosTagger;
use sentiment::SentimentLexicon;

/// A post split into sentences and per-sentence word tokens. Punctuation-only
/// tokens are excluded from `words`, so the word counts are linguistic, not
/// typographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPost {
    pub sentences: Vec<String>,
    /// `words[i]` are the word tokens of `sentences[i]`.
    pub words: Vec<Vec<String>>,
}

impl TokenizedPost {
    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }
}

/// Sentence terminators that should *not* end a sentence: common titles and
/// Latin abbreviations, plus any dotted-letter run (`u.s.`, `e.g.`, initials).
static ABBREVIATIONS: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    vec![
        "mr.", "mrs.", "ms.", "dr.", "prof.", "rev.", "gen.", "sen.", "st.", "jr.", "sr.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "approx.", "dept.", "est.", "fig.",
        "no.", "inc.", "ltd.", "co.", "corp.", "min.", "max.", "jan.", "feb.", "mar.",
        "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
    ]
});

static RE_DOTTED_LETTERS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([a-z]\.)+$").expect("static regex"));

fn is_abbreviation(word: &str) -> bool {
    let w = word.to_lowercase();
    ABBREVIATIONS.contains(&w.as_str()) || RE_DOTTED_LETTERS.is_match(&w)
}

/// Trailing non-whitespace run of `chunk`, i.e. the word the terminator is
/// attached to.
fn last_word(chunk: &str) -> &str {
    match chunk.rfind(char::is_whitespace) {
        Some(i) => &chunk[i + chunk[i..].chars().next().map_or(1, char::len_utf8)..],
        None => chunk,
    }
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    for line in text.split('\n') {
        let chars: Vec<char> = line.chars().collect();
        let mut current = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            current.push(c);
            if matches!(c, '.' | '!' | '?') {
                // Absorb a run of terminators ("?!", "...").
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                    current.push(chars[j]);
                    j += 1;
                }
                let at_boundary = j >= chars.len() || chars[j].is_whitespace();
                // Only a lone '.' can belong to an abbreviation; "etc.!"
                // still terminates.
                let guarded = j == i + 1 && c == '.' && is_abbreviation(last_word(&current));
                if at_boundary && !guarded {
                    let s = current.trim();
                    if !s.is_empty() {
                        sentences.push(s.to_string());
                    }
                    current.clear();
                }
                i = j;
            } else {
                i += 1;
            }
        }
        let s = current.trim();
        if !s.is_empty() {
            sentences.push(s.to_string());
        }
    }
    sentences
}

/// Word tokens of a text fragment: whitespace-split, edge punctuation
/// stripped, internal apostrophes/hyphens and original case preserved.
/// Punctuation-only fragments are dropped.
pub fn flat_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let token = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if token.is_empty() {
                None
            } else {
                Some(token.to_string())
            }
        })
        .collect()
}

/// Deterministic sentence and word tokenization of cleaned post text.
pub fn tokenize(text: &str) -> TokenizedPost {
    let sentences = split_sentences(text);
    let words = sentences.iter().map(|s| flat_words(s)).collect();
    TokenizedPost { sentences, words }
}

/// Post length summary. `words_per_sentence` is absent for empty posts.
#[derive(Debug, Clone, PartialEq)]
pub struct Verbosity {
    pub n_words: usize,
    pub n_sentences: usize,
    pub words_per_sentence: Option<f64>,
}

pub fn verbosity(tok: &TokenizedPost) -> Verbosity {
    let n_words = tok.n_words();
    let n_sentences = tok.n_sentences();
    let words_per_sentence = if n_sentences == 0 {
        None
    } else {
        Some(n_words as f64 / n_sentences as f64)
    };
    Verbosity { n_words, n_sentences, words_per_sentence }
}

/// Summary statistics over one order's pair-cosine multiset. `variance` is
/// the population variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

/// The 12 coherence features: four statistics for each of the first-order
/// (adjacent sentences), second-order (one intervening sentence), and global
/// (all pairs) cosine-similarity multisets. An order with no computable
/// pairs is absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherenceFeatures {
    pub first: Option<OrderStats>,
    pub second: Option<OrderStats>,
    pub global: Option<OrderStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    First,
    Second,
    Global,
}

fn order_pairs(n: usize, order: Order) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    match order {
        Order::First => {
            for i in 1..n {
                pairs.push((i - 1, i));
            }
        }
        Order::Second => {
            for i in 2..n {
                pairs.push((i - 2, i));
            }
        }
        Order::Global => {
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}

fn order_stats(vectors: &[EmbeddingVector], order: Order) -> Result<Option<OrderStats>, EmbedError> {
    let mut values = Vec::new();
    for (i, j) in order_pairs(vectors.len(), order) {
        match cosine(&vectors[i], &vectors[j]) {
            Ok(c) => values.push(c),
            // A zero-norm sentence vector has no direction; its pairs are
            // skipped rather than poisoning the whole post.
            Err(EmbedError::UndefinedSimilarity) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some(mean) = stats::mean(&values) else {
        return Ok(None);
    };
    let variance = stats::population_variance(&values).expect("non-empty");
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Some(OrderStats { mean, variance, min, max }))
}

/// Coherence statistics for a post's sentence vectors, in sentence order.
/// Errors only on inconsistent vector dimensions.
pub fn coherence_features(vectors: &[EmbeddingVector]) -> Result<CoherenceFeatures, EmbedError> {
    Ok(CoherenceFeatures {
        first: order_stats(vectors, Order::First)?,
        second: order_stats(vectors, Order::Second)?,
        global: order_stats(vectors, Order::Global)?,
    })
}

/// One wide feature record per post. Absent features are simply missing
/// keys, so downstream aggregation can distinguish "zero" from "undefined".
#[derive(Debug, Clone, PartialEq)]
pub struct PostFeatures {
    pub post_id: String,
    pub values: BTreeMap<String, f64>,
}

fn insert_order(values: &mut BTreeMap<String, f64>, prefix: &str, stats: Option<OrderStats>) {
    if let Some(s) = stats {
        values.insert(format!("coherence.{prefix}.mean"), s.mean);
        values.insert(format!("coherence.{prefix}.variance"), s.variance);
        values.insert(format!("coherence.{prefix}.min"), s.min);
        values.insert(format!("coherence.{prefix}.max"), s.max);
    }
}

/// Compute the full feature record for one post. `sentence_vectors`, when
/// provided, must be the embeddings of `tokenize(text).sentences` in order;
/// pass `None` to skip coherence (e.g. when no provider is configured).
pub fn compute_post_features(
    post_id: &str,
    text: &str,
    sentence_vectors: Option<&[EmbeddingVector]>,
    tagger: &dyn PosTagger,
    lexicon: &SentimentLexicon,
) -> Result<PostFeatures, EmbedError> {
    let tok = tokenize(text);
    let mut values = BTreeMap::new();

    let verb = verbosity(&tok);
    values.insert("verbosity.n_words".to_string(), verb.n_words as f64);
    values.insert("verbosity.n_sentences".to_string(), verb.n_sentences as f64);
    if let Some(wps) = verb.words_per_sentence {
        values.insert("verbosity.words_per_sentence".to_string(), wps);
    }

    values.insert(
        "sentiment.polarity".to_string(),
        sentiment::sentiment_polarity(text, lexicon),
    );

    if let Some(freqs) = pos::pos_frequencies(&tok.words, tagger) {
        for (tag, f) in freqs {
            values.insert(format!("pos.{tag}"), f);
        }
    }

    if let Some(vectors) = sentence_vectors {
        let coh = coherence_features(vectors)?;
        insert_order(&mut values, "first", coh.first);
        insert_order(&mut values, "second", coh.second);
        insert_order(&mut values, "global", coh.global);
    }

    Ok(PostFeatures { post_id: post_id.to_string(), values })
}
