//! Built-in English detection.
//!
//! The detector scores a text as a weighted mix of two cheap, deterministic
//! signals and compares against a fixed threshold:
//!
//! ```text
//! score = 0.6 * stopword_ratio + 0.4 * trigram_ratio
//! ```
//!
//! * `stopword_ratio` — fraction of alphabetic tokens that are common
//!   English function words;
//! * `trigram_ratio` — fraction of within-word character trigrams found in
//!   a table of high-frequency English trigrams.
//!
//! The default threshold is 0.15: a short English sentence with a couple of
//! function words clears it comfortably, while function words and trigram
//! inventories of other languages overlap too little to reach it. Like any
//! lightweight language ID, this misclassifies very short fragments; those
//! posts are simply excluded, which is the conservative direction for
//! cohort building. The provider is pluggable at the pipeline level — this
//! scorer is the reproducible default.

use std::collections::HashSet;
use std::sync::LazyLock;

const STOPWORDS: &[&str] = &[
    "the", "be", "to", "of", "and", "a", "in", "that", "have", "i", "it", "for", "not", "on",
    "with", "he", "as", "you", "do", "at", "this", "but", "his", "by", "from", "they", "we",
    "say", "her", "she", "or", "an", "will", "my", "one", "all", "would", "there", "their",
    "what", "so", "up", "out", "if", "about", "who", "get", "which", "go", "me", "when", "can",
    "like", "just", "him", "know", "take", "into", "your", "some", "could", "them", "see",
    "than", "then", "now", "only", "its", "over", "also", "after", "how", "our", "well", "way",
    "because", "any", "these", "us", "is", "was", "are", "been", "has", "had", "were", "did",
    "am", "very", "too",
];

const TRIGRAMS: &[&str] = &[
    "the", "ing", "and", "ion", "tio", "ent", "ati", "for", "her", "ter", "hat", "tha", "ere",
    "ate", "his", "con", "res", "ver", "all", "ons", "nce", "men", "ith", "ted", "ers", "pro",
    "thi", "wit", "are", "ess", "not", "ive", "was", "ect", "rea", "com", "eve", "per", "int",
    "est", "sta", "cti", "ica", "ist", "ear", "ain", "one", "our", "iti", "rat", "hen", "ght",
    "out", "oug", "you", "ust", "ome",
];

static STOPWORD_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| STOPWORDS.iter().copied().collect());
static TRIGRAM_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| TRIGRAMS.iter().copied().collect());

#[derive(Debug, Clone)]
pub struct EnglishDetector {
    threshold: f64,
}

impl Default for EnglishDetector {
    fn default() -> Self {
        EnglishDetector { threshold: 0.15 }
    }
}

impl EnglishDetector {
    pub fn with_threshold(threshold: f64) -> Self {
        EnglishDetector { threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Combined score in `[0, 1]`; 0 for texts with no alphabetic tokens.
    pub fn score(&self, text: &str) -> f64 {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphabetic())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            return 0.0;
        }
        let stop_hits = tokens
            .iter()
            .filter(|t| STOPWORD_SET.contains(**t))
            .count();
        let stop_ratio = stop_hits as f64 / tokens.len() as f64;

        let mut tri_total = 0usize;
        let mut tri_hits = 0usize;
        for token in &tokens {
            let chars: Vec<char> = token.chars().collect();
            if chars.len() < 3 {
                continue;
            }
            for w in chars.windows(3) {
                tri_total += 1;
                let tri: String = w.iter().collect();
                if TRIGRAM_SET.contains(tri.as_str()) {
                    tri_hits += 1;
                }
            }
        }
        let tri_ratio = if tri_total == 0 {
            0.0
        } else {
            tri_hits as f64 / tri_total as f64
        };
        0.6 * stop_ratio + 0.4 * tri_ratio
    }

    pub fn is_english(&self, text: &str) -> bool {
        self.score(text) >= self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_sentences_pass() {
        let d = EnglishDetector::default();
        assert!(d.is_english("the cat sat on the mat because it was warm"));
        assert!(d.is_english("I was diagnosed with bipolar disorder in December 2019."));
        assert!(d.is_english("this is a longer post about how things have been going lately"));
    }

    #[test]
    fn non_english_sentences_fail() {
        let d = EnglishDetector::default();
        assert!(!d.is_english("der Hund läuft schnell über die Straße heute"));
        assert!(!d.is_english("el perro corre rápido por la calle hoy mismo"));
        assert!(!d.is_english("le chien court vite dans la rue aujourd'hui"));
        assert!(!d.is_english("0x1f 0x2e 0x3d 12345 67890"));
    }

    #[test]
    fn score_is_deterministic_and_bounded() {
        let d = EnglishDetector::default();
        let s = d.score("some middling mixture of words");
        assert_eq!(s, d.score("some middling mixture of words"));
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(d.score(""), 0.0);
        assert_eq!(d.score("12345 !!!"), 0.0);
    }

    #[test]
    fn threshold_is_configurable() {
        let strict = EnglishDetector::with_threshold(0.9);
        assert!(!strict.is_english("the cat sat on the mat"));
        let lax = EnglishDetector::with_threshold(0.0);
        assert!(lax.is_english("der Hund"));
    }
}
