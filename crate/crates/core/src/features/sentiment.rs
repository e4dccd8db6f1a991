//! Lexicon-and-rules sentiment polarity in [-1, 1].
//!
//! A valence lexicon (bundled as a versioned data file) supplies per-word
//! scores on a -4..+4 scale; the rule engine adjusts them in context and
//! normalizes the sum:
//!
//! * negation within the three preceding words flips a hit to -0.74 of its
//!   value;
//! * intensifiers/dampeners within three words shift the magnitude by
//!   ±0.293, decayed by distance (×1, ×0.95, ×0.9);
//! * an ALL-CAPS hit in otherwise mixed-case text gains 0.733 magnitude;
//! * words after the last "but" weigh 1.5×, words before it 0.5×;
//! * exclamation marks add emphasis (0.292 each, at most 4 counted), and
//!   repeated question marks add 0.18 each (capped at 0.96);
//! * the adjusted sum s maps to s / sqrt(s² + 15), clamped to [-1, 1].
//!
//! Empty text or text without lexicon hits scores exactly 0.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("sentiment lexicon error at {path}: {message}")]
    File { path: String, message: String },
}

const NEGATION_SCALE: f64 = -0.74;
const BOOSTER_STEP: f64 = 0.293;
const ALLCAPS_BUMP: f64 = 0.733;
const EXCLAMATION_STEP: f64 = 0.292;
const QUESTION_STEP: f64 = 0.18;
const QUESTION_CAP: f64 = 0.96;
const BUT_BEFORE: f64 = 0.5;
const BUT_AFTER: f64 = 1.5;
const NORMALIZATION_ALPHA: f64 = 15.0;

static NEGATIONS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    [
        "not", "no", "never", "none", "cannot", "cant", "can't", "dont", "don't", "wont",
        "won't", "isnt", "isn't", "wasnt", "wasn't", "arent", "aren't", "werent", "weren't",
        "doesnt", "doesn't", "didnt", "didn't", "hasnt", "hasn't", "havent", "haven't",
        "hadnt", "hadn't", "couldnt", "couldn't", "wouldnt", "wouldn't", "shouldnt",
        "shouldn't", "aint", "ain't", "without", "rarely", "seldom", "hardly", "neither",
        "nor", "nothing", "nobody",
    ]
    .into_iter()
    .collect()
});

/// Word → magnitude shift (positive intensifies away from zero, negative
/// dampens toward it).
static BOOSTERS: LazyLock<HashMap<&'static str, f64>> = LazyLock::new(|| {
    let mut m = HashMap::new();
    for w in [
        "very",
        "really",
        "extremely",
        "absolutely",
        "completely",
        "incredibly",
        "so",
        "totally",
        "utterly",
        "especially",
        "particularly",
        "deeply",
        "hugely",
        "amazingly",
        "exceptionally",
        "remarkably",
        "super",
        "truly",
    ] {
        m.insert(w, BOOSTER_STEP);
    }
    for w in [
        "slightly",
        "somewhat",
        "barely",
        "scarcely",
        "marginally",
        "occasionally",
        "partly",
        "kinda",
        "sorta",
        "almost",
        "mildly",
        "little",
    ] {
        m.insert(w, -BOOSTER_STEP);
    }
    m
});

/// Valence lexicon: lowercase unigram → score on a -4..+4 scale.
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
}

static BUNDLED: LazyLock<SentimentLexicon> = LazyLock::new(|| {
    SentimentLexicon::parse(include_str!("../../assets/sentiment/valence.tsv"), "<bundled>")
        .expect("bundled lexicon parses")
});

impl SentimentLexicon {
    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static SentimentLexicon {
        &BUNDLED
    }

    pub fn from_path(path: &Path) -> Result<SentimentLexicon, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, origin: &str) -> Result<SentimentLexicon, LexiconError> {
        let mut valences = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (term, value) = (cols.next(), cols.next());
            let (Some(term), Some(value)) = (term, value) else {
                return Err(LexiconError::File {
                    path: origin.to_string(),
                    message: format!("line {}: expected term<TAB>valence", lineno + 1),
                });
            };
            let value: f64 = value.parse().map_err(|_| LexiconError::File {
                path: origin.to_string(),
                message: format!("line {}: bad valence {value:?}", lineno + 1),
            })?;
            valences.insert(term.to_lowercase(), value);
        }
        Ok(SentimentLexicon { valences })
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.valences.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }
}

fn is_allcaps(token: &str) -> bool {
    token.len() > 1
        && token.chars().any(|c| c.is_alphabetic())
        && token.chars().all(|c| !c.is_lowercase())
}

/// Score a post's cleaned text.
pub fn sentiment_polarity(text: &str, lexicon: &SentimentLexicon) -> f64 {
    let tokens = super::flat_words(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    // The all-caps bump only applies when the writer chose caps for
    // emphasis, i.e. the text is not uniformly shouted.
    let mixed_case = text.chars().any(|c| c.is_lowercase());
    let but_index = lower.iter().rposition(|w| w == "but");

    let mut sum = 0.0f64;
    for (i, word) in lower.iter().enumerate() {
        let Some(mut val) = lexicon.valence(word) else {
            continue;
        };
        for dist in 1..=3usize {
            let Some(j) = i.checked_sub(dist) else { break };
            if let Some(step) = BOOSTERS.get(lower[j].as_str()) {
                let decay = [1.0, 0.95, 0.9][dist - 1];
                val += val.signum() * step * decay;
            }
        }
        let negated = (1..=3usize).any(|dist| {
            i.checked_sub(dist)
                .map(|j| NEGATIONS.contains(lower[j].as_str()) || lower[j].ends_with("n't"))
                .unwrap_or(false)
        });
        if negated {
            val *= NEGATION_SCALE;
        }
        if mixed_case && is_allcaps(&tokens[i]) {
            val += val.signum() * ALLCAPS_BUMP;
        }
        if let Some(b) = but_index {
            if i < b {
                val *= BUT_BEFORE;
            } else if i > b {
                val *= BUT_AFTER;
            }
        }
        sum += val;
    }

    if sum != 0.0 {
        let excl = text.chars().filter(|c| *c == '!').count().min(4) as f64;
        let quest = text.chars().filter(|c| *c == '?').count();
        let quest_emph = if quest > 1 {
            (quest as f64 * QUESTION_STEP).min(QUESTION_CAP)
        } else {
            0.0
        };
        sum += sum.signum() * (excl * EXCLAMATION_STEP + quest_emph);
    }

    (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polarity(text: &str) -> f64 {
        sentiment_polarity(text, SentimentLexicon::bundled())
    }

    #[test]
    fn empty_and_no_hit_text_is_neutral() {
        assert_eq!(polarity(""), 0.0);
        assert_eq!(polarity("the cat sat on the mat"), 0.0);
    }

    #[test]
    fn lexicon_direction() {
        assert!(polarity("this is good") > 0.0);
        assert!(polarity("this is bad") < 0.0);
        assert!(polarity("i feel happy and grateful") > 0.0);
        assert!(polarity("i feel hopeless and exhausted") < 0.0);
    }

    #[test]
    fn negation_flips_below_the_affirmative() {
        let plain = polarity("this is good");
        let negated = polarity("this is not good");
        assert!(negated < plain);
        assert!(negated < 0.0, "flipped hit goes negative: {negated}");
        // Contraction negators count too.
        assert!(polarity("this isn't good") < 0.0);
    }

    #[test]
    fn boosters_and_dampeners() {
        assert!(polarity("this is very good") > polarity("this is good"));
        assert!(polarity("this is slightly good") < polarity("this is good"));
        assert!(polarity("this is very bad") < polarity("this is bad"));
    }

    #[test]
    fn punctuation_and_caps_emphasis() {
        assert!(polarity("this is good!!!") > polarity("this is good"));
        assert!(polarity("this is GOOD") > polarity("this is good"));
        // Uniform shouting gets no caps bump.
        assert_eq!(polarity("THIS IS GOOD"), polarity("this is good"));
    }

    #[test]
    fn but_clause_shifts_weight_to_the_tail() {
        assert!(polarity("it was good but awful") < 0.0);
        assert!(polarity("it was awful but good") > 0.0);
    }

    #[test]
    fn bounded_output() {
        for text in [
            "terrible horrible awful worst miserable!!!!",
            "excellent amazing wonderful best!!!!",
            "ok",
            "not not not good bad good bad",
            "???!!!",
        ] {
            let p = polarity(text);
            assert!((-1.0..=1.0).contains(&p), "{text:?} -> {p}");
        }
    }

    #[test]
    fn exact_value_for_single_hit() {
        // One hit, no rules firing: s = 1.9 -> 1.9/sqrt(1.9^2 + 15).
        let expected = 1.9 / (1.9f64 * 1.9 + 15.0).sqrt();
        assert!((polarity("good") - expected).abs() < 1e-12);
    }

    #[test]
    fn custom_lexicon_loads_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        std::fs::write(&path, "# test\nzorp\t3.0\n").unwrap();
        let lex = SentimentLexicon::from_path(&path).unwrap();
        assert_eq!(lex.valence("zorp"), Some(3.0));
        assert!(sentiment_polarity("zorp", &lex) > 0.0);
    }
}
