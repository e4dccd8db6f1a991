//! Age and gender estimation from unigram lexica.
//!
//! Each lexicon is a linear model over *relative* word frequencies:
//! `score = intercept + Σ_w weight(w) · count(w) / total_tokens`. The
//! denominator is the text's total word-token count, not just the lexicon
//! hits. When no lexicon unigram occurs, no prediction is made (`None`);
//! downstream code must treat that as missing, not zero.
//!
//! Score conventions: for age the unit is years; for gender, positive means
//! a higher probability of female gender.
//!
//! Real lexica are licensed and supplied by the operator as files; a tiny
//! synthetic pair ships with the crate for tests and demo runs.

use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemographyError {
    #[error("lexicon error at {path}: {message}")]
    File { path: String, message: String },
}

/// What a lexicon predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Age,
    Gender,
}

/// A linear unigram model. Terms are stored lowercase and unique; the file
/// format reserves the row `_intercept` for the model intercept.
pub struct Lexicon {
    pub target: Target,
    intercept: f64,
    weights: HashMap<String, f64>,
}

const INTERCEPT_KEY: &str = "_intercept";

static BUNDLED_AGE: LazyLock<Lexicon> = LazyLock::new(|| {
    Lexicon::parse(
        include_str!("../assets/demography/age.tsv"),
        "<bundled age>",
        Target::Age,
    )
    .expect("bundled age lexicon parses")
});

static BUNDLED_GENDER: LazyLock<Lexicon> = LazyLock::new(|| {
    Lexicon::parse(
        include_str!("../assets/demography/gender.tsv"),
        "<bundled gender>",
        Target::Gender,
    )
    .expect("bundled gender lexicon parses")
});

impl Lexicon {
    /// The synthetic age lexicon shipped with the crate.
    pub fn bundled_age() -> &'static Lexicon {
        &BUNDLED_AGE
    }

    /// The synthetic gender lexicon shipped with the crate.
    pub fn bundled_gender() -> &'static Lexicon {
        &BUNDLED_GENDER
    }

    pub fn from_path(path: &Path, target: Target) -> Result<Lexicon, DemographyError> {
        let text = std::fs::read_to_string(path).map_err(|e| DemographyError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string(), target)
    }

    fn parse(text: &str, origin: &str, target: Target) -> Result<Lexicon, DemographyError> {
        let err = |message: String| DemographyError::File {
            path: origin.to_string(),
            message,
        };
        let mut weights = HashMap::new();
        let mut intercept: Option<f64> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(term), Some(value)) = (cols.next(), cols.next()) else {
                return Err(err(format!("line {lineno}: expected term<TAB>weight")));
            };
            let value: f64 = value
                .parse()
                .map_err(|_| err(format!("line {lineno}: bad weight {value:?}")))?;
            if !value.is_finite() {
                return Err(err(format!("line {lineno}: non-finite weight")));
            }
            let term = term.to_lowercase();
            if term == INTERCEPT_KEY {
                if intercept.replace(value).is_some() {
                    return Err(err(format!("line {lineno}: duplicate {INTERCEPT_KEY}")));
                }
            } else if weights.insert(term.clone(), value).is_some() {
                return Err(err(format!("line {lineno}: duplicate term {term:?}")));
            }
        }
        let intercept = intercept.ok_or_else(|| err(format!("missing {INTERCEPT_KEY} row")))?;
        Ok(Lexicon { target, intercept, weights })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Score one text's tokens against a lexicon. Tokens are lowercased before
/// lookup. Returns `None` when the token list is empty or no lexicon
/// unigram occurs.
pub fn apply_lexicon(tokens: &[String], lexicon: &Lexicon) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let total = tokens.len() as f64;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for token in tokens {
        let token = token.to_lowercase();
        if lexicon.weights.contains_key(&token) {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return None;
    }
    let mut score = lexicon.intercept;
    for (term, count) in counts {
        score += lexicon.weights[&term] * (count as f64 / total);
    }
    Some(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn bundled_lexica_load() {
        let age = Lexicon::bundled_age();
        assert_eq!(age.target, Target::Age);
        assert_eq!(age.intercept(), 24.0);
        assert_eq!(age.weight("mortgage"), Some(8.2));

        let gender = Lexicon::bundled_gender();
        assert_eq!(gender.target, Target::Gender);
        assert!(gender.weight("husband").unwrap() > 0.0);
        assert!(gender.weight("wife").unwrap() < 0.0);
    }

    #[test]
    fn no_hits_or_empty_input_means_no_prediction() {
        let age = Lexicon::bundled_age();
        assert_eq!(apply_lexicon(&[], age), None);
        assert_eq!(apply_lexicon(&toks(&["zz", "qq", "xx"]), age), None);
    }

    #[test]
    fn single_token_is_intercept_plus_weight() {
        let age = Lexicon::bundled_age();
        let score = apply_lexicon(&toks(&["mortgage"]), age).unwrap();
        assert!((score - (24.0 + 8.2)).abs() < 1e-12);
    }

    #[test]
    fn ten_token_text_matches_hand_computed_dot_product() {
        // 10 tokens: mortgage ×2, school ×1, 7 out-of-lexicon words.
        let tokens = toks(&[
            "mortgage", "rates", "and", "mortgage", "stress", "after", "school", "ran", "me",
            "down",
        ]);
        let expected = 24.0 + 8.2 * (2.0 / 10.0) + (-4.2) * (1.0 / 10.0);
        let score = apply_lexicon(&tokens, Lexicon::bundled_age()).unwrap();
        assert!((score - expected).abs() <= 1e-12);
    }

    #[test]
    fn score_is_order_invariant() {
        let mut tokens = toks(&["kids", "work", "filler", "taxes", "filler"]);
        let a = apply_lexicon(&tokens, Lexicon::bundled_age()).unwrap();
        tokens.reverse();
        let b = apply_lexicon(&tokens, Lexicon::bundled_age()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_all_counts_keeps_the_score() {
        let tokens = toks(&["kids", "work", "filler"]);
        let doubled = toks(&["kids", "work", "filler", "kids", "work", "filler"]);
        let a = apply_lexicon(&tokens, Lexicon::bundled_age()).unwrap();
        let b = apply_lexicon(&doubled, Lexicon::bundled_age()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tokens_are_lowercased_before_lookup() {
        let a = apply_lexicon(&toks(&["Mortgage"]), Lexicon::bundled_age());
        let b = apply_lexicon(&toks(&["mortgage"]), Lexicon::bundled_age());
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let err = |text: &str| {
            Lexicon::parse(text, "<test>", Target::Age).err().map(|e| e.to_string())
        };
        assert!(err("word\t1.0\n").unwrap().contains("missing _intercept"));
        assert!(err("_intercept\t1\n_intercept\t2\n").unwrap().contains("duplicate"));
        assert!(err("_intercept\t0\nword\t1\nWord\t2\n").unwrap().contains("duplicate term"));
        assert!(err("_intercept\t0\nword\tnotanumber\n").unwrap().contains("bad weight"));
        assert!(err("_intercept\t0\nword\tinf\n").unwrap().contains("non-finite"));
        assert!(err("loneword\n").unwrap().contains("expected term"));
    }
}
