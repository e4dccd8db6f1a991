//! Veridicality calibration: equalize the expected rate of false diagnosis
//! times between the two clinical cohorts.
//!
//! A judge model flags each disclosure as a veridical formal diagnosis (1)
//! or not (0). The positively judged users are kept, and enough
//! negatively judged users are added back that the expected proportion of
//! false diagnosis times matches a target (the rate measured in the other
//! cohort). With `P` positives carrying `FP` expected false positives, an
//! added negative being truly false with probability `NPV`, and target
//! proportion `t`, the count to add is
//!
//! ```text
//! NF = (t·P − FP) / (NPV − t)
//! ```
//!
//! rounded half-up and floored at zero; the expected proportion achieved
//! after adding `NF` negatives is `(FP + NF·NPV) / (P + NF)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchor::llm::{LlmError, TextGenerator};
use crate::anchor::{veridicality_request, LlmConfig};

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("rate undefined: denominator is zero")]
    UndefinedRate,
    #[error("infeasible calibration: npv {npv} must exceed target false proportion {target}")]
    Infeasible { npv: f64, target: f64 },
    #[error("cannot add {needed} negatives: only {available} available")]
    NotEnoughNegatives { needed: u64, available: u64 },
    #[error("invalid calibration input: {0}")]
    InvalidInput(String),
}

/// Confusion counts from a manual annotation of judge verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

/// Negative predictive value: TN / (TN + FN).
pub fn npv(counts: ConfusionCounts) -> Result<f64, CalibrationError> {
    let den = counts.true_neg + counts.false_neg;
    if den == 0 {
        return Err(CalibrationError::UndefinedRate);
    }
    Ok(counts.true_neg as f64 / den as f64)
}

/// Positive predictive value: TP / (TP + FP).
pub fn ppv(counts: ConfusionCounts) -> Result<f64, CalibrationError> {
    let den = counts.true_pos + counts.false_pos;
    if den == 0 {
        return Err(CalibrationError::UndefinedRate);
    }
    Ok(counts.true_pos as f64 / den as f64)
}

/// Inputs to the balancing arithmetic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationInput {
    /// Number of users the judge flagged positive (kept outright).
    pub positives: u64,
    /// Expected count of false positives among them, typically
    /// `(1 − PPV) · positives`; fractional values are kept as-is.
    pub expected_false_positives: f64,
    /// Probability that a negatively judged user truly lacks a veridical
    /// diagnosis time.
    pub npv: f64,
    /// False-diagnosis-time proportion to match.
    pub target_false_proportion: f64,
}

impl CalibrationInput {
    fn validate(&self) -> Result<(), CalibrationError> {
        if self.positives == 0 {
            return Err(CalibrationError::InvalidInput(
                "positives must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.npv) {
            return Err(CalibrationError::InvalidInput(format!(
                "npv {} outside [0, 1]",
                self.npv
            )));
        }
        if !(0.0..=1.0).contains(&self.target_false_proportion) {
            return Err(CalibrationError::InvalidInput(format!(
                "target false proportion {} outside [0, 1]",
                self.target_false_proportion
            )));
        }
        if !(0.0..=self.positives as f64).contains(&self.expected_false_positives) {
            return Err(CalibrationError::InvalidInput(format!(
                "expected false positives {} outside [0, positives]",
                self.expected_false_positives
            )));
        }
        Ok(())
    }
}

/// Number of negatively judged users to add back, rounded half-up and
/// floored at zero. Errors when the target is not below the NPV (the
/// denominator would vanish or flip sign: no count of negatives can bring
/// the proportion down to the target).
pub fn negatives_to_add(input: CalibrationInput) -> Result<u64, CalibrationError> {
    input.validate()?;
    if input.npv <= input.target_false_proportion {
        return Err(CalibrationError::Infeasible {
            npv: input.npv,
            target: input.target_false_proportion,
        });
    }
    let numerator =
        input.target_false_proportion * input.positives as f64 - input.expected_false_positives;
    let raw = numerator / (input.npv - input.target_false_proportion);
    if raw <= 0.0 {
        return Ok(0);
    }
    Ok((raw + 0.5).floor() as u64)
}

/// Expected false-diagnosis-time proportion after adding `nf` negatives.
pub fn achieved_false_proportion(input: CalibrationInput, nf: u64) -> f64 {
    (input.expected_false_positives + nf as f64 * input.npv)
        / (input.positives as f64 + nf as f64)
}

/// The balancing arithmetic in one record, for the stage report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub input: CalibrationInput,
    pub negatives_to_add: u64,
    pub achieved_false_proportion: f64,
}

pub fn calibrate(input: CalibrationInput) -> Result<CalibrationReport, CalibrationError> {
    let nf = negatives_to_add(input)?;
    Ok(CalibrationReport {
        input,
        negatives_to_add: nf,
        achieved_false_proportion: achieved_false_proportion(input, nf),
    })
}

/// Keep all positives and add `nf` negatives sampled without replacement.
/// Output order is positives (input order) followed by the sampled
/// negatives in draw order, so a seeded RNG reproduces the cohort exactly.
pub fn augment_cohort<R: Rng>(
    positives: &[String],
    negatives: &[String],
    nf: u64,
    rng: &mut R,
) -> Result<Vec<String>, CalibrationError> {
    let nf_usize = usize::try_from(nf).expect("nf fits usize");
    if nf_usize > negatives.len() {
        return Err(CalibrationError::NotEnoughNegatives {
            needed: nf,
            available: negatives.len() as u64,
        });
    }
    let mut out: Vec<String> = positives.to_vec();
    let picks = rand::seq::index::sample(rng, negatives.len(), nf_usize);
    out.extend(picks.iter().map(|i| negatives[i].clone()));
    Ok(out)
}

/// Outcome of one veridicality call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeridicalityJudgement {
    /// True when the judge affirmed a formal diagnosis at the stated time.
    pub veridical: bool,
    /// True when the reply was not a clean 0/1; the verdict is then the
    /// conservative 0.
    pub unparseable: bool,
}

/// Parse a judge reply into a strict verdict. Accepts `0`/`1` with
/// surrounding whitespace, quoting, emphasis markers, or a trailing period;
/// anything else is unparseable.
pub fn parse_verdict(reply: &str) -> Option<bool> {
    let cleaned = reply
        .trim()
        .trim_matches(|c: char| {
            c.is_whitespace() || matches!(c, '*' | '"' | '\'' | '`' | '.' | ':')
        })
        .trim();
    match cleaned {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// Ask the judge whether `extracted_time` names a veridical formal
/// diagnosis in `post_text`. Service failures bubble up (retryable at the
/// transport layer); unparseable replies become a flagged 0.
pub fn judge_veridicality(
    post_text: &str,
    extracted_time: &str,
    cfg: &LlmConfig,
    client: &dyn TextGenerator,
) -> Result<VeridicalityJudgement, LlmError> {
    let reply = client.generate(&veridicality_request(cfg, post_text, extracted_time))?;
    Ok(match parse_verdict(&reply) {
        Some(veridical) => VeridicalityJudgement {
            veridical,
            unparseable: false,
        },
        None => VeridicalityJudgement {
            veridical: false,
            unparseable: true,
        },
    })
}
