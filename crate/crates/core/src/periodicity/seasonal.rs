//! Calendar-month profiles of diagnosis events and monthly scores.
//!
//! [`seasonal_counts`] buckets diagnosis anchors by calendar month,
//! keeping only anchors precise to at least the month (year-only anchors
//! carry no seasonal information). [`seasonal_profile`] tests the twelve
//! counts against the uniform monthly proportion of 1/12 with a χ²
//! goodness-of-fit test; [`seasonal_month_contrasts`] compares two
//! groups' monthly proportions with per-month two-proportion χ² tests,
//! treating the twelve months as one false-discovery family.
//! [`seasonal_means`] summarizes per-month score distributions as mean ±
//! standard error for profile plots.

use chrono::Datelike;
use thiserror::Error;
use serde::Serialize;

use crate::anchor::{AnchorPrecision, DiagnosisAnchor};
use crate::stats::{self, StatsError, TestResult};

/// Fewest total events accepted for a twelve-month profile.
const MIN_EVENTS: u64 = 12;

#[derive(Debug, Error, PartialEq)]
pub enum SeasonalError {
    #[error("seasonal profile needs at least {needed} events, got {got}")]
    InsufficientData { needed: u64, got: u64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Count anchors per calendar month (index 0 = January). Anchors stated
/// only to the year are excluded.
pub fn seasonal_counts(anchors: &[DiagnosisAnchor]) -> [u64; 12] {
    let mut counts = [0u64; 12];
    for anchor in anchors {
        if anchor.precision == AnchorPrecision::Year {
            continue;
        }
        counts[(anchor.date.month() - 1) as usize] += 1;
    }
    counts
}

/// A group's monthly distribution with its uniformity test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeasonalProfile {
    pub counts: [u64; 12],
    pub total: u64,
    pub proportions: [f64; 12],
    /// χ² goodness of fit against equal monthly proportions (df = 11).
    pub chi2: TestResult,
}

pub fn seasonal_profile(counts: &[u64; 12]) -> Result<SeasonalProfile, SeasonalError> {
    let total: u64 = counts.iter().sum();
    if total < MIN_EVENTS {
        return Err(SeasonalError::InsufficientData { needed: MIN_EVENTS, got: total });
    }
    let chi2 = stats::chi_square_gof(counts, &[1.0 / 12.0; 12])?;
    let proportions = counts.map(|c| c as f64 / total as f64);
    Ok(SeasonalProfile { counts: *counts, total, proportions, chi2 })
}

/// Two groups' proportions for one calendar month. Test fields are `None`
/// when the month is degenerate (no events in either group, or all events
/// in both), in which case it is excluded from the FDR family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthContrast {
    /// Calendar month, 1 = January.
    pub month: u32,
    pub prop_a: f64,
    pub prop_b: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub p_fdr: Option<f64>,
}

/// Compare two groups' monthly proportions month by month.
pub fn seasonal_month_contrasts(
    a: &[u64; 12],
    b: &[u64; 12],
) -> Result<Vec<MonthContrast>, SeasonalError> {
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    for total in [total_a, total_b] {
        if total < MIN_EVENTS {
            return Err(SeasonalError::InsufficientData { needed: MIN_EVENTS, got: total });
        }
    }
    let mut contrasts: Vec<MonthContrast> = (0..12)
        .map(|m| {
            let test = match stats::two_proportion_chisq(a[m], total_a, b[m], total_b) {
                Ok(t) => Some(t),
                Err(StatsError::Degenerate(_)) => None,
                Err(e) => return Err(SeasonalError::Stats(e)),
            };
            Ok(MonthContrast {
                month: m as u32 + 1,
                prop_a: a[m] as f64 / total_a as f64,
                prop_b: b[m] as f64 / total_b as f64,
                statistic: test.as_ref().map(|t| t.statistic),
                p_value: test.as_ref().map(|t| t.p_value),
                p_fdr: None,
            })
        })
        .collect::<Result<_, _>>()?;

    let raw: Vec<f64> = contrasts.iter().filter_map(|c| c.p_value).collect();
    let adjusted = stats::bh_fdr(&raw);
    let mut next = adjusted.into_iter();
    for contrast in &mut contrasts {
        if contrast.p_value.is_some() {
            contrast.p_fdr = next.next();
        }
    }
    Ok(contrasts)
}

/// Mean score for one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthMean {
    pub mean: f64,
    /// Standard error of the mean; `None` with fewer than two values.
    pub se: Option<f64>,
    pub n: usize,
}

/// Per-month mean ± SE over score samples (index 0 = January); months
/// without samples yield `None`.
pub fn seasonal_means(values_by_month: &[Vec<f64>; 12]) -> Vec<Option<MonthMean>> {
    values_by_month
        .iter()
        .map(|values| {
            let mean = stats::mean(values)?;
            let se = stats::sample_variance(values)
                .map(|v| (v / values.len() as f64).sqrt());
            Some(MonthMean { mean, se, n: values.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn anchor(year: i32, month: u32, day: u32, precision: AnchorPrecision) -> DiagnosisAnchor {
        DiagnosisAnchor {
            date: NaiveDate::from_ymd_opt(year, month, day).unwrap(),
            precision,
            source_post_id: "p".to_string(),
            reference_time: 0,
        }
    }

    #[test]
    fn counts_exclude_year_precision() {
        let anchors = [
            anchor(2015, 1, 10, AnchorPrecision::Day),
            anchor(2016, 1, 5, AnchorPrecision::Week),
            anchor(2017, 3, 15, AnchorPrecision::Month),
            anchor(2018, 7, 2, AnchorPrecision::Year),
            anchor(2019, 12, 31, AnchorPrecision::Weekend),
        ];
        let counts = seasonal_counts(&anchors);
        assert_eq!(counts[0], 2, "two January anchors");
        assert_eq!(counts[2], 1);
        assert_eq!(counts[11], 1);
        assert_eq!(counts[6], 0, "year-only anchor must not count");
        assert_eq!(counts.iter().sum::<u64>(), 4);
    }

    #[test]
    fn uniform_counts_have_zero_chi2() {
        let profile = seasonal_profile(&[10; 12]).unwrap();
        assert_eq!(profile.total, 120);
        assert!(profile.chi2.statistic.abs() < 1e-12);
        assert_eq!(profile.chi2.df, 11.0);
        assert!(profile.chi2.p_value > 0.999);
        for p in profile.proportions {
            assert!((p - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concentrated_counts_match_hand_chi2() {
        // With every event in one month, the statistic reduces to 11·N.
        let n = 24u64;
        let mut counts = [0u64; 12];
        counts[2] = n;
        let profile = seasonal_profile(&counts).unwrap();
        assert!((profile.chi2.statistic - 11.0 * n as f64).abs() < 1e-9);
        assert!(profile.chi2.p_value < 0.001);
    }

    #[test]
    fn too_few_events_are_rejected() {
        let mut counts = [0u64; 12];
        counts[0] = 11;
        assert_eq!(
            seasonal_profile(&counts),
            Err(SeasonalError::InsufficientData { needed: 12, got: 11 })
        );
        let ok = [2u64; 12];
        assert_eq!(
            seasonal_month_contrasts(&counts, &ok),
            Err(SeasonalError::InsufficientData { needed: 12, got: 11 })
        );
    }

    #[test]
    fn month_contrasts_flag_the_planted_difference() {
        // January differs sharply; December is empty in both groups.
        let a = [30u64, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 0];
        let b = [10u64, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 0];
        let contrasts = seasonal_month_contrasts(&a, &b).unwrap();
        assert_eq!(contrasts.len(), 12);

        let january = &contrasts[0];
        assert_eq!(january.month, 1);
        assert!((january.prop_a - 0.30).abs() < 1e-12);
        assert!((january.prop_b - 1.0 / 9.0).abs() < 1e-12);
        assert!(january.p_fdr.unwrap() < 0.05);

        let december = &contrasts[11];
        assert_eq!(december.statistic, None);
        assert_eq!(december.p_value, None);
        assert_eq!(december.p_fdr, None);

        // FDR is applied over the eleven defined months only.
        let raw: Vec<f64> = contrasts.iter().filter_map(|c| c.p_value).collect();
        assert_eq!(raw.len(), 11);
        let expected = stats::bh_fdr(&raw);
        let reported: Vec<f64> = contrasts.iter().filter_map(|c| c.p_fdr).collect();
        assert_eq!(reported, expected);
    }

    #[test]
    fn monthly_means_summarize_samples() {
        let mut by_month: [Vec<f64>; 12] = Default::default();
        by_month[0] = vec![1.0, 2.0, 3.0];
        by_month[5] = vec![5.0];
        let means = seasonal_means(&by_month);
        assert_eq!(means.len(), 12);
        let jan = means[0].as_ref().unwrap();
        assert_eq!(jan.mean, 2.0);
        assert_eq!(jan.n, 3);
        assert!((jan.se.unwrap() - (1.0_f64 / 3.0).sqrt()).abs() < 1e-12);
        let jun = means[5].as_ref().unwrap();
        assert_eq!(jun.mean, 5.0);
        assert_eq!(jun.se, None);
        assert!(means[1].is_none());
    }
}
