//! Group-level bootstrapped lag autocorrelations.
//!
//! Per bootstrap iteration (users resampled with replacement, never
//! months):
//!
//! 1. average the resampled users' monthly series month-by-month;
//! 2. take the first difference across *adjacent* months only (a gap in
//!    the monthly index yields no difference point);
//! 3. z-standardize the differenced series (population SD);
//! 4. correlate the series with itself at every lag `L` in the configured
//!    range, pairing points by month index.
//!
//! An iteration whose differenced series is constant (or too short) is
//! dropped and counted. Confidence intervals are empirical 2.5/97.5
//! quantiles over iterations; between-group one-sided p-values are the
//! proportion of iteration-paired mean differences that contradict the
//! declared direction.
//!
//! Every iteration draws from its own derived RNG stream
//! (`{context}/ac/{group}`, iteration index), so results do not depend on
//! scheduling or group evaluation order.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::Rng;
use thiserror::Error;

use super::SparseSeries;
use crate::rngutil::derive_rng;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum AcError {
    #[error("group {label:?} has no user series")]
    EmptyGroup { label: String },
    #[error("lag range is empty")]
    EmptyLags,
    #[error("iterations must be at least 1")]
    NoIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapAcConfig {
    /// Lags tested, inclusive.
    pub lags: RangeInclusive<usize>,
    pub iterations: usize,
    pub master_seed: u64,
    /// Namespace for the derived RNG streams (e.g. the feature id under
    /// analysis), so distinct analyses never share draws.
    pub context: String,
    /// When true, z-standardize the averaged series *before* differencing
    /// (the alternative reading of "z-standardized first derivative");
    /// default differences first, then standardizes.
    pub standardize_before_diff: bool,
}

impl BootstrapAcConfig {
    pub fn new(master_seed: u64, context: &str) -> BootstrapAcConfig {
        BootstrapAcConfig {
            lags: 2..=18,
            iterations: 1000,
            master_seed,
            context: context.to_string(),
            standardize_before_diff: false,
        }
    }
}

/// Bootstrap distribution of one group's autocorrelation at one lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDistribution {
    pub lag: usize,
    /// One slot per iteration; `None` when that iteration produced no
    /// defined correlation at this lag. Slot order is what pairs groups in
    /// [`lag_comparison`].
    pub by_iteration: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Empirical (2.5%, 97.5%) quantiles over defined iterations.
    pub ci: Option<(f64, f64)>,
    pub n_retained: usize,
}

/// All lag distributions for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAc {
    pub label: String,
    pub per_lag: Vec<LagDistribution>,
    /// Iterations whose differenced series was degenerate end to end.
    pub dropped_iterations: usize,
}

/// Difference a sparse series across adjacent months; the result is indexed
/// by the later month of each pair.
fn first_difference(series: &BTreeMap<i64, f64>) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    let mut prev: Option<(i64, f64)> = None;
    for (m, v) in series {
        if let Some((pm, pv)) = prev {
            if *m - pm == 1 {
                out.insert(*m, v - pv);
            }
        }
        prev = Some((*m, *v));
    }
    out
}

fn zstandardized(series: &BTreeMap<i64, f64>) -> Option<BTreeMap<i64, f64>> {
    let values: Vec<f64> = series.values().copied().collect();
    if values.len() < 2 {
        return None;
    }
    let mean = stats::mean(&values)?;
    let sd = stats::population_variance(&values)?.sqrt();
    if sd == 0.0 {
        return None;
    }
    Some(series.iter().map(|(m, v)| (*m, (v - mean) / sd)).collect())
}

/// Pearson r of a series with itself at `lag`, pairing by month index.
fn autocorrelation_at(series: &BTreeMap<i64, f64>, lag: usize) -> Option<f64> {
    let lag = lag as i64;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (m, v) in series {
        if let Some(w) = series.get(&(m + lag)) {
            x.push(*v);
            y.push(*w);
        }
    }
    stats::pearson_r(&x, &y).ok()
}

/// Month-wise mean over (possibly repeated) user series.
fn average_series(users: &[SparseSeries], picks: &[usize]) -> BTreeMap<i64, f64> {
    let mut sums: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for &i in picks {
        for (m, v) in &users[i].points {
            let cell = sums.entry(*m).or_insert((0.0, 0));
            cell.0 += v;
            cell.1 += 1;
        }
    }
    sums.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

fn iteration_series(
    users: &[SparseSeries],
    picks: &[usize],
    standardize_before_diff: bool,
) -> Option<BTreeMap<i64, f64>> {
    let averaged = average_series(users, picks);
    if standardize_before_diff {
        let z = zstandardized(&averaged)?;
        let d = first_difference(&z);
        if d.len() < 2 || stats::population_variance(&d.values().copied().collect::<Vec<_>>())? == 0.0 {
            None
        } else {
            Some(d)
        }
    } else {
        zstandardized(&first_difference(&averaged))
    }
}

/// Run the bootstrap for every group. `groups` maps a label to its users'
/// series; the resample size is the smallest group's user count so that
/// bootstrap variance is comparable across groups.
pub fn bootstrap_autocorrelation(
    groups: &BTreeMap<String, Vec<SparseSeries>>,
    config: &BootstrapAcConfig,
) -> Result<BTreeMap<String, GroupAc>, AcError> {
    if config.lags.is_empty() {
        return Err(AcError::EmptyLags);
    }
    if config.iterations == 0 {
        return Err(AcError::NoIterations);
    }
    for (label, users) in groups {
        if users.is_empty() {
            return Err(AcError::EmptyGroup { label: label.clone() });
        }
    }
    let sample_size = groups.values().map(Vec::len).min().unwrap_or(0);
    let lags: Vec<usize> = config.lags.clone().collect();

    let mut out = BTreeMap::new();
    for (label, users) in groups {
        let mut by_lag: Vec<Vec<Option<f64>>> =
            vec![Vec::with_capacity(config.iterations); lags.len()];
        let mut dropped = 0usize;
        for iter in 0..config.iterations {
            let mut rng = derive_rng(
                config.master_seed,
                &format!("{}/ac/{label}", config.context),
                iter as u64,
            );
            let picks: Vec<usize> =
                (0..sample_size).map(|_| rng.gen_range(0..users.len())).collect();
            match iteration_series(users, &picks, config.standardize_before_diff) {
                Some(series) => {
                    for (li, lag) in lags.iter().enumerate() {
                        by_lag[li].push(autocorrelation_at(&series, *lag));
                    }
                }
                None => {
                    dropped += 1;
                    for slots in &mut by_lag {
                        slots.push(None);
                    }
                }
            }
        }

        let per_lag = lags
            .iter()
            .zip(by_lag)
            .map(|(lag, by_iteration)| {
                let defined: Vec<f64> = by_iteration.iter().flatten().copied().collect();
                let mean = stats::mean(&defined);
                let ci = match (
                    stats::empirical_quantile(&defined, 0.025),
                    stats::empirical_quantile(&defined, 0.975),
                ) {
                    (Some(lo), Some(hi)) => Some((lo, hi)),
                    _ => None,
                };
                LagDistribution {
                    lag: *lag,
                    n_retained: defined.len(),
                    by_iteration,
                    mean,
                    ci,
                }
            })
            .collect();
        out.insert(
            label.clone(),
            GroupAc { label: label.clone(), per_lag, dropped_iterations: dropped },
        );
    }
    Ok(out)
}

/// Declared direction of a one-sided comparison of group A against group B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestDirection {
    /// H1: A's autocorrelation exceeds B's.
    AGreater,
    /// H1: A's autocorrelation is below B's.
    ALess,
}

/// One-sided bootstrap comparison at one lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagComparison {
    pub lag: usize,
    /// Proportion of paired iterations contradicting the declared
    /// direction; `None` when no iteration was defined in both groups.
    pub p_value: Option<f64>,
    pub n_pairs: usize,
}

/// Compare two groups lag by lag, pairing iterations by index.
pub fn lag_comparison(a: &GroupAc, b: &GroupAc, direction: TestDirection) -> Vec<LagComparison> {
    a.per_lag
        .iter()
        .zip(&b.per_lag)
        .map(|(da, db)| {
            debug_assert_eq!(da.lag, db.lag);
            let mut n_pairs = 0usize;
            let mut contradicting = 0usize;
            for (ra, rb) in da.by_iteration.iter().zip(&db.by_iteration) {
                let (Some(ra), Some(rb)) = (ra, rb) else { continue };
                n_pairs += 1;
                let diff = ra - rb;
                let contradicts = match direction {
                    TestDirection::AGreater => diff <= 0.0,
                    TestDirection::ALess => diff >= 0.0,
                };
                if contradicts {
                    contradicting += 1;
                }
            }
            LagComparison {
                lag: da.lag,
                p_value: (n_pairs > 0).then(|| contradicting as f64 / n_pairs as f64),
                n_pairs,
            }
        })
        .collect()
}
