//! Floating-mean Lomb–Scargle periodograms for sparse monthly series.
//!
//! The periodogram uses the generalized (floating-mean) formulation with
//! uniform weights, normalized so that power at frequency `f` equals
//! `1 − χ²(f)/χ²_ref`: the fractional variance explained by the best-fit
//! sinusoid-plus-constant at `f` relative to the constant-only model.
//! Power therefore lies in `[0, 1]`.
//!
//! [`lomb_scargle`] removes a least-squares line first so that slow drift
//! does not masquerade as low-frequency power, then evaluates a linear
//! frequency grid from the configured minimum up to the configured maximum
//! with spacing `1 / (oversampling · span)`. [`false_alarm_level`]
//! estimates a significance threshold for the maximum power by permuting
//! values over the fixed observation times. [`phase_fold`] summarizes a
//! series at a chosen frequency with binned phase means and a closed-form
//! sinusoidal fit.

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::TAU;
use thiserror::Error;
use serde::Serialize;

use crate::stats;

/// Variance floor below which a detrended series is treated as constant.
const DEGENERATE_VARIANCE: f64 = 1e-24;

#[derive(Debug, Error, PartialEq)]
pub enum LspError {
    #[error("periodogram needs at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("series is constant (or perfectly linear) after detrending")]
    DegenerateSeries,
    #[error("alpha must lie in (0, 1], got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("at least one permutation is required")]
    NoPermutations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspConfig {
    /// Lowest frequency evaluated, in cycles per month.
    pub min_frequency: f64,
    /// Highest frequency evaluated (the two-month Nyquist limit by default).
    pub max_frequency: f64,
    /// Grid refinement: spacing is `1 / (oversampling · span)`.
    pub oversampling: u32,
}

impl Default for LspConfig {
    fn default() -> LspConfig {
        LspConfig {
            min_frequency: 1.0 / 253.0,
            max_frequency: 0.5,
            oversampling: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub max_power: f64,
    /// Frequency of the maximum power (first grid point on exact ties).
    pub argmax_frequency: f64,
}

/// Evaluate floating-mean Lomb–Scargle power at the given frequencies,
/// without detrending. Exposed separately so the formula can be checked
/// against a direct least-squares fit.
pub fn power_at_frequencies(months: &[f64], values: &[f64], frequencies: &[f64]) -> Vec<f64> {
    debug_assert_eq!(months.len(), values.len());
    let n = months.len().min(values.len());
    if n == 0 {
        return vec![0.0; frequencies.len()];
    }
    let w = 1.0 / n as f64;
    let y_mean: f64 = values[..n].iter().sum::<f64>() * w;
    let yy: f64 = values[..n].iter().map(|y| w * (y - y_mean).powi(2)).sum();

    frequencies
        .iter()
        .map(|f| {
            if yy <= 0.0 {
                return 0.0;
            }
            let omega = TAU * f;
            let (mut c, mut s) = (0.0, 0.0);
            let (mut yc, mut ys) = (0.0, 0.0);
            let (mut cc, mut ss, mut cs) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let (sin, cos) = (omega * months[i]).sin_cos();
                let dy = values[i] - y_mean;
                c += w * cos;
                s += w * sin;
                yc += w * dy * cos;
                ys += w * dy * sin;
                cc += w * cos * cos;
                ss += w * sin * sin;
                cs += w * cos * sin;
            }
            // Center the trigonometric sums on the floating mean; yc and
            // ys are already centered because dy subtracts the mean.
            let cc = cc - c * c;
            let ss = ss - s * s;
            let cs = cs - c * s;
            let d = cc * ss - cs * cs;
            if d.abs() < f64::EPSILON * f64::EPSILON {
                return 0.0;
            }
            let p = (ss * yc * yc + cc * ys * ys - 2.0 * cs * yc * ys) / (yy * d);
            p.clamp(0.0, 1.0)
        })
        .collect()
}

/// Least-squares line through `(t, y)`; returns `(intercept, slope)`.
fn line_fit(months: &[f64], values: &[f64]) -> (f64, f64) {
    let n = months.len() as f64;
    let t_mean = months.iter().sum::<f64>() / n;
    let y_mean = values.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, y) in months.iter().zip(values) {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
    }
    if stt <= 0.0 {
        return (y_mean, 0.0);
    }
    let slope = sty / stt;
    (y_mean - slope * t_mean, slope)
}

/// Compute the periodogram of a detrended series over the configured grid.
pub fn lomb_scargle(
    months: &[f64],
    values: &[f64],
    config: &LspConfig,
) -> Result<Periodogram, LspError> {
    let n = months.len().min(values.len());
    if n < 4 {
        return Err(LspError::InsufficientData { needed: 4, got: n });
    }
    let span = months[..n].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - months[..n].iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(LspError::DegenerateSeries);
    }

    let (intercept, slope) = line_fit(&months[..n], &values[..n]);
    let detrended: Vec<f64> = months[..n]
        .iter()
        .zip(&values[..n])
        .map(|(t, y)| y - (intercept + slope * t))
        .collect();
    let variance = stats::population_variance(&detrended).unwrap_or(0.0);
    if variance < DEGENERATE_VARIANCE {
        return Err(LspError::DegenerateSeries);
    }

    let step = 1.0 / (config.oversampling.max(1) as f64 * span);
    let mut frequencies = Vec::new();
    let mut f = config.min_frequency;
    while f <= config.max_frequency + step * 1e-9 {
        frequencies.push(f);
        f = config.min_frequency + frequencies.len() as f64 * step;
    }
    let power = power_at_frequencies(&months[..n], &detrended, &frequencies);

    let (mut max_power, mut argmax_frequency) = (f64::NEG_INFINITY, frequencies[0]);
    for (f, p) in frequencies.iter().zip(&power) {
        if *p > max_power {
            max_power = *p;
            argmax_frequency = *f;
        }
    }
    Ok(Periodogram { frequencies, power, max_power, argmax_frequency })
}

/// Permutation threshold for the maximum periodogram power.
///
/// Values are shuffled over the fixed observation times `permutations`
/// times; the returned level is the empirical `1 − alpha` quantile of the
/// permuted maxima. A permutation that happens to be perfectly linear has
/// no periodic power and contributes 0.
pub fn false_alarm_level<R: Rng>(
    months: &[f64],
    values: &[f64],
    config: &LspConfig,
    alpha: f64,
    permutations: usize,
    rng: &mut R,
) -> Result<f64, LspError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(LspError::BadAlpha { alpha });
    }
    if permutations == 0 {
        return Err(LspError::NoPermutations);
    }
    let mut shuffled = values.to_vec();
    let mut maxima = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        shuffled.shuffle(rng);
        match lomb_scargle(months, &shuffled, config) {
            Ok(p) => maxima.push(p.max_power),
            Err(LspError::DegenerateSeries) => maxima.push(0.0),
            Err(e) => return Err(e),
        }
    }
    Ok(stats::empirical_quantile(&maxima, 1.0 - alpha).expect("permutations >= 1"))
}

/// One phase bin of a folded series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseBin {
    /// Center of the bin, in cycles (`0..1`).
    pub phase_center: f64,
    pub mean: f64,
    /// Population standard deviation of the bin's values.
    pub sd: f64,
    pub n: usize,
}

/// A series folded at a fixed frequency: binned means plus the closed-form
/// least-squares sinusoid `amplitude · sin(2πf·t + phase) + offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseFold {
    pub frequency: f64,
    /// `n_bins` slots over one cycle; empty bins are `None`.
    pub bins: Vec<Option<PhaseBin>>,
    pub amplitude: f64,
    /// Phase of the fitted sinusoid in radians, in `(-π, π]`.
    pub phase: f64,
    pub offset: f64,
}

/// Fold a series at `frequency`. Degenerate inputs (constant values, empty
/// series, unfittable sinusoid) produce a zero-amplitude fit, never an
/// error.
pub fn phase_fold(months: &[f64], values: &[f64], frequency: f64, n_bins: usize) -> PhaseFold {
    let n = months.len().min(values.len());
    let mut sums: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); n_bins];
    for i in 0..n {
        let phase = (months[i] * frequency).rem_euclid(1.0);
        let bin = ((phase * n_bins as f64) as usize).min(n_bins.saturating_sub(1));
        if let Some(cell) = sums.get_mut(bin) {
            cell.0 += values[i];
            cell.1 += values[i] * values[i];
            cell.2 += 1;
        }
    }
    let bins = sums
        .iter()
        .enumerate()
        .map(|(i, (sum, sum_sq, count))| {
            if *count == 0 {
                return None;
            }
            let mean = sum / *count as f64;
            let var = (sum_sq / *count as f64 - mean * mean).max(0.0);
            Some(PhaseBin {
                phase_center: (i as f64 + 0.5) / n_bins as f64,
                mean,
                sd: var.sqrt(),
                n: *count,
            })
        })
        .collect();

    // Fit y = a·sin(ωt) + b·cos(ωt) + c by normal equations.
    let omega = TAU * frequency;
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for i in 0..n {
        let (s, c) = (omega * months[i]).sin_cos();
        let row = [s, c, 1.0];
        for (r, rv) in row.iter().enumerate() {
            for (q, qv) in row.iter().enumerate() {
                xtx[(r, q)] += rv * qv;
            }
            xty[r] += rv * values[i];
        }
    }
    let (amplitude, phase, offset) = match xtx.lu().solve(&xty) {
        Some(beta) if beta.iter().all(|b: &f64| b.is_finite()) => {
            let (a, b, c) = (beta[0], beta[1], beta[2]);
            (a.hypot(b), b.atan2(a), c)
        }
        _ => {
            let mean = if n == 0 { 0.0 } else { values[..n].iter().sum::<f64>() / n as f64 };
            (0.0, 0.0, mean)
        }
    };
    PhaseFold { frequency, bins, amplitude, phase, offset }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::derive_rng;

    /// Irregularly observed months: roughly two of every three.
    fn irregular_months(rng: &mut impl Rng) -> Vec<f64> {
        (0..150).filter(|_| rng.gen_range(0..3) < 2).map(|m| m as f64).collect()
    }

    fn sinusoid(months: &[f64], freq: f64, amp: f64, phase: f64, offset: f64) -> Vec<f64> {
        months.iter().map(|t| amp * (TAU * freq * t + phase).sin() + offset).collect()
    }

    /// Independent oracle: solve the 3-parameter normal equations by
    /// Gaussian elimination and convert residual variance to power.
    fn direct_fit_power(months: &[f64], values: &[f64], freq: f64) -> f64 {
        let n = months.len();
        let omega = TAU * freq;
        let mut a = [[0.0_f64; 4]; 3];
        for i in 0..n {
            let (s, c) = (omega * months[i]).sin_cos();
            let row = [s, c, 1.0];
            for r in 0..3 {
                for q in 0..3 {
                    a[r][q] += row[r] * row[q];
                }
                a[r][3] += row[r] * values[i];
            }
        }
        for col in 0..3 {
            let pivot = (col..3).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()));
            let pivot = pivot.unwrap();
            a.swap(col, pivot);
            for r in 0..3 {
                if r != col {
                    let factor = a[r][col] / a[col][col];
                    for q in 0..4 {
                        a[r][q] -= factor * a[col][q];
                    }
                }
            }
        }
        let beta = [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
        let rss_fit: f64 = (0..n)
            .map(|i| {
                let (s, c) = (omega * months[i]).sin_cos();
                (values[i] - beta[0] * s - beta[1] * c - beta[2]).powi(2)
            })
            .sum();
        let mean = values.iter().sum::<f64>() / n as f64;
        let rss_ref: f64 = values.iter().map(|y| (y - mean).powi(2)).sum();
        1.0 - rss_fit / rss_ref
    }

    #[test]
    fn recovers_annual_frequency() {
        let mut rng = derive_rng(41, "lsp/test", 0);
        let months = irregular_months(&mut rng);
        let values = sinusoid(&months, 1.0 / 12.0, 1.0, 0.4, 0.0);
        let config = LspConfig::default();
        let gram = lomb_scargle(&months, &values, &config).unwrap();
        let span = months.last().unwrap() - months.first().unwrap();
        let step = 1.0 / (config.oversampling as f64 * span);
        assert!(
            (gram.argmax_frequency - 1.0 / 12.0).abs() <= step,
            "peak at {} should sit within one grid step of 1/12",
            gram.argmax_frequency
        );
        assert!(gram.max_power > 0.9, "peak power {} too low", gram.max_power);
        // At the exact frequency a noiseless sinusoid is fit perfectly.
        let exact = power_at_frequencies(&months, &values, &[1.0 / 12.0])[0];
        assert!(exact > 0.999_999, "exact-frequency power {exact}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let months: Vec<f64> = (0..20).map(f64::from).collect();
        let constant = vec![3.25; 20];
        let config = LspConfig::default();
        assert_eq!(
            lomb_scargle(&months, &constant, &config),
            Err(LspError::DegenerateSeries)
        );
        // A perfectly linear series is constant after detrending.
        let linear: Vec<f64> = months.iter().map(|t| 2.0 - 0.7 * t).collect();
        assert_eq!(lomb_scargle(&months, &linear, &config), Err(LspError::DegenerateSeries));
        assert_eq!(
            lomb_scargle(&months[..3], &constant[..3], &config),
            Err(LspError::InsufficientData { needed: 4, got: 3 })
        );
    }

    #[test]
    fn power_matches_direct_least_squares_fit() {
        let mut rng = derive_rng(43, "lsp/test", 1);
        let months: Vec<f64> = (0..40).map(|m| m as f64 + rng.gen_range(-0.3..0.3)).collect();
        let values: Vec<f64> = months
            .iter()
            .map(|t| (0.31 * t).sin() + 0.5 * (0.11 * t).cos() + rng.gen_range(-0.5..0.5))
            .collect();
        for freq in [0.05, 0.11, 0.21, 1.0 / 3.0, 0.47] {
            let got = power_at_frequencies(&months, &values, &[freq])[0];
            let want = direct_fit_power(&months, &values, freq);
            assert!(
                (got - want).abs() <= 1e-9,
                "freq {freq}: periodogram {got} vs direct fit {want}"
            );
        }
    }

    #[test]
    fn invariant_to_offset_and_linear_trend() {
        let mut rng = derive_rng(47, "lsp/test", 2);
        let months = irregular_months(&mut rng);
        let values: Vec<f64> = months
            .iter()
            .map(|t| (TAU * t / 12.0).sin() + rng.gen_range(-0.2..0.2))
            .collect();
        let shifted: Vec<f64> =
            months.iter().zip(&values).map(|(t, y)| y + 5.0 + 0.3 * t).collect();
        let config = LspConfig::default();
        let base = lomb_scargle(&months, &values, &config).unwrap();
        let moved = lomb_scargle(&months, &shifted, &config).unwrap();
        assert_eq!(base.frequencies, moved.frequencies);
        for (p, q) in base.power.iter().zip(&moved.power) {
            assert!((p - q).abs() < 1e-6, "trend changed power: {p} vs {q}");
        }
    }

    #[test]
    fn false_alarm_threshold_separates_signal_from_noise() {
        let mut rng = derive_rng(53, "lsp/test", 3);
        let months = irregular_months(&mut rng);
        let values: Vec<f64> = months
            .iter()
            .map(|t| (TAU * t / 12.0).sin() + rng.gen_range(-0.3..0.3))
            .collect();
        let config = LspConfig::default();
        let observed = lomb_scargle(&months, &values, &config).unwrap().max_power;
        let level =
            false_alarm_level(&months, &values, &config, 0.01, 200, &mut rng).unwrap();
        assert!(
            observed > level,
            "planted annual signal ({observed}) should clear the 1% level ({level})"
        );
        // alpha = 1 takes the 0-quantile: the smallest permuted maximum.
        let floor = false_alarm_level(&months, &values, &config, 1.0, 50, &mut rng).unwrap();
        assert!(floor <= level);
        assert_eq!(
            false_alarm_level(&months, &values, &config, 0.0, 50, &mut rng),
            Err(LspError::BadAlpha { alpha: 0.0 })
        );
        assert_eq!(
            false_alarm_level(&months, &values, &config, 0.05, 0, &mut rng),
            Err(LspError::NoPermutations)
        );
    }

    #[test]
    fn phase_fold_recovers_sinusoid_parameters() {
        let mut rng = derive_rng(59, "lsp/test", 4);
        let months = irregular_months(&mut rng);
        let freq = 1.0 / 12.0;
        let (amp, phase, offset) = (2.3, 0.9, 1.7);
        let values = sinusoid(&months, freq, amp, phase, offset);
        let fold = phase_fold(&months, &values, freq, 12);
        assert!((fold.amplitude - amp).abs() < 1e-6, "amplitude {}", fold.amplitude);
        assert!((fold.offset - offset).abs() < 1e-6, "offset {}", fold.offset);
        assert!((fold.phase - phase).abs() < 1e-6, "phase {}", fold.phase);
        for bin in fold.bins.iter().flatten() {
            // Bin means follow the underlying sinusoid to within bin width.
            let predicted = amp * (TAU * bin.phase_center + phase).sin() + offset;
            assert!((bin.mean - predicted).abs() < amp * 0.3);
        }

        // Shifting by half a period flips the fitted phase by pi.
        let shifted: Vec<f64> = months.iter().map(|t| t + 6.0).collect();
        let flipped = phase_fold(&shifted, &values, freq, 12);
        let delta = (flipped.phase - fold.phase).rem_euclid(TAU);
        assert!(
            (delta - std::f64::consts::PI).abs() < 1e-6,
            "half-period shift moved phase by {delta}"
        );
        assert!((flipped.amplitude - amp).abs() < 1e-6);

        // Constant input folds without error to a zero-amplitude fit.
        let constant = vec![4.0; months.len()];
        let flat = phase_fold(&months, &constant, freq, 12);
        assert!(flat.amplitude.abs() < 1e-9);
        assert!((flat.offset - 4.0).abs() < 1e-9);
    }
}
