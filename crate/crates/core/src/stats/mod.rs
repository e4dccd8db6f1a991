//! Shared statistical routines: descriptive helpers, Pearson correlation,
//! ordinary least squares, chi-square tests, Welch's t-test and
//! Benjamini–Hochberg FDR adjustment.
//!
//! P-values come from the hand-written special functions in [`special`];
//! the linear algebra for OLS is delegated to a QR decomposition.

pub mod special;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

pub use special::{beta_inc, chi2_sf, gamma_p, gamma_q, ln_gamma, t_p_two_sided};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series too short: need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("undefined correlation: a series has zero variance")]
    UndefinedCorrelation,
    #[error("design matrix is rank deficient at column {column}")]
    Collinear { column: usize },
    #[error("underdetermined system: {rows} rows for {cols} predictors")]
    Underdetermined { rows: usize, cols: usize },
    #[error("expected count is zero in cell {cell}")]
    ZeroExpected { cell: usize },
    #[error("probabilities must sum to 1, got {sum}")]
    BadProbabilities { sum: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Outcome of a single hypothesis test.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Arithmetic mean; `None` on an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Population variance (divisor `n`); `None` on an empty slice.
pub fn population_variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// Sample variance (divisor `n - 1`); `None` with fewer than two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Median of a slice; `None` on empty input.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Empirical quantile by the inverse-ECDF convention: for `q > 0` the value
/// at rank `ceil(q * n)` (1-based) of the sorted sample; the minimum for
/// `q = 0`. `q = 1` therefore yields the maximum.
///
/// This convention is shared by every quantile-based rule in the pipeline
/// (density trim bands, bootstrap confidence bounds, permutation thresholds,
/// heavy-poster cutoffs) so that all of them are reproducible from the same
/// definition.
pub fn empirical_quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if q == 0.0 {
        return Some(v[0]);
    }
    let rank = (q * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

/// Pearson product-moment correlation between two equal-length series.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort {
            need: 2,
            got: x.len(),
        });
    }
    let mx = mean(x).unwrap();
    let my = mean(y).unwrap();
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ordinary least squares fit of `y` on a design matrix given row-wise.
#[derive(Debug, Clone, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual variance estimate `SSR / (n - p)`.
    pub sigma2: f64,
    pub df_resid: f64,
    /// Coefficient of determination; `None` when the response is constant.
    pub r_squared: Option<f64>,
    /// `(X'X)^{-1}`, row-major; needed for linear contrasts.
    pub xtx_inv: Vec<Vec<f64>>,
}

/// Result of testing a linear contrast `c' beta = 0` after an OLS fit.
#[derive(Debug, Clone, Serialize)]
pub struct ContrastResult {
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Fit `y = X beta + e` by QR decomposition.
///
/// `rows` holds one design row per observation (including any intercept
/// column the caller wants). Errors: dimension mismatches, `n <= p`, and
/// rank deficiency (reported with the first offending column index).
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, StatsError> {
    let n = rows.len();
    if n != y.len() {
        return Err(StatsError::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n == 0 {
        return Err(StatsError::TooShort { need: 1, got: 0 });
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(StatsError::Degenerate("empty design row".into()));
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(StatsError::Degenerate("ragged design matrix".into()));
    }
    if n <= p {
        return Err(StatsError::Underdetermined { rows: n, cols: p });
    }

    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();

    // Without pivoting, a (near-)zero diagonal entry of R marks the first
    // column that is linearly dependent on its predecessors.
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = max_diag * 1e-10;
    for i in 0..p {
        if r[(i, i)].abs() <= tol {
            return Err(StatsError::Collinear { column: i });
        }
    }

    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::Collinear { column: 0 })?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let df_resid = (n - p) as f64;
    let sigma2 = ssr / df_resid;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(StatsError::Collinear { column: 0 })?;
    let xtx_inv_m = &r_inv * r_inv.transpose();

    let mut std_errors = Vec::with_capacity(p);
    let mut t_values = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        let se = (sigma2 * xtx_inv_m[(j, j)]).sqrt();
        let t = beta[j] / se;
        std_errors.push(se);
        t_values.push(t);
        p_values.push(special::t_p_two_sided(t, df_resid));
    }

    let my = mean(y).unwrap();
    let sst: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r_squared = if sst > 0.0 { Some(1.0 - ssr / sst) } else { None };

    let xtx_inv = (0..p)
        .map(|i| (0..p).map(|j| xtx_inv_m[(i, j)]).collect())
        .collect();

    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        residuals,
        sigma2,
        df_resid,
        r_squared,
        xtx_inv,
    })
}

impl OlsFit {
    /// Test the linear contrast `c' beta = 0` with the t distribution on the
    /// residual degrees of freedom.
    pub fn contrast(&self, c: &[f64]) -> Result<ContrastResult, StatsError> {
        let p = self.coefficients.len();
        if c.len() != p {
            return Err(StatsError::LengthMismatch {
                left: c.len(),
                right: p,
            });
        }
        let estimate: f64 = c
            .iter()
            .zip(&self.coefficients)
            .map(|(ci, bi)| ci * bi)
            .sum();
        let mut quad = 0.0;
        for i in 0..p {
            for j in 0..p {
                quad += c[i] * self.xtx_inv[i][j] * c[j];
            }
        }
        let var = self.sigma2 * quad;
        if var <= 0.0 {
            return Err(StatsError::Degenerate("contrast has zero variance".into()));
        }
        let std_error = var.sqrt();
        let statistic = estimate / std_error;
        Ok(ContrastResult {
            estimate,
            std_error,
            statistic,
            df: self.df_resid,
            p_value: special::t_p_two_sided(statistic, self.df_resid),
        })
    }

    /// Predicted mean response at a design row `x0`.
    pub fn predict(&self, x0: &[f64]) -> Result<f64, StatsError> {
        if x0.len() != self.coefficients.len() {
            return Err(StatsError::LengthMismatch {
                left: x0.len(),
                right: self.coefficients.len(),
            });
        }
        Ok(x0
            .iter()
            .zip(&self.coefficients)
            .map(|(xi, bi)| xi * bi)
            .sum())
    }
}

/// Chi-square goodness-of-fit test of observed counts against expected cell
/// probabilities. Degrees of freedom are `k - 1`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<TestResult, StatsError> {
    if observed.len() != expected_probs.len() {
        return Err(StatsError::LengthMismatch {
            left: observed.len(),
            right: expected_probs.len(),
        });
    }
    if observed.len() < 2 {
        return Err(StatsError::TooShort {
            need: 2,
            got: observed.len(),
        });
    }
    let psum: f64 = expected_probs.iter().sum();
    if (psum - 1.0).abs() > 1e-9 {
        return Err(StatsError::BadProbabilities { sum: psum });
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::Degenerate("no observations".into()));
    }
    let mut stat = 0.0;
    for (cell, (&o, &p)) in observed.iter().zip(expected_probs).enumerate() {
        let e = p * total as f64;
        if e <= 0.0 {
            return Err(StatsError::ZeroExpected { cell });
        }
        let d = o as f64 - e;
        stat += d * d / e;
    }
    let df = (observed.len() - 1) as f64;
    Ok(TestResult {
        statistic: stat,
        df,
        p_value: special::chi2_sf(stat, df),
    })
}

/// Two-proportion test via the pooled chi-square statistic on the 2x2 table
/// (no continuity correction); equivalent to the squared pooled z-test.
pub fn two_proportion_chisq(
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 || x1 > n1 || x2 > n2 {
        return Err(StatsError::Degenerate(format!(
            "invalid counts: {x1}/{n1} vs {x2}/{n2}"
        )));
    }
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    if pooled == 0.0 || pooled == 1.0 {
        return Err(StatsError::Degenerate(
            "pooled proportion is 0 or 1; difference test undefined".into(),
        ));
    }
    let p1 = x1 as f64 / n1 as f64;
    let p2 = x2 as f64 / n2 as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    let stat = (p1 - p2) * (p1 - p2) / var;
    Ok(TestResult {
        statistic: stat,
        df: 1.0,
        p_value: special::chi2_sf(stat, 1.0),
    })
}

/// Welch's unequal-variance t-test (two-sided).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooShort {
            need: 2,
            got: a.len().min(b.len()),
        });
    }
    let (ma, mb) = (mean(a).unwrap(), mean(b).unwrap());
    let (va, vb) = (sample_variance(a).unwrap(), sample_variance(b).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Err(StatsError::Degenerate(
            "both samples have zero variance".into(),
        ));
    }
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    Ok(TestResult {
        statistic,
        df,
        p_value: special::t_p_two_sided(statistic, df),
    })
}

/// Benjamini–Hochberg adjusted p-values.
///
/// Step-up procedure: sort ascending, scale `p_(k)` by `m / k`, enforce
/// monotonicity with a running minimum from the largest rank down, cap at 1
/// and restore the original order. An empty slice yields an empty vector.
pub fn bh_fdr(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    if m == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = f64::INFINITY;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        let scaled = p_values[idx] * m as f64 / rank as f64;
        running = running.min(scaled).min(1.0);
        adjusted[idx] = running;
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn descriptive_helpers() {
        assert_eq!(mean(&[]), None);
        assert_eq!(mean(&[2.0, 4.0]), Some(3.0));
        assert_eq!(population_variance(&[1.0, 3.0]), Some(1.0));
        assert_eq!(sample_variance(&[1.0, 3.0]), Some(2.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn quantile_inverse_ecdf_convention() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&xs, 0.0), Some(1.0));
        assert_eq!(empirical_quantile(&xs, 1.0), Some(1000.0));
        // ceil(0.025 * 1000) = 25 -> 25th smallest.
        assert_eq!(empirical_quantile(&xs, 0.025), Some(25.0));
        assert_eq!(empirical_quantile(&xs, 0.975), Some(975.0));
        assert_eq!(empirical_quantile(&[], 0.5), None);
    }

    #[test]
    fn pearson_r_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        assert_relative_eq!(pearson_r(&x, &y).unwrap(), 1.0, max_relative = 1e-12);
        let yneg = [8.0, 6.0, 4.0, 2.0];
        assert_relative_eq!(pearson_r(&x, &yneg).unwrap(), -1.0, max_relative = 1e-12);
        assert_eq!(
            pearson_r(&x, &[1.0, 1.0, 1.0, 1.0]),
            Err(StatsError::UndefinedCorrelation)
        );
        assert!(matches!(
            pearson_r(&x, &[1.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
    }

    /// Independent oracle: solve the normal equations by hand for a small
    /// fixed system and compare every reported quantity.
    #[test]
    fn ols_matches_normal_equations_oracle() {
        // y = 1 + 2*x with noise; 6 observations, design [1, x].
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.1, 2.9, 5.2, 7.0, 8.8, 11.3];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let fit = ols(&rows, &ys).unwrap();

        // Hand-solved 2x2 normal equations.
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        let b1 = (n * sxy - sx * sy) / det;
        let b0 = (sy - b1 * sx) / n;
        assert_relative_eq!(fit.coefficients[0], b0, max_relative = 1e-10);
        assert_relative_eq!(fit.coefficients[1], b1, max_relative = 1e-10);

        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (b0 + b1 * x);
                e * e
            })
            .sum();
        let sigma2 = ssr / (n - 2.0);
        assert_relative_eq!(fit.sigma2, sigma2, max_relative = 1e-10);

        // (X'X)^{-1} entries for the 2x2 system.
        let inv00 = sxx / det;
        let inv11 = n / det;
        let inv01 = -sx / det;
        assert_relative_eq!(fit.xtx_inv[0][0], inv00, max_relative = 1e-10);
        assert_relative_eq!(fit.xtx_inv[1][1], inv11, max_relative = 1e-10);
        assert_relative_eq!(fit.xtx_inv[0][1], inv01, max_relative = 1e-10);

        assert_relative_eq!(
            fit.std_errors[1],
            (sigma2 * inv11).sqrt(),
            max_relative = 1e-10
        );
        assert!(fit.r_squared.unwrap() > 0.99);
        assert_eq!(fit.df_resid, 4.0);
    }

    #[test]
    fn ols_detects_collinearity() {
        // Third column = first + second.
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let x = i as f64;
                vec![1.0, x, 1.0 + x]
            })
            .collect();
        let ys: Vec<f64> = (0..8).map(|i| i as f64 * 0.5 + 1.0).collect();
        match ols(&rows, &ys) {
            Err(StatsError::Collinear { column }) => assert_eq!(column, 2),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn ols_contrast_recovers_coefficient_test() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![1.0, i as f64, ((i * i) % 7) as f64])
            .collect();
        let ys: Vec<f64> = (0..10).map(|i| 2.0 + 0.3 * i as f64 + ((i % 3) as f64)).collect();
        let fit = ols(&rows, &ys).unwrap();
        let c = fit.contrast(&[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(c.statistic, fit.t_values[1], max_relative = 1e-12);
        assert_relative_eq!(c.p_value, fit.p_values[1], max_relative = 1e-12);
    }

    #[test]
    fn chi_square_gof_uniform_example() {
        // All mass in one of 12 cells against uniform: statistic = 11 * N.
        let mut obs = [0u64; 12];
        obs[4] = 600;
        let probs = [1.0 / 12.0; 12];
        let res = chi_square_gof(&obs, &probs).unwrap();
        assert_relative_eq!(res.statistic, 11.0 * 600.0, max_relative = 1e-12);
        assert_eq!(res.df, 11.0);
        // Perfectly uniform observations: statistic 0, p = 1.
        let res = chi_square_gof(&[50; 12], &probs).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    // Frozen from scipy.stats.chi2_contingency(correction=False) on the
    // 2x2 table [[98, 902], [87, 913]].
    #[test]
    fn two_proportion_reference_value() {
        let res = two_proportion_chisq(98, 1000, 87, 1000).unwrap();
        assert_relative_eq!(res.statistic, 0.720_720_720_720_722, max_relative = 1e-12);
        assert_relative_eq!(
            res.p_value,
            0.395_907_601_422_025_75,
            max_relative = 1e-12
        );
        assert!(two_proportion_chisq(0, 10, 0, 10).is_err());
    }

    #[test]
    fn welch_t_symmetric_and_exact_on_equal_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let res = welch_t_test(&a, &b).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
        let c = [2.0, 3.0, 4.0, 5.0];
        let ab = welch_t_test(&a, &c).unwrap();
        let ba = welch_t_test(&c, &a).unwrap();
        assert_relative_eq!(ab.statistic, -ba.statistic, max_relative = 1e-12);
        assert_relative_eq!(ab.p_value, ba.p_value, max_relative = 1e-12);
    }

    #[test]
    fn bh_fdr_worked_example() {
        // Classic example: evenly spaced p-values all adjust to the largest.
        let adj = bh_fdr(&[0.01, 0.02, 0.03, 0.04, 0.05]);
        for a in &adj {
            assert_relative_eq!(*a, 0.05, max_relative = 1e-12);
        }
        // Order restoration and capping.
        let adj = bh_fdr(&[0.9, 0.001, 0.5]);
        assert_relative_eq!(adj[1], 0.003, max_relative = 1e-12);
        assert!(adj[0] <= 1.0 && adj[2] <= 1.0);
        assert!(adj[1] <= adj[2] && adj[2] <= adj[0]);
        assert!(bh_fdr(&[]).is_empty());
    }

    #[test]
    fn bh_fdr_preserves_order_relations() {
        let p = [0.04, 0.01, 0.9, 0.2, 0.04];
        let adj = bh_fdr(&p);
        // Adjusted values never decrease the rank order of the raw values.
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    assert!(adj[i] <= adj[j] + 1e-15);
                }
            }
        }
        // Adjusted >= raw and <= 1.
        for (raw, a) in p.iter().zip(&adj) {
            assert!(a >= raw && *a <= 1.0);
        }
    }
}
