//! Group comparison of per-user periodogram peaks, adjusted for data
//! availability.
//!
//! A user's maximum periodogram power depends not only on any true rhythm
//! but also on how their data are laid out in time: how long the
//! uninterrupted stretches are, how many months carry data at all, and how
//! many posts feed each monthly value. [`series_confounds`] condenses that
//! layout into thirteen covariates; [`max_power_comparison`] then fits an
//! ordinary least squares model of max power on group membership plus
//! those covariates and reports estimated marginal means (group
//! predictions at the grand mean of every covariate) and pairwise
//! contrasts with Benjamini–Hochberg-adjusted p-values.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use thiserror::Error;
use serde::Serialize;

use crate::cohort::Group;
use crate::stats::{self, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("no users to compare")]
    NoUsers,
    #[error("design column {column:?} is collinear with earlier columns")]
    Collinear { column: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Data-availability covariates for one user's monthly series.
///
/// "Runs" are maximal stretches of consecutive months with data; "posts"
/// are the per-month post counts feeding the monthly values. Variances are
/// population variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesConfounds {
    pub run_mean: f64,
    pub run_median: f64,
    pub run_variance: f64,
    pub run_min: f64,
    pub run_max: f64,
    /// Number of months in the window that carry any data.
    pub months_with_data: f64,
    pub posts_mean: f64,
    pub posts_median: f64,
    pub posts_variance: f64,
    pub posts_min: f64,
    pub posts_max: f64,
    /// Percentage of months between the user's first and last in-window
    /// months that carry data (100 = gap-free). Measured against the
    /// user's own span rather than the shared window so that it is not a
    /// rescaling of `months_with_data`, which would make the design
    /// matrix singular.
    pub percent_available: f64,
    /// Cube of the availability percentage, allowing a curved adjustment.
    pub percent_available_cubed: f64,
}

impl SeriesConfounds {
    pub const COLUMN_NAMES: [&'static str; 13] = [
        "run_mean",
        "run_median",
        "run_variance",
        "run_min",
        "run_max",
        "months_with_data",
        "posts_mean",
        "posts_median",
        "posts_variance",
        "posts_min",
        "posts_max",
        "percent_available",
        "percent_available_cubed",
    ];

    pub fn columns(&self) -> [f64; 13] {
        [
            self.run_mean,
            self.run_median,
            self.run_variance,
            self.run_min,
            self.run_max,
            self.months_with_data,
            self.posts_mean,
            self.posts_median,
            self.posts_variance,
            self.posts_min,
            self.posts_max,
            self.percent_available,
            self.percent_available_cubed,
        ]
    }
}

/// Summarize the temporal layout of one user's series.
///
/// `months` must be sorted and unique; `posts_per_month` is parallel to
/// it. Only months inside `window` contribute. Returns `None` when no
/// month falls inside the window.
pub fn series_confounds(
    months: &[i64],
    posts_per_month: &[u64],
    window: &RangeInclusive<i64>,
) -> Option<SeriesConfounds> {
    debug_assert_eq!(months.len(), posts_per_month.len());
    debug_assert!(months.windows(2).all(|w| w[0] < w[1]), "months must be sorted unique");
    let kept: Vec<(i64, u64)> = months
        .iter()
        .zip(posts_per_month)
        .filter(|(m, _)| window.contains(m))
        .map(|(m, p)| (*m, *p))
        .collect();
    if kept.is_empty() {
        return None;
    }

    let mut runs: Vec<f64> = Vec::new();
    let mut current = 1u64;
    for pair in kept.windows(2) {
        if pair[1].0 - pair[0].0 == 1 {
            current += 1;
        } else {
            runs.push(current as f64);
            current = 1;
        }
    }
    runs.push(current as f64);

    let posts: Vec<f64> = kept.iter().map(|(_, p)| *p as f64).collect();
    let span = (kept.last().unwrap().0 - kept.first().unwrap().0 + 1) as f64;
    let percent = 100.0 * kept.len() as f64 / span;
    let minmax = |xs: &[f64]| {
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    };
    let (run_min, run_max) = minmax(&runs);
    let (posts_min, posts_max) = minmax(&posts);
    Some(SeriesConfounds {
        run_mean: stats::mean(&runs)?,
        run_median: stats::median(&runs)?,
        run_variance: stats::population_variance(&runs)?,
        run_min,
        run_max,
        months_with_data: kept.len() as f64,
        posts_mean: stats::mean(&posts)?,
        posts_median: stats::median(&posts)?,
        posts_variance: stats::population_variance(&posts)?,
        posts_min,
        posts_max,
        percent_available: percent,
        percent_available_cubed: percent.powi(3),
    })
}

/// One user's contribution to the group model.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPower {
    pub user: String,
    pub group: Group,
    pub max_power: f64,
    pub confounds: SeriesConfounds,
}

/// One fitted model coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// A group's estimated marginal mean: the model prediction at the grand
/// mean of every retained covariate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedMean {
    pub estimate: f64,
    pub std_error: f64,
}

/// Difference between two groups' adjusted means (`a` minus `b`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupContrast {
    pub a: Group,
    pub b: Group,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub p_fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    /// Group absorbed into the intercept (first present label
    /// alphabetically).
    pub reference: Group,
    /// Covariates removed before fitting because they never varied; a
    /// constant column only duplicates the intercept.
    pub dropped_confounds: Vec<String>,
    pub coefficients: Vec<Coefficient>,
    pub adjusted_means: BTreeMap<Group, AdjustedMean>,
    /// Pairwise contrasts in label order, FDR-adjusted as one family.
    pub contrasts: Vec<GroupContrast>,
    pub r_squared: Option<f64>,
    pub df_resid: f64,
}

/// Fit max periodogram power on group membership and availability
/// confounds, and compare groups at equalized availability.
pub fn max_power_comparison(users: &[UserPower]) -> Result<GroupComparison, CompareError> {
    if users.is_empty() {
        return Err(CompareError::NoUsers);
    }

    // Groups sorted by display label; the first becomes the reference.
    let mut groups: Vec<Group> = Vec::new();
    for u in users {
        if !groups.contains(&u.group) {
            groups.push(u.group);
        }
    }
    groups.sort_by_key(|g| g.to_string());
    let reference = groups[0];
    let dummies = &groups[1..];

    // Keep only confound columns that vary across users.
    let all_columns: Vec<[f64; 13]> = users.iter().map(|u| u.confounds.columns()).collect();
    let mut kept_confounds: Vec<usize> = Vec::new();
    let mut dropped_confounds: Vec<String> = Vec::new();
    for j in 0..13 {
        let column: Vec<f64> = all_columns.iter().map(|c| c[j]).collect();
        let variance = stats::population_variance(&column).unwrap_or(0.0);
        if variance > 0.0 {
            kept_confounds.push(j);
        } else {
            dropped_confounds.push(SeriesConfounds::COLUMN_NAMES[j].to_string());
        }
    }

    let mut names: Vec<String> = vec!["intercept".to_string()];
    names.extend(dummies.iter().map(|g| format!("group:{g}")));
    names.extend(kept_confounds.iter().map(|j| SeriesConfounds::COLUMN_NAMES[*j].to_string()));

    let rows: Vec<Vec<f64>> = users
        .iter()
        .zip(&all_columns)
        .map(|(u, cols)| {
            let mut row = Vec::with_capacity(names.len());
            row.push(1.0);
            row.extend(dummies.iter().map(|g| if u.group == *g { 1.0 } else { 0.0 }));
            row.extend(kept_confounds.iter().map(|j| cols[*j]));
            row
        })
        .collect();
    let y: Vec<f64> = users.iter().map(|u| u.max_power).collect();

    let fit = stats::ols(&rows, &y).map_err(|e| match e {
        StatsError::Collinear { column } => CompareError::Collinear {
            column: names.get(column).cloned().unwrap_or_else(|| format!("column {column}")),
        },
        other => CompareError::Stats(other),
    })?;

    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.clone(),
            estimate: fit.coefficients[j],
            std_error: fit.std_errors[j],
            t_value: fit.t_values[j],
            p_value: fit.p_values[j],
        })
        .collect();

    // Grand-mean covariate vector shared by every group's prediction.
    let n = users.len() as f64;
    let confound_means: Vec<f64> = kept_confounds
        .iter()
        .map(|j| all_columns.iter().map(|c| c[*j]).sum::<f64>() / n)
        .collect();
    let design_row = |group: Group| -> Vec<f64> {
        let mut row = Vec::with_capacity(names.len());
        row.push(1.0);
        row.extend(dummies.iter().map(|g| if group == *g { 1.0 } else { 0.0 }));
        row.extend(confound_means.iter().copied());
        row
    };

    let mut adjusted_means = BTreeMap::new();
    for g in &groups {
        let at = fit.contrast(&design_row(*g))?;
        adjusted_means
            .insert(*g, AdjustedMean { estimate: at.estimate, std_error: at.std_error });
    }

    // Pairwise contrasts: the covariate parts cancel, leaving dummy
    // differences.
    let mut contrasts = Vec::new();
    let mut raw_p = Vec::new();
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let (a, b) = (groups[i], groups[j]);
            let mut c = vec![0.0; names.len()];
            for (k, g) in dummies.iter().enumerate() {
                if *g == a {
                    c[1 + k] += 1.0;
                }
                if *g == b {
                    c[1 + k] -= 1.0;
                }
            }
            let result = fit.contrast(&c)?;
            raw_p.push(result.p_value);
            contrasts.push(GroupContrast {
                a,
                b,
                estimate: result.estimate,
                std_error: result.std_error,
                statistic: result.statistic,
                p_value: result.p_value,
                p_fdr: f64::NAN,
            });
        }
    }
    for (contrast, p_fdr) in contrasts.iter_mut().zip(stats::bh_fdr(&raw_p)) {
        contrast.p_fdr = p_fdr;
    }

    Ok(GroupComparison {
        reference,
        dropped_confounds,
        coefficients,
        adjusted_means,
        contrasts,
        r_squared: fit.r_squared,
        df_resid: fit.df_resid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::derive_rng;
    use rand::Rng;

    fn flat_confounds() -> SeriesConfounds {
        SeriesConfounds {
            run_mean: 2.0,
            run_median: 2.0,
            run_variance: 0.5,
            run_min: 1.0,
            run_max: 3.0,
            months_with_data: 10.0,
            posts_mean: 4.0,
            posts_median: 4.0,
            posts_variance: 1.0,
            posts_min: 2.0,
            posts_max: 6.0,
            percent_available: 40.0,
            percent_available_cubed: 64_000.0,
        }
    }

    /// Random confounds with enough spread that no kept column is constant
    /// or perfectly collinear.
    fn random_confounds(rng: &mut impl Rng) -> SeriesConfounds {
        let percent = rng.gen_range(20.0_f64..90.0);
        SeriesConfounds {
            run_mean: rng.gen_range(1.0..6.0),
            run_median: rng.gen_range(1.0..6.0),
            run_variance: rng.gen_range(0.0..4.0),
            run_min: rng.gen_range(1.0..3.0),
            run_max: rng.gen_range(3.0..12.0),
            months_with_data: rng.gen_range(10.0..100.0),
            posts_mean: rng.gen_range(1.0..20.0),
            posts_median: rng.gen_range(1.0..20.0),
            posts_variance: rng.gen_range(0.0..30.0),
            posts_min: rng.gen_range(0.0..3.0),
            posts_max: rng.gen_range(20.0..80.0),
            percent_available: percent,
            percent_available_cubed: percent.powi(3),
        }
    }

    #[test]
    fn confounds_from_hand_example() {
        let months = [1_i64, 2, 3, 5, 6, 9];
        let posts = [4_u64, 2, 1, 3, 5, 2];
        let c = series_confounds(&months, &posts, &(1..=10)).unwrap();
        // Runs are 3, 2, 1.
        assert_eq!(c.run_mean, 2.0);
        assert_eq!(c.run_median, 2.0);
        assert!((c.run_variance - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.run_min, 1.0);
        assert_eq!(c.run_max, 3.0);
        assert_eq!(c.months_with_data, 6.0);
        assert!((c.posts_mean - 17.0 / 6.0).abs() < 1e-12);
        assert_eq!(c.posts_median, 2.5);
        assert_eq!(c.posts_min, 1.0);
        assert_eq!(c.posts_max, 5.0);
        // Six of the nine months spanned by 1..=9 carry data.
        assert!((c.percent_available - 200.0 / 3.0).abs() < 1e-12);
        assert!((c.percent_available_cubed - (200.0_f64 / 3.0).powi(3)).abs() < 1e-9);
    }

    #[test]
    fn confounds_respect_the_window() {
        // Months 9 and 10 fall outside 1..=8; the run 5,6 survives intact.
        let months = [5_i64, 6, 9, 10];
        let posts = [1_u64, 1, 7, 7];
        let c = series_confounds(&months, &posts, &(1..=8)).unwrap();
        assert_eq!(c.months_with_data, 2.0);
        assert_eq!(c.run_max, 2.0);
        assert_eq!(c.posts_max, 1.0);
        // The surviving span 5..=6 is gap-free.
        assert_eq!(c.percent_available, 100.0);
        assert_eq!(series_confounds(&months, &posts, &(20..=30)), None);
    }

    #[test]
    fn single_group_matches_closed_form_line_fit() {
        // Only run_mean varies, so the model is a straight line in it.
        let xs = [1.0, 2.0, 4.0, 7.0];
        let ys = [0.2, 0.35, 0.5, 0.9];
        let users: Vec<UserPower> = xs
            .iter()
            .zip(&ys)
            .enumerate()
            .map(|(i, (x, y))| UserPower {
                user: format!("u{i}"),
                group: Group::Ud,
                max_power: *y,
                confounds: SeriesConfounds { run_mean: *x, ..flat_confounds() },
            })
            .collect();
        let out = max_power_comparison(&users).unwrap();

        assert_eq!(out.reference, Group::Ud);
        assert!(out.contrasts.is_empty());
        assert_eq!(out.coefficients.len(), 2);
        assert_eq!(out.coefficients[0].name, "intercept");
        assert_eq!(out.coefficients[1].name, "run_mean");
        assert_eq!(out.dropped_confounds.len(), 12);

        let x_mean = xs.iter().sum::<f64>() / 4.0;
        let y_mean = ys.iter().sum::<f64>() / 4.0;
        let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
        let sxy: f64 =
            xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        assert!((out.coefficients[1].estimate - slope).abs() < 1e-12);
        assert!((out.coefficients[0].estimate - intercept).abs() < 1e-12);

        // The adjusted mean at the grand-mean covariate is exactly ȳ.
        let emm = &out.adjusted_means[&Group::Ud];
        assert!((emm.estimate - y_mean).abs() < 1e-12);
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let sigma2 = rss / 2.0;
        let slope_se = (sigma2 / sxx).sqrt();
        assert!((out.coefficients[1].std_error - slope_se).abs() < 1e-12);
        assert!((emm.std_error - (sigma2 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_show_no_differences() {
        let mut rng = derive_rng(61, "compare/test", 0);
        let mut users = Vec::new();
        for group in [Group::Bd, Group::Ud, Group::Hc] {
            for i in 0..40 {
                let confounds = random_confounds(&mut rng);
                users.push(UserPower {
                    user: format!("{group}-{i}"),
                    group,
                    max_power: 0.3
                        + 0.002 * confounds.months_with_data
                        + rng.gen_range(-0.1..0.1),
                    confounds,
                });
            }
        }
        let out = max_power_comparison(&users).unwrap();
        assert_eq!(out.reference, Group::Bd);
        assert_eq!(out.contrasts.len(), 3);
        for c in &out.contrasts {
            assert!(
                c.p_fdr > 0.01,
                "{} vs {} should be null, p_fdr = {}",
                c.a,
                c.b,
                c.p_fdr
            );
        }
        // Pair order follows labels: BD/HC, BD/UD, HC/UD.
        assert_eq!((out.contrasts[0].a, out.contrasts[0].b), (Group::Bd, Group::Hc));
        assert_eq!((out.contrasts[1].a, out.contrasts[1].b), (Group::Bd, Group::Ud));
        assert_eq!((out.contrasts[2].a, out.contrasts[2].b), (Group::Hc, Group::Ud));
    }

    #[test]
    fn planted_group_difference_is_detected() {
        let mut rng = derive_rng(67, "compare/test", 1);
        let mut users = Vec::new();
        for group in [Group::Bd, Group::Ud, Group::Hc] {
            for i in 0..40 {
                let lift = if group == Group::Bd { 0.3 } else { 0.0 };
                users.push(UserPower {
                    user: format!("{group}-{i}"),
                    group,
                    max_power: 0.3 + lift + rng.gen_range(-0.1..0.1),
                    confounds: random_confounds(&mut rng),
                });
            }
        }
        let out = max_power_comparison(&users).unwrap();
        let bd_hc = &out.contrasts[0];
        let bd_ud = &out.contrasts[1];
        let hc_ud = &out.contrasts[2];
        assert!(bd_hc.estimate > 0.2 && bd_hc.p_fdr < 0.05);
        assert!(bd_ud.estimate > 0.2 && bd_ud.p_fdr < 0.05);
        assert!(hc_ud.p_fdr > 0.05, "HC vs UD should stay null, p = {}", hc_ud.p_fdr);

        // The EMM ordering mirrors the planted lift.
        let bd = out.adjusted_means[&Group::Bd].estimate;
        let hc = out.adjusted_means[&Group::Hc].estimate;
        let ud = out.adjusted_means[&Group::Ud].estimate;
        assert!(bd > hc + 0.2 && bd > ud + 0.2);
        // Contrast estimates equal EMM differences.
        assert!((bd_hc.estimate - (bd - hc)).abs() < 1e-10);
    }

    #[test]
    fn duplicated_confound_is_reported_by_name() {
        let users: Vec<UserPower> = (0..8)
            .map(|i| {
                let x = i as f64;
                UserPower {
                    user: format!("u{i}"),
                    group: Group::Hc,
                    max_power: 0.1 * x,
                    confounds: SeriesConfounds {
                        run_mean: x + 1.0,
                        posts_mean: x + 1.0,
                        ..flat_confounds()
                    },
                }
            })
            .collect();
        match max_power_comparison(&users) {
            Err(CompareError::Collinear { column }) => assert_eq!(column, "posts_mean"),
            other => panic!("expected collinearity error, got {other:?}"),
        }
    }

    #[test]
    fn reference_is_first_present_label() {
        let mut rng = derive_rng(71, "compare/test", 2);
        let mut users = Vec::new();
        for group in [Group::Ud, Group::Hc] {
            for i in 0..20 {
                users.push(UserPower {
                    user: format!("{group}-{i}"),
                    group,
                    max_power: rng.gen_range(0.1..0.9),
                    confounds: random_confounds(&mut rng),
                });
            }
        }
        let out = max_power_comparison(&users).unwrap();
        assert_eq!(out.reference, Group::Hc);
        assert!(out.coefficients.iter().any(|c| c.name == "group:UD"));
        assert!(out.coefficients.iter().all(|c| c.name != "group:HC"));
        assert_eq!(out.contrasts.len(), 1);
        assert_eq!((out.contrasts[0].a, out.contrasts[0].b), (Group::Hc, Group::Ud));
        assert_eq!(max_power_comparison(&[]), Err(CompareError::NoUsers));
    }
}
