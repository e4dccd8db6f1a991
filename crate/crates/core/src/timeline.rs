//! Anchor-relative monthly timelines.
//!
//! Posts are binned by *calendar month* relative to each user's anchor
//! month (index 0), features are averaged per (user, month), corpus-sparse
//! months at the extremes are trimmed, and series can be dichotomized into
//! the pre-diagnosis window (months −45..−7) and acute window (0..6) or
//! z-standardized per user. Months −6..−1 deliberately belong to neither
//! window.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::cohort::Group;
use crate::stats;

/// Pre-diagnosis window in anchor-relative months, inclusive.
pub const PRE_WINDOW: std::ops::RangeInclusive<i64> = -45..=-7;
/// Acute window in anchor-relative months, inclusive.
pub const ACUTE_WINDOW: std::ops::RangeInclusive<i64> = 0..=6;

/// Cumulative data-share band for keeping months; months outside it are
/// trimmed as low-density extremes.
pub const DENSITY_BAND: (f64, f64) = (0.025, 0.975);

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("user {user} has no group assignment")]
    UnknownUser { user: String },
}

/// Calendar-month offset of `post_date` from `anchor_date`; the anchor's
/// own calendar month is 0 regardless of day-of-month.
pub fn month_index(post_date: NaiveDate, anchor_date: NaiveDate) -> i64 {
    12 * (post_date.year() as i64 - anchor_date.year() as i64)
        + (post_date.month() as i64 - anchor_date.month() as i64)
}

/// One post's feature values, ready for monthly aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePost {
    pub user: String,
    pub date: NaiveDate,
    /// Feature id → value; absent features are simply missing keys.
    pub values: BTreeMap<String, f64>,
}

/// Monthly mean and contributing post count for one month of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthPoint {
    pub value: f64,
    pub n_posts: u64,
}

/// One user's monthly trajectory for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub user: String,
    pub feature_id: String,
    pub points: BTreeMap<i64, MonthPoint>,
}

/// Output of [`aggregate_monthly`]: series sorted by (user, feature), plus
/// the number of posts skipped because their user has no anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutput {
    pub series: Vec<MonthlySeries>,
    pub skipped_posts: u64,
}

/// Group posts by (user, feature, anchor-relative month) and average each
/// feature within the month. A post missing a feature is excluded from that
/// feature's mean only.
pub fn aggregate_monthly(
    posts: &[FeaturePost],
    anchors: &BTreeMap<String, NaiveDate>,
) -> AggregateOutput {
    let mut sums: BTreeMap<(String, String), BTreeMap<i64, (f64, u64)>> = BTreeMap::new();
    let mut skipped_posts = 0u64;
    for post in posts {
        let Some(anchor) = anchors.get(&post.user) else {
            skipped_posts += 1;
            continue;
        };
        let month = month_index(post.date, *anchor);
        for (feature, value) in &post.values {
            let cell = sums
                .entry((post.user.clone(), feature.clone()))
                .or_default()
                .entry(month)
                .or_insert((0.0, 0));
            cell.0 += value;
            cell.1 += 1;
        }
    }
    let series = sums
        .into_iter()
        .map(|((user, feature_id), months)| MonthlySeries {
            user,
            feature_id,
            points: months
                .into_iter()
                .map(|(m, (sum, n))| (m, MonthPoint { value: sum / n as f64, n_posts: n }))
                .collect(),
        })
        .collect();
    AggregateOutput { series, skipped_posts }
}

/// Corpus-wide post count per month. Within one user a month's post count
/// is the largest per-feature contribution count (always-present features
/// report the true count; partially-absent ones report less).
pub fn month_densities(series: &[MonthlySeries]) -> BTreeMap<i64, u64> {
    let mut per_user: BTreeMap<(&str, i64), u64> = BTreeMap::new();
    for s in series {
        for (month, point) in &s.points {
            let cell = per_user.entry((s.user.as_str(), *month)).or_insert(0);
            *cell = (*cell).max(point.n_posts);
        }
    }
    let mut densities: BTreeMap<i64, u64> = BTreeMap::new();
    for ((_, month), n) in per_user {
        *densities.entry(month).or_insert(0) += n;
    }
    densities
}

/// Months to keep: those whose cumulative share of the corpus's data mass
/// (in month order, inclusive) lies inside [`DENSITY_BAND`]. A degenerate
/// band that would keep nothing (e.g. a single month holding everything)
/// keeps all months instead.
pub fn kept_month_band(densities: &BTreeMap<i64, u64>) -> BTreeSet<i64> {
    let total: u64 = densities.values().sum();
    if total == 0 {
        return densities.keys().copied().collect();
    }
    let (lo, hi) = DENSITY_BAND;
    let mut cumulative = 0u64;
    let mut kept = BTreeSet::new();
    for (month, n) in densities {
        cumulative += n;
        let share = cumulative as f64 / total as f64;
        if share >= lo && share <= hi {
            kept.insert(*month);
        }
    }
    if kept.is_empty() {
        densities.keys().copied().collect()
    } else {
        kept
    }
}

/// Drop low-density months from every series; series left without points
/// disappear. Returns the trimmed set and the months kept.
pub fn trim_low_density(series: Vec<MonthlySeries>) -> (Vec<MonthlySeries>, BTreeSet<i64>) {
    let kept = kept_month_band(&month_densities(&series));
    let trimmed = series
        .into_iter()
        .filter_map(|mut s| {
            s.points.retain(|month, _| kept.contains(month));
            if s.points.is_empty() {
                None
            } else {
                Some(s)
            }
        })
        .collect();
    (trimmed, kept)
}

/// Pre/acute window means of one series; a window with no months is absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dichotomy {
    pub pre_mean: Option<f64>,
    pub acute_mean: Option<f64>,
}

/// Unweighted mean of monthly values inside each analysis window.
pub fn dichotomize(series: &MonthlySeries) -> Dichotomy {
    let window_mean = |range: &std::ops::RangeInclusive<i64>| {
        let values: Vec<f64> = series
            .points
            .iter()
            .filter(|(m, _)| range.contains(m))
            .map(|(_, p)| p.value)
            .collect();
        stats::mean(&values)
    };
    Dichotomy {
        pre_mean: window_mean(&PRE_WINDOW),
        acute_mean: window_mean(&ACUTE_WINDOW),
    }
}

/// Z-standardize a series against its own monthly values (population SD).
/// Series with fewer than two months or zero variance are dropped (`None`).
pub fn zstandardize_user(series: &MonthlySeries) -> Option<MonthlySeries> {
    let values: Vec<f64> = series.points.values().map(|p| p.value).collect();
    if values.len() < 2 {
        return None;
    }
    let mean = stats::mean(&values)?;
    let sd = stats::population_variance(&values)?.sqrt();
    if sd == 0.0 {
        return None;
    }
    Some(MonthlySeries {
        user: series.user.clone(),
        feature_id: series.feature_id.clone(),
        points: series
            .points
            .iter()
            .map(|(m, p)| {
                (*m, MonthPoint { value: (p.value - mean) / sd, n_posts: p.n_posts })
            })
            .collect(),
    })
}

/// One row of the tidy long-format export handed to external model fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub user: String,
    pub group: Group,
    pub feature: String,
    pub month: i64,
    pub value: f64,
    pub n_posts: u64,
}

/// Flatten series into long rows; every user must have a group assignment.
pub fn to_long_rows(
    series: &[MonthlySeries],
    groups: &BTreeMap<String, Group>,
) -> Result<Vec<LongRow>, TimelineError> {
    let mut rows = Vec::new();
    for s in series {
        let group = *groups
            .get(&s.user)
            .ok_or_else(|| TimelineError::UnknownUser { user: s.user.clone() })?;
        for (month, point) in &s.points {
            rows.push(LongRow {
                user: s.user.clone(),
                group,
                feature: s.feature_id.clone(),
                month: *month,
                value: point.value,
                n_posts: point.n_posts,
            });
        }
    }
    Ok(rows)
}
