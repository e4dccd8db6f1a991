//! Dataset curation for the periodicity analyses.
//!
//! Post-diagnosis data (months 1..=253) is balanced in three steps before
//! any periodicity statistic is computed:
//!
//! 1. **Heavy-poster exclusion** — within the densest months (the same
//!    cumulative-share band used for timeline trimming), users above their
//!    group's 99th-percentile of topic data points per active user-month
//!    are dropped;
//! 2. **User downsampling** — every group is sampled down (uniformly,
//!    without replacement) to the smallest group's user count;
//! 3. **Stratified post thinning** — a post from group `g` in month `m`
//!    survives with probability `P = s_m / g_m`, where `g_m` is the group's
//!    mean posts per kept user in that month and `s_m` is the smallest
//!    `g_m` across groups.
//!
//! By construction `s_m ≤ g_m`, so probabilities stay in [0, 1], and the
//! expected post-thinning mean posts per user-month equals `s_m` in every
//! group.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rand::Rng;
use thiserror::Error;

use crate::cohort::Group;
use crate::stats;
use crate::timeline::kept_month_band;

#[derive(Debug, Error, PartialEq)]
pub enum CurationError {
    #[error("group {group} has no users left after heavy-poster exclusion")]
    EmptyGroup { group: Group },
    #[error("heavy-user quantile must lie in (0, 1], got {q}")]
    BadQuantile { q: f64 },
}

/// Per-user post-diagnosis data volume: month index → number of topic data
/// points contributed that month.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMonthCounts {
    pub user: String,
    pub group: Group,
    pub counts: BTreeMap<i64, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationConfig {
    /// Anchor-relative months considered, inclusive.
    pub months: RangeInclusive<i64>,
    /// Users above this group-wise volume quantile are excluded.
    pub heavy_user_quantile: f64,
}

impl Default for CurationConfig {
    fn default() -> CurationConfig {
        CurationConfig {
            months: 1..=253,
            heavy_user_quantile: 0.99,
        }
    }
}

/// The full curation decision: which users survive and the per-(group,
/// month) thinning probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationPlan {
    pub months: RangeInclusive<i64>,
    /// Months inside the dense band used for heavy-poster volumes.
    pub dense_band: BTreeSet<i64>,
    /// Users kept per group after exclusion and downsampling.
    pub kept_users: BTreeMap<Group, BTreeSet<String>>,
    /// Heavy posters dropped per group in step 1.
    pub heavy_dropped: BTreeMap<Group, u64>,
    /// Mean posts per kept user, per (group, month); only months where the
    /// group has any data.
    pub g: BTreeMap<(Group, i64), f64>,
    /// Per month, the smallest mean across groups (0 when any group has no
    /// data that month).
    pub s: BTreeMap<i64, f64>,
    /// Sampling probability `s_m / g_m` per (group, month).
    pub probabilities: BTreeMap<(Group, i64), f64>,
}

fn restrict(counts: &BTreeMap<i64, u64>, months: &RangeInclusive<i64>) -> BTreeMap<i64, u64> {
    counts
        .iter()
        .filter(|(m, n)| months.contains(m) && **n > 0)
        .map(|(m, n)| (*m, *n))
        .collect()
}

/// Build the curation plan from per-user monthly data volumes.
pub fn build_curation_plan<R: Rng>(
    users: &[UserMonthCounts],
    config: &CurationConfig,
    rng: &mut R,
) -> Result<CurationPlan, CurationError> {
    let q = config.heavy_user_quantile;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CurationError::BadQuantile { q });
    }

    // Dense band over the whole cohort, same cumulative-share convention as
    // timeline trimming.
    let mut densities: BTreeMap<i64, u64> = BTreeMap::new();
    for u in users {
        for (m, n) in restrict(&u.counts, &config.months) {
            *densities.entry(m).or_insert(0) += n;
        }
    }
    let dense_band = kept_month_band(&densities);

    // Step 1: per-group heavy-poster exclusion. A user's volume is their
    // mean data points per *active* month (months with data) inside the
    // band; users with no band data have volume 0 and are never "heavy".
    let mut by_group: BTreeMap<Group, Vec<&UserMonthCounts>> = BTreeMap::new();
    for u in users {
        by_group.entry(u.group).or_default().push(u);
    }
    let volume = |u: &UserMonthCounts| -> f64 {
        let band_counts: Vec<u64> = restrict(&u.counts, &config.months)
            .into_iter()
            .filter(|(m, _)| dense_band.contains(m))
            .map(|(_, n)| n)
            .collect();
        if band_counts.is_empty() {
            0.0
        } else {
            band_counts.iter().sum::<u64>() as f64 / band_counts.len() as f64
        }
    };

    let mut survivors: BTreeMap<Group, Vec<&UserMonthCounts>> = BTreeMap::new();
    let mut heavy_dropped: BTreeMap<Group, u64> = BTreeMap::new();
    for (group, members) in &by_group {
        let volumes: Vec<f64> = members.iter().map(|u| volume(u)).collect();
        let cutoff = stats::empirical_quantile(&volumes, q)
            .ok_or(CurationError::EmptyGroup { group: *group })?;
        let mut kept = Vec::new();
        let mut dropped = 0u64;
        for (u, v) in members.iter().zip(&volumes) {
            if *v > cutoff {
                dropped += 1;
            } else {
                kept.push(*u);
            }
        }
        if kept.is_empty() {
            return Err(CurationError::EmptyGroup { group: *group });
        }
        heavy_dropped.insert(*group, dropped);
        survivors.insert(*group, kept);
    }

    // Step 2: downsample every group to the smallest group's size. Groups
    // are visited in a fixed order and users sorted by name so the draw
    // depends only on the RNG stream.
    let target = survivors.values().map(Vec::len).min().expect("nonempty groups");
    let mut kept_users: BTreeMap<Group, BTreeSet<String>> = BTreeMap::new();
    for (group, mut members) in survivors.clone() {
        members.sort_by(|a, b| a.user.cmp(&b.user));
        let chosen: BTreeSet<String> = if members.len() == target {
            members.iter().map(|u| u.user.clone()).collect()
        } else {
            rand::seq::index::sample(rng, members.len(), target)
                .into_iter()
                .map(|i| members[i].user.clone())
                .collect()
        };
        kept_users.insert(group, chosen);
    }

    // Step 3: per-(group, month) means over kept users (zero-count users
    // included in the denominator) and Eq.-style probabilities.
    let mut g: BTreeMap<(Group, i64), f64> = BTreeMap::new();
    let mut group_months: BTreeSet<i64> = BTreeSet::new();
    for u in users {
        let Some(kept) = kept_users.get(&u.group) else { continue };
        if !kept.contains(&u.user) {
            continue;
        }
        for (m, n) in restrict(&u.counts, &config.months) {
            *g.entry((u.group, m)).or_insert(0.0) += n as f64;
            group_months.insert(m);
        }
    }
    for value in g.values_mut() {
        *value /= target as f64;
    }

    let groups: Vec<Group> = kept_users.keys().copied().collect();
    let mut s: BTreeMap<i64, f64> = BTreeMap::new();
    for m in &group_months {
        let smallest = groups
            .iter()
            .map(|grp| g.get(&(*grp, *m)).copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        s.insert(*m, smallest);
    }
    let probabilities: BTreeMap<(Group, i64), f64> = g
        .iter()
        .map(|((grp, m), gm)| ((*grp, *m), s[m] / gm))
        .collect();

    Ok(CurationPlan {
        months: config.months.clone(),
        dense_band,
        kept_users,
        heavy_dropped,
        g,
        s,
        probabilities,
    })
}

/// Bernoulli keep/drop decision for each data point `(user, month)`, in
/// input order. Points from excluded users or outside the month window are
/// always dropped.
pub fn thinning_mask<R: Rng>(
    plan: &CurationPlan,
    points: &[(String, i64)],
    rng: &mut R,
) -> Vec<bool> {
    let mut group_of: BTreeMap<&str, Group> = BTreeMap::new();
    for (group, members) in &plan.kept_users {
        for user in members {
            group_of.insert(user.as_str(), *group);
        }
    }
    points
        .iter()
        .map(|(user, month)| {
            if !plan.months.contains(month) {
                return false;
            }
            let Some(group) = group_of.get(user.as_str()) else {
                return false;
            };
            let Some(p) = plan.probabilities.get(&(*group, *month)) else {
                return false;
            };
            rng.gen::<f64>() < *p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::derive_rng;

    fn user(name: &str, group: Group, counts: &[(i64, u64)]) -> UserMonthCounts {
        UserMonthCounts {
            user: name.to_string(),
            group,
            counts: counts.iter().copied().collect(),
        }
    }

    /// n users per group, each posting `rate` data points in every month of
    /// `months`.
    fn uniform_cohort(sizes: &[(Group, usize, u64)], months: RangeInclusive<i64>) -> Vec<UserMonthCounts> {
        let mut out = Vec::new();
        for (group, n, rate) in sizes {
            for i in 0..*n {
                let counts: Vec<(i64, u64)> = months.clone().map(|m| (m, *rate)).collect();
                out.push(user(&format!("{group}-{i:03}"), *group, &counts));
            }
        }
        out
    }

    #[test]
    fn balanced_cohort_needs_no_curation() {
        let users = uniform_cohort(
            &[(Group::Bd, 5, 3), (Group::Ud, 5, 3), (Group::Hc, 5, 3)],
            1..=24,
        );
        let mut rng = derive_rng(11, "curation/test", 0);
        let plan = build_curation_plan(&users, &CurationConfig { months: 1..=24, ..CurationConfig::default() }, &mut rng).unwrap();

        assert!(plan.heavy_dropped.values().all(|d| *d == 0));
        assert!(plan.kept_users.values().all(|k| k.len() == 5));
        assert!(plan.probabilities.values().all(|p| (p - 1.0).abs() < 1e-12));

        let points: Vec<(String, i64)> =
            users.iter().flat_map(|u| [(u.user.clone(), 1i64), (u.user.clone(), 24)]).collect();
        let mask = thinning_mask(&plan, &points, &mut rng);
        assert!(mask.iter().all(|kept| *kept), "P = 1 must keep everything");
    }

    #[test]
    fn probability_is_ratio_of_month_means() {
        // One user per group: BD posts 4 in month 1, UD posts 2.
        let users = vec![
            user("b", Group::Bd, &[(1, 4)]),
            user("u", Group::Ud, &[(1, 2)]),
        ];
        let mut rng = derive_rng(11, "curation/test", 1);
        let plan = build_curation_plan(&users, &CurationConfig::default(), &mut rng).unwrap();
        assert_eq!(plan.g[&(Group::Bd, 1)], 4.0);
        assert_eq!(plan.g[&(Group::Ud, 1)], 2.0);
        assert_eq!(plan.s[&1], 2.0);
        assert_eq!(plan.probabilities[&(Group::Bd, 1)], 0.5);
        assert_eq!(plan.probabilities[&(Group::Ud, 1)], 1.0);
    }

    #[test]
    fn heavy_posters_are_dropped_groupwise() {
        // 100 modest users and one extreme user in BD; UD stays small.
        let mut users = uniform_cohort(&[(Group::Bd, 100, 1)], 1..=12);
        users.push(user("whale", Group::Bd, &(1..=12).map(|m| (m, 50)).collect::<Vec<_>>()));
        users.extend(uniform_cohort(&[(Group::Ud, 50, 1)], 1..=12));

        let mut rng = derive_rng(11, "curation/test", 2);
        let plan = build_curation_plan(
            &users,
            &CurationConfig { months: 1..=12, ..CurationConfig::default() },
            &mut rng,
        )
        .unwrap();
        assert_eq!(plan.heavy_dropped[&Group::Bd], 1);
        assert!(!plan.kept_users[&Group::Bd].contains("whale"));
        assert_eq!(plan.heavy_dropped[&Group::Ud], 0);
        // Downsampled to the UD size.
        assert_eq!(plan.kept_users[&Group::Bd].len(), 50);
    }

    #[test]
    fn downsampling_is_deterministic_and_subset() {
        let users = uniform_cohort(
            &[(Group::Bd, 30, 2), (Group::Ud, 20, 2), (Group::Hc, 10, 2)],
            1..=6,
        );
        let config = CurationConfig { months: 1..=6, ..CurationConfig::default() };
        let plan_a =
            build_curation_plan(&users, &config, &mut derive_rng(7, "curation/test", 3)).unwrap();
        let plan_b =
            build_curation_plan(&users, &config, &mut derive_rng(7, "curation/test", 3)).unwrap();
        assert_eq!(plan_a, plan_b);
        for (_, kept) in &plan_a.kept_users {
            assert_eq!(kept.len(), 10);
        }
        let all_users: BTreeSet<String> = users.iter().map(|u| u.user.clone()).collect();
        for kept in plan_a.kept_users.values() {
            assert!(kept.iter().all(|u| all_users.contains(u)));
        }
    }

    #[test]
    fn degenerate_inputs() {
        // A single-user cohort is fine.
        let users = vec![user("b", Group::Bd, &[(1, 1)])];
        assert!(build_curation_plan(
            &users,
            &CurationConfig::default(),
            &mut derive_rng(1, "curation/test", 4)
        )
        .is_ok());

        // Data entirely outside the month window: the user survives with
        // volume 0, the plan simply has no thinnable months.
        let out_of_window = vec![user("b", Group::Bd, &[(-5, 3)])];
        let plan = build_curation_plan(
            &out_of_window,
            &CurationConfig::default(),
            &mut derive_rng(1, "curation/test", 5),
        )
        .unwrap();
        assert!(plan.probabilities.is_empty());

        // Invalid quantile is rejected.
        assert_eq!(
            build_curation_plan(
                &users,
                &CurationConfig { heavy_user_quantile: 0.0, ..CurationConfig::default() },
                &mut derive_rng(1, "curation/test", 6),
            ),
            Err(CurationError::BadQuantile { q: 0.0 })
        );
    }

    /// End-to-end balance check: after thinning an imbalanced cohort, the
    /// groups' mean posts per user-month are statistically indistinguishable
    /// (pairwise Welch tests, α = .1).
    #[test]
    fn thinned_cohort_is_balanced() {
        let months = 1..=36i64;
        let sizes = [(Group::Bd, 40usize, 6u64), (Group::Ud, 30, 3), (Group::Hc, 20, 2)];
        let users = uniform_cohort(&sizes, months.clone());
        let config = CurationConfig { months: months.clone(), ..CurationConfig::default() };
        let mut rng = derive_rng(29, "curation/test", 6);
        let plan = build_curation_plan(&users, &config, &mut rng).unwrap();

        // Expand per-month counts into individual data points and thin.
        let mut points = Vec::new();
        for u in &users {
            for (m, n) in &u.counts {
                for _ in 0..*n {
                    points.push((u.user.clone(), *m));
                }
            }
        }
        let mask = thinning_mask(&plan, &points, &mut rng);

        // Post-thinning mean posts per kept user, per month and group.
        let mut kept_counts: BTreeMap<(Group, i64), f64> = BTreeMap::new();
        let group_of: BTreeMap<String, Group> = users.iter().map(|u| (u.user.clone(), u.group)).collect();
        for ((user, month), kept) in points.iter().zip(&mask) {
            if *kept {
                *kept_counts.entry((group_of[user], *month)).or_insert(0.0) += 1.0;
            }
        }
        let n_kept_users = plan.kept_users[&Group::Hc].len() as f64;
        let series: BTreeMap<Group, Vec<f64>> = [Group::Bd, Group::Ud, Group::Hc]
            .into_iter()
            .map(|grp| {
                let v: Vec<f64> = months
                    .clone()
                    .map(|m| kept_counts.get(&(grp, m)).copied().unwrap_or(0.0) / n_kept_users)
                    .collect();
                (grp, v)
            })
            .collect();

        for (a, b) in [(Group::Bd, Group::Ud), (Group::Bd, Group::Hc), (Group::Ud, Group::Hc)] {
            let t = stats::welch_t_test(&series[&a], &series[&b]).unwrap();
            assert!(
                t.p_value > 0.1,
                "groups {a} vs {b} differ after curation: p = {}",
                t.p_value
            );
        }
        // And the expected level is the smallest group's raw rate (2/month).
        let grand_mean: f64 =
            series.values().flat_map(|v| v.iter()).sum::<f64>() / (3.0 * 36.0);
        assert!((grand_mean - 2.0).abs() < 0.2, "grand mean {grand_mean} should sit near s_m = 2");
    }
}
