//! Cohort identification: self-disclosure matching, non-human filtering,
//! group resolution, matched control sampling and pseudo-anchor assignment.
//!
//! Clinical users are found through a fixed list of disclosure phrases
//! (see [`DISCLOSURE_PATTERNS`]); matching is case-insensitive literal
//! substring search over cleaned text after collapsing whitespace runs to
//! single spaces. Control users are sampled so that their identification
//! posts mirror the clinical group's posting distribution over calendar
//! months and post types: a post in cell `(m, t)` is accepted with
//!
//! ```text
//! P(mt) = a_mt * b / n_mt
//! ```
//!
//! where `a_mt` is the proportion of clinical posts in that cell, `b` the
//! target number of sampled posts and `n_mt` the available candidate count.
//! `P` is clamped to `[0, 1]`; cells where demand exceeds supply are
//! flagged so the shortfall is visible in the run report.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{is_deleted_author, PostKind};

#[derive(Debug, Error, PartialEq)]
pub enum CohortError {
    #[error("clinical post set is empty; cannot derive sampling proportions")]
    EmptyClinicalPosts,
    #[error("anchor date pool is empty")]
    EmptyDatePool,
}

/// Disorder whose diagnosis a disclosure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disorder {
    Bipolar,
    Depression,
}

impl Disorder {
    /// The literal token substituted for `[DISORDER]` in patterns/prompts.
    pub fn term(self) -> &'static str {
        match self {
            Disorder::Bipolar => "bipolar",
            Disorder::Depression => "depression",
        }
    }
}

/// Cohort membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "BD")]
    Bd,
    #[serde(rename = "UD")]
    Ud,
    #[serde(rename = "HC")]
    Hc,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::Bd => "BD",
            Group::Ud => "UD",
            Group::Hc => "HC",
        })
    }
}

/// Disclosure phrase templates, tried in this order; `[DISORDER]` is
/// replaced by [`Disorder::term`]. The first template found as a substring
/// wins.
pub const DISCLOSURE_PATTERNS: [&str; 7] = [
    "diagnosed me with [DISORDER]",
    "diagnosed [DISORDER]",
    "i am diagnosed with [DISORDER]",
    "i was diagnosed with [DISORDER]",
    "i have been diagnosed with [DISORDER]",
    "my [DISORDER]",
    "i have [DISORDER]",
];

/// A successful disclosure match. `start..end` indexes the normalized
/// (lowercased, whitespace-collapsed) text, not the original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisclosureMatch {
    pub pattern_id: usize,
    pub pattern: &'static str,
    pub start: usize,
    pub end: usize,
}

fn normalize_for_match(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if !last_space && !out.is_empty() {
                out.push(' ');
            }
            last_space = true;
        } else {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Search `text` for a self-disclosure of the given disorder.
///
/// Patterns are matched as literal substrings (no word-boundary guards) in
/// their listed order against the normalized text.
pub fn match_disclosure(text: &str, disorder: Disorder) -> Option<DisclosureMatch> {
    let normalized = normalize_for_match(text);
    for (pattern_id, template) in DISCLOSURE_PATTERNS.iter().enumerate() {
        let needle = template.replace("[DISORDER]", disorder.term());
        if let Some(start) = normalized.find(&needle) {
            return Some(DisclosureMatch {
                pattern_id,
                pattern: template,
                start,
                end: start + needle.len(),
            });
        }
    }
    None
}

const NONHUMAN_MARKERS: [&str; 4] = ["auto", "bot", "mod", "admin"];

/// True when the username suggests a non-human agent.
pub fn is_nonhuman(username: &str) -> bool {
    let lower = username.to_lowercase();
    NONHUMAN_MARKERS.iter().any(|m| lower.contains(m))
}

/// One user's qualifying self-disclosure (their earliest matching post).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisclosureHit {
    pub username: String,
    pub post_id: String,
    pub created_at: i64,
    pub pattern_id: usize,
}

/// Reduce arbitrary many hits to one per user: earliest `created_at`,
/// ties broken by `post_id`.
pub fn earliest_hits<I>(hits: I) -> BTreeMap<String, DisclosureHit>
where
    I: IntoIterator<Item = DisclosureHit>,
{
    let mut best: BTreeMap<String, DisclosureHit> = BTreeMap::new();
    for hit in hits {
        match best.get(&hit.username) {
            Some(cur)
                if (cur.created_at, &cur.post_id) <= (hit.created_at, &hit.post_id) => {}
            _ => {
                best.insert(hit.username.clone(), hit);
            }
        }
    }
    best
}

/// Outcome of [`resolve_groups`], with exclusion counters for the report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedCohorts {
    pub bd: BTreeMap<String, DisclosureHit>,
    pub ud: BTreeMap<String, DisclosureHit>,
    pub excluded_overlap: u64,
    pub excluded_nonhuman: u64,
    pub excluded_deleted: u64,
}

/// Make the clinical groups disjoint and drop deleted/non-human accounts.
///
/// Users disclosing both disorders are removed from both groups; then
/// deleted accounts and usernames flagged by [`is_nonhuman`] are removed.
pub fn resolve_groups(
    bd: BTreeMap<String, DisclosureHit>,
    ud: BTreeMap<String, DisclosureHit>,
) -> ResolvedCohorts {
    let overlap: BTreeSet<String> = bd
        .keys()
        .filter(|u| ud.contains_key(*u))
        .cloned()
        .collect();
    let mut excluded_overlap = 0;
    let mut excluded_nonhuman = 0;
    let mut excluded_deleted = 0;
    let mut keep = |map: BTreeMap<String, DisclosureHit>| -> BTreeMap<String, DisclosureHit> {
        let mut out = BTreeMap::new();
        for (user, hit) in map {
            if overlap.contains(&user) {
                excluded_overlap += 1;
            } else if is_deleted_author(&user) {
                excluded_deleted += 1;
            } else if is_nonhuman(&user) {
                excluded_nonhuman += 1;
            } else {
                out.insert(user, hit);
            }
        }
        out
    };
    let bd = keep(bd);
    let ud = keep(ud);
    ResolvedCohorts {
        bd,
        ud,
        excluded_overlap,
        excluded_nonhuman,
        excluded_deleted,
    }
}

/// A sampling cell: calendar month (UTC) and post type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub year: i32,
    pub month: u32,
    pub kind: PostKind,
}

impl CellKey {
    pub fn from_timestamp(created_at: i64, kind: PostKind) -> CellKey {
        let dt = DateTime::from_timestamp(created_at, 0).expect("timestamp in range");
        CellKey {
            year: dt.year(),
            month: dt.month(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanCell {
    /// `a_mt`: share of clinical posts falling in this cell.
    pub proportion: f64,
    /// `n_mt`: candidate posts available in this cell.
    pub available: u64,
    /// Acceptance probability, already clamped to `[0, 1]`.
    pub probability: f64,
    /// True where `a_mt * b > n_mt` (demand exceeded supply).
    pub clamped: bool,
}

/// Per-cell acceptance probabilities for control sampling.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub b: u64,
    pub cells: BTreeMap<CellKey, PlanCell>,
}

impl SamplingPlan {
    pub fn probability(&self, key: &CellKey) -> f64 {
        self.cells.get(key).map_or(0.0, |c| c.probability)
    }

    /// Cells with a clamped probability, for shortfall logging.
    pub fn clamped_cells(&self) -> Vec<CellKey> {
        self.cells
            .iter()
            .filter(|(_, c)| c.clamped)
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Build the Eq.-style sampling plan from clinical post counts per cell and
/// available candidate counts per cell.
pub fn build_sampling_plan(
    clinical_counts: &BTreeMap<CellKey, u64>,
    available_counts: &BTreeMap<CellKey, u64>,
    b: u64,
) -> Result<SamplingPlan, CohortError> {
    assert!(b > 0, "target count b must be positive");
    let total: u64 = clinical_counts.values().sum();
    if total == 0 {
        return Err(CohortError::EmptyClinicalPosts);
    }
    let mut cells = BTreeMap::new();
    let keys: BTreeSet<CellKey> = clinical_counts
        .keys()
        .chain(available_counts.keys())
        .copied()
        .collect();
    for key in keys {
        let a = clinical_counts.get(&key).copied().unwrap_or(0) as f64 / total as f64;
        let n = available_counts.get(&key).copied().unwrap_or(0);
        let (probability, clamped) = if n == 0 {
            (0.0, false)
        } else {
            let raw = a * b as f64 / n as f64;
            if raw > 1.0 {
                (1.0, true)
            } else {
                (raw, false)
            }
        };
        cells.insert(
            key,
            PlanCell {
                proportion: a,
                available: n,
                probability,
                clamped,
            },
        );
    }
    Ok(SamplingPlan { b, cells })
}

/// A candidate identification post for the control cohort.
#[derive(Debug, Clone)]
pub struct ControlCandidate {
    pub post_id: String,
    pub username: String,
    pub created_at: i64,
    pub kind: PostKind,
}

/// The post through which a control user entered the cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationPost {
    pub post_id: String,
    pub created_at: i64,
}

/// Result of [`sample_controls`].
#[derive(Debug, Clone)]
pub struct ControlSample {
    /// Username → chosen identification post, one per user.
    pub users: BTreeMap<String, IdentificationPost>,
    pub candidates_per_cell: BTreeMap<CellKey, u64>,
    pub accepted_per_cell: BTreeMap<CellKey, u64>,
    pub excluded_overlap: u64,
    pub excluded_nonhuman: u64,
    pub excluded_deleted: u64,
}

/// Sample control identification posts per the plan.
///
/// Each candidate is accepted independently with its cell's probability
/// (draws consumed in candidate order). Accepted users are then filtered by
/// the clinical criteria (deleted accounts, non-human names, overlap with
/// `clinical_users`), and for users with several accepted posts one is
/// chosen uniformly (selection draws consumed in username order) — so the
/// whole procedure is reproducible from the RNG seed.
pub fn sample_controls<I, R>(
    plan: &SamplingPlan,
    candidates: I,
    clinical_users: &BTreeSet<String>,
    rng: &mut R,
) -> ControlSample
where
    I: IntoIterator<Item = ControlCandidate>,
    R: Rng,
{
    let mut candidates_per_cell: BTreeMap<CellKey, u64> = BTreeMap::new();
    let mut accepted_per_cell: BTreeMap<CellKey, u64> = BTreeMap::new();
    let mut by_user: BTreeMap<String, Vec<IdentificationPost>> = BTreeMap::new();
    for cand in candidates {
        let key = CellKey::from_timestamp(cand.created_at, cand.kind);
        *candidates_per_cell.entry(key).or_default() += 1;
        let p = plan.probability(&key);
        if rng.gen::<f64>() < p {
            *accepted_per_cell.entry(key).or_default() += 1;
            by_user.entry(cand.username).or_default().push(IdentificationPost {
                post_id: cand.post_id,
                created_at: cand.created_at,
            });
        }
    }

    let mut users = BTreeMap::new();
    let mut excluded_overlap = 0;
    let mut excluded_nonhuman = 0;
    let mut excluded_deleted = 0;
    for (user, mut posts) in by_user {
        if clinical_users.contains(&user) {
            excluded_overlap += 1;
            continue;
        }
        if is_deleted_author(&user) {
            excluded_deleted += 1;
            continue;
        }
        if is_nonhuman(&user) {
            excluded_nonhuman += 1;
            continue;
        }
        let chosen = if posts.len() == 1 {
            posts.pop().unwrap()
        } else {
            posts.swap_remove(rng.gen_range(0..posts.len()))
        };
        users.insert(user, chosen);
    }

    ControlSample {
        users,
        candidates_per_cell,
        accepted_per_cell,
        excluded_overlap,
        excluded_nonhuman,
        excluded_deleted,
    }
}

/// Give each control user a pseudo-diagnosis date drawn i.i.d. with
/// replacement from the clinical anchor-date pool.
pub fn assign_pseudo_anchors<R: Rng>(
    hc_users: &[String],
    pool: &[NaiveDate],
    rng: &mut R,
) -> Result<BTreeMap<String, NaiveDate>, CohortError> {
    if pool.is_empty() {
        return Err(CohortError::EmptyDatePool);
    }
    let mut out = BTreeMap::new();
    for user in hc_users {
        let date = pool[rng.gen_range(0..pool.len())];
        out.insert(user.clone(), date);
    }
    Ok(out)
}
