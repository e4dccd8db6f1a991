//! Post-diagnosis periodicity analyses.
//!
//! Everything here operates on anchor-relative monthly series restricted to
//! the post-diagnosis window (months 1..=253 by default):
//!
//! * [`curation`] balances the groups (heavy-poster exclusion, user
//!   downsampling, per-month stratified post thinning);
//! * [`autocorr`] bootstraps group-level lag autocorrelations of the
//!   differenced mean series;
//! * [`lsp`] computes per-user Lomb–Scargle periodograms, permutation
//!   false-alarm levels, and phase folding;
//! * [`compare`] regresses per-user maximum power on group membership while
//!   controlling for time-series confounds;
//! * [`seasonal`] builds calendar-month profiles with χ² tests.
//!
//! All randomized steps draw from [`crate::rngutil::derive_rng`] streams so
//! results are reproducible regardless of scheduling.

pub mod autocorr;
pub mod compare;
pub mod curation;
pub mod lsp;
pub mod seasonal;

pub use autocorr::{
    bootstrap_autocorrelation, lag_comparison, AcError, BootstrapAcConfig, GroupAc,
    LagComparison, LagDistribution, TestDirection,
};
pub use compare::{
    max_power_comparison, series_confounds, CompareError, GroupComparison, SeriesConfounds,
    UserPower,
};
pub use curation::{
    build_curation_plan, thinning_mask, CurationConfig, CurationError, CurationPlan,
    UserMonthCounts,
};
pub use lsp::{
    false_alarm_level, lomb_scargle, phase_fold, power_at_frequencies, LspConfig, LspError,
    Periodogram, PhaseFold,
};
pub use seasonal::{
    seasonal_counts, seasonal_means, seasonal_month_contrasts, seasonal_profile, MonthContrast,
    MonthMean, SeasonalError, SeasonalProfile,
};

use std::collections::BTreeMap;

/// A sparse monthly series: anchor-relative month index → value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSeries {
    pub points: BTreeMap<i64, f64>,
}

impl SparseSeries {
    pub fn new(points: BTreeMap<i64, f64>) -> SparseSeries {
        SparseSeries { points }
    }

    pub fn from_pairs(pairs: &[(i64, f64)]) -> SparseSeries {
        SparseSeries {
            points: pairs.iter().copied().collect(),
        }
    }

    /// Months (sorted) and values as parallel vectors.
    pub fn unzip(&self) -> (Vec<f64>, Vec<f64>) {
        let months = self.points.keys().map(|m| *m as f64).collect();
        let values = self.points.values().copied().collect();
        (months, values)
    }
}

impl From<&crate::timeline::MonthlySeries> for SparseSeries {
    fn from(series: &crate::timeline::MonthlySeries) -> SparseSeries {
        SparseSeries {
            points: series.points.iter().map(|(m, p)| (*m, p.value)).collect(),
        }
    }
}
