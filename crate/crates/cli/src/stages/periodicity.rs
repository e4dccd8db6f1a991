//! Stage 8 — `periodicity`: the post-diagnosis periodicity analyses on the
//! focal feature.
//!
//! Order of operations:
//! 1. curate the cohort for equal monthly posting volume (heavy-poster
//!    exclusion, group-size downsampling, per-month thinning);
//! 2. bootstrap autocorrelation of the differenced, z-scored group series
//!    and one-sided clinical-vs-control lag comparisons with FDR control;
//! 3. per-user Lomb–Scargle maximum power, compared between groups with
//!    the 13 series confounds as covariates;
//! 4. group-level periodograms with permutation false-alarm levels and a
//!    phase fold at the dominant frequency;
//! 5. seasonal profiles of the diagnosis months (year-precision anchors
//!    excluded) with per-month group contrasts.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{
    calibrate::read_cohorts,
    features::{member_anchors, member_groups, read_features},
    opt_cell, write_json_pretty,
};
use dicc_core::anchor::DiagnosisAnchor;
use dicc_core::cohort::Group;
use dicc_core::derive_rng;
use dicc_core::periodicity::{
    bootstrap_autocorrelation, build_curation_plan, false_alarm_level, lag_comparison,
    lomb_scargle, max_power_comparison, phase_fold, seasonal_counts, seasonal_month_contrasts,
    seasonal_profile, series_confounds, thinning_mask, BootstrapAcConfig, CurationConfig,
    LspConfig, PhaseFold, SeriesConfounds, SparseSeries, TestDirection, UserPower,
};
use dicc_core::stats;
use dicc_core::timeline::month_index;
use serde::Serialize;
use std::collections::BTreeMap;

/// One group's spectrum summary in `group_spectra.json`.
#[derive(Debug, Clone, Serialize)]
struct GroupSpectrum {
    n_users: usize,
    n_months: usize,
    max_power: f64,
    argmax_frequency: f64,
    false_alarm_level: f64,
    exceeds_false_alarm: bool,
    fold: PhaseFold,
}

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("periodicity", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::FEATURES, "features")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::COHORTS, "calibrate")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::CONTROLS, "sample-controls")?;

    let groups = member_groups(config)?;
    let anchors = member_anchors(config)?;
    let features = read_features(config)?;
    let focal = &config.periodicity.feature;
    let window = config.windows.post_range();

    // --- Focal data points: one per post carrying the focal feature,
    // within the post-diagnosis window, in artifact order. ---
    let mut points: Vec<(String, i64)> = Vec::new();
    let mut point_values: Vec<f64> = Vec::new();
    for row in &features {
        let Some(value) = row.values.get(focal) else {
            continue;
        };
        let Some(anchor) = anchors.get(&row.user) else {
            continue;
        };
        let month = month_index(row.date, *anchor);
        if !window.contains(&month) {
            continue;
        }
        points.push((row.user.clone(), month));
        point_values.push(*value);
    }

    // --- Curation: every cohort member is a candidate (zero-volume users
    // included so the equal-size downsampling sees the full group). ---
    let mut counts_by_user: BTreeMap<&str, BTreeMap<i64, u64>> = BTreeMap::new();
    for (user, month) in &points {
        *counts_by_user
            .entry(user.as_str())
            .or_default()
            .entry(*month)
            .or_default() += 1;
    }
    let users: Vec<dicc_core::periodicity::UserMonthCounts> = groups
        .iter()
        .map(|(user, group)| dicc_core::periodicity::UserMonthCounts {
            user: user.clone(),
            group: *group,
            counts: counts_by_user.get(user.as_str()).cloned().unwrap_or_default(),
        })
        .collect();
    let cur_config = CurationConfig {
        months: window.clone(),
        heavy_user_quantile: config.periodicity.curation_quantile,
    };
    let mut rng = derive_rng(config.master_seed, "periodicity/curation", 0);
    let plan = build_curation_plan(&users, &cur_config, &mut rng)?;
    let mut rng = derive_rng(config.master_seed, "periodicity/thin", 0);
    let mask = thinning_mask(&plan, &points, &mut rng);

    // --- Curated per-user monthly series (mean focal value) and counts. ---
    let mut curated_sums: BTreeMap<&str, BTreeMap<i64, (f64, u64)>> = BTreeMap::new();
    for (i, keep) in mask.iter().enumerate() {
        if !*keep {
            continue;
        }
        let (user, month) = &points[i];
        let cell = curated_sums
            .entry(user.as_str())
            .or_default()
            .entry(*month)
            .or_insert((0.0, 0));
        cell.0 += point_values[i];
        cell.1 += 1;
    }
    let kept_points = mask.iter().filter(|k| **k).count() as u64;

    let users_path = config.paths.output_dir.join(artifacts::CURATION_USERS);
    let mut w = csv::Writer::from_path(&users_path)?;
    w.write_record(["group", "user"])?;
    for (group, members) in &plan.kept_users {
        for user in members {
            w.write_record([&group.to_string(), user])?;
        }
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::CURATION_USERS)?;

    // Post-thinning counts for every kept user over every month that can
    // retain data (s_m > 0), zeros written explicitly: the equal-volume
    // property is about those zeros too.
    let retained_months: Vec<i64> = plan
        .s
        .iter()
        .filter(|(_, s)| **s > 0.0)
        .map(|(m, _)| *m)
        .collect();
    let months_path = config.paths.output_dir.join(artifacts::CURATION_MONTHS);
    let mut w = csv::Writer::from_path(&months_path)?;
    w.write_record(["group", "user", "month", "n_posts"])?;
    for (group, members) in &plan.kept_users {
        for user in members {
            for month in &retained_months {
                let n = curated_sums
                    .get(user.as_str())
                    .and_then(|m| m.get(month))
                    .map(|(_, n)| *n)
                    .unwrap_or(0);
                w.write_record([
                    group.to_string(),
                    user.clone(),
                    month.to_string(),
                    n.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::CURATION_MONTHS)?;

    // --- Bootstrap autocorrelation per group. ---
    let mut group_series: BTreeMap<String, Vec<SparseSeries>> = BTreeMap::new();
    for (group, members) in &plan.kept_users {
        let series: Vec<SparseSeries> = members
            .iter()
            .map(|user| {
                let points = curated_sums
                    .get(user.as_str())
                    .map(|months| {
                        months
                            .iter()
                            .map(|(m, (sum, n))| (*m, sum / *n as f64))
                            .collect()
                    })
                    .unwrap_or_default();
                SparseSeries { points }
            })
            .collect();
        group_series.insert(group.to_string(), series);
    }
    let mut ac_config = BootstrapAcConfig::new(config.master_seed, "periodicity");
    ac_config.lags = config.periodicity.lags[0]..=config.periodicity.lags[1];
    ac_config.iterations = config.periodicity.iterations;
    let ac = bootstrap_autocorrelation(&group_series, &ac_config)?;

    let ac_path = config.paths.output_dir.join(artifacts::AUTOCORRELATION);
    let mut w = csv::Writer::from_path(&ac_path)?;
    w.write_record(["group", "lag", "mean", "ci_low", "ci_high", "n_retained"])?;
    for (label, group_ac) in &ac {
        for dist in &group_ac.per_lag {
            w.write_record([
                label.clone(),
                dist.lag.to_string(),
                opt_cell(dist.mean),
                opt_cell(dist.ci.map(|c| c.0)),
                opt_cell(dist.ci.map(|c| c.1)),
                dist.n_retained.to_string(),
            ])?;
        }
        manifest.count(
            &format!("ac_dropped_iterations_{label}"),
            group_ac.dropped_iterations as u64,
        );
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::AUTOCORRELATION)?;

    // One-sided clinical > control comparisons, FDR-corrected across lags
    // within each comparison.
    let comp_path = config.paths.output_dir.join(artifacts::AC_COMPARISONS);
    let mut w = csv::Writer::from_path(&comp_path)?;
    w.write_record(["comparison", "lag", "n_pairs", "p_value", "p_fdr"])?;
    for clinical in ["BD", "UD"] {
        let (Some(a), Some(b)) = (ac.get(clinical), ac.get("HC")) else {
            continue;
        };
        let comps = lag_comparison(a, b, TestDirection::AGreater);
        let defined: Vec<f64> = comps.iter().filter_map(|c| c.p_value).collect();
        let adjusted = stats::bh_fdr(&defined);
        let mut adj_iter = adjusted.iter();
        let mut significant: Vec<usize> = Vec::new();
        for comp in &comps {
            let p_fdr = comp.p_value.map(|_| *adj_iter.next().expect("one per defined p"));
            if let Some(p) = p_fdr {
                if p < config.periodicity.alpha {
                    significant.push(comp.lag);
                }
            }
            w.write_record([
                format!("{clinical}>HC"),
                comp.lag.to_string(),
                comp.n_pairs.to_string(),
                opt_cell(comp.p_value),
                opt_cell(p_fdr),
            ])?;
        }
        manifest.count(
            &format!("ac_significant_lags_{clinical}"),
            serde_json::json!(significant),
        );
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::AC_COMPARISONS)?;

    // --- Per-user Lomb–Scargle maximum power with confounds. ---
    let lsp_config = LspConfig {
        oversampling: config.periodicity.oversampling,
        ..LspConfig::default()
    };
    let mut user_powers: Vec<UserPower> = Vec::new();
    let mut lsp_skipped = 0u64;
    let mut powers_rows: Vec<(String, String, f64, f64, SeriesConfounds)> = Vec::new();
    for (group, members) in &plan.kept_users {
        for user in members {
            let Some(months_map) = curated_sums.get(user.as_str()) else {
                lsp_skipped += 1;
                continue;
            };
            let months_i: Vec<i64> = months_map.keys().copied().collect();
            let months: Vec<f64> = months_i.iter().map(|m| *m as f64).collect();
            let values: Vec<f64> = months_map.values().map(|(sum, n)| sum / *n as f64).collect();
            let posts: Vec<u64> = months_map.values().map(|(_, n)| *n).collect();
            let periodogram = match lomb_scargle(&months, &values, &lsp_config) {
                Ok(p) => p,
                Err(_) => {
                    lsp_skipped += 1;
                    continue;
                }
            };
            let Some(confounds) = series_confounds(&months_i, &posts, &window) else {
                lsp_skipped += 1;
                continue;
            };
            powers_rows.push((
                user.clone(),
                group.to_string(),
                periodogram.max_power,
                periodogram.argmax_frequency,
                confounds,
            ));
            user_powers.push(UserPower {
                user: user.clone(),
                group: *group,
                max_power: periodogram.max_power,
                confounds,
            });
        }
    }

    let powers_path = config.paths.output_dir.join(artifacts::LSP_POWERS);
    let mut w = csv::Writer::from_path(&powers_path)?;
    let mut header: Vec<&str> = vec!["user", "group", "max_power", "argmax_frequency"];
    header.extend(SeriesConfounds::COLUMN_NAMES);
    w.write_record(&header)?;
    for (user, group, max_power, argmax, confounds) in &powers_rows {
        let mut record = vec![
            user.clone(),
            group.clone(),
            max_power.to_string(),
            argmax.to_string(),
        ];
        record.extend(confounds.columns().iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::LSP_POWERS)?;

    let comparison = max_power_comparison(&user_powers)?;
    write_json_pretty(
        &config.paths.output_dir.join(artifacts::LSP_COMPARISON),
        &comparison,
    )?;
    manifest.record_output(&config.paths.output_dir, artifacts::LSP_COMPARISON)?;

    // --- Group-level spectra: mean curated series per group. ---
    let mut spectra: BTreeMap<String, GroupSpectrum> = BTreeMap::new();
    let mut spectra_skipped: Vec<String> = Vec::new();
    for (group, members) in &plan.kept_users {
        let mut sums: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
        for user in members {
            let Some(months_map) = curated_sums.get(user.as_str()) else {
                continue;
            };
            for (month, (sum, n)) in months_map {
                let cell = sums.entry(*month).or_insert((0.0, 0));
                cell.0 += sum / *n as f64;
                cell.1 += 1;
            }
        }
        let months: Vec<f64> = sums.keys().map(|m| *m as f64).collect();
        let values: Vec<f64> = sums.values().map(|(sum, n)| sum / *n as f64).collect();
        let label = group.to_string();
        let periodogram = match lomb_scargle(&months, &values, &lsp_config) {
            Ok(p) => p,
            Err(_) => {
                spectra_skipped.push(label);
                continue;
            }
        };
        let mut rng = derive_rng(
            config.master_seed,
            &format!("periodicity/false-alarm/{label}"),
            0,
        );
        let fal = false_alarm_level(
            &months,
            &values,
            &lsp_config,
            config.periodicity.false_alarm_alpha,
            config.periodicity.false_alarm_permutations,
            &mut rng,
        )?;
        let fold = phase_fold(
            &months,
            &values,
            periodogram.argmax_frequency,
            config.periodicity.phase_bins,
        );
        spectra.insert(
            label,
            GroupSpectrum {
                n_users: members.len(),
                n_months: months.len(),
                max_power: periodogram.max_power,
                argmax_frequency: periodogram.argmax_frequency,
                false_alarm_level: fal,
                exceeds_false_alarm: periodogram.max_power > fal,
                fold,
            },
        );
    }
    write_json_pretty(
        &config.paths.output_dir.join(artifacts::GROUP_SPECTRA),
        &spectra,
    )?;
    manifest.record_output(&config.paths.output_dir, artifacts::GROUP_SPECTRA)?;

    // --- Seasonality of the diagnosis months (clinical groups only). ---
    let cohorts = read_cohorts(config)?;
    let mut group_anchors: BTreeMap<Group, Vec<DiagnosisAnchor>> = BTreeMap::new();
    for row in &cohorts {
        group_anchors.entry(row.group).or_default().push(DiagnosisAnchor {
            date: row.anchor,
            precision: row.precision,
            source_post_id: row.source_post_id.clone(),
            reference_time: 0,
        });
    }
    let seasonal_path = config.paths.output_dir.join(artifacts::SEASONAL);
    let mut w = csv::Writer::from_path(&seasonal_path)?;
    w.write_record(["group", "month", "count", "proportion"])?;
    let mut counts_by_group: BTreeMap<Group, [u64; 12]> = BTreeMap::new();
    for (group, anchor_list) in &group_anchors {
        let counts = seasonal_counts(anchor_list);
        let total: u64 = counts.iter().sum();
        for (i, count) in counts.iter().enumerate() {
            let proportion = if total > 0 {
                *count as f64 / total as f64
            } else {
                0.0
            };
            w.write_record([
                group.to_string(),
                (i + 1).to_string(),
                count.to_string(),
                proportion.to_string(),
            ])?;
        }
        match seasonal_profile(&counts) {
            Ok(profile) => {
                manifest.count(
                    &format!("seasonal_chi2_{group}"),
                    serde_json::json!({
                        "statistic": profile.chi2.statistic,
                        "df": profile.chi2.df,
                        "p_value": profile.chi2.p_value,
                        "total": profile.total,
                    }),
                );
            }
            Err(_) => {
                manifest.count(&format!("seasonal_chi2_{group}"), serde_json::Value::Null);
            }
        }
        counts_by_group.insert(*group, counts);
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::SEASONAL)?;

    let contrasts_path = config.paths.output_dir.join(artifacts::SEASONAL_CONTRASTS);
    let mut w = csv::Writer::from_path(&contrasts_path)?;
    w.write_record(["month", "prop_bd", "prop_ud", "statistic", "p_value", "p_fdr"])?;
    if let (Some(bd), Some(ud)) = (
        counts_by_group.get(&Group::Bd),
        counts_by_group.get(&Group::Ud),
    ) {
        if let Ok(contrasts) = seasonal_month_contrasts(bd, ud) {
            for c in &contrasts {
                w.write_record([
                    c.month.to_string(),
                    c.prop_a.to_string(),
                    c.prop_b.to_string(),
                    opt_cell(c.statistic),
                    opt_cell(c.p_value),
                    opt_cell(c.p_fdr),
                ])?;
            }
        }
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::SEASONAL_CONTRASTS)?;

    for (group, members) in &plan.kept_users {
        manifest.count(&format!("kept_users_{group}"), members.len() as u64);
    }
    for (group, dropped) in &plan.heavy_dropped {
        manifest.count(&format!("heavy_dropped_{group}"), *dropped);
    }
    manifest.count("focal_points", points.len() as u64);
    manifest.count("kept_points", kept_points);
    manifest.count("retained_months", retained_months.len() as u64);
    manifest.count("lsp_users", user_powers.len() as u64);
    manifest.count("lsp_skipped", lsp_skipped);
    manifest.count("spectra_skipped", serde_json::json!(spectra_skipped));
    Ok(manifest)
}
