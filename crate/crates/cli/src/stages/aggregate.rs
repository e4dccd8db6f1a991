//! Stage 7 — `aggregate`: collapse per-post features into anchor-relative
//! monthly timelines, trim the sparse tails, and write the long-form table
//! plus the pre/acute window means.

use crate::config::RunConfig;
use crate::manifest::StageManifest;
use crate::pipeline::artifacts;
use crate::stages::{
    features::{member_anchors, member_groups, read_features},
    opt_cell,
};
use dicc_core::stats;
use dicc_core::timeline::{aggregate_monthly, to_long_rows, trim_low_density, FeaturePost};

pub fn run(config: &RunConfig) -> anyhow::Result<StageManifest> {
    let mut manifest = StageManifest::new("aggregate", config);
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::FEATURES, "features")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::COHORTS, "calibrate")?;
    manifest.record_artifact_input(&config.paths.output_dir, artifacts::CONTROLS, "sample-controls")?;

    let groups = member_groups(config)?;
    let anchors = member_anchors(config)?;
    let posts: Vec<FeaturePost> = read_features(config)?
        .into_iter()
        .map(|row| FeaturePost {
            user: row.user,
            date: row.date,
            values: row.values,
        })
        .collect();
    let n_posts = posts.len() as u64;

    let output = aggregate_monthly(&posts, &anchors);
    let (series, kept) = trim_low_density(output.series);

    let rows = to_long_rows(&series, &groups)?;
    let timeline_path = config.paths.output_dir.join(artifacts::TIMELINE);
    let mut w = csv::Writer::from_path(&timeline_path)?;
    w.write_record(["user", "group", "feature", "month", "value", "n_posts"])?;
    for row in &rows {
        w.write_record([
            row.user.clone(),
            row.group.to_string(),
            row.feature.clone(),
            row.month.to_string(),
            row.value.to_string(),
            row.n_posts.to_string(),
        ])?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::TIMELINE)?;

    // Pre/acute window means per (user, feature), over the config windows.
    let pre = config.windows.pre_range();
    let acute = config.windows.acute_range();
    let dich_path = config.paths.output_dir.join(artifacts::DICHOTOMY);
    let mut w = csv::Writer::from_path(&dich_path)?;
    w.write_record(["user", "group", "feature", "pre_mean", "acute_mean"])?;
    for s in &series {
        let window_mean = |range: &std::ops::RangeInclusive<i64>| {
            let values: Vec<f64> = s
                .points
                .iter()
                .filter(|(m, _)| range.contains(m))
                .map(|(_, p)| p.value)
                .collect();
            stats::mean(&values)
        };
        w.write_record([
            s.user.clone(),
            groups[&s.user].to_string(),
            s.feature_id.clone(),
            opt_cell(window_mean(&pre)),
            opt_cell(window_mean(&acute)),
        ])?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::DICHOTOMY)?;

    let kept_path = config.paths.output_dir.join(artifacts::KEPT_MONTHS);
    let mut w = csv::Writer::from_path(&kept_path)?;
    w.write_record(["month"])?;
    for month in &kept {
        w.write_record([month.to_string()])?;
    }
    w.flush()?;
    manifest.record_output(&config.paths.output_dir, artifacts::KEPT_MONTHS)?;

    let users: std::collections::BTreeSet<&str> =
        series.iter().map(|s| s.user.as_str()).collect();
    manifest.count("posts", n_posts);
    manifest.count("skipped_posts", output.skipped_posts);
    manifest.count("series", series.len() as u64);
    manifest.count("users", users.len() as u64);
    manifest.count("kept_months", kept.len() as u64);
    Ok(manifest)
}
