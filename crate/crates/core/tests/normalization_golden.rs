//! Bit-exact golden table for time-phrase parsing and anchor normalization.
//!
//! Each row of `data/normalization_golden.tsv` pins one phrase, the calendar
//! day it is resolved against, and the expected outcome: either a normalized
//! anchor date with its precision, or a rejection reason. Any change to the
//! parsing or mid-period rules must be visible here.

use chrono::NaiveDate;
use dicc_core::anchor::{normalize_anchor, parse_temporal, AnchorPrecision};

fn precision_name(p: AnchorPrecision) -> &'static str {
    match p {
        AnchorPrecision::Day => "day",
        AnchorPrecision::Week => "week",
        AnchorPrecision::Weekend => "weekend",
        AnchorPrecision::Month => "month",
        AnchorPrecision::Year => "year",
    }
}

#[test]
fn golden_normalization_table() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/normalization_golden.tsv"
    );
    let table = std::fs::read_to_string(path).expect("fixture readable");
    let mut rows = 0usize;
    let mut failures = Vec::new();
    for (lineno, line) in table.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3, "line {}: expected 3 columns", lineno + 1);
        let (phrase, reference, expected) = (cols[0], cols[1], cols[2]);
        let reference = NaiveDate::parse_from_str(reference, "%Y-%m-%d").expect("reference date");
        rows += 1;

        let value = parse_temporal(phrase, reference);
        let got = match normalize_anchor(&value, "post", 0) {
            Ok(anchor) => format!("{}/{}", anchor.date, precision_name(anchor.precision)),
            Err(reason) => format!("reject/{reason}"),
        };
        if got != expected {
            failures.push(format!(
                "line {}: {phrase:?} @ {reference} -> {got} (expected {expected}; parsed {:?})",
                lineno + 1,
                value.kind
            ));
        }
    }
    assert!(rows >= 30, "golden table too small: {rows} rows");
    assert!(
        failures.is_empty(),
        "{} golden mismatches:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
