//! Core library for building diagnosis-anchored cohorts from social-media
//! archives and analysing language change around the anchor date.
//!
//! The pipeline stages map onto the modules below:
//!
//! 1. [`ingest`] — archive streaming, markup cleanup, eligibility filters.
//! 2. [`cohort`] — self-disclosure search, group resolution, control sampling.
//! 3. [`anchor`] — diagnosis-time extraction (LLM-assisted) and temporal
//!    normalization onto calendar dates.
//! 4. [`calibration`] — veridicality judging and NPV-based cohort dilution.
//! 5. [`embed`] / [`features`] / [`topics`] / [`demography`] — per-post
//!    language features: verbosity, sentiment, POS, semantic coherence,
//!    topic similarity scores and lexicon-based demographic estimates.
//! 6. [`timeline`] — monthly aggregation relative to the anchor.
//! 7. [`periodicity`] — curation, bootstrapped autocorrelation,
//!    Lomb–Scargle periodograms and seasonality profiles.
//! 8. [`stats`] — shared statistical routines (OLS, chi-square,
//!    two-proportion tests, Benjamini–Hochberg FDR).
//!
//! Everything is deterministic given a seed: all randomised routines take
//! explicit RNGs (or derive per-task RNGs from a master seed) and all
//! iteration over maps uses ordered containers.

pub mod anchor;
pub mod calibration;
pub mod cohort;
pub mod demography;
pub mod embed;
pub mod features;
pub mod ingest;
pub mod periodicity;
pub mod stats;
pub mod timeline;
pub mod topics;

mod rngutil;

pub use rngutil::derive_rng;
