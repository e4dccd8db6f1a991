//! Pipeline driver for diagnosis-anchored cohort studies.
//!
//! The binary (`dicc`) strings the [`dicc_core`] building blocks into a
//! stage graph. Every stage reads artifacts from the run's output
//! directory, writes its own artifacts next to them, and records what it
//! consumed and produced in a `<stage>.manifest.json` so downstream stages
//! (and the final report) can verify the chain end to end:
//!
//! ```text
//! ingest → disclose → anchor → calibrate → sample-controls
//!     → features → aggregate → periodicity → report
//! ```
//!
//! Stages are deterministic given the config file: stochastic steps derive
//! their RNG streams from `master_seed` and a per-stage context label, and
//! artifacts avoid timestamps and absolute paths, so re-running a stage
//! with the same inputs reproduces its outputs byte for byte.
//!
//! The [`synth`] module generates a self-contained synthetic input set
//! (archives, topic model, LLM cassette, ground truth) so the whole
//! pipeline can run — and be tested — without network services.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod stages;
pub mod synth;
