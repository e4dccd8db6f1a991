//! `dicc` — command-line driver for the diagnosis-anchored cohort pipeline.

use clap::{Parser, Subcommand};
use dicc_cli::config::RunConfig;
use dicc_cli::manifest::StageManifest;
use dicc_cli::pipeline::{self, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dicc",
    about = "Build diagnosis-anchored cohorts from post archives and analyze their timelines",
    version
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "dicc.toml")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, filter, deduplicate, and pseudonymize the raw archives.
    Ingest,
    /// Find diagnosis disclosures and resolve BD/UD membership.
    Disclose,
    /// Extract and normalize diagnosis dates from disclosures.
    Anchor,
    /// Judge UD anchor veridicality and augment the cohort.
    Calibrate,
    /// Sample activity-matched controls and assign pseudo-anchors.
    SampleControls,
    /// Compute per-post language features for all cohort members.
    Features,
    /// Aggregate features into monthly user series and window means.
    Aggregate,
    /// Run curation, autocorrelation, spectral, and seasonal analyses.
    Periodicity,
    /// Verify the artifact chain and write the run report.
    Report,
    /// Run every stage in order.
    All,
    /// Generate a synthetic archive, topic model, cassette, and ground truth.
    Synth,
}

fn summarize(manifest: &StageManifest) {
    let counts: Vec<String> =
        manifest.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}: {}", manifest.stage, counts.join(" "));
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = RunConfig::load(&cli.config)?;
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Disclose => Stage::Disclose,
        Command::Anchor => Stage::Anchor,
        Command::Calibrate => Stage::Calibrate,
        Command::SampleControls => Stage::SampleControls,
        Command::Features => Stage::Features,
        Command::Aggregate => Stage::Aggregate,
        Command::Periodicity => Stage::Periodicity,
        Command::Report => Stage::Report,
        Command::All => {
            for manifest in pipeline::run_all(&config)? {
                summarize(&manifest);
            }
            return Ok(());
        }
        Command::Synth => {
            let summary = dicc_cli::synth::run(&config)?;
            println!(
                "synth: clinical_posts={} control_posts={} cassette_entries={} users={}",
                summary.clinical_posts,
                summary.control_posts,
                summary.cassette_entries,
                summary.users
            );
            return Ok(());
        }
    };
    summarize(&pipeline::run_stage(stage, &config)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
