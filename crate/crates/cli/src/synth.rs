//! `dicc synth`: generate a self-contained synthetic input set.
//!
//! The generator writes everything a full pipeline run needs — post
//! archives, a topic model, an LLM response cassette, and a ground-truth
//! file — entirely from `master_seed` and the `[synth]` section, so runs
//! against it are reproducible and offline.
//!
//! Design of the planted signal:
//! - Clinical users post one disclosure naming their diagnosis time; the
//!   cassette scripts the extraction reply (the canonical time phrase) and,
//!   for UD users, the veridicality verdict.
//! - In every 12th post-diagnosis month, pulse-group users' posts are drawn
//!   from a "seasonal mood" sentence pool; all other posts are mundane
//!   filler. The topic model's first topic is the centroid of the mood
//!   pool, so the focal `topic.0` score carries an annual pulse.
//! - Every body ends with a unique journal-entry sentence so no two posts
//!   are textually identical (the ingest deduplicator would otherwise
//!   collapse the shared templates).

use crate::config::RunConfig;
use anyhow::Context;
use chrono::{Datelike, Duration, NaiveDate};
use dicc_core::anchor::llm::{request_key, CassetteGenerator};
use dicc_core::anchor::{extraction_request, iso_week_monday, veridicality_request, LlmConfig};
use dicc_core::cohort::Disorder;
use dicc_core::derive_rng;
use dicc_core::embed::{mean_embedding, EmbeddingVector, HashedEmbedder};
use dicc_core::ingest::{clean_markup, hash_username};
use dicc_core::topics::{Topic, TopicModel};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Sentences about recurring seasonal mood disturbance. Deliberately free
/// of disorder terms so none of them trips a disclosure pattern.
const TOPIC_SENTENCES: [&str; 6] = [
    "every winter the dark mood comes back and i cannot sleep at night.",
    "the racing thoughts are here again and my head will not slow down for days.",
    "i can feel the swing starting again because the season is turning and it scares me.",
    "this time of year the low always finds me and everything feels heavy again.",
    "my energy is gone again like it always goes when the cold months arrive.",
    "the old episodes are back on schedule and i am bracing for the crash once more.",
];

/// Mundane filler. Stopword-dense (for the English check), no URLs, no
/// quotes, no disorder terms.
const FILLER_SENTENCES: [&str; 36] = [
    "we watched the game last night and it was really close at the end.",
    "the recipe turned out better than i thought it would.",
    "my neighbor borrowed the ladder again and forgot to bring it back.",
    "i finally finished the book that everyone was talking about.",
    "the bus was late again so i walked the last part of the way.",
    "we are planning a small trip for the long weekend.",
    "the garden needs water every day now that it is so warm.",
    "i tried the new coffee place and the line was out the door.",
    "the movie was longer than expected but we stayed until the end.",
    "my phone update changed all the settings and i had to fix them.",
    "the cat knocked the plant off the shelf again this morning.",
    "we painted the fence over the weekend and it looks much better.",
    "i keep forgetting to return the library books on time.",
    "the market had fresh bread today and we bought two loaves.",
    "practice ran late so dinner was just leftovers from yesterday.",
    "the printer stopped working right before i needed it of course.",
    "we played cards with friends and lost every single round.",
    "the new season of that show is finally out and we started it.",
    "i cleaned out the garage and found things i forgot we had.",
    "the kids built a fort out of every cushion in the house.",
    "traffic was terrible on the bridge so we took the long way around.",
    "i am trying to run three times a week but the weather is not helping.",
    "the soup needed more salt but otherwise it was a good batch.",
    "our team meeting went long and half of it could have been an email.",
    "the dog learned a new trick and will not stop showing it off.",
    "we finally hung the pictures that sat on the floor for months.",
    "the train was so full this morning that i stood the whole way.",
    "i swapped the winter tires and the car feels different already.",
    "the bakery was sold out of everything good by the time i arrived.",
    "we spent the afternoon at the lake and the water was freezing.",
    "my sister sent photos from her trip and the mountains look amazing.",
    "the power went out for an hour and we lit the old candles.",
    "i fixed the squeaky door with a bit of oil and ten minutes of patience.",
    "the quiz night question about rivers got the whole table arguing.",
    "we tried growing tomatoes on the balcony and the first one is red.",
    "the mail brought two bills and one postcard which felt about right.",
];

/// Disclosure templates; `{D}` is the disorder term, `{WHEN}` the in-text
/// time phrase. Each matches one of the recognized disclosure patterns.
const DISCLOSURE_TEMPLATES: [&str; 3] = [
    "the doctor diagnosed me with {D} {WHEN} and we talked about it for a long time.",
    "i was diagnosed with {D} {WHEN} and it explained so much about my life.",
    "i have been diagnosed with {D} {WHEN} and i am still getting used to the idea.",
];

const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Expected pipeline outcome for one synthetic user.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthUser {
    /// Raw synthetic name (never appears in pipeline artifacts).
    pub name: String,
    /// Salted hash, as pipeline artifacts will carry it.
    pub hashed: String,
    /// "BD", "UD", or "HC-pool" (control candidates; cohort membership is
    /// decided by the sampling stage).
    pub group: String,
    /// Expected normalized anchor date (month → the 16th, year → July 2,
    /// week phrases → the ISO week's Thursday).
    pub anchor: Option<NaiveDate>,
    pub precision: Option<String>,
    pub disclosure_post_id: Option<String>,
    /// The canonical time phrase the cassette returns.
    pub phrase: Option<String>,
    /// Scripted veridicality verdict (UD users only).
    pub veridical: Option<bool>,
    pub n_posts: u64,
}

/// Everything a test needs to check pipeline output against the script.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub master_seed: u64,
    pub salt: String,
    /// Anchor-relative period of the planted topic pulse, in months.
    pub pulse_period_months: u32,
    pub pulse_groups: Vec<String>,
    pub users: Vec<TruthUser>,
}

/// Tallies returned for the CLI summary line.
#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub clinical_posts: u64,
    pub control_posts: u64,
    pub cassette_entries: u64,
    pub users: u64,
}

struct ArchiveLine {
    created_at: i64,
    json: String,
}

/// One user's generated posts plus bookkeeping.
struct UserScript {
    truth: TruthUser,
    lines: Vec<ArchiveLine>,
}

fn add_months(date: NaiveDate, delta: i64) -> NaiveDate {
    let total = date.year() as i64 * 12 + date.month0() as i64 + delta;
    let year = total.div_euclid(12) as i32;
    let month = total.rem_euclid(12) as u32 + 1;
    NaiveDate::from_ymd_opt(year, month, date.day().min(28)).expect("day <= 28 always lands")
}

fn timestamp<R: Rng>(date: NaiveDate, rng: &mut R) -> i64 {
    let secs = rng.gen_range(0..86_400);
    date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp() + secs
}

/// Render one archive record. The disclosure and roughly
/// `submission_fraction` of regular posts exercise the submission field
/// layout; the rest are comments.
fn record(post_id: &str, author: &str, created_at: i64, body: &str, submission: bool) -> String {
    let value = if submission {
        let (title, selftext) = match body.split_once(". ") {
            Some((first, rest)) => (format!("{first}."), rest.to_string()),
            None => (body.to_string(), String::new()),
        };
        serde_json::json!({
            "id": post_id,
            "author": author,
            "created_utc": created_at,
            "title": title,
            "selftext": selftext,
        })
    } else {
        serde_json::json!({
            "id": post_id,
            "author": author,
            "created_utc": created_at,
            "body": body,
        })
    };
    value.to_string()
}

/// Generate the full synthetic input set for `config`.
pub fn run(config: &RunConfig) -> anyhow::Result<SynthSummary> {
    let s = config.synth.clone();
    let archives = config.require_archives("synth")?.to_vec();
    let topic_path = config.require_topic_model("synth")?.to_path_buf();
    let cassette_path = config.require_cassette("synth")?.to_path_buf();
    let truth_path = config.require_ground_truth("synth")?.to_path_buf();
    let llm = LlmConfig {
        model: config.llm.model.clone(),
        temperature: config.llm.temperature,
        max_tokens: config.llm.max_tokens,
    };
    let mut rng = derive_rng(config.master_seed, "synth", 0);
    let mut cassette = CassetteGenerator::from_map(Default::default());
    let mut users: Vec<TruthUser> = Vec::new();
    let mut clinical_lines: Vec<ArchiveLine> = Vec::new();
    let mut control_lines: Vec<ArchiveLine> = Vec::new();
    let mut journal_seq = 0u64;

    // --- Clinical users. ---
    for (disorder, group_label, count, rate) in [
        (Disorder::Bipolar, "BD", s.bd_users, s.rate_bd),
        (Disorder::Depression, "UD", s.ud_users, s.rate_ud),
    ] {
        let pulsed = s.pulse_groups.iter().any(|g| g == group_label);
        for i in 0..count {
            let name = format!("{}{i:03}", group_label.to_lowercase());
            let script = clinical_user(
                &config.ingest.salt,
                &name,
                group_label,
                disorder,
                pulsed,
                rate,
                &s,
                &mut journal_seq,
                &mut rng,
            );
            // Cassette: scripted extraction (and, for UD, veridicality).
            let truth = &script.truth;
            let disclosure_body = script
                .lines
                .iter()
                .find(|l| {
                    l.json.contains(truth.disclosure_post_id.as_deref().expect("clinical"))
                })
                .map(|l| {
                    let v: serde_json::Value = serde_json::from_str(&l.json).expect("own JSON");
                    v["body"].as_str().expect("disclosures are comments").to_string()
                })
                .expect("disclosure line exists");
            let cleaned = clean_markup(&disclosure_body);
            let phrase = truth.phrase.clone().expect("clinical users have phrases");
            let req = extraction_request(&llm, disorder, &cleaned);
            cassette.insert(request_key(&req), phrase.clone());
            if group_label == "UD" {
                let verdict = if truth.veridical.expect("UD verdict set") {
                    "1"
                } else {
                    "0"
                };
                let req = veridicality_request(&llm, &cleaned, &phrase);
                cassette.insert(request_key(&req), verdict.to_string());
            }
            clinical_lines.extend(script.lines);
            users.push(script.truth);
        }
    }

    // --- Control candidates. ---
    for i in 0..s.control_users {
        let name = format!("cc{i:03}");
        let start_year = rng.gen_range(s.control_years[0]..=s.control_years[1]);
        let start_month = rng.gen_range(1..=12u32);
        let start =
            NaiveDate::from_ymd_opt(start_year, start_month, 1).expect("first of month");
        let span = s.months_before + s.months_after;
        let mut lines = Vec::new();
        let mut seq = 0u64;
        for m in 0..span {
            if rng.gen::<f64>() > s.post_probability {
                continue;
            }
            let n = posts_this_month(s.rate_control, &mut rng);
            for _ in 0..n {
                let date = add_months(start, m)
                    .with_day(rng.gen_range(1..=28))
                    .expect("day <= 28");
                lines.push(post_line(
                    &name,
                    &mut seq,
                    date,
                    filler_body(&mut journal_seq, &mut rng),
                    s.submission_fraction,
                    &mut rng,
                ));
            }
        }
        users.push(TruthUser {
            name: name.clone(),
            hashed: hash_username(&config.ingest.salt, &name),
            group: "HC-pool".to_string(),
            anchor: None,
            precision: None,
            disclosure_post_id: None,
            phrase: None,
            veridical: None,
            n_posts: lines.len() as u64,
        });
        control_lines.extend(lines);
    }

    // --- Write archives (clinical and controls split over the configured
    // files when two are given). ---
    let summary = SynthSummary {
        clinical_posts: clinical_lines.len() as u64,
        control_posts: control_lines.len() as u64,
        cassette_entries: cassette.len() as u64,
        users: users.len() as u64,
    };
    let write_archive = |path: &Path, lines: &mut Vec<ArchiveLine>| -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        lines.sort_by(|a, b| (a.created_at, &a.json).cmp(&(b.created_at, &b.json)));
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?,
        );
        for line in lines {
            out.write_all(line.json.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    };
    if archives.len() >= 2 {
        write_archive(&archives[0], &mut clinical_lines)?;
        write_archive(&archives[1], &mut control_lines)?;
    } else {
        clinical_lines.append(&mut control_lines);
        write_archive(&archives[0], &mut clinical_lines)?;
    }

    // --- Topic model: topic 0 is the mood-pool centroid; two filler-pool
    // decoys keep the scoring honest. ---
    let embedder = HashedEmbedder::new(config.embedding.dim);
    let centroid = |sentences: &[&str]| -> anyhow::Result<EmbeddingVector> {
        let vectors: Vec<EmbeddingVector> =
            sentences.iter().map(|s| embedder.embed_text(s)).collect();
        Ok(mean_embedding(&vectors)?)
    };
    let topics = vec![
        Topic {
            id: 0,
            label: Some("seasonal mood episodes".to_string()),
            doc_count: 500,
            embedding: centroid(&TOPIC_SENTENCES)?,
            keywords: ["winter", "mood", "sleep", "racing", "season", "episodes"]
                .map(String::from)
                .to_vec(),
        },
        Topic {
            id: 1,
            label: Some("household errands".to_string()),
            doc_count: 200,
            embedding: centroid(&FILLER_SENTENCES[..12])?,
            keywords: ["garden", "printer", "garage", "fence"].map(String::from).to_vec(),
        },
        Topic {
            id: 2,
            label: Some("outings".to_string()),
            doc_count: 150,
            embedding: centroid(&FILLER_SENTENCES[12..24])?,
            keywords: ["trip", "lake", "train", "coffee"].map(String::from).to_vec(),
        },
    ];
    if let Some(parent) = topic_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    TopicModel::new(config.embedding.dim, topics)?.save(&topic_path)?;

    if let Some(parent) = cassette_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    cassette.save(&cassette_path)?;

    let truth = GroundTruth {
        master_seed: config.master_seed,
        salt: config.ingest.salt.clone(),
        pulse_period_months: 12,
        pulse_groups: s.pulse_groups.clone(),
        users,
    };
    if let Some(parent) = truth_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut json = serde_json::to_string_pretty(&truth)?;
    json.push('\n');
    std::fs::write(&truth_path, json)?;

    Ok(summary)
}

/// Uniform integer count with mean `rate` (at least 1 post).
fn posts_this_month<R: Rng>(rate: f64, rng: &mut R) -> u64 {
    let max = ((2.0 * rate - 1.0).round()).max(1.0) as u64;
    rng.gen_range(1..=max)
}

/// A filler body: one mundane sentence plus the unique journal tail.
fn filler_body<R: Rng>(journal_seq: &mut u64, rng: &mut R) -> String {
    let main = FILLER_SENTENCES[rng.gen_range(0..FILLER_SENTENCES.len())];
    with_journal_tail(main, journal_seq)
}

fn topic_body<R: Rng>(journal_seq: &mut u64, rng: &mut R) -> String {
    let main = TOPIC_SENTENCES[rng.gen_range(0..TOPIC_SENTENCES.len())];
    with_journal_tail(main, journal_seq)
}

fn with_journal_tail(main: &str, journal_seq: &mut u64) -> String {
    *journal_seq += 1;
    format!("{main} this is entry {journal_seq} in my little journal.")
}

fn post_line<R: Rng>(
    name: &str,
    seq: &mut u64,
    date: NaiveDate,
    body: String,
    submission_fraction: f64,
    rng: &mut R,
) -> ArchiveLine {
    *seq += 1;
    let created_at = timestamp(date, rng);
    let submission = rng.gen::<f64>() < submission_fraction;
    ArchiveLine {
        created_at,
        json: record(&format!("{name}-{seq}"), name, created_at, &body, submission),
    }
}

/// Generate one clinical user: anchor, disclosure post, and history.
#[allow(clippy::too_many_arguments)]
fn clinical_user<R: Rng>(
    salt: &str,
    name: &str,
    group_label: &str,
    disorder: Disorder,
    pulsed: bool,
    rate: f64,
    s: &crate::config::SynthSection,
    journal_seq: &mut u64,
    rng: &mut R,
) -> UserScript {
    let year = rng.gen_range(s.anchor_years[0]..=s.anchor_years[1]);
    let month = rng.gen_range(1..=12u32);
    let day = rng.gen_range(1..=28u32);
    let base = NaiveDate::from_ymd_opt(year, month, day).expect("day <= 28");
    let month_name = MONTH_NAMES[(month - 1) as usize];

    // Precision mix: month 50%, day 25%, year 15%, relative week 10%.
    let roll = rng.gen_range(0..100u32);
    let (truth_anchor, precision, phrase, in_text, disclosure_date) = if roll < 50 {
        (
            NaiveDate::from_ymd_opt(year, month, 16).expect("16th exists"),
            "month",
            format!("{month_name} {year}"),
            format!("in {month_name} {year}"),
            base + Duration::days(rng.gen_range(5..=80)),
        )
    } else if roll < 75 {
        (
            base,
            "day",
            format!("{month_name} {day}, {year}"),
            format!("on {month_name} {day}, {year}"),
            base + Duration::days(rng.gen_range(5..=80)),
        )
    } else if roll < 90 {
        (
            NaiveDate::from_ymd_opt(year, 7, 2).expect("July 2 exists"),
            "year",
            format!("{year}"),
            format!("back in {year}"),
            NaiveDate::from_ymd_opt(year, 12, 20).expect("Dec 20 exists")
                + Duration::days(rng.gen_range(20..=300)),
        )
    } else {
        let post_date = base + Duration::days(14);
        let target = post_date - Duration::days(14);
        (
            iso_week_monday(target) + Duration::days(3),
            "week",
            "two weeks ago".to_string(),
            "two weeks ago".to_string(),
            post_date,
        )
    };

    let mut seq = 0u64;
    let mut lines: Vec<ArchiveLine> = Vec::new();

    // The disclosure post (always a comment, always this user's only post
    // containing a disorder term, hence their earliest pattern match).
    let template = DISCLOSURE_TEMPLATES[rng.gen_range(0..DISCLOSURE_TEMPLATES.len())];
    let disclosure_body = with_journal_tail(
        &template.replace("{D}", disorder.term()).replace("{WHEN}", &in_text),
        journal_seq,
    );
    seq += 1;
    let disclosure_id = format!("{name}-{seq}");
    let disclosure_at = timestamp(disclosure_date, rng);
    lines.push(ArchiveLine {
        created_at: disclosure_at,
        json: record(&disclosure_id, name, disclosure_at, &disclosure_body, false),
    });

    // Anchor-relative history with the pulse in every 12th month after
    // diagnosis.
    for m in -s.months_before..=s.months_after {
        if rng.gen::<f64>() > s.post_probability {
            continue;
        }
        let n = posts_this_month(rate, rng);
        let pulse_month = pulsed && m >= 1 && m % 12 == 0;
        for _ in 0..n {
            let date = add_months(truth_anchor, m)
                .with_day(rng.gen_range(1..=28))
                .expect("day <= 28");
            let body = if pulse_month {
                topic_body(journal_seq, rng)
            } else {
                filler_body(journal_seq, rng)
            };
            lines.push(post_line(name, &mut seq, date, body, s.submission_fraction, rng));
        }
    }

    let veridical = if group_label == "UD" {
        Some(rng.gen::<f64>() >= s.ud_negative_fraction)
    } else {
        None
    };
    UserScript {
        truth: TruthUser {
            name: name.to_string(),
            hashed: hash_username(salt, name),
            group: group_label.to_string(),
            anchor: Some(truth_anchor),
            precision: Some(precision.to_string()),
            disclosure_post_id: Some(disclosure_id),
            phrase: Some(phrase),
            veridical,
            n_posts: lines.len() as u64,
        },
        lines,
    }
}
