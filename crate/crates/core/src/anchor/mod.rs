//! Diagnosis-time extraction, temporal parsing, and anchor normalization.
//!
//! A disclosure post ("I was diagnosed with bipolar in December 2019") is fed
//! to a generation service that replies with the bare time phrase (or the
//! literal `none`). [`parse_temporal`] classifies that phrase into a
//! [`TemporalValue`], and [`normalize_anchor`] collapses period expressions
//! onto a single calendar day by the mid-period rule:
//!
//! * a year resolves to the 2nd of July,
//! * a month resolves to the 16th,
//! * a week resolves to the Thursday of that ISO-8601 week,
//! * a weekend resolves to its Sunday,
//! * seasons, fiscal years, and vague past/future references are rejected.
//!
//! Parsing is deliberately conservative: anything the ruleset does not
//! recognize becomes `vague` (and is later rejected) rather than a guess.
//! Sub-period qualifiers that the mid-period rule cannot represent
//! ("early 2018", "the end of 2017", "around March") are discarded and the
//! enclosing period is kept.

pub mod llm;

use chrono::{Datelike, Duration, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::LazyLock;

use crate::cohort::Disorder;
use llm::{GenerationRequest, LlmError, TextGenerator};

/// System prompt template for time-phrase extraction; `[DISORDER]` is
/// substituted with the disorder term at request time.
pub const EXTRACTION_SYSTEM_TEMPLATE: &str =
    include_str!("../../assets/prompts/extraction_system.txt");

/// Verbatim system prompt for the veridicality judgement (0/1) call.
pub const VERIDICALITY_SYSTEM: &str = include_str!("../../assets/prompts/veridicality_system.txt");

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Calendar seasons as they appear in time phrases ("fall" maps to Autumn).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

/// Payload of the season rejection class. Fiscal-year and quarter phrases
/// ride alongside named seasons — both are removed during normalization —
/// but keep their own rejection reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonRef {
    Named {
        season: Season,
        year: Option<i32>,
    },
    /// "FY2020", "fiscal year 2019", "Q1 2019", "third quarter of 2018".
    Fiscal {
        year: Option<i32>,
    },
}

/// The period a relative span ("N units ago") lands in. Relative spans of
/// coarse units inherit the unit's precision, so "2 years ago" resolves to a
/// *year*, not a day, and the mid-period rule applies uniformly afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarsePeriod {
    Day { date: NaiveDate },
    Week { monday: NaiveDate },
    Month { year: i32, month: u32 },
    Year { year: i32 },
}

/// Classified temporal expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKind {
    ExactDate { date: NaiveDate },
    Month { year: i32, month: u32 },
    Year { year: i32 },
    /// An ISO-8601 week, identified by its Monday.
    Week { monday: NaiveDate },
    /// A Saturday–Sunday weekend, identified by its Sunday.
    Weekend { sunday: NaiveDate },
    Season(SeasonRef),
    /// A single day fixed relative to the reference ("yesterday").
    RelativeDay { date: NaiveDate },
    /// "N days/weeks/months/years ago", already resolved against the
    /// reference; the payload keeps the unit's precision.
    RelativeSpan(CoarsePeriod),
    /// Recognizably temporal but too underspecified to date ("recently",
    /// "the 90s", "when I was 15"), or not recognized at all.
    Vague,
    /// The literal "none" reply, or an empty phrase.
    None,
}

/// A parsed time phrase: the classification plus the phrase it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalValue {
    pub kind: TemporalKind,
    pub raw_phrase: String,
}

/// Precision the anchor date was stated at. Day counts from the anchor are
/// interpreted in light of this when windows are formed downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorPrecision {
    Day,
    Week,
    Weekend,
    Month,
    Year,
}

/// Why a parsed value could not be normalized to an anchor date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRejection {
    Season,
    FiscalYear,
    Vague,
    None,
}

impl std::fmt::Display for AnchorRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AnchorRejection::Season => "season",
            AnchorRejection::FiscalYear => "fiscal_year",
            AnchorRejection::Vague => "vague",
            AnchorRejection::None => "none",
        };
        f.write_str(s)
    }
}

/// A normalized diagnosis date (time-of-day fixed to 00:00:00 by
/// construction: only the calendar day is kept).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisAnchor {
    pub date: NaiveDate,
    pub precision: AnchorPrecision,
    /// Post the time phrase was extracted from.
    pub source_post_id: String,
    /// Creation time (epoch seconds) of that post; relative expressions were
    /// resolved against its calendar day.
    pub reference_time: i64,
}

/// UTC calendar day of an epoch-seconds timestamp.
pub fn reference_date(created_at: i64) -> Option<NaiveDate> {
    chrono::DateTime::from_timestamp(created_at, 0).map(|dt| dt.date_naive())
}

// ---------------------------------------------------------------------------
// Calendar helpers
// ---------------------------------------------------------------------------

/// Monday of the ISO-8601 week containing `d`.
pub fn iso_week_monday(d: NaiveDate) -> NaiveDate {
    d - Duration::days(d.weekday().num_days_from_monday() as i64)
}

/// Shift a (year, month) pair by `delta` calendar months.
fn shift_month(year: i32, month: u32, delta: i64) -> (i32, u32) {
    let total = year as i64 * 12 + (month as i64 - 1) + delta;
    (
        total.div_euclid(12) as i32,
        (total.rem_euclid(12) + 1) as u32,
    )
}

/// Sunday of the weekend meant by "last weekend": the Saturday–Sunday pair
/// containing the reference if the reference falls on one, otherwise the
/// nearest preceding weekend.
pub fn last_weekend_sunday(reference: NaiveDate) -> NaiveDate {
    let wd = reference.weekday().num_days_from_monday() as i64; // Mon=0 .. Sun=6
    match wd {
        5 => reference + Duration::days(1),
        6 => reference,
        _ => reference - Duration::days(wd + 1),
    }
}

// ---------------------------------------------------------------------------
// Phrase preprocessing
// ---------------------------------------------------------------------------

/// Whole-phrase rewrites applied before qualifier stripping, so that
/// time-of-day words that *are* the date information survive.
static REWRITES: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    HashMap::from([
        ("last night", "yesterday"),
        ("last evening", "yesterday"),
        ("tonight", "today"),
        ("this morning", "today"),
        ("this afternoon", "today"),
        ("this evening", "today"),
    ])
});

/// Leading qualifier tokens that carry no date information. Longest first so
/// compound forms win ("the year 2019" loses "the year", not just "the").
const LEAD_TOKENS: &[&str] = &[
    "the beginning of",
    "the middle of",
    "the start of",
    "the end of",
    "beginning of",
    "middle of",
    "start of",
    "end of",
    "somewhere in",
    "sometime in",
    "approximately",
    "more than",
    "less than",
    "just over",
    "just under",
    "i believe",
    "the year",
    "back in",
    "probably",
    "it was",
    "i think",
    "sometime",
    "somewhere",
    "roughly",
    "around",
    "nearly",
    "almost",
    "approx",
    "during",
    "likely",
    "circa",
    "about",
    "maybe",
    "since",
    "early",
    "over",
    "just",
    "late",
    "the",
    "mid",
    "in",
    "on",
];

/// Hyphenated sub-period prefixes ("mid-2019").
const LEAD_PREFIXES: &[&str] = &["early-", "late-", "mid-"];

/// Trailing time-of-day and hedging qualifiers; a date phrase keeps its
/// meaning without them.
static RE_TRAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)(
              \ at\ \d{1,2}(?::\d{2})?(?:\ ?[ap]m)?
            | \ in\ the\ (?:morning|afternoon|evening)
            | \ at\ (?:night|noon|midnight)
            | \ (?:morning|afternoon|evening|night)
            | \ o'clock
            | \ or\ so
            | \ or\ something
            | \ i\ think
            | \ i\ believe
            | \ i\ guess
            | \ maybe
            | \ probably
            | -?ish
        )$",
    )
    .unwrap()
});

fn trim_trailing_punct(s: &mut String) {
    while s.ends_with(['.', ',', '!', '?', ';', ':']) {
        s.pop();
        while s.ends_with(' ') {
            s.pop();
        }
    }
}

/// Lowercase, unquote, collapse whitespace, and strip qualifiers that do not
/// affect which period the phrase names. Returns `None` when the phrase is
/// empty or the literal "none" (checked before qualifier stripping).
fn preprocess(phrase: &str) -> Option<String> {
    let mut s = phrase.trim().to_string();
    // Unwrap enclosing quote/bracket pairs.
    loop {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() < 2 {
            break;
        }
        let pair = matches!(
            (chars[0], chars[chars.len() - 1]),
            ('"', '"')
                | ('\'', '\'')
                | ('\u{201c}', '\u{201d}')
                | ('\u{2018}', '\u{2019}')
                | ('`', '`')
                | ('(', ')')
                | ('[', ']')
        );
        if !pair {
            break;
        }
        s = chars[1..chars.len() - 1].iter().collect::<String>().trim().to_string();
    }
    s = s.to_lowercase();
    s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    trim_trailing_punct(&mut s);
    if s.is_empty() || s == "none" {
        return None;
    }
    if let Some(replacement) = REWRITES.get(s.as_str()) {
        return Some((*replacement).to_string());
    }
    s = s.trim_start_matches(['~', '≈', '*']).trim().to_string();
    for _ in 0..16 {
        let before = s.clone();
        for prefix in LEAD_PREFIXES {
            if let Some(rest) = s.strip_prefix(prefix) {
                s = rest.trim_start().to_string();
            }
        }
        for tok in LEAD_TOKENS {
            if let Some(rest) = s.strip_prefix(tok) {
                if rest.is_empty() || rest.starts_with(' ') {
                    s = rest.trim_start().to_string();
                    break;
                }
            }
        }
        if let Some(m) = RE_TRAIL.find(&s) {
            s = s[..m.start()].to_string();
        }
        trim_trailing_punct(&mut s);
        s = s.trim().to_string();
        if s == before {
            break;
        }
    }
    Some(s)
}

// ---------------------------------------------------------------------------
// Rule regexes (all anchored to the full preprocessed phrase)
// ---------------------------------------------------------------------------

/// Month-name fragment; the capture holds the letters only, an optional
/// abbreviation dot sits outside it.
const MONTH_FRAG: &str = r"(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|jun(?:e)?|jul(?:y)?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?";

fn month_number(name: &str) -> u32 {
    match &name[..3.min(name.len())] {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "may" => 5,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" => 9,
        "oct" => 10,
        "nov" => 11,
        _ => 12,
    }
}

static RE_ISO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{1,2})-(\d{1,2})$").unwrap());
static RE_YMD_SLASH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})/(\d{1,2})/(\d{1,2})$").unwrap());
static RE_MDY_SLASH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})/(\d{1,2})/(\d{4})$").unwrap());
static RE_MY_SLASH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2})/(\d{4})$").unwrap());
static RE_YM_SLASH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})/(\d{1,2})$").unwrap());
static RE_MDY_NAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^{MONTH_FRAG} (\d{{1,2}})(?:st|nd|rd|th)?(?:,? (\d{{4}}))?$"
    ))
    .unwrap()
});
static RE_DMY_NAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(\d{{1,2}})(?:st|nd|rd|th)? (?:of )?{MONTH_FRAG}(?:,? (\d{{4}}))?$"
    ))
    .unwrap()
});
static RE_MONTH_YEAR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^{MONTH_FRAG}(?: of)?,? ?(\d{{4}}|'\d{{2}})$")).unwrap()
});
static RE_MONTH_ONLY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^{MONTH_FRAG}$")).unwrap());
static RE_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(19|20)\d{2}$").unwrap());
static RE_YEAR_SHORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^'(\d{2})$").unwrap());
static RE_AGO_VAGUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:a )?(?:few|several|many|some|handful|number|bunch|lot|couple dozen|quite a few)(?: of)? (?:day|week|month|year|decade)s? (?:ago|back|earlier|prior)$",
    )
    .unwrap()
});
static RE_AGO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d{1,3}|a couple of|a couple|couple of|couple|half a|half an|a|an|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty|thirty|forty|fifty) (day|week|month|year|decade)s? (?:ago|back|earlier|prior)$",
    )
    .unwrap()
});
static RE_LAST_THIS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:earlier |later )?(last|this|next|past|previous|coming) (week|month|year)$")
        .unwrap()
});
static RE_WEEKEND: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:earlier |later )?(last|this|next|past|previous|coming) weekend$").unwrap()
});
static RE_WEEKDAY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(last|this|next) (monday|tuesday|wednesday|thursday|friday|saturday|sunday)$")
        .unwrap()
});
static RE_SEASON: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:(?:last|this|next|past|previous|coming) )?(spring|summer|autumn|fall|winter)(?:(?: of)?,? ?(\d{4}|'\d{2}))?$",
    )
    .unwrap()
});
static RE_FY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:fy ?'?(\d{2}|\d{4})|fiscal(?: year)? ?(\d{4}))$").unwrap());
static RE_QUARTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:q[1-4]|(?:first|second|third|fourth) quarter)(?:(?: of)?,? ?(\d{4}))?$")
        .unwrap()
});
static RE_DECADE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:'?(?:19|20)?\d0'?s|(?:twen|thir|for|fif|six|seven|eigh|nine)ties)$").unwrap()
});
static RE_MY_DECADE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^my (?:early |mid |late )?(?:teens|twenties|thirties|forties|fifties|sixties|\d0'?s)$")
        .unwrap()
});
static RE_AGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:when i was|when i turned|at the age of|at age|at|aged|age) (\d{1,3})(?: years? old)?$")
        .unwrap()
});

/// Explicitly recognized vague past/future references. Anything not matched
/// by any rule falls back to `vague` too; this list exists so the common
/// cases are deliberate, tested decisions rather than fallback accidents.
static VAGUE_PHRASES: LazyLock<std::collections::HashSet<&'static str>> = LazyLock::new(|| {
    [
        "recently",
        "lately",
        "a while ago",
        "a while back",
        "awhile ago",
        "awhile back",
        "a while",
        "while ago",
        "while back",
        "some time ago",
        "sometime ago",
        "a long time ago",
        "long time ago",
        "long ago",
        "ages ago",
        "forever ago",
        "way back",
        "way back when",
        "back then",
        "past",
        "previously",
        "before",
        "earlier",
        "a bit ago",
        "not long ago",
        "soon",
        "someday",
        "eventually",
        "one day",
        "at some point",
        "some point",
        "future",
        "years ago",
        "months ago",
        "weeks ago",
        "days ago",
        "decades ago",
        "a long time",
        "forever",
        "never",
        "unknown",
        "n/a",
        "na",
        "unclear",
        "unspecified",
        "not specified",
        "not mentioned",
        "no date",
        "no time",
        "childhood",
        "in childhood",
        "my childhood",
        "as a child",
        "as a kid",
        "when i was a kid",
        "when i was a child",
        "when i was young",
        "when i was younger",
        "when i was little",
        "growing up",
        "my youth",
        "high school",
        "middle school",
        "grade school",
        "elementary school",
        "college",
        "university",
        "as a teenager",
        "as a teen",
        "my teens",
        "teenage years",
        "other day",
        "some time",
        "sometime",
    ]
    .into_iter()
    .collect()
});

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn parse_year_token(tok: &str) -> i32 {
    let digits = tok.trim_start_matches('\'');
    let n: i32 = digits.parse().unwrap_or(0);
    if digits.len() == 2 {
        // Two-digit years: 00–29 read as 20xx, 30–99 as 19xx.
        if n <= 29 {
            2000 + n
        } else {
            1900 + n
        }
    } else {
        n
    }
}

fn parse_quantity(tok: &str) -> Option<i64> {
    if let Ok(n) = tok.parse::<i64>() {
        return Some(n);
    }
    let n = match tok {
        "a" | "an" | "one" => 1,
        "two" | "a couple of" | "a couple" | "couple of" | "couple" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "thirteen" => 13,
        "fourteen" => 14,
        "fifteen" => 15,
        "sixteen" => 16,
        "seventeen" => 17,
        "eighteen" => 18,
        "nineteen" => 19,
        "twenty" => 20,
        "thirty" => 30,
        "forty" => 40,
        "fifty" => 50,
        _ => return None,
    };
    Some(n)
}

/// Year a bare month name resolves to: the most recent occurrence at or
/// before the reference month (a bare "December" in a February post means
/// the previous December; a bare "February" means this month).
fn resolve_bare_month_year(reference: NaiveDate, month: u32) -> i32 {
    if month <= reference.month() {
        reference.year()
    } else {
        reference.year() - 1
    }
}

fn season_from_name(name: &str) -> Season {
    match name {
        "spring" => Season::Spring,
        "summer" => Season::Summer,
        "autumn" | "fall" => Season::Autumn,
        _ => Season::Winter,
    }
}

fn exact_date(y: i32, m: u32, d: u32) -> Option<TemporalKind> {
    NaiveDate::from_ymd_opt(y, m, d).map(|date| TemporalKind::ExactDate { date })
}

fn relative_span(reference: NaiveDate, n: i64, unit: &str) -> Option<TemporalKind> {
    let period = match unit {
        "day" => CoarsePeriod::Day {
            date: reference.checked_sub_signed(Duration::days(n))?,
        },
        "week" => CoarsePeriod::Week {
            monday: iso_week_monday(reference.checked_sub_signed(Duration::days(7 * n))?),
        },
        "month" => {
            let (year, month) = shift_month(reference.year(), reference.month(), -n);
            CoarsePeriod::Month { year, month }
        }
        "year" => CoarsePeriod::Year {
            year: reference.year() - i32::try_from(n).ok()?,
        },
        "decade" => CoarsePeriod::Year {
            year: reference.year() - i32::try_from(10 * n).ok()?,
        },
        _ => return None,
    };
    Some(TemporalKind::RelativeSpan(period))
}

fn classify(s: &str, reference: NaiveDate) -> TemporalKind {
    // Relative single days.
    let relday = |offset: i64| TemporalKind::RelativeDay {
        date: reference + Duration::days(offset),
    };
    match s {
        "yesterday" => return relday(-1),
        "today" | "now" => return relday(0),
        "tomorrow" => return relday(1),
        "day before yesterday" => return relday(-2),
        "day after tomorrow" => return relday(2),
        _ => {}
    }

    // Explicit calendar dates.
    for (re, order) in [
        (&RE_ISO, [0usize, 1, 2]),
        (&RE_YMD_SLASH, [0, 1, 2]),
        (&RE_MDY_SLASH, [2, 0, 1]),
    ] {
        if let Some(c) = re.captures(s) {
            let nums: Vec<i64> = (1..=3).map(|i| c[i].parse().unwrap_or(0)).collect();
            let (y, m, d) = (nums[order[0]], nums[order[1]], nums[order[2]]);
            return exact_date(y as i32, m as u32, d as u32).unwrap_or(TemporalKind::Vague);
        }
    }
    if let Some(c) = RE_MY_SLASH.captures(s) {
        let (m, y): (u32, i32) = (c[1].parse().unwrap_or(0), c[2].parse().unwrap_or(0));
        if (1..=12).contains(&m) {
            return TemporalKind::Month { year: y, month: m };
        }
        return TemporalKind::Vague;
    }
    if let Some(c) = RE_YM_SLASH.captures(s) {
        let (y, m): (i32, u32) = (c[1].parse().unwrap_or(0), c[2].parse().unwrap_or(0));
        if (1..=12).contains(&m) {
            return TemporalKind::Month { year: y, month: m };
        }
        return TemporalKind::Vague;
    }

    // Month-name forms.
    if let Some(c) = RE_MDY_NAME.captures(s) {
        let month = month_number(&c[1]);
        let num: u32 = c[2].parse().unwrap_or(0);
        if let Some(y) = c.get(3) {
            let year: i32 = y.as_str().parse().unwrap_or(0);
            return exact_date(year, month, num).unwrap_or(TemporalKind::Vague);
        }
        if (1..=31).contains(&num) {
            let year = resolve_bare_month_year(reference, month);
            return exact_date(year, month, num).unwrap_or(TemporalKind::Vague);
        }
        if (32..=99).contains(&num) {
            // "December 86" reads as a two-digit year, not a day.
            return TemporalKind::Month {
                year: parse_year_token(&format!("{num:02}")),
                month,
            };
        }
        return TemporalKind::Vague;
    }
    if let Some(c) = RE_DMY_NAME.captures(s) {
        let day: u32 = c[1].parse().unwrap_or(0);
        let month = month_number(&c[2]);
        let year = match c.get(3) {
            Some(y) => y.as_str().parse().unwrap_or(0),
            None => resolve_bare_month_year(reference, month),
        };
        return exact_date(year, month, day).unwrap_or(TemporalKind::Vague);
    }
    if let Some(c) = RE_MONTH_YEAR.captures(s) {
        return TemporalKind::Month {
            year: parse_year_token(&c[2]),
            month: month_number(&c[1]),
        };
    }
    if let Some(c) = RE_MONTH_ONLY.captures(s) {
        let month = month_number(&c[1]);
        return TemporalKind::Month {
            year: resolve_bare_month_year(reference, month),
            month,
        };
    }

    // Bare years.
    if RE_YEAR.is_match(s) {
        return TemporalKind::Year {
            year: s.parse().unwrap(),
        };
    }
    if RE_YEAR_SHORT.is_match(s) {
        return TemporalKind::Year {
            year: parse_year_token(s),
        };
    }

    // Relative spans.
    if RE_AGO_VAGUE.is_match(s) {
        return TemporalKind::Vague;
    }
    if let Some(c) = RE_AGO.captures(s) {
        let qty = &c[1];
        let unit = &c[2];
        if qty == "half a" || qty == "half an" {
            // Only "half a year ago" has a usable coarse reading (≈6 months).
            if unit == "year" {
                let (year, month) = shift_month(reference.year(), reference.month(), -6);
                return TemporalKind::RelativeSpan(CoarsePeriod::Month { year, month });
            }
            return TemporalKind::Vague;
        }
        if let Some(n) = parse_quantity(qty) {
            if let Some(kind) = relative_span(reference, n, unit) {
                return kind;
            }
        }
        return TemporalKind::Vague;
    }

    // last/this/next week, month, year, weekend, weekday.
    if let Some(c) = RE_LAST_THIS.captures(s) {
        let delta: i64 = match &c[1] {
            "last" | "past" | "previous" => -1,
            "this" => 0,
            _ => 1,
        };
        return match &c[2] {
            "week" => TemporalKind::Week {
                monday: iso_week_monday(reference) + Duration::days(7 * delta),
            },
            "month" => {
                let (year, month) = shift_month(reference.year(), reference.month(), delta);
                TemporalKind::Month { year, month }
            }
            _ => TemporalKind::Year {
                year: reference.year() + delta as i32,
            },
        };
    }
    if let Some(c) = RE_WEEKEND.captures(s) {
        let this_sunday = iso_week_monday(reference) + Duration::days(6);
        let sunday = match &c[1] {
            "last" | "past" | "previous" => last_weekend_sunday(reference),
            "this" => this_sunday,
            _ => this_sunday + Duration::days(7),
        };
        return TemporalKind::Weekend { sunday };
    }
    if let Some(c) = RE_WEEKDAY.captures(s) {
        let target = match &c[2] {
            "monday" => 0i64,
            "tuesday" => 1,
            "wednesday" => 2,
            "thursday" => 3,
            "friday" => 4,
            "saturday" => 5,
            _ => 6,
        };
        let wd = reference.weekday().num_days_from_monday() as i64;
        let date = match &c[1] {
            // Most recent strictly-before occurrence.
            "last" => reference - Duration::days((wd - target + 6).rem_euclid(7) + 1),
            "this" => iso_week_monday(reference) + Duration::days(target),
            _ => iso_week_monday(reference) + Duration::days(7 + target),
        };
        return TemporalKind::RelativeDay { date };
    }

    // Seasons, fiscal years, quarters (all rejected downstream).
    if let Some(c) = RE_SEASON.captures(s) {
        return TemporalKind::Season(SeasonRef::Named {
            season: season_from_name(&c[1]),
            year: c.get(2).map(|y| parse_year_token(y.as_str())),
        });
    }
    if let Some(c) = RE_FY.captures(s) {
        let year = c
            .get(1)
            .or_else(|| c.get(2))
            .map(|y| parse_year_token(y.as_str()));
        return TemporalKind::Season(SeasonRef::Fiscal { year });
    }
    if let Some(c) = RE_QUARTER.captures(s) {
        return TemporalKind::Season(SeasonRef::Fiscal {
            year: c.get(1).map(|y| parse_year_token(y.as_str())),
        });
    }

    // Decade, age, and listed vague phrases.
    if RE_DECADE.is_match(s) || RE_MY_DECADE.is_match(s) || RE_AGE.is_match(s) {
        return TemporalKind::Vague;
    }
    if VAGUE_PHRASES.contains(s) {
        return TemporalKind::Vague;
    }

    TemporalKind::Vague
}

/// Parse a time phrase against the calendar day of the post it came from.
///
/// Never fails: unrecognized input comes back as [`TemporalKind::Vague`],
/// and an empty phrase or the literal "none" as [`TemporalKind::None`].
pub fn parse_temporal(phrase: &str, reference: NaiveDate) -> TemporalValue {
    let kind = match preprocess(phrase) {
        Option::None => TemporalKind::None,
        Some(s) if s.is_empty() => TemporalKind::Vague,
        Some(s) => classify(&s, reference),
    };
    TemporalValue {
        kind,
        raw_phrase: phrase.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

fn mid_month(year: i32, month: u32) -> Result<NaiveDate, AnchorRejection> {
    NaiveDate::from_ymd_opt(year, month, 16).ok_or(AnchorRejection::Vague)
}

fn mid_year(year: i32) -> Result<NaiveDate, AnchorRejection> {
    NaiveDate::from_ymd_opt(year, 7, 2).ok_or(AnchorRejection::Vague)
}

/// Collapse a parsed temporal value onto a single calendar day.
///
/// Period expressions resolve to the middle of the period (year → July 2,
/// month → the 16th, ISO week → its Thursday, weekend → its Sunday); exact
/// and relative days pass through. Seasons, fiscal years, vague references,
/// and "none" are rejected with a reason code. The function is total: no
/// input panics (out-of-range payloads reject as vague).
pub fn normalize_anchor(
    value: &TemporalValue,
    source_post_id: &str,
    reference_time: i64,
) -> Result<DiagnosisAnchor, AnchorRejection> {
    let (date, precision) = match &value.kind {
        TemporalKind::ExactDate { date } | TemporalKind::RelativeDay { date } => {
            (*date, AnchorPrecision::Day)
        }
        TemporalKind::Month { year, month } => (mid_month(*year, *month)?, AnchorPrecision::Month),
        TemporalKind::Year { year } => (mid_year(*year)?, AnchorPrecision::Year),
        TemporalKind::Week { monday } => (
            // Re-derive the week's Monday so a mid-week payload still lands
            // on the Thursday of its own ISO week.
            iso_week_monday(*monday) + Duration::days(3),
            AnchorPrecision::Week,
        ),
        TemporalKind::Weekend { sunday } => (*sunday, AnchorPrecision::Weekend),
        TemporalKind::RelativeSpan(period) => match period {
            CoarsePeriod::Day { date } => (*date, AnchorPrecision::Day),
            CoarsePeriod::Week { monday } => (
                iso_week_monday(*monday) + Duration::days(3),
                AnchorPrecision::Week,
            ),
            CoarsePeriod::Month { year, month } => {
                (mid_month(*year, *month)?, AnchorPrecision::Month)
            }
            CoarsePeriod::Year { year } => (mid_year(*year)?, AnchorPrecision::Year),
        },
        TemporalKind::Season(SeasonRef::Named { .. }) => return Err(AnchorRejection::Season),
        TemporalKind::Season(SeasonRef::Fiscal { .. }) => return Err(AnchorRejection::FiscalYear),
        TemporalKind::Vague => return Err(AnchorRejection::Vague),
        TemporalKind::None => return Err(AnchorRejection::None),
    };
    Ok(DiagnosisAnchor {
        date,
        precision,
        source_post_id: source_post_id.to_string(),
        reference_time,
    })
}

// ---------------------------------------------------------------------------
// LLM request builders and the extraction call
// ---------------------------------------------------------------------------

/// Generation settings shared by the extraction and veridicality calls.
/// Defaults pin the protocol: temperature 0, at most 10 response tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmConfig {
    pub fn new(model: &str) -> LlmConfig {
        LlmConfig {
            model: model.to_string(),
            temperature: 0.0,
            max_tokens: 10,
        }
    }
}

/// System prompt for time extraction with the disorder term substituted.
pub fn extraction_system_prompt(disorder: Disorder) -> String {
    EXTRACTION_SYSTEM_TEMPLATE
        .trim_end()
        .replace("[DISORDER]", disorder.term())
}

/// Build the extraction request for one disclosure post.
pub fn extraction_request(
    cfg: &LlmConfig,
    disorder: Disorder,
    post_text: &str,
) -> GenerationRequest {
    GenerationRequest {
        model: cfg.model.clone(),
        system: extraction_system_prompt(disorder),
        prompt: post_text.to_string(),
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
    }
}

/// Build the veridicality request for one (post, extracted time) pair.
pub fn veridicality_request(cfg: &LlmConfig, post_text: &str, time: &str) -> GenerationRequest {
    GenerationRequest {
        model: cfg.model.clone(),
        system: VERIDICALITY_SYSTEM.trim_end().to_string(),
        prompt: format!("POST: \"{post_text}\"\n\nDIAGNOSIS TIME: \"{time}\""),
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
    }
}

/// Strip service framing (quotes, code ticks, trailing period) from a reply
/// and map "none"/empty to no phrase.
pub fn clean_extracted_phrase(reply: &str) -> Option<String> {
    let mut s = reply.trim().to_string();
    loop {
        let t = s
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '`')
            .trim()
            .to_string();
        if t == s {
            break;
        }
        s = t;
    }
    while s.ends_with('.') {
        s.pop();
        s = s.trim_end().to_string();
    }
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        Option::None
    } else {
        Some(s)
    }
}

/// Ask the generation service for the diagnosis time phrase in `post_text`.
/// Returns `Ok(None)` when the service reports no time information.
pub fn extract_time_phrase(
    post_text: &str,
    disorder: Disorder,
    cfg: &LlmConfig,
    client: &dyn TextGenerator,
) -> Result<Option<String>, LlmError> {
    let req = extraction_request(cfg, disorder, post_text);
    let reply = client.generate(&req)?;
    Ok(clean_extracted_phrase(&reply))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    /// Tuesday, matching the worked reference-date example.
    fn reference() -> NaiveDate {
        d(2019, 2, 5)
    }

    fn kind(phrase: &str) -> TemporalKind {
        parse_temporal(phrase, reference()).kind
    }

    fn norm(phrase: &str) -> Result<(NaiveDate, AnchorPrecision), AnchorRejection> {
        let v = parse_temporal(phrase, reference());
        normalize_anchor(&v, "p1", 0).map(|a| (a.date, a.precision))
    }

    #[test]
    fn literal_none_and_empty() {
        assert_eq!(kind("none"), TemporalKind::None);
        assert_eq!(kind("None."), TemporalKind::None);
        assert_eq!(kind("  "), TemporalKind::None);
        assert_eq!(norm("none"), Err(AnchorRejection::None));
    }

    #[test]
    fn exact_dates_parse() {
        assert_eq!(
            kind("2019-12-01"),
            TemporalKind::ExactDate { date: d(2019, 12, 1) }
        );
        assert_eq!(
            kind("2019/02/05"),
            TemporalKind::ExactDate { date: d(2019, 2, 5) }
        );
        assert_eq!(
            kind("12/01/2019"),
            TemporalKind::ExactDate { date: d(2019, 12, 1) }
        );
        assert_eq!(
            kind("December 1, 2019"),
            TemporalKind::ExactDate { date: d(2019, 12, 1) }
        );
        assert_eq!(
            kind("1st of December 2019"),
            TemporalKind::ExactDate { date: d(2019, 12, 1) }
        );
        // Invalid calendar day degrades to vague, not a crash.
        assert_eq!(kind("2019-02-30"), TemporalKind::Vague);
    }

    #[test]
    fn month_year_forms() {
        for phrase in [
            "December 2019",
            "december, 2019",
            "Dec 2019",
            "Dec. 2019",
            "december of 2019",
            "In December 2019.",
            "12/2019",
            "2019/12",
        ] {
            assert_eq!(
                kind(phrase),
                TemporalKind::Month { year: 2019, month: 12 },
                "phrase {phrase:?}"
            );
        }
        assert_eq!(kind("March 2021"), TemporalKind::Month { year: 2021, month: 3 });
        assert_eq!(kind("december '19"), TemporalKind::Month { year: 2019, month: 12 });
    }

    #[test]
    fn bare_month_resolves_to_most_recent_occurrence() {
        // Reference is February 2019.
        assert_eq!(kind("December"), TemporalKind::Month { year: 2018, month: 12 });
        assert_eq!(kind("january"), TemporalKind::Month { year: 2019, month: 1 });
        assert_eq!(kind("february"), TemporalKind::Month { year: 2019, month: 2 });
    }

    #[test]
    fn years_and_modifiers() {
        assert_eq!(kind("2018"), TemporalKind::Year { year: 2018 });
        assert_eq!(kind("early 2018"), TemporalKind::Year { year: 2018 });
        assert_eq!(kind("mid-2019"), TemporalKind::Year { year: 2019 });
        assert_eq!(kind("the end of 2017"), TemporalKind::Year { year: 2017 });
        assert_eq!(kind("'19"), TemporalKind::Year { year: 2019 });
        assert_eq!(kind("in the year 2005"), TemporalKind::Year { year: 2005 });
    }

    #[test]
    fn relative_days() {
        assert_eq!(kind("yesterday"), TemporalKind::RelativeDay { date: d(2019, 2, 4) });
        assert_eq!(kind("today"), TemporalKind::RelativeDay { date: d(2019, 2, 5) });
        assert_eq!(kind("tomorrow"), TemporalKind::RelativeDay { date: d(2019, 2, 6) });
        assert_eq!(kind("last night"), TemporalKind::RelativeDay { date: d(2019, 2, 4) });
        assert_eq!(kind("yesterday morning"), TemporalKind::RelativeDay { date: d(2019, 2, 4) });
        assert_eq!(
            kind("the day before yesterday"),
            TemporalKind::RelativeDay { date: d(2019, 2, 3) }
        );
    }

    #[test]
    fn relative_spans_inherit_unit_precision() {
        assert_eq!(
            kind("3 days ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Day { date: d(2019, 2, 2) })
        );
        // 2019-01-22 falls in the ISO week starting Monday 2019-01-21.
        assert_eq!(
            kind("two weeks ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Week { monday: d(2019, 1, 21) })
        );
        assert_eq!(
            kind("2 months ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Month { year: 2018, month: 12 })
        );
        assert_eq!(
            kind("six months ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Month { year: 2018, month: 8 })
        );
        assert_eq!(
            kind("a year ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Year { year: 2018 })
        );
        assert_eq!(
            kind("a couple of years ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Year { year: 2017 })
        );
        assert_eq!(
            kind("a decade ago"),
            TemporalKind::RelativeSpan(CoarsePeriod::Year { year: 2009 })
        );
        // The worked example: two years before a mid-2020 post is the year
        // 2018 at year precision, hence July 2 after normalization.
        let v = parse_temporal("2 years ago", d(2020, 6, 15));
        assert_eq!(v.kind, TemporalKind::RelativeSpan(CoarsePeriod::Year { year: 2018 }));
        let a = normalize_anchor(&v, "p", 0).unwrap();
        assert_eq!((a.date, a.precision), (d(2018, 7, 2), AnchorPrecision::Year));
    }

    #[test]
    fn vague_quantities_reject() {
        for phrase in [
            "a few years ago",
            "several months ago",
            "many years ago",
            "some weeks ago",
            "years ago",
            "1.5 years ago",
        ] {
            assert_eq!(kind(phrase), TemporalKind::Vague, "phrase {phrase:?}");
        }
    }

    #[test]
    fn last_this_next_units() {
        assert_eq!(kind("last week"), TemporalKind::Week { monday: d(2019, 1, 28) });
        assert_eq!(kind("this week"), TemporalKind::Week { monday: d(2019, 2, 4) });
        assert_eq!(kind("next week"), TemporalKind::Week { monday: d(2019, 2, 11) });
        assert_eq!(kind("last month"), TemporalKind::Month { year: 2019, month: 1 });
        assert_eq!(kind("last year"), TemporalKind::Year { year: 2018 });
        assert_eq!(kind("earlier this year"), TemporalKind::Year { year: 2019 });
        assert_eq!(kind("the past month"), TemporalKind::Month { year: 2019, month: 1 });
    }

    #[test]
    fn weekend_rule() {
        // Tuesday reference: nearest preceding Sunday.
        assert_eq!(kind("last weekend"), TemporalKind::Weekend { sunday: d(2019, 2, 3) });
        // Saturday reference: the weekend containing it ends tomorrow.
        assert_eq!(
            parse_temporal("last weekend", d(2019, 2, 9)).kind,
            TemporalKind::Weekend { sunday: d(2019, 2, 10) }
        );
        // Sunday reference: the weekend containing it ends today.
        assert_eq!(
            parse_temporal("last weekend", d(2021, 1, 3)).kind,
            TemporalKind::Weekend { sunday: d(2021, 1, 3) }
        );
        assert_eq!(norm("last weekend"), Ok((d(2019, 2, 3), AnchorPrecision::Weekend)));
    }

    #[test]
    fn named_weekdays() {
        // "last Tuesday" from a Tuesday is a full week back.
        assert_eq!(kind("last tuesday"), TemporalKind::RelativeDay { date: d(2019, 1, 29) });
        assert_eq!(kind("last monday"), TemporalKind::RelativeDay { date: d(2019, 2, 4) });
        assert_eq!(kind("this friday"), TemporalKind::RelativeDay { date: d(2019, 2, 8) });
        assert_eq!(kind("next friday"), TemporalKind::RelativeDay { date: d(2019, 2, 15) });
    }

    #[test]
    fn seasons_reject() {
        assert_eq!(
            kind("spring 2022"),
            TemporalKind::Season(SeasonRef::Named { season: Season::Spring, year: Some(2022) })
        );
        assert_eq!(norm("spring, 2022"), Err(AnchorRejection::Season));
        assert_eq!(norm("winter"), Err(AnchorRejection::Season));
        assert_eq!(norm("last summer"), Err(AnchorRejection::Season));
        assert_eq!(norm("fall of 2018"), Err(AnchorRejection::Season));
        assert_eq!(norm("over the summer"), Err(AnchorRejection::Season));
    }

    #[test]
    fn fiscal_phrases_reject_with_their_own_reason() {
        assert_eq!(norm("fiscal year 2019"), Err(AnchorRejection::FiscalYear));
        assert_eq!(norm("FY2020"), Err(AnchorRejection::FiscalYear));
        assert_eq!(norm("fy '19"), Err(AnchorRejection::FiscalYear));
        assert_eq!(norm("Q1 2019"), Err(AnchorRejection::FiscalYear));
        assert_eq!(norm("third quarter of 2018"), Err(AnchorRejection::FiscalYear));
    }

    #[test]
    fn decades_ages_and_listed_phrases_are_vague() {
        for phrase in [
            "the 90s",
            "the 1990s",
            "early 2000s",
            "the nineties",
            "in my 20s",
            "in my early twenties",
            "when I was 15",
            "at age 12",
            "recently",
            "a while back",
            "in high school",
            "as a child",
            "in the past",
            "someday",
            "blorp unrecognizable",
        ] {
            assert_eq!(kind(phrase), TemporalKind::Vague, "phrase {phrase:?}");
        }
    }

    #[test]
    fn normalization_mid_period_rules() {
        assert_eq!(norm("2020"), Ok((d(2020, 7, 2), AnchorPrecision::Year)));
        assert_eq!(norm("March 2021"), Ok((d(2021, 3, 16), AnchorPrecision::Month)));
        assert_eq!(norm("last week"), Ok((d(2019, 1, 31), AnchorPrecision::Week)));
        assert_eq!(norm("3 weeks ago"), Ok((d(2019, 1, 17), AnchorPrecision::Week)));
        assert_eq!(norm("yesterday"), Ok((d(2019, 2, 4), AnchorPrecision::Day)));
        // Cross-year ISO week: Sunday 2021-01-03 belongs to the week whose
        // Thursday is 2020-12-31.
        let v = parse_temporal("this week", d(2021, 1, 3));
        let a = normalize_anchor(&v, "p", 0).unwrap();
        assert_eq!(a.date, d(2020, 12, 31));
    }

    #[test]
    fn renormalizing_an_anchor_date_is_idempotent() {
        for phrase in ["December 2019", "2018", "last weekend", "two weeks ago"] {
            let v = parse_temporal(phrase, reference());
            let a = normalize_anchor(&v, "p", 0).unwrap();
            let again = normalize_anchor(
                &TemporalValue {
                    kind: TemporalKind::ExactDate { date: a.date },
                    raw_phrase: String::new(),
                },
                "p",
                0,
            )
            .unwrap();
            assert_eq!(again.date, a.date);
            assert_eq!(again.precision, AnchorPrecision::Day);
        }
    }

    #[test]
    fn out_of_range_payloads_reject_instead_of_panicking() {
        let v = TemporalValue {
            kind: TemporalKind::Month { year: i32::MAX, month: 13 },
            raw_phrase: String::new(),
        };
        assert_eq!(normalize_anchor(&v, "p", 0), Err(AnchorRejection::Vague));
    }

    #[test]
    fn reference_date_conversion() {
        // 2019-02-05 12:00:00 UTC.
        assert_eq!(reference_date(1549368000), Some(d(2019, 2, 5)));
    }

    #[test]
    fn extraction_prompt_substitutes_disorder() {
        let sys = extraction_system_prompt(Disorder::Bipolar);
        assert!(sys.contains("extract the time of a bipolar diagnosis"));
        assert!(sys.contains("respond with 'none'"));
        assert!(!sys.contains("[DISORDER]"));
        let req = extraction_request(&LlmConfig::new("m"), Disorder::Depression, "post body");
        assert!(req.system.contains("depression diagnosis"));
        assert_eq!(req.prompt, "post body");
        assert_eq!(req.temperature, 0.0);
        assert_eq!(req.max_tokens, 10);
    }

    #[test]
    fn veridicality_prompt_format() {
        let req = veridicality_request(&LlmConfig::new("m"), "I was diagnosed", "December 2019");
        assert_eq!(
            req.prompt,
            "POST: \"I was diagnosed\"\n\nDIAGNOSIS TIME: \"December 2019\""
        );
        assert!(req.system.contains("Return only"));
        assert!(req.system.ends_with("no additional text."));
    }

    #[test]
    fn extract_time_phrase_maps_none_to_null() {
        struct Fixed(&'static str);
        impl TextGenerator for Fixed {
            fn generate(&self, _req: &GenerationRequest) -> Result<String, LlmError> {
                Ok(self.0.to_string())
            }
        }
        let cfg = LlmConfig::new("m");
        let got = extract_time_phrase("text", Disorder::Bipolar, &cfg, &Fixed("December 2019"))
            .unwrap();
        assert_eq!(got.as_deref(), Some("December 2019"));
        let got =
            extract_time_phrase("text", Disorder::Bipolar, &cfg, &Fixed("\"December 2019.\""))
                .unwrap();
        assert_eq!(got.as_deref(), Some("December 2019"));
        for reply in ["none", "None.", "NONE", "  "] {
            let got = extract_time_phrase("text", Disorder::Bipolar, &cfg, &Fixed(reply))
                .unwrap();
            assert_eq!(got, Option::None, "reply {reply:?}");
        }
    }

    proptest! {
        /// Parsing and normalization never panic, whatever the service says.
        #[test]
        fn parse_is_total(phrase in ".{0,60}") {
            let v = parse_temporal(&phrase, reference());
            let _ = normalize_anchor(&v, "p", 0);
        }

        /// The resolved Thursday always lies in the same ISO week as the
        /// date the week was derived from.
        #[test]
        fn week_thursday_stays_in_iso_week(offset in 0i64..20000) {
            let date = d(1990, 1, 1) + Duration::days(offset);
            let v = TemporalValue {
                kind: TemporalKind::Week { monday: date },
                raw_phrase: String::new(),
            };
            let a = normalize_anchor(&v, "p", 0).unwrap();
            prop_assert_eq!(a.date.iso_week().year(), date.iso_week().year());
            prop_assert_eq!(a.date.iso_week().week(), date.iso_week().week());
            prop_assert_eq!(a.date.weekday(), chrono::Weekday::Thu);
        }

        /// Weekend resolution always lands on a Sunday no more than six days
        /// away from the reference.
        #[test]
        fn weekend_is_nearby_sunday(offset in 0i64..20000) {
            let reference = d(1990, 1, 1) + Duration::days(offset);
            let sunday = last_weekend_sunday(reference);
            prop_assert_eq!(sunday.weekday(), chrono::Weekday::Sun);
            let gap = (reference - sunday).num_days();
            prop_assert!((-1..=5).contains(&gap), "gap {gap}");
        }
    }
}
