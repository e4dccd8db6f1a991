//! Archive ingestion: streaming post records out of newline-delimited
//! archives, markup cleanup, eligibility filtering and text deduplication.
//!
//! Archives are newline-delimited JSON records, optionally zstd-compressed
//! (detected by the `.zst`/`.zstd` extension). Field names are configurable
//! through a [`FieldMap`] because archive dumps disagree on their schemas;
//! the defaults follow the common submission/comment dump layout
//! (`id`, `author`, `created_utc`, `body` / `title` + `selftext`).
//!
//! The eligibility filters mirror the study protocol: posts must be
//! non-empty, not platform-deleted or -removed, free of URLs, not quotes of
//! other content, and in English. URL and quote checks run on the raw body;
//! language detection runs on the cleaned text (markup only adds noise
//! there). Whether filtering precedes or follows cleanup is a committed
//! choice of this implementation — see `check_eligibility`.

mod english;
mod markup;

pub use english::EnglishDetector;
pub use markup::clean_markup;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open archive {path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("i/o error reading archive: {0}")]
    Io(#[from] std::io::Error),
}

/// Kind of a post record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    Submission,
    Comment,
}

/// One post from an archive, with the raw (uncleaned) body text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub author: String,
    /// UTC seconds since the epoch.
    pub created_at: i64,
    pub body: String,
    pub kind: PostKind,
    pub subreddit: Option<String>,
}

/// Why a post was rejected (or `Ok` if it was not).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EligibilityReason {
    Ok,
    Empty,
    Deleted,
    Removed,
    ContainsUrl,
    Quoted,
    NonEnglish,
    DuplicateText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityVerdict {
    pub eligible: bool,
    pub reason: EligibilityReason,
}

impl EligibilityVerdict {
    pub fn ok() -> Self {
        EligibilityVerdict {
            eligible: true,
            reason: EligibilityReason::Ok,
        }
    }

    pub fn reject(reason: EligibilityReason) -> Self {
        debug_assert!(reason != EligibilityReason::Ok);
        EligibilityVerdict {
            eligible: false,
            reason,
        }
    }
}

/// Mapping from archive JSON field names onto [`PostRecord`] fields.
///
/// A record is treated as a comment when the comment-body field is present,
/// and as a submission otherwise (title and selftext joined by a blank
/// line).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub author: String,
    pub created: String,
    pub comment_body: String,
    pub title: String,
    pub selftext: String,
    pub subreddit: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            author: "author".into(),
            created: "created_utc".into(),
            comment_body: "body".into(),
            title: "title".into(),
            selftext: "selftext".into(),
            subreddit: "subreddit".into(),
        }
    }
}

/// Closed-open bound on record timestamps; records outside are skipped.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeBounds {
    pub min: i64,
    pub max: i64,
}

impl TimeBounds {
    pub fn contains(&self, t: i64) -> bool {
        t >= self.min && t < self.max
    }
}

/// Counters accumulated while streaming an archive.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct IngestStats {
    pub parsed: u64,
    pub skipped_malformed: u64,
    pub skipped_out_of_bounds: u64,
}

/// Streaming reader over one archive file. Yields records in file order;
/// malformed lines are counted and skipped rather than aborting the run.
pub struct PostStream {
    lines: std::io::Lines<BufReader<Box<dyn Read + Send>>>,
    map: FieldMap,
    bounds: Option<TimeBounds>,
    stats: IngestStats,
}

/// Open an archive for streaming. Plain files are read as-is; paths ending
/// in `.zst`/`.zstd` are decompressed on the fly.
pub fn stream_posts(
    path: &Path,
    map: &FieldMap,
    bounds: Option<TimeBounds>,
) -> Result<PostStream, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    let reader: Box<dyn Read + Send> = if ext == "zst" || ext == "zstd" {
        Box::new(zstd::stream::read::Decoder::new(file)?)
    } else {
        Box::new(file)
    };
    Ok(PostStream {
        lines: BufReader::new(reader).lines(),
        map: map.clone(),
        bounds,
        stats: IngestStats::default(),
    })
}

impl PostStream {
    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    fn parse_line(&self, line: &str) -> Option<PostRecord> {
        let value: serde_json::Value = serde_json::from_str(line).ok()?;
        let obj = value.as_object()?;
        let post_id = obj.get(&self.map.id)?.as_str()?.to_string();
        if post_id.is_empty() {
            return None;
        }
        let author = obj.get(&self.map.author)?.as_str()?.to_string();
        let created_at = parse_timestamp(obj.get(&self.map.created)?)?;
        let subreddit = obj
            .get(&self.map.subreddit)
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let (kind, body) = if let Some(body) = obj.get(&self.map.comment_body).and_then(|v| v.as_str())
        {
            (PostKind::Comment, body.to_string())
        } else {
            let title = obj
                .get(&self.map.title)
                .and_then(|v| v.as_str())
                .unwrap_or_default();
            let selftext = obj
                .get(&self.map.selftext)
                .and_then(|v| v.as_str())
                .unwrap_or_default();
            if title.is_empty() && selftext.is_empty() {
                return None;
            }
            let body = if selftext.is_empty() {
                title.to_string()
            } else if title.is_empty() {
                selftext.to_string()
            } else {
                format!("{title}\n\n{selftext}")
            };
            (PostKind::Submission, body)
        };
        Some(PostRecord {
            post_id,
            author,
            created_at,
            body,
            kind,
            subreddit,
        })
    }
}

fn parse_timestamp(v: &serde_json::Value) -> Option<i64> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(i)
            } else {
                n.as_f64().map(|f| f as i64)
            }
        }
        serde_json::Value::String(s) => {
            let s = s.trim();
            if let Ok(i) = s.parse::<i64>() {
                Some(i)
            } else {
                s.parse::<f64>().ok().map(|f| f as i64)
            }
        }
        _ => None,
    }
}

impl Iterator for PostStream {
    type Item = PostRecord;

    fn next(&mut self) -> Option<PostRecord> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(_) => {
                    self.stats.skipped_malformed += 1;
                    continue;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Some(rec) => {
                    if let Some(b) = &self.bounds {
                        if !b.contains(rec.created_at) {
                            self.stats.skipped_out_of_bounds += 1;
                            continue;
                        }
                    }
                    self.stats.parsed += 1;
                    return Some(rec);
                }
                None => {
                    self.stats.skipped_malformed += 1;
                }
            }
        }
    }
}

/// URL detector. The exact pattern is part of the protocol:
/// `(?i)\b(?:https?://|www\.)\S+` — a scheme or `www.` prefix followed by
/// any non-whitespace run.
pub static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());

fn contains_url(text: &str) -> bool {
    URL_RE.is_match(text)
}

/// True when the body is quoting other content: either enveloped by quote
/// characters, or containing any text after a `>` quote marker.
fn is_quoted(raw: &str) -> bool {
    let t = raw.trim();
    if t.len() >= 2 {
        let first = t.chars().next().unwrap();
        let last = t.chars().last().unwrap();
        let opens = matches!(first, '"' | '\u{201c}' | '\u{2018}' | '\'');
        let closes = matches!(last, '"' | '\u{201d}' | '\u{2019}' | '\'');
        if opens && closes {
            return true;
        }
    }
    // Archive bodies carry the quote marker either literally or as an
    // HTML-escaped entity.
    let unescaped = raw.replace("&gt;", ">");
    if let Some(pos) = unescaped.find('>') {
        if unescaped[pos + 1..].trim().is_empty() {
            return false;
        }
        return true;
    }
    false
}

/// Apply the eligibility filters in their fixed order:
/// empty → deleted → removed → contains_url → quoted → non_english.
///
/// | check        | runs on | rule                                         |
/// |--------------|---------|----------------------------------------------|
/// | empty        | both    | raw or cleaned body trims to nothing         |
/// | deleted      | raw     | body equals `[deleted]` after trimming       |
/// | removed      | raw     | body equals `[removed]` after trimming       |
/// | contains_url | raw     | [`URL_RE`] matches                           |
/// | quoted       | raw     | enveloped by quotes, or text trails a `>`    |
/// | non_english  | cleaned | [`EnglishDetector`] score below threshold    |
///
/// Duplicate detection is a separate downstream pass ([`duplicate_ids`]).
pub fn check_eligibility(
    raw_body: &str,
    cleaned_body: &str,
    detector: &EnglishDetector,
) -> EligibilityVerdict {
    let raw = raw_body.trim();
    if raw.is_empty() || cleaned_body.trim().is_empty() {
        return EligibilityVerdict::reject(EligibilityReason::Empty);
    }
    if raw == "[deleted]" {
        return EligibilityVerdict::reject(EligibilityReason::Deleted);
    }
    if raw == "[removed]" {
        return EligibilityVerdict::reject(EligibilityReason::Removed);
    }
    if contains_url(raw) {
        return EligibilityVerdict::reject(EligibilityReason::ContainsUrl);
    }
    if is_quoted(raw) {
        return EligibilityVerdict::reject(EligibilityReason::Quoted);
    }
    if !detector.is_english(cleaned_body) {
        return EligibilityVerdict::reject(EligibilityReason::NonEnglish);
    }
    EligibilityVerdict::ok()
}

/// Identify duplicate posts by exact cleaned-text equality, corpus-global.
///
/// For each set of identical texts, the earliest post by `created_at`
/// survives (ties broken by input order); the returned set holds the
/// `post_id`s of the others. Input order is irrelevant to the outcome, so
/// survivors keep their relative order trivially.
pub fn duplicate_ids<'a, I>(posts: I) -> std::collections::BTreeSet<String>
where
    I: IntoIterator<Item = (&'a str, &'a str, i64)>, // (post_id, text, created_at)
{
    struct Winner {
        post_id: String,
        created_at: i64,
        order: usize,
    }
    let mut winners: HashMap<[u8; 32], Winner> = HashMap::new();
    let mut duplicates = std::collections::BTreeSet::new();
    for (order, (post_id, text, created_at)) in posts.into_iter().enumerate() {
        let digest: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        match winners.entry(digest) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(Winner {
                    post_id: post_id.to_string(),
                    created_at,
                    order,
                });
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let w = e.get_mut();
                if created_at < w.created_at || (created_at == w.created_at && order < w.order) {
                    duplicates.insert(std::mem::replace(&mut w.post_id, post_id.to_string()));
                    w.created_at = created_at;
                    w.order = order;
                } else {
                    duplicates.insert(post_id.to_string());
                }
            }
        }
    }
    duplicates
}

/// Salted, truncated SHA-256 of a username; all pipeline artifacts refer to
/// users only through this pseudonym.
pub fn hash_username(salt: &str, username: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(b"\x1f");
    h.update(username.as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Platform marker for an account that no longer exists.
pub fn is_deleted_author(author: &str) -> bool {
    author.trim() == "[deleted]"
}
