//! Markup cleanup.
//!
//! `clean_markup` strips platform markup down to plain text by a fixed rule
//! table, applied top to bottom:
//!
//! | rule              | pattern                                | result        |
//! |-------------------|----------------------------------------|---------------|
//! | line endings      | `\r\n`, `\r`                           | `\n`          |
//! | escaped entities  | `&amp; &lt; &gt; &quot; &#39; &#x27; &nbsp;` | decoded, repeated to a fixpoint |
//! | zero-width chars  | U+200B..U+200D, U+FEFF                 | removed       |
//! | spoilers          | `>!text!<`                             | `text`        |
//! | fenced code       | lines of ` ``` `...                    | line removed  |
//! | inline code       | `` `text` ``                           | `text`        |
//! | images            | `![alt](url)`                          | `alt`         |
//! | links             | `[text](url)`                          | `text`        |
//! | autolinks         | `<http://u>`                           | `http://u`    |
//! | bold+italic       | `***text***`                           | `text`        |
//! | bold              | `**text**`, `__text__`                 | `text`        |
//! | strikethrough     | `~~text~~`                             | `text`        |
//! | italic            | `*text*`, `_text_` (word-bounded)      | `text`        |
//! | superscript       | `^(text)` / `^`                        | `text` / gone |
//! | headings          | leading `#`s + space                   | removed       |
//! | blockquote marks  | leading `>` runs                       | removed       |
//! | list markers      | leading `-`/`*`/`+`/`1.` + space       | removed       |
//! | horizontal rules  | lines of only `-`/`*`/`_` (3+)         | line removed  |
//! | whitespace        | trailing blanks; 3+ newlines; ends     | tightened     |
//!
//! The function is total and idempotent: cleaning already-clean text is a
//! no-op (property-tested).

use std::sync::LazyLock;

use regex::Regex;

static SPOILER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r">!([^!]*)!<").unwrap());
static FENCE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*```[^\n]*$\n?").unwrap());
static INLINE_CODE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"`([^`\n]*)`").unwrap());
static IMAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"!\[([^\]]*)\]\(([^)\s]*)\)").unwrap());
static LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([^\]]*)\]\(([^)\s]*)\)").unwrap());
static AUTOLINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<(https?://[^>\s]+)>").unwrap());
static BOLD_ITALIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\*\*\*([^*]+)\*\*\*").unwrap());
static BOLD_STAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*([^*]+)\*\*").unwrap());
static BOLD_UNDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"__([^_]+)__").unwrap());
static STRIKE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"~~([^~]+)~~").unwrap());
static ITALIC_STAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\*([^\s*][^*]*?)\*").unwrap());
static ITALIC_UNDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b_([^_\n]+)_\b").unwrap());
static SUPERSCRIPT_PAREN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\^\(([^)]*)\)").unwrap());
/// Leading structural markers — headings, blockquote `>`s and list bullets —
/// in a single alternation so that interleavings like `- > # x` are fully
/// stripped in one pass (keeps the function idempotent).
static LINE_MARKERS: LazyLock<Regex> = LazyLock::new(|| {
    // List numbers are bounded at 3 digits so a line starting with a year
    // ("1946. It was...") keeps its text.
    Regex::new(r"(?m)^[ \t]*(?:(?:#{1,6} +)|(?:>[ \t]?)|(?:(?:[-*+]|\d{1,3}[.)]) +))+").unwrap()
});
static HRULE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*[-*_]{3,}[ \t]*$\n?").unwrap());
static TRAILING_BLANKS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)[ \t]+$").unwrap());
static MANY_NEWLINES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n{3,}").unwrap());

fn decode_entities(text: &str) -> String {
    let mut cur = text.to_string();
    // Entities can be nested ("&amp;gt;"); decode until stable, bounded.
    for _ in 0..8 {
        let next = cur
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
            .replace("&#x27;", "'")
            .replace("&nbsp;", " ");
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Strip markup per the module-level rule table. Total and idempotent.
///
/// The rule pass is iterated to a fixpoint: a single pass can leave newly
/// exposed markup behind (an unpaired `*` next to a later `*`, say), and
/// every rule strictly shrinks the text, so iteration terminates. Ordinary
/// posts converge in one or two passes.
pub fn clean_markup(raw: &str) -> String {
    let mut cur = clean_pass(raw);
    for _ in 0..64 {
        let next = clean_pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn clean_pass(raw: &str) -> String {
    let text = raw.replace("\r\n", "\n").replace('\r', "\n");
    let text = decode_entities(&text);
    let text: String = text
        .chars()
        .filter(|c| !matches!(c, '\u{200b}' | '\u{200c}' | '\u{200d}' | '\u{feff}'))
        .collect();
    let text = SPOILER.replace_all(&text, "$1");
    let text = FENCE_LINE.replace_all(&text, "");
    let text = INLINE_CODE.replace_all(&text, "$1");
    let text = IMAGE.replace_all(&text, "$1");
    let text = LINK.replace_all(&text, "$1");
    let text = AUTOLINK.replace_all(&text, "$1");
    let text = BOLD_ITALIC.replace_all(&text, "$1");
    let text = BOLD_STAR.replace_all(&text, "$1");
    let text = BOLD_UNDER.replace_all(&text, "$1");
    let text = STRIKE.replace_all(&text, "$1");
    let text = ITALIC_STAR.replace_all(&text, "$1");
    let text = ITALIC_UNDER.replace_all(&text, "$1");
    let text = SUPERSCRIPT_PAREN.replace_all(&text, "$1");
    let text = text.replace('^', "");
    let text = HRULE_LINE.replace_all(&text, "");
    let text = LINE_MARKERS.replace_all(&text, "");
    let text = TRAILING_BLANKS.replace_all(&text, "");
    let text = MANY_NEWLINES.replace_all(&text, "\n\n");
    text.trim().to_string()
}
