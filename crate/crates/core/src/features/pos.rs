//! Part-of-speech tagging (Penn Treebank tagset) and per-post tag
//! frequencies.
//!
//! The pipeline only consumes *relative tag frequencies*, so the default
//! tagger is a deterministic baseline: a closed-class lexicon plus suffix
//! heuristics for open-class words. Swap in a statistical tagger through the
//! [`PosTagger`] trait without touching downstream code.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

/// Assigns one Penn Treebank tag per word of a sentence.
pub trait PosTagger: Send + Sync {
    fn tag_sentence(&self, words: &[String]) -> Vec<String>;
}

/// Existential "there" is only EX when a form of *be* follows; otherwise it
/// is the locative adverb RB.
static BE_FORMS: LazyLock<Vec<&'static str>> = LazyLock::new(|| {
    vec![
        "is", "am", "are", "was", "were", "be", "been", "being", "'s", "'re", "isn't", "aren't",
        "wasn't", "weren't",
    ]
});

static CLOSED_CLASS: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    let mut m = HashMap::new();
    let entries: &[(&str, &[&str])] = &[
        ("DT", &["the", "a", "an", "this", "that", "these", "those", "each", "every", "some", "any", "no", "another", "both", "all"]),
        ("PRP", &["i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "myself", "yourself", "himself", "herself", "itself", "ourselves", "themselves", "anyone", "everyone", "someone", "nobody", "everybody", "somebody", "anybody"]),
        ("PRP$", &["my", "your", "his", "its", "our", "their", "mine", "yours", "hers", "ours", "theirs"]),
        ("IN", &["in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during", "before", "after", "above", "below", "from", "of", "over", "under", "since", "until", "while", "because", "although", "though", "if", "unless", "whether", "than", "as", "like", "near", "without", "within", "upon", "despite", "toward", "towards", "across", "around", "off", "onto", "out", "up", "down", "behind", "beside", "among"]),
        ("TO", &["to"]),
        ("CC", &["and", "or", "but", "nor", "yet", "so", "either", "neither", "plus"]),
        ("MD", &["can", "could", "may", "might", "must", "shall", "should", "will", "would", "cannot", "can't", "won't", "couldn't", "shouldn't", "wouldn't", "mustn't"]),
        ("WDT", &["which", "whatever", "whichever"]),
        ("WP", &["who", "whom", "what", "whoever"]),
        ("WP$", &["whose"]),
        ("WRB", &["when", "where", "why", "how", "whenever", "wherever"]),
        ("RB", &["not", "n't", "never", "always", "often", "sometimes", "usually", "here", "now", "then", "soon", "already", "still", "just", "also", "too", "very", "quite", "rather", "almost", "again", "ever", "away", "back", "instead", "maybe", "perhaps", "really", "only", "even", "much", "more", "most", "less", "least", "far", "well", "anymore", "today", "yesterday", "tomorrow", "tonight"]),
        ("UH", &["oh", "ah", "wow", "hey", "hi", "hello", "yes", "yeah", "yep", "no", "nah", "ugh", "hmm", "ok", "okay", "please", "thanks", "bye", "goodbye"]),
        ("VB", &["be", "do", "have", "go", "get", "make", "know", "think", "take", "see", "come", "want", "look", "use", "find", "give", "tell", "work", "call", "try", "ask", "need", "feel", "leave", "put", "mean", "keep", "let", "begin", "seem", "help", "talk", "turn", "start", "show", "hear", "play", "run", "move", "live", "believe", "stop", "sleep", "eat", "cry", "write", "read", "say"]),
        ("VBP", &["am", "are", "'m", "'re", "'ve"]),
        ("VBZ", &["is", "'s", "has", "does", "says", "goes"]),
        ("VBD", &["was", "were", "did", "had", "said", "went", "got", "made", "knew", "thought", "took", "saw", "came", "wanted", "looked", "used", "found", "gave", "told", "worked", "called", "tried", "asked", "needed", "felt", "left", "put", "meant", "kept", "began", "seemed", "helped", "talked", "turned", "started", "showed", "heard", "played", "ran", "moved", "lived", "believed", "stopped", "slept", "ate", "cried", "wrote"]),
        ("VBN", &["been", "done", "gone", "gotten", "taken", "seen", "given", "known", "written", "spoken", "broken", "chosen", "eaten", "fallen", "forgotten", "hidden", "driven"]),
        ("VBG", &["being", "doing", "having", "going", "getting"]),
        ("EX", &[]),
        ("CD", &["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "twenty", "thirty", "hundred", "thousand", "million", "billion", "zero", "first", "second", "third"]),
        ("JJ", &["good", "bad", "new", "old", "great", "high", "low", "small", "large", "long", "short", "big", "little", "own", "other", "same", "right", "wrong", "able", "sure", "happy", "sad", "hard", "easy", "early", "late", "young", "important", "few", "many", "several", "such", "last", "next", "better", "worse", "best", "worst", "free", "full", "whole", "real", "true"]),
    ];
    for (tag, words) in entries {
        for w in *words {
            // First tag listed for a word wins; later duplicates (e.g. "no"
            // as DT vs UH) defer to the earlier, more frequent reading.
            m.entry(*w).or_insert(*tag);
        }
    }
    m
});

/// Clitic fragments produced by the tokenizer's apostrophe handling.
static CONTRACTION_TAILS: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    [
        ("'s", "VBZ"),
        ("'m", "VBP"),
        ("'re", "VBP"),
        ("'ve", "VBP"),
        ("'d", "MD"),
        ("'ll", "MD"),
        ("n't", "RB"),
    ]
    .into_iter()
    .collect()
});

/// Whole-token contractions (the default tokenizer does not split clitics).
/// The tag follows the token's dominant reading: pronoun+verb forms keep the
/// pronoun tag, negated auxiliaries keep the auxiliary tag.
static FULL_CONTRACTIONS: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    [
        ("i'm", "PRP"),
        ("i've", "PRP"),
        ("i'll", "PRP"),
        ("i'd", "PRP"),
        ("you're", "PRP"),
        ("you've", "PRP"),
        ("you'll", "PRP"),
        ("you'd", "PRP"),
        ("he's", "PRP"),
        ("he'd", "PRP"),
        ("he'll", "PRP"),
        ("she's", "PRP"),
        ("she'd", "PRP"),
        ("she'll", "PRP"),
        ("it's", "PRP"),
        ("it'll", "PRP"),
        ("we're", "PRP"),
        ("we've", "PRP"),
        ("we'll", "PRP"),
        ("we'd", "PRP"),
        ("they're", "PRP"),
        ("they've", "PRP"),
        ("they'll", "PRP"),
        ("they'd", "PRP"),
        ("there's", "EX"),
        ("that's", "DT"),
        ("what's", "WP"),
        ("who's", "WP"),
        ("here's", "RB"),
        ("let's", "VB"),
        ("don't", "VBP"),
        ("doesn't", "VBZ"),
        ("didn't", "VBD"),
        ("isn't", "VBZ"),
        ("aren't", "VBP"),
        ("wasn't", "VBD"),
        ("weren't", "VBD"),
        ("haven't", "VBP"),
        ("hasn't", "VBZ"),
        ("hadn't", "VBD"),
        ("ain't", "VBP"),
    ]
    .into_iter()
    .collect()
});

/// Deterministic lexicon + suffix tagger.
#[derive(Debug, Default, Clone, Copy)]
pub struct BaselineTagger;

impl BaselineTagger {
    pub fn new() -> BaselineTagger {
        BaselineTagger
    }

    fn tag_open_class(word: &str, lower: &str, mid_sentence: bool) -> String {
        if lower.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',' || c == '-')
            && lower.chars().any(|c| c.is_ascii_digit())
        {
            return "CD".to_string();
        }
        // Unknown capitalized words away from sentence start read as proper
        // nouns.
        if mid_sentence && word.chars().next().is_some_and(|c| c.is_uppercase()) {
            return "NNP".to_string();
        }
        if lower.ends_with("ly") && lower.len() > 3 {
            return "RB".to_string();
        }
        if lower.ends_with("ing") && lower.len() > 4 {
            return "VBG".to_string();
        }
        if lower.ends_with("ed") && lower.len() > 3 {
            return "VBD".to_string();
        }
        if lower.ends_with("est") && lower.len() > 4 {
            return "JJS".to_string();
        }
        for adj in ["able", "ible", "ous", "ful", "less", "ive", "ish", "al"] {
            if lower.ends_with(adj) && lower.len() > adj.len() + 1 {
                return "JJ".to_string();
            }
        }
        for noun in ["tion", "sion", "ness", "ment", "ship", "ism", "ity", "ance", "ence"] {
            if lower.ends_with(noun) && lower.len() > noun.len() + 1 {
                return "NN".to_string();
            }
        }
        if lower.ends_with('s') && !lower.ends_with("ss") && lower.len() > 3 {
            return "NNS".to_string();
        }
        "NN".to_string()
    }
}

impl PosTagger for BaselineTagger {
    fn tag_sentence(&self, words: &[String]) -> Vec<String> {
        words
            .iter()
            .enumerate()
            .map(|(i, word)| {
                let lower = word.to_lowercase();
                if lower == "there" {
                    let be_next = words
                        .get(i + 1)
                        .map(|next| BE_FORMS.contains(&next.to_lowercase().as_str()))
                        .unwrap_or(false);
                    return if be_next { "EX" } else { "RB" }.to_string();
                }
                if let Some(tag) = FULL_CONTRACTIONS.get(lower.as_str()) {
                    return tag.to_string();
                }
                if let Some(tag) = CONTRACTION_TAILS.get(lower.as_str()) {
                    return tag.to_string();
                }
                if let Some(tag) = CLOSED_CLASS.get(lower.as_str()) {
                    return tag.to_string();
                }
                Self::tag_open_class(word, &lower, i > 0)
            })
            .collect()
    }
}

/// Relative tag frequencies across all sentences of a post; `None` when the
/// post has no word tokens. Frequencies sum to 1.
pub fn pos_frequencies(
    sentences: &[Vec<String>],
    tagger: &dyn PosTagger,
) -> Option<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for sentence in sentences {
        if sentence.is_empty() {
            continue;
        }
        for tag in tagger.tag_sentence(sentence) {
            *counts.entry(tag).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(
        counts
            .into_iter()
            .map(|(tag, n)| (tag, n as f64 / total as f64))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(words: &[&str]) -> Vec<String> {
        let words: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        BaselineTagger.tag_sentence(&words)
    }

    #[test]
    fn frozen_examples() {
        assert_eq!(tag(&["I", "quickly", "ran", "there"]), ["PRP", "RB", "VBD", "RB"]);
        assert_eq!(tag(&["There", "is", "food", "there"]), ["EX", "VBZ", "NN", "RB"]);
    }

    #[test]
    fn closed_class_words() {
        assert_eq!(tag(&["the"]), ["DT"]);
        assert_eq!(tag(&["to"]), ["TO"]);
        assert_eq!(tag(&["and"]), ["CC"]);
        assert_eq!(tag(&["should"]), ["MD"]);
        assert_eq!(tag(&["my"]), ["PRP$"]);
        assert_eq!(tag(&["whose"]), ["WP$"]);
    }

    #[test]
    fn contraction_tails() {
        assert_eq!(tag(&["I", "'m", "fine"]), ["PRP", "VBP", "NN"]);
        assert_eq!(tag(&["do", "n't", "go"]), ["VB", "RB", "VB"]);
        assert_eq!(tag(&["she", "'ll", "win"]), ["PRP", "MD", "NN"]);
    }

    #[test]
    fn suffix_heuristics() {
        assert_eq!(tag(&["walking"]), ["VBG"]);
        assert_eq!(tag(&["jumped"]), ["VBD"]);
        assert_eq!(tag(&["strangest"]), ["JJS"]);
        assert_eq!(tag(&["happiness"]), ["NN"]);
        assert_eq!(tag(&["wonderful"]), ["JJ"]);
        assert_eq!(tag(&["tables"]), ["NNS"]);
        assert_eq!(tag(&["42"]), ["CD"]);
        assert_eq!(tag(&["3.5"]), ["CD"]);
    }

    #[test]
    fn capitalized_mid_sentence_is_proper_noun() {
        assert_eq!(tag(&["visited", "Paris"]), ["VBD", "NNP"]);
        // Sentence-initial capitalization is not evidence.
        assert_eq!(tag(&["Paris"]), ["NNS"]);
    }

    #[test]
    fn existential_there_requires_be() {
        assert_eq!(tag(&["there", "'s", "hope"]), ["EX", "VBZ", "NN"]);
        assert_eq!(tag(&["There's", "hope"]), ["EX", "NN"]);
        assert_eq!(tag(&["go", "there", "please"]), ["VB", "RB", "UH"]);
    }

    #[test]
    fn whole_token_contractions() {
        assert_eq!(tag(&["I'm", "tired"]), ["PRP", "VBD"]);
        assert_eq!(tag(&["don't", "panic"]), ["VBP", "NN"]);
        assert_eq!(tag(&["it's", "fine"]), ["PRP", "NN"]);
    }

    #[test]
    fn frequencies_sum_to_one() {
        let sentences = vec![
            vec!["I".to_string(), "ran".to_string()],
            vec!["There".to_string(), "is".to_string(), "food".to_string()],
        ];
        let freq = pos_frequencies(&sentences, &BaselineTagger).unwrap();
        let total: f64 = freq.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(freq.get("PRP"), Some(&0.2));
        assert_eq!(freq.get("EX"), Some(&0.2));
    }

    #[test]
    fn no_tokens_is_none() {
        assert!(pos_frequencies(&[], &BaselineTagger).is_none());
        assert!(pos_frequencies(&[vec![]], &BaselineTagger).is_none());
    }
}
