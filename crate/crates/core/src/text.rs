//! Text normalization shared by corpus loading and paragraph-vector
//! training: lowercase, strip punctuation, split on whitespace, drop
//! stop-words, then reduce each token with a small suffix stemmer.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOP_WORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by", "for",
    "with", "about", "against", "between", "into", "through", "during", "before", "after",
    "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
    "again", "further", "then", "once", "here", "there", "when", "where", "why", "how", "all",
    "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "couldn", "didn",
    "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn", "needn", "shan",
    "shouldn", "wasn", "weren", "won", "wouldn", "also", "via", "using", "use", "allows",
];

fn stop_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOP_WORDS.iter().copied().collect())
}

pub fn is_stop_word(token: &str) -> bool {
    stop_words().contains(token)
}

/// One suffix rule: strip `suffix`, append `replacement`, but only when the
/// remaining stem keeps at least `min_stem` characters.
struct Rule {
    suffix: &'static str,
    replacement: &'static str,
    min_stem: usize,
}

// First matching rule wins; order matters ("sses" before "s").
const RULES: &[Rule] = &[
    Rule { suffix: "sses", replacement: "ss", min_stem: 1 },
    Rule { suffix: "ies", replacement: "y", min_stem: 2 },
    Rule { suffix: "ches", replacement: "ch", min_stem: 1 },
    Rule { suffix: "shes", replacement: "sh", min_stem: 1 },
    Rule { suffix: "xes", replacement: "x", min_stem: 1 },
    Rule { suffix: "ss", replacement: "ss", min_stem: 0 },
    Rule { suffix: "us", replacement: "us", min_stem: 0 },
    Rule { suffix: "is", replacement: "is", min_stem: 0 },
    Rule { suffix: "s", replacement: "", min_stem: 3 },
    Rule { suffix: "ing", replacement: "", min_stem: 4 },
    Rule { suffix: "ed", replacement: "", min_stem: 4 },
    Rule { suffix: "ly", replacement: "", min_stem: 4 },
];

fn stem_once(token: &str) -> Option<String> {
    for rule in RULES {
        if let Some(stem) = token.strip_suffix(rule.suffix) {
            if stem.chars().count() < rule.min_stem {
                continue;
            }
            if rule.suffix == rule.replacement {
                // Protected ending: no further stripping.
                return None;
            }
            return Some(format!("{stem}{}", rule.replacement));
        }
    }
    None
}

/// Applies the rule table until no rule fires. Every firing rule shortens
/// the token, so this terminates, and the result is a fixed point.
pub fn stem(token: &str) -> String {
    let mut current = token.to_string();
    while let Some(next) = stem_once(&current) {
        current = next;
    }
    current
}

pub fn normalize_text(raw: &str) -> Vec<String> {
    let cleaned: String = raw
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|tok| !is_stop_word(tok))
        .map(stem)
        .filter(|tok| tok.chars().count() >= 2 && !is_stop_word(tok))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_example_sentence() {
        assert_eq!(
            normalize_text("Fetches social media shares for a URL"),
            vec!["fetch", "social", "media", "share", "url"]
        );
    }

    #[test]
    fn empty_and_stop_word_inputs() {
        assert!(normalize_text("").is_empty());
        assert!(normalize_text("THE the The").is_empty());
        assert!(normalize_text("  ,.;!  ").is_empty());
    }

    #[test]
    fn stemmer_rules() {
        assert_eq!(stem("classes"), "class");
        assert_eq!(stem("queries"), "query");
        assert_eq!(stem("status"), "status");
        assert_eq!(stem("analysis"), "analysis");
        assert_eq!(stem("maps"), "map");
        assert_eq!(stem("streaming"), "stream");
        assert_eq!(stem("string"), "string");
        assert_eq!(stem("gas"), "gas");
    }

    #[test]
    fn apostrophes_join_words() {
        assert_eq!(normalize_text("user's photos"), vec!["user", "photo"]);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "[ -~]{0,80}") {
            let once = normalize_text(&raw);
            let twice = normalize_text(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn stem_is_a_fixed_point(word in "[a-z]{1,14}") {
            let s = stem(&word);
            prop_assert_eq!(stem(&s), s);
        }
    }
}
