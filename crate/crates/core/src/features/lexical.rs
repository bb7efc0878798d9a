//! Lexical turn features: word count plus per-category counts against
//! editable category lexicons (case-insensitive exact-token matching).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CATEGORIES: [&str; 8] = [
    "negations",
    "comparisons",
    "interrogatives",
    "positive_emotion",
    "negative_emotion",
    "focus_past",
    "focus_present",
    "focus_future",
];

/// Category name -> lowercase token set.
#[derive(Debug, Clone)]
pub struct Lexicons {
    categories: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicons {
    pub fn new(categories: BTreeMap<String, BTreeSet<String>>) -> Result<Self> {
        for want in CATEGORIES {
            if !categories.contains_key(want) {
                return Err(Error::missing(format!("lexicon category `{want}` is missing")));
            }
        }
        Ok(Lexicons { categories })
    }

    fn count(&self, category: &str, tokens: &[String]) -> u64 {
        let set = &self.categories[category];
        tokens.iter().filter(|t| set.contains(t.as_str())).count() as u64
    }
}

/// Small seed lexicons; replace with fuller ones through the JSON file.
pub fn default_lexicons() -> Lexicons {
    let entries: [(&str, &[&str]); 8] = [
        ("negations", &["no", "not", "never", "none", "nothing", "n't"]),
        ("comparisons", &["greater", "best", "after", "more", "less", "better", "worse", "than"]),
        ("interrogatives", &["how", "when", "what", "why", "where", "who", "which"]),
        ("positive_emotion", &["love", "nice", "sweet", "happy", "good", "great", "glad"]),
        ("negative_emotion", &["hurt", "ugly", "nasty", "sad", "bad", "afraid", "angry"]),
        ("focus_past", &["ago", "did", "talked", "was", "were", "had", "been"]),
        ("focus_present", &["today", "is", "now", "am", "are", "being"]),
        ("focus_future", &["may", "will", "soon", "shall", "gonna", "tomorrow"]),
    ];
    let categories = entries
        .iter()
        .map(|(name, words)| {
            (
                name.to_string(),
                words.iter().map(|w| w.to_string()).collect(),
            )
        })
        .collect();
    Lexicons { categories }
}

/// Reads a `{category: [words...]}` JSON file covering all 8 categories.
pub fn load_lexicons(path: &Path) -> Result<Lexicons> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(&text)?;
    let categories = raw
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|w| w.to_lowercase()).collect()))
        .collect();
    Lexicons::new(categories)
}

pub fn write_lexicons(path: &Path, lex: &Lexicons) -> Result<()> {
    let raw: BTreeMap<&String, Vec<&String>> = lex
        .categories
        .iter()
        .map(|(k, v)| (k, v.iter().collect()))
        .collect();
    let text = serde_json::to_string_pretty(&raw)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalFeatures {
    pub word_count: u64,
    pub negations: u64,
    pub comparisons: u64,
    pub interrogatives: u64,
    pub positive_emotion: u64,
    pub negative_emotion: u64,
    pub focus_past: u64,
    pub focus_present: u64,
    pub focus_future: u64,
}

/// Counts tokens per category. Matching is case-insensitive and exact.
pub fn count_lexical(tokens: &[String], lexicons: &Lexicons) -> LexicalFeatures {
    let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    LexicalFeatures {
        word_count: lowered.len() as u64,
        negations: lexicons.count("negations", &lowered),
        comparisons: lexicons.count("comparisons", &lowered),
        interrogatives: lexicons.count("interrogatives", &lowered),
        positive_emotion: lexicons.count("positive_emotion", &lowered),
        negative_emotion: lexicons.count("negative_emotion", &lowered),
        focus_past: lexicons.count("focus_past", &lowered),
        focus_present: lexicons.count("focus_present", &lowered),
        focus_future: lexicons.count("focus_future", &lowered),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn seed_words_count_into_their_categories() {
        let lex = default_lexicons();
        let f = count_lexical(&toks(&["no", "never", "best"]), &lex);
        assert_eq!(f.negations, 2);
        assert_eq!(f.comparisons, 1);
        assert_eq!(f.word_count, 3);
    }

    #[test]
    fn empty_tokens_are_all_zero() {
        let f = count_lexical(&[], &default_lexicons());
        assert_eq!(f.word_count, 0);
        assert_eq!(f.negations, 0);
        assert_eq!(f.focus_future, 0);
    }

    #[test]
    fn unmatched_tokens_only_count_words() {
        let f = count_lexical(&toks(&["zyx", "qwe"]), &default_lexicons());
        assert_eq!(f.word_count, 2);
        assert_eq!(
            f.negations + f.comparisons + f.interrogatives + f.positive_emotion
                + f.negative_emotion + f.focus_past + f.focus_present + f.focus_future,
            0
        );
    }

    #[test]
    fn matching_is_case_insensitive() {
        let f = count_lexical(&toks(&["No", "NEVER", "BeSt"]), &default_lexicons());
        assert_eq!(f.negations, 2);
        assert_eq!(f.comparisons, 1);
    }

    #[test]
    fn missing_category_in_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.json");
        std::fs::write(&path, r#"{"negations": ["no"]}"#).unwrap();
        let err = load_lexicons(&path).unwrap_err();
        assert!(err.to_string().contains("comparisons"), "{err}");
    }

    #[test]
    fn lexicon_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.json");
        write_lexicons(&path, &default_lexicons()).unwrap();
        let lex = load_lexicons(&path).unwrap();
        let f = count_lexical(&toks(&["how", "when", "what"]), &lex);
        assert_eq!(f.interrogatives, 3);
    }
}
