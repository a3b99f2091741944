//! Word lists used by the offline heuristics (key-step overlap, intent rules).

use std::collections::BTreeSet;
use std::path::Path;

const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const BUILTIN_VERBS: &str = include_str!("../data/verbs.txt");

/// Lowercased alphanumeric tokens.
pub fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

fn parse_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub stopwords: BTreeSet<String>,
    pub verbs: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon { stopwords: parse_list(BUILTIN_STOPWORDS), verbs: parse_list(BUILTIN_VERBS) }
    }
}

impl Lexicon {
    pub fn load(stopwords: &Path, verbs: &Path) -> std::io::Result<Self> {
        Ok(Lexicon {
            stopwords: parse_list(&std::fs::read_to_string(stopwords)?),
            verbs: parse_list(&std::fs::read_to_string(verbs)?),
        })
    }

    pub fn is_stopword(&self, tok: &str) -> bool {
        self.stopwords.contains(tok)
    }

    pub fn is_verb(&self, tok: &str) -> bool {
        self.verbs.contains(tok)
    }

    /// Tokens of `s` with stopwords removed.
    pub fn content_tokens(&self, s: &str) -> Vec<String> {
        tokens(s).into_iter().filter(|t| !self.is_stopword(t)).collect()
    }
}
