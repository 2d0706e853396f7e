//! Rule-based sentence splitting, tokenisation and stopword handling.
//!
//! Splitting happens after `.`, `!` or `?` when the terminator is followed by
//! whitespace and an uppercase character, or by the end of the text. There is
//! no abbreviation dictionary, so `"Dr. Smith left."` splits in two.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Suffixes that mark a token as verb-like for the phrase and coherence heuristics.
const VERB_SUFFIXES: &[&str] = &["ing", "ed", "ize", "ise", "ify", "ate"];

/// A fixed stopword list. The built-in list has 127 English entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stopwords {
    words: BTreeSet<String>,
}

impl Stopwords {
    pub fn english() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Content word that does not look like a verb.
    pub fn is_noun_like(&self, token: &str) -> bool {
        if self.contains(token) || token.chars().all(|c| c.is_ascii_digit()) {
            return false;
        }
        !VERB_SUFFIXES
            .iter()
            .any(|suf| token.len() > suf.len() + 2 && token.ends_with(suf))
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

/// Sentences and their token lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Preprocessed {
    pub sentences: Vec<String>,
    pub tokens: Vec<Vec<String>>,
}

pub fn preprocess(text: &str) -> Preprocessed {
    let sentences = split_sentences(text);
    let tokens = sentences.iter().map(|s| tokenize(s)).collect();
    Preprocessed { sentences, tokens }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if is_terminator(c) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let at_end = j == chars.len();
            let split = at_end || (j > i + 1 && chars[j].1.is_uppercase());
            if split {
                let end = pos + c.len_utf8();
                push_trimmed(&mut out, &text[start..end]);
                start = if at_end { text.len() } else { chars[j].0 };
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if start < text.len() {
        push_trimmed(&mut out, &text[start..]);
    }
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// Lowercased, whitespace-delimited tokens with non-alphanumeric characters removed.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .filter_map(|w| {
            let t: String = w
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            (!t.is_empty()).then_some(t)
        })
        .collect()
}

/// Crude suffix stripping used where concept labels are compared.
pub fn stem_lite(token: &str) -> &str {
    for suf in ["ing", "es", "ed", "s"] {
        if token.len() > suf.len() + 2 && token.ends_with(suf) {
            return &token[..token.len() - suf.len()];
        }
    }
    token
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_list_has_127_entries() {
        assert_eq!(Stopwords::english().len(), 127);
    }

    #[test]
    fn two_sentences() {
        let p = preprocess("A b. C d.");
        assert_eq!(p.sentences, vec!["A b.", "C d."]);
        assert_eq!(p.tokens, vec![vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn abbreviation_splits_literally() {
        assert_eq!(split_sentences("Dr. Smith left."), vec!["Dr.", "Smith left."]);
    }

    #[test]
    fn lowercase_follow_does_not_split() {
        assert_eq!(split_sentences("It costs 3.5 dollars. ok then"), vec![
            "It costs 3.5 dollars. ok then"
        ]);
    }

    #[test]
    fn empty_text() {
        assert_eq!(preprocess(""), Preprocessed::default());
        assert_eq!(preprocess("   \n "), Preprocessed::default());
    }

    #[test]
    fn tokens_strip_punctuation() {
        assert_eq!(tokenize("Hello, World! (it's) --"), vec!["hello", "world", "its"]);
    }

    #[test]
    fn question_and_exclamation() {
        assert_eq!(split_sentences("Why? Because! Yes."), vec!["Why?", "Because!", "Yes."]);
    }

    #[test]
    fn noun_like() {
        let sw = Stopwords::english();
        assert!(sw.is_noun_like("drought"));
        assert!(!sw.is_noun_like("the"));
        assert!(!sw.is_noun_like("running"));
        assert!(!sw.is_noun_like("2015"));
    }
}
