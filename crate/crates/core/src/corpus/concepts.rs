use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

/// Phrases longer than this are dropped rather than truncated.
pub const MAX_PHRASE_TOKENS: usize = 5;
const MIN_FREQUENCY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptUnit {
    Unigram,
    Bigram,
    Phrase,
    /// Whole sentences as concepts; built by the adaptive session, not here.
    Sentence,
}

impl ConceptUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            ConceptUnit::Unigram => "unigram",
            ConceptUnit::Bigram => "bigram",
            ConceptUnit::Phrase => "phrase",
            ConceptUnit::Sentence => "sentence",
        }
    }
}

impl std::str::FromStr for ConceptUnit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unigram" => Ok(ConceptUnit::Unigram),
            "bigram" => Ok(ConceptUnit::Bigram),
            "phrase" => Ok(ConceptUnit::Phrase),
            "sentence" => Ok(ConceptUnit::Sentence),
            other => Err(format!("unknown concept unit `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptStatus {
    Unqueried,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: usize,
    pub label: String,
    pub tokens: Vec<String>,
    pub unit: ConceptUnit,
    pub mention_sentence_ids: BTreeSet<usize>,
    /// Corpus salience: frequency normalised by the most frequent concept.
    pub base_score: f64,
    pub user_weight: f64,
    pub status: ConceptStatus,
}

impl Concept {
    /// True when the label occurs in `tokens`: as a member for unigrams,
    /// contiguously otherwise.
    pub fn occurs_in<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        let n = self.tokens.len();
        if n == 0 || tokens.len() < n {
            return false;
        }
        tokens
            .windows(n)
            .any(|w| w.iter().zip(&self.tokens).all(|(a, b)| a.as_ref() == b))
    }
}

pub fn extract_concepts(corpus: &Corpus, unit: ConceptUnit) -> Result<Vec<Concept>, CorpusError> {
    let sw = &corpus.stopwords;
    let mut freq: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut mentions: BTreeMap<Vec<String>, BTreeSet<usize>> = BTreeMap::new();
    let mut record = |key: Vec<String>, sid: usize| {
        *freq.entry(key.clone()).or_default() += 1;
        mentions.entry(key).or_default().insert(sid);
    };

    for s in &corpus.sentences {
        let toks = &s.tokens;
        match unit {
            ConceptUnit::Unigram => {
                for t in toks.iter().filter(|t| !sw.contains(t)) {
                    record(vec![t.clone()], s.id);
                }
            }
            ConceptUnit::Bigram => {
                for w in toks.windows(2) {
                    if !sw.contains(&w[0]) && !sw.contains(&w[1]) {
                        record(w.to_vec(), s.id);
                    }
                }
            }
            ConceptUnit::Phrase => {
                let mut i = 0;
                while i < toks.len() {
                    if sw.contains(&toks[i]) {
                        i += 1;
                        continue;
                    }
                    let start = i;
                    while i < toks.len() && !sw.contains(&toks[i]) {
                        i += 1;
                    }
                    let run = &toks[start..i];
                    if (2..=MAX_PHRASE_TOKENS).contains(&run.len()) && run.iter().any(|t| sw.is_noun_like(t)) {
                        record(run.to_vec(), s.id);
                    }
                }
            }
            ConceptUnit::Sentence => return Err(CorpusError::UnsupportedUnit(unit.as_str().into())),
        }
    }

    let max = freq.values().copied().filter(|&f| f >= MIN_FREQUENCY).max();
    let Some(max) = max else {
        return Err(CorpusError::EmptyConceptSet);
    };
    let mut concepts: Vec<Concept> = freq
        .into_iter()
        .filter(|(_, f)| *f >= MIN_FREQUENCY)
        .map(|(tokens, f)| {
            let base = f as f64 / max as f64;
            Concept {
                concept_id: 0,
                label: tokens.join(" "),
                mention_sentence_ids: mentions.remove(&tokens).unwrap_or_default(),
                tokens,
                unit,
                base_score: base,
                user_weight: base,
                status: ConceptStatus::Unqueried,
            }
        })
        .collect();
    concepts.sort_by(|a, b| b.base_score.total_cmp(&a.base_score).then_with(|| a.label.cmp(&b.label)));
    for (i, c) in concepts.iter_mut().enumerate() {
        c.concept_id = i;
    }
    Ok(concepts)
}
