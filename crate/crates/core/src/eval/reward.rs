use serde::{Deserialize, Serialize};

use super::rouge::{rouge_n, RougeMode};
use super::EvalError;
use crate::corpus::{Corpus, Similarity, SimilarityKind};

/// Coefficients of the ground-truth reward `alpha R1 + beta R2 - gamma Red`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RewardCoeffs {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta: 0.5,
            gamma: 0.25,
        }
    }
}

impl RewardCoeffs {
    pub fn combine(&self, rouge1: f64, rouge2: f64, redundancy: f64) -> f64 {
        self.alpha * rouge1 + self.beta * rouge2 - self.gamma * redundancy
    }
}

/// Summed pairwise tf-idf cosine between the selected sentences, divided by
/// the summary length in words.
pub fn redundancy(corpus: &Corpus, ids: &[usize]) -> f64 {
    let words = corpus.word_count(ids);
    if words == 0 {
        return 0.0;
    }
    let sim = Similarity::new(corpus, None);
    let mut total = 0.0;
    for (k, &i) in ids.iter().enumerate() {
        for &j in &ids[k + 1..] {
            total += sim.sentences(i, j, SimilarityKind::CosineTfidf).unwrap_or(0.0);
        }
    }
    total / words as f64
}

/// Ground-truth value of a summary against reference token lists.
pub fn ground_truth_reward<R: AsRef<str>>(
    coeffs: &RewardCoeffs,
    corpus: &Corpus,
    ids: &[usize],
    references: &[Vec<R>],
) -> Result<f64, EvalError> {
    let tokens = corpus.summary_tokens(ids);
    let r1 = rouge_n(&tokens, references, 1, RougeMode::Recall, None)?.value;
    let r2 = rouge_n(&tokens, references, 2, RougeMode::Recall, None)?.value;
    Ok(coeffs.combine(r1, r2, redundancy(corpus, ids)))
}
