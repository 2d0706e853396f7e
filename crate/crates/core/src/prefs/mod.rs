//! Pairwise concept preferences: which pair to ask about, and a
//! Bradley-Terry utility fitted to the answers.

mod bt;
mod partition;
mod query;
mod similarity;

use serde::{Deserialize, Serialize};

use crate::corpus::{Concept, Corpus, Embeddings};

pub use bt::{bt_probability, dot, fit_utility, gradient, log_likelihood, rank, FitOptions, RankerModel};
pub use partition::{
    cluster_of, labels_to_partition, partition_concepts, partition_objective, Partition, EXACT_PARTITION_LIMIT,
    PARTITION_RESTARTS,
};
pub use query::{next_query, QueryContext, QuerySelector, Strategy, BANDIT_EPSILON, COMMITTEE_SIZE};
pub use similarity::{concept_similarity, fit_theta, pair_features, similarity_matrix, DEFAULT_THETA, PAIR_FEATURES};

#[derive(Debug, thiserror::Error)]
pub enum PrefsError {
    #[error("need at least two concepts, have {0}")]
    NotEnoughConcepts(usize),
    #[error("query budget of {0} pairs is exhausted")]
    BudgetExhausted(usize),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("at least one preference is required")]
    NoPreferences,
    #[error("likelihood became non-finite at epoch {epoch} (last finite value {last})")]
    NonFinite { epoch: usize, last: f64 },
    #[error("{0}")]
    InvalidOption(String),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown concept {0}")]
    UnknownConcept(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Left,
    Right,
}

impl Winner {
    pub fn other(self) -> Self {
        match self {
            Winner::Left => Winner::Right,
            Winner::Right => Winner::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub left: usize,
    pub right: usize,
    pub winner: Winner,
    pub round: usize,
}

/// Per-concept features: the mean feature vector of its mention sentences,
/// its base score, and the embedding centroid of its tokens.
pub fn concept_features(
    corpus: &Corpus,
    concepts: &[Concept],
    embeddings: Option<&Embeddings>,
) -> (Vec<Vec<f64>>, Vec<String>) {
    let dim = embeddings.map_or(0, |e| e.dim);
    let mut schema: Vec<String> = corpus.feature_names.iter().map(|n| format!("mean_{n}")).collect();
    schema.push("base_score".into());
    schema.extend((0..dim).map(|k| format!("embedding_{k}")));
    let d = corpus.feature_names.len();
    let phi = concepts
        .iter()
        .map(|c| {
            let mut v = vec![0.0; d];
            for &sid in &c.mention_sentence_ids {
                for (a, x) in v.iter_mut().zip(&corpus.sentences[sid].features) {
                    *a += x;
                }
            }
            let m = c.mention_sentence_ids.len().max(1) as f64;
            v.iter_mut().for_each(|x| *x /= m);
            v.push(c.base_score);
            if let Some(e) = embeddings {
                v.extend(e.centroid(&c.tokens).unwrap_or_else(|| vec![0.0; dim]));
            }
            v
        })
        .collect();
    (phi, schema)
}
