//! Preference-driven summaries: a pool of concept-covering candidates, a
//! learned summary reward, and a linear TD policy over draft summaries.

mod policy;
mod pool;
mod reward;

use serde::{Deserialize, Serialize};

pub use policy::{learn_policy, EpisodicTask, Policy, PolicyOptions, SummaryTask};
pub use pool::{coverage_summary, generate_pool, CoverageObjective, SummaryPool};
pub use reward::{
    fit_reward, RewardMode, RewardModel, RewardOptions, RewardSamples, SummaryFeaturizer, SUMMARY_FEATURES,
};

#[derive(Debug, thiserror::Error)]
pub enum SummarizerError {
    #[error("summary pool is empty")]
    EmptyPool,
    #[error("no sentence fits a budget of {0} words")]
    InfeasibleBudget(usize),
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("loss became non-finite at epoch {epoch} (last finite value {last})")]
    NonFinite { epoch: usize, last: f64 },
    #[error("{0}")]
    InvalidOption(String),
}

/// A candidate summary with its pool objective and internal redundancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draft {
    pub sentence_ids: Vec<usize>,
    pub word_count: usize,
    pub objective: f64,
    pub redundancy: f64,
}

impl Draft {
    pub fn new(corpus: &crate::corpus::Corpus, mut sentence_ids: Vec<usize>) -> Self {
        sentence_ids.sort_unstable();
        Self {
            word_count: corpus.word_count(&sentence_ids),
            redundancy: crate::eval::redundancy(corpus, &sentence_ids),
            objective: 0.0,
            sentence_ids,
        }
    }
}

/// The highest-valued member under `value`; ties go to the smaller sum of
/// sentence ids, then the earlier member.
pub fn best_summary<'p>(pool: &'p [Draft], value: impl Fn(&Draft) -> f64) -> Result<&'p Draft, SummarizerError> {
    let mut best: Option<(&Draft, f64, usize)> = None;
    for d in pool {
        let v = value(d);
        let sum: usize = d.sentence_ids.iter().sum();
        if best.is_none_or(|(_, bv, bs)| v > bv || (v == bv && sum < bs)) {
            best = Some((d, v, sum));
        }
    }
    best.map(|b| b.0).ok_or(SummarizerError::EmptyPool)
}
