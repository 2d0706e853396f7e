use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SummarizerError;
use crate::corpus::{Concept, Corpus};
use crate::eval::{redundancy, rouge_n, RougeMode};
use crate::prefs::{bt_probability, dot, Winner};

pub const SUMMARY_FEATURES: [&str; 7] = [
    "mean_concept_rank",
    "rank_coverage",
    "top_decile_coverage",
    "length_ratio",
    "redundancy",
    "rouge1",
    "rouge2",
];

/// Summary features for reward and value models.
#[derive(Debug, Clone)]
pub struct SummaryFeaturizer<'a> {
    corpus: &'a Corpus,
    sentence_concepts: Vec<Vec<usize>>,
    /// Rank of each concept id, scaled into `[0, 1]`.
    scaled_rank: Vec<f64>,
    top: BTreeSet<usize>,
    budget: usize,
    references: Option<&'a [Vec<String>]>,
}

impl<'a> SummaryFeaturizer<'a> {
    /// `ranks[c]` is the rank value of concept id `c`. The ROUGE features are
    /// zero unless `references` is given.
    pub fn new(
        corpus: &'a Corpus,
        concepts: &[Concept],
        ranks: &[usize],
        budget: usize,
        references: Option<&'a [Vec<String>]>,
    ) -> Self {
        let mut sentence_concepts = vec![Vec::new(); corpus.len()];
        for c in concepts {
            for &s in &c.mention_sentence_ids {
                sentence_concepts[s].push(c.concept_id);
            }
        }
        let n = ranks.len();
        let scale = n.saturating_sub(1).max(1) as f64;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&c| (std::cmp::Reverse(ranks[c]), c));
        Self {
            corpus,
            sentence_concepts,
            scaled_rank: ranks.iter().map(|&r| r as f64 / scale).collect(),
            top: order.into_iter().take(n.div_ceil(10)).collect(),
            budget,
            references: references.filter(|r| r.iter().any(|x| !x.is_empty())),
        }
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn features(&self, ids: &[usize]) -> Vec<f64> {
        let covered: BTreeSet<usize> = ids.iter().flat_map(|&i| self.sentence_concepts[i].iter().copied()).collect();
        let mean_rank = if covered.is_empty() {
            0.0
        } else {
            covered.iter().map(|&c| self.scaled_rank[c]).sum::<f64>() / covered.len() as f64
        };
        let total: f64 = self.scaled_rank.iter().sum();
        let rank_coverage = if total > 0.0 {
            covered.iter().map(|&c| self.scaled_rank[c]).sum::<f64>() / total
        } else {
            0.0
        };
        let top = if self.top.is_empty() {
            0.0
        } else {
            self.top.intersection(&covered).count() as f64 / self.top.len() as f64
        };
        let (r1, r2) = match self.references {
            Some(refs) if !ids.is_empty() => {
                let toks = self.corpus.summary_tokens(ids);
                (
                    rouge_n(&toks, refs, 1, RougeMode::Recall, None).map_or(0.0, |s| s.value),
                    rouge_n(&toks, refs, 2, RougeMode::Recall, None).map_or(0.0, |s| s.value),
                )
            }
            _ => (0.0, 0.0),
        };
        vec![
            mean_rank,
            rank_coverage,
            top,
            self.corpus.word_count(ids) as f64 / self.budget.max(1) as f64,
            redundancy(self.corpus, ids),
            r1,
            r2,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    PointMse,
    PairCe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub mode: RewardMode,
    pub w: Vec<f64>,
    pub schema: Vec<String>,
    /// Loss before training and after each epoch.
    #[serde(default)]
    pub loss_log: Vec<f64>,
}

impl RewardModel {
    pub fn value(&self, features: &[f64]) -> f64 {
        dot(&self.w, features)
    }
}

/// Training data for [`fit_reward`].
#[derive(Debug, Clone)]
pub enum RewardSamples {
    /// Feature vectors with target values.
    Points(Vec<(Vec<f64>, f64)>),
    /// Two feature vectors and which one the user preferred.
    Pairs(Vec<(Vec<f64>, Vec<f64>, Winner)>),
}

impl RewardSamples {
    fn len(&self) -> usize {
        match self {
            RewardSamples::Points(p) => p.len(),
            RewardSamples::Pairs(p) => p.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOptions {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for RewardOptions {
    fn default() -> Self {
        Self { lr: 5e-3, epochs: 2000 }
    }
}

fn loss_and_grad(samples: &RewardSamples, w: &[f64]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; w.len()];
    let n = samples.len() as f64;
    let mut loss = 0.0;
    match samples {
        RewardSamples::Points(points) => {
            for (x, y) in points {
                let err = dot(w, x) - y;
                loss += err * err;
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj += 2.0 * err * xj;
                }
            }
        }
        RewardSamples::Pairs(pairs) => {
            for (a, b, winner) in pairs {
                let (win, lose) = match winner {
                    Winner::Left => (a, b),
                    Winner::Right => (b, a),
                };
                let p = bt_probability(dot(w, win), dot(w, lose));
                loss -= p.max(f64::MIN_POSITIVE).ln();
                for ((gj, xw), xl) in g.iter_mut().zip(win).zip(lose) {
                    *gj -= (1.0 - p) * (xw - xl);
                }
            }
        }
    }
    g.iter_mut().for_each(|x| *x /= n);
    (loss / n, g)
}

/// Full-batch gradient descent on the mean squared error (points) or the
/// mean cross-entropy of the preference likelihood (pairs).
pub fn fit_reward(samples: &RewardSamples, schema: Vec<String>, opts: &RewardOptions) -> Result<RewardModel, SummarizerError> {
    if samples.len() < 2 {
        return Err(SummarizerError::TooFewSamples(samples.len()));
    }
    if !(opts.lr > 0.0) {
        return Err(SummarizerError::InvalidOption(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let dim = schema.len();
    let dims_ok = match samples {
        RewardSamples::Points(p) => p.iter().all(|(x, _)| x.len() == dim),
        RewardSamples::Pairs(p) => p.iter().all(|(a, b, _)| a.len() == dim && b.len() == dim),
    };
    if !dims_ok {
        return Err(SummarizerError::InvalidOption(format!("every feature vector must have {dim} entries")));
    }
    let mode = match samples {
        RewardSamples::Points(_) => RewardMode::PointMse,
        RewardSamples::Pairs(_) => RewardMode::PairCe,
    };
    let mut w = vec![0.0; dim];
    let mut log = vec![loss_and_grad(samples, &w).0];
    for epoch in 1..=opts.epochs {
        let (_, g) = loss_and_grad(samples, &w);
        for (wj, gj) in w.iter_mut().zip(g) {
            *wj -= opts.lr * gj;
        }
        let (loss, _) = loss_and_grad(samples, &w);
        if !loss.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(SummarizerError::NonFinite {
                epoch,
                last: *log.last().expect("initial loss"),
            });
        }
        log.push(loss);
    }
    Ok(RewardModel {
        mode,
        w,
        schema,
        loss_log: log,
    })
}
