//! Joint clustering and nearest-neighbour classification with per-cluster
//! feature weights, plus coverage/coherence/redundancy summary selection.
//!
//! Distances use squared weights, `d_w(x, c) = sqrt(sum_j w_j^2 (x_j - c_j)^2)`,
//! so that the clustering term differentiates to `2 w (x - c)^2` in `w` and to
//! `-2 w^2 (x - c)` in `c`.

mod importance;
mod labels;
mod objective;
mod select;
mod train;

use serde::{Deserialize, Serialize};

pub use importance::{feature_importance, FeatureImportance, ImportanceRow};
pub use labels::{label_sentences, LabeledSet};
pub use objective::{nn_error_surrogate, objective, objective_gradients, Objective, SurrogateReport};
pub use select::{score_components, select_summary, ScoreBreakdown, Summary, SummaryScorer, EXACT_SEARCH_LIMIT};
pub use train::{silhouette, train, KChoice};

pub const MODEL_SCHEMA: &str = "persum.exdos.v1";
pub const MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ExdosError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("every sample lacks a same-label or different-label neighbour in its cluster")]
    LonelyLabel,
    #[error("training data needs both labels")]
    SingleLabel,
    #[error("need at least {needed} samples for K={k}, found {found}")]
    TooFewSamples { needed: usize, found: usize, k: usize },
    #[error("K must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("objective became non-finite at iteration {iteration} (last finite J = {last})")]
    NonFiniteObjective { iteration: usize, last: f64 },
    #[error("model is not trained for this corpus")]
    UntrainedModel,
    #[error("budget of {budget} words admits no sentence (shortest is {shortest})")]
    InfeasibleBudget { budget: usize, shortest: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExDosHyper {
    /// Weight learning rate.
    pub alpha_lr: f64,
    /// Centroid learning rate.
    pub gamma_lr: f64,
    /// Sigmoid slope of the nearest-neighbour surrogate.
    pub beta_sigmoid: f64,
    pub lambda_coh: f64,
    pub phi_red: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ExDosHyper {
    fn default() -> Self {
        Self {
            alpha_lr: 1e-3,
            gamma_lr: 1e-3,
            beta_sigmoid: 5.0,
            lambda_coh: 0.5,
            phi_red: 0.5,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

impl ExDosHyper {
    pub fn validate(&self) -> Result<(), ExdosError> {
        let bad = |m: &str| Err(ExdosError::InvalidHyper(m.to_string()));
        if !(self.alpha_lr >= 0.0 && self.gamma_lr >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.beta_sigmoid > 0.0) {
            return bad("beta_sigmoid must be positive");
        }
        if !(self.lambda_coh >= 0.0 && self.phi_red >= 0.0) {
            return bad("lambda_coh and phi_red must be non-negative");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExDosModel {
    pub schema: String,
    /// `weights[k]` is the weight column of cluster `k` (length d).
    #[serde(rename = "W")]
    pub weights: Vec<Vec<f64>>,
    /// `centroids[k]` is the centre of cluster `k` (length d).
    #[serde(rename = "C")]
    pub centroids: Vec<Vec<f64>>,
    pub polarity: Vec<Polarity>,
    pub hyper: ExDosHyper,
    pub feature_names: Vec<String>,
    /// Cluster of each training sample, in `LabeledSet` order.
    #[serde(default)]
    pub assignment: Vec<usize>,
    /// Objective value before training and after each iteration.
    #[serde(default)]
    pub objective_trace: Vec<f64>,
}

impl ExDosModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid under each cluster's own weights; ties go to the lower index.
    pub fn nearest_cluster(&self, x: &[f64]) -> usize {
        nearest(&self.weights, &self.centroids, x)
    }

    /// Distance to the nearest centroid of the given polarity, if any cluster has it.
    pub fn nearest_polar_distance(&self, x: &[f64], polarity: Polarity) -> Option<f64> {
        (0..self.k())
            .filter(|&k| self.polarity[k] == polarity)
            .map(|k| weighted_distance_unchecked(x, &self.centroids[k], &self.weights[k]))
            .min_by(f64::total_cmp)
    }

    pub fn check_dim(&self, d: usize) -> Result<(), ExdosError> {
        if self.k() < 2 || self.weights.len() != self.k() || self.polarity.len() != self.k() {
            return Err(ExdosError::UntrainedModel);
        }
        if self.dim() != d {
            return Err(ExdosError::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub(crate) fn nearest(weights: &[Vec<f64>], centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, (w, c)) in weights.iter().zip(centroids).enumerate() {
        let d = weighted_sq_distance(x, c, w);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

pub fn weighted_distance(x: &[f64], c: &[f64], w: &[f64]) -> Result<f64, ExdosError> {
    if x.len() != c.len() || x.len() != w.len() {
        return Err(ExdosError::DimensionMismatch {
            expected: x.len(),
            found: if c.len() != x.len() { c.len() } else { w.len() },
        });
    }
    Ok(weighted_distance_unchecked(x, c, w))
}

pub(crate) fn weighted_sq_distance(x: &[f64], c: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .zip(w)
        .map(|((a, b), w)| {
            let d = a - b;
            w * w * d * d
        })
        .sum()
}

pub(crate) fn weighted_distance_unchecked(x: &[f64], c: &[f64], w: &[f64]) -> f64 {
    weighted_sq_distance(x, c, w).sqrt()
}

/// `1 / (1 + exp(beta (1 - z)))`.
pub fn sigmoid_beta(z: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (beta * (1.0 - z)).exp())
}

/// Derivative of [`sigmoid_beta`] with respect to `z`.
pub fn sigmoid_beta_prime(z: f64, beta: f64) -> f64 {
    let e = (beta * (1.0 - z)).exp();
    if !e.is_finite() {
        return 0.0;
    }
    beta * e / ((1.0 + e) * (1.0 + e))
}
