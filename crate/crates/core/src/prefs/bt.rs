use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PreferencePair, PrefsError, Winner};

/// Linear utility `U(c) = w . phi(c)` fitted to pairwise preferences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub w: Vec<f64>,
    pub phi_schema: Vec<String>,
    /// Log-likelihood before training and after each epoch.
    #[serde(default)]
    pub fit_log: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub lr: f64,
    pub epochs: usize,
    /// Shuffled per-pair updates instead of full-batch steps.
    pub stochastic: bool,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 1000,
            stochastic: false,
            seed: 0,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Probability that `i` is preferred to `j`: `1 / (1 + exp(U(j) - U(i)))`.
pub fn bt_probability(u_i: f64, u_j: f64) -> f64 {
    1.0 / (1.0 + (u_j - u_i).exp())
}

/// Log of the logistic function, stable for large magnitudes.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

impl RankerModel {
    pub fn zeros(phi_schema: Vec<String>) -> Self {
        Self {
            w: vec![0.0; phi_schema.len()],
            phi_schema,
            fit_log: Vec::new(),
        }
    }

    pub fn utility(&self, phi: &[f64]) -> f64 {
        dot(&self.w, phi)
    }

    pub fn utilities(&self, phi: &[Vec<f64>]) -> Vec<f64> {
        phi.iter().map(|p| self.utility(p)).collect()
    }
}

fn oriented(p: &PreferencePair) -> (usize, usize) {
    match p.winner {
        Winner::Left => (p.left, p.right),
        Winner::Right => (p.right, p.left),
    }
}

pub fn log_likelihood(w: &[f64], prefs: &[PreferencePair], phi: &[Vec<f64>]) -> f64 {
    prefs
        .iter()
        .map(|p| {
            let (a, b) = oriented(p);
            log_sigmoid(dot(w, &phi[a]) - dot(w, &phi[b]))
        })
        .sum()
}

/// Gradient of the log-likelihood of the given preferences.
pub fn gradient(w: &[f64], prefs: &[PreferencePair], phi: &[Vec<f64>]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for p in prefs {
        let (a, b) = oriented(p);
        let miss = 1.0 - bt_probability(dot(w, &phi[a]), dot(w, &phi[b]));
        for ((gj, xa), xb) in g.iter_mut().zip(&phi[a]).zip(&phi[b]) {
            *gj += miss * (xa - xb);
        }
    }
    g
}

/// Maximum-likelihood Bradley-Terry fit by gradient ascent. `phi[i]` is the
/// feature vector of concept index `i` as used in the preference pairs.
pub fn fit_utility(
    prefs: &[PreferencePair],
    phi: &[Vec<f64>],
    phi_schema: Vec<String>,
    opts: &FitOptions,
) -> Result<RankerModel, PrefsError> {
    if prefs.is_empty() {
        return Err(PrefsError::NoPreferences);
    }
    if !(opts.lr > 0.0) {
        return Err(PrefsError::InvalidOption(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let dim = phi_schema.len();
    if let Some(bad) = phi.iter().find(|p| p.len() != dim) {
        return Err(PrefsError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if let Some(p) = prefs.iter().find(|p| p.left.max(p.right) >= phi.len()) {
        return Err(PrefsError::UnknownConcept(p.left.max(p.right)));
    }
    let mut model = RankerModel::zeros(phi_schema);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..prefs.len()).collect();
    model.fit_log.push(log_likelihood(&model.w, prefs, phi));
    for epoch in 1..=opts.epochs {
        if opts.stochastic {
            order.shuffle(&mut rng);
            for &i in &order {
                let g = gradient(&model.w, std::slice::from_ref(&prefs[i]), phi);
                for (w, gj) in model.w.iter_mut().zip(g) {
                    *w += opts.lr * gj;
                }
            }
        } else {
            let g = gradient(&model.w, prefs, phi);
            for (w, gj) in model.w.iter_mut().zip(g) {
                *w += opts.lr * gj;
            }
        }
        let ll = log_likelihood(&model.w, prefs, phi);
        if !ll.is_finite() || model.w.iter().any(|w| !w.is_finite()) {
            return Err(PrefsError::NonFinite {
                epoch,
                last: *model.fit_log.last().expect("initial entry"),
            });
        }
        model.fit_log.push(ll);
    }
    Ok(model)
}

/// `R(c)`: how many items have strictly lower utility. Ties share a rank.
pub fn rank(utilities: &[f64]) -> Vec<usize> {
    let mut sorted = utilities.to_vec();
    sorted.sort_by(f64::total_cmp);
    utilities.iter().map(|u| sorted.partition_point(|x| x < u)).collect()
}
