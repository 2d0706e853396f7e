use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bt::{bt_probability, fit_utility, FitOptions, RankerModel};
use super::{PreferencePair, PrefsError};

/// Everything a query strategy may look at. Concepts are indices `0..n`.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    /// Symmetric concept similarity matrix.
    pub sim: &'a [Vec<f64>],
    /// Cluster index of each concept.
    pub clusters: &'a [usize],
    pub phi: &'a [Vec<f64>],
    pub phi_schema: &'a [String],
    pub history: &'a [PreferencePair],
    /// Total number of pair queries allowed.
    pub budget: usize,
}

impl QueryContext<'_> {
    fn n(&self) -> usize {
        self.sim.len()
    }

    fn queried(&self) -> BTreeSet<(usize, usize)> {
        self.history.iter().map(|p| (p.left.min(p.right), p.left.max(p.right))).collect()
    }

    fn open_pairs(&self) -> Result<Vec<(usize, usize)>, PrefsError> {
        let n = self.n();
        if n < 2 {
            return Err(PrefsError::NotEnoughConcepts(n));
        }
        if self.history.len() >= self.budget {
            return Err(PrefsError::BudgetExhausted(self.budget));
        }
        let done = self.queried();
        let open: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !done.contains(p))
            .collect();
        if open.is_empty() {
            return Err(PrefsError::BudgetExhausted(self.budget));
        }
        Ok(open)
    }

    /// Mean of the four cross similarities between two pairs.
    fn pair_similarity(&self, (a, b): (usize, usize), (c, d): (usize, usize)) -> f64 {
        (self.sim[a][c] + self.sim[a][d] + self.sim[b][c] + self.sim[b][d]) / 4.0
    }

    /// Highest similarity of a candidate pair to any already queried pair.
    fn novelty_key(&self, p: (usize, usize)) -> f64 {
        self.history
            .iter()
            .map(|h| self.pair_similarity(p, (h.left, h.right)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn current_model(&self, prefs: &[PreferencePair], seed: u64) -> RankerModel {
        if prefs.is_empty() {
            return RankerModel::zeros(self.phi_schema.to_vec());
        }
        let opts = FitOptions {
            seed,
            ..FitOptions::default()
        };
        fit_utility(prefs, self.phi, self.phi_schema.to_vec(), &opts)
            .unwrap_or_else(|_| RankerModel::zeros(self.phi_schema.to_vec()))
    }
}

fn argmin_by<K: PartialOrd>(pairs: &[(usize, usize)], key: impl Fn((usize, usize)) -> K) -> (usize, usize) {
    let mut best = pairs[0];
    let mut best_k = key(best);
    for &p in &pairs[1..] {
        let k = key(p);
        if k < best_k {
            best = p;
            best_k = k;
        }
    }
    best
}

/// Diverse-then-similar pair selection. Before half the budget is spent the
/// pair spans two clusters, afterwards it lies inside one; either way it is
/// the pair least similar to everything asked so far. Remaining ties prefer
/// the least similar pair early and the most similar late, then the smaller ids.
pub fn next_query(ctx: &QueryContext<'_>) -> Result<(usize, usize), PrefsError> {
    let open = ctx.open_pairs()?;
    let early = 2 * ctx.history.len() < ctx.budget;
    let eligible: Vec<(usize, usize)> = open
        .iter()
        .copied()
        .filter(|&(a, b)| (ctx.clusters[a] != ctx.clusters[b]) == early)
        .collect();
    let pool = if eligible.is_empty() { &open } else { &eligible };
    let sign = if early { 1.0 } else { -1.0 };
    Ok(argmin_by(pool, |p| (ctx.novelty_key(p), sign * ctx.sim[p.0][p.1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Heuristic,
    Random,
    Uncertainty,
    Change,
    Committee,
    Conformal,
    Bandit,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Heuristic,
        Strategy::Random,
        Strategy::Uncertainty,
        Strategy::Change,
        Strategy::Committee,
        Strategy::Conformal,
        Strategy::Bandit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Heuristic => "heuristic",
            Strategy::Random => "random",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Change => "change",
            Strategy::Committee => "committee",
            Strategy::Conformal => "conformal",
            Strategy::Bandit => "bandit",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = PrefsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PrefsError::UnknownStrategy(s.to_string()))
    }
}

pub const COMMITTEE_SIZE: usize = 3;
pub const BANDIT_EPSILON: f64 = 0.2;

/// A query strategy with its own seeded generator.
#[derive(Debug, Clone)]
pub struct QuerySelector {
    pub strategy: Strategy,
    rng: ChaCha8Rng,
}

impl QuerySelector {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next(&mut self, ctx: &QueryContext<'_>) -> Result<(usize, usize), PrefsError> {
        match self.strategy {
            Strategy::Heuristic => next_query(ctx),
            Strategy::Random => self.random(ctx),
            Strategy::Uncertainty => uncertainty(ctx),
            Strategy::Change => {
                let open = ctx.open_pairs()?;
                let m = ctx.current_model(ctx.history, 0);
                Ok(argmin_by(&open, |(a, b)| {
                    let p = bt_probability(m.utility(&ctx.phi[a]), m.utility(&ctx.phi[b]));
                    let norm = ctx.phi[a].iter().zip(&ctx.phi[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    -(2.0 * p * (1.0 - p) * norm)
                }))
            }
            Strategy::Committee => {
                let open = ctx.open_pairs()?;
                let models: Vec<RankerModel> = (0..COMMITTEE_SIZE)
                    .map(|k| {
                        let sample: Vec<PreferencePair> = (0..ctx.history.len())
                            .map(|_| ctx.history[self.rng.gen_range(0..ctx.history.len())])
                            .collect();
                        ctx.current_model(&sample, k as u64)
                    })
                    .collect();
                Ok(argmin_by(&open, |(a, b)| {
                    let ps: Vec<f64> = models
                        .iter()
                        .map(|m| bt_probability(m.utility(&ctx.phi[a]), m.utility(&ctx.phi[b])))
                        .collect();
                    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
                    -ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>()
                }))
            }
            Strategy::Conformal => {
                let open = ctx.open_pairs()?;
                Ok(argmin_by(&open, |p| (ctx.novelty_key(p), ctx.sim[p.0][p.1])))
            }
            Strategy::Bandit => {
                if self.rng.gen_bool(BANDIT_EPSILON) {
                    self.random(ctx)
                } else {
                    uncertainty(ctx)
                }
            }
        }
    }

    fn random(&mut self, ctx: &QueryContext<'_>) -> Result<(usize, usize), PrefsError> {
        let open = ctx.open_pairs()?;
        Ok(*open.choose(&mut self.rng).expect("open pairs are non-empty"))
    }
}

fn uncertainty(ctx: &QueryContext<'_>) -> Result<(usize, usize), PrefsError> {
    let open = ctx.open_pairs()?;
    let m = ctx.current_model(ctx.history, 0);
    let u = m.utilities(ctx.phi);
    Ok(argmin_by(&open, |(a, b)| (u[a] - u[b]).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefs::Winner;

    fn ctx<'a>(sim: &'a [Vec<f64>], clusters: &'a [usize], phi: &'a [Vec<f64>], schema: &'a [String], history: &'a [PreferencePair]) -> QueryContext<'a> {
        QueryContext {
            sim,
            clusters,
            phi,
            phi_schema: schema,
            history,
            budget: 10,
        }
    }

    fn two_blocks() -> Vec<Vec<f64>> {
        let mut sim = vec![vec![0.1; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                if (i < 2) == (j < 2) {
                    sim[i][j] = 0.9;
                }
            }
        }
        sim
    }

    #[test]
    fn first_query_spans_clusters() {
        let sim = two_blocks();
        let clusters = [0, 0, 1, 1];
        let phi = vec![vec![0.0]; 4];
        let schema = vec!["x".to_string()];
        let (a, b) = next_query(&ctx(&sim, &clusters, &phi, &schema, &[])).unwrap();
        assert_ne!(clusters[a], clusters[b]);
    }

    #[test]
    fn never_repeats_pairs() {
        let sim = two_blocks();
        let clusters = [0, 0, 1, 1];
        let phi: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let schema = vec!["x".to_string()];
        for s in Strategy::ALL {
            let mut sel = QuerySelector::new(s, 1);
            let mut hist: Vec<PreferencePair> = Vec::new();
            for round in 0..6 {
                let c = QueryContext { budget: 6, ..ctx(&sim, &clusters, &phi, &schema, &hist) };
                let (a, b) = sel.next(&c).unwrap();
                assert!(!hist.iter().any(|p| (p.left, p.right) == (a, b)), "{s:?} repeated ({a},{b})");
                hist.push(PreferencePair { left: a, right: b, winner: Winner::Left, round });
            }
            let c = QueryContext { budget: 6, ..ctx(&sim, &clusters, &phi, &schema, &hist) };
            assert!(matches!(sel.next(&c), Err(PrefsError::BudgetExhausted(6))));
        }
    }

    #[test]
    fn uncertainty_takes_closest_utilities() {
        let sim = vec![vec![0.5; 4]; 4];
        let clusters = [0, 1, 2, 3];
        let phi = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![2.0, 0.0]];
        let schema = vec!["a".to_string(), "b".to_string()];
        // model learns a positive weight on feature a
        let hist = vec![PreferencePair { left: 3, right: 2, winner: Winner::Left, round: 0 }];
        let c = ctx(&sim, &clusters, &phi, &schema, &hist);
        let m = c.current_model(&hist, 0);
        let u = m.utilities(&phi);
        let pick = QuerySelector::new(Strategy::Uncertainty, 0).next(&c).unwrap();
        let best = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
            .filter(|&p| p != (2, 3))
            .map(|(a, b)| (u[a] - u[b]).abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!((u[pick.0] - u[pick.1]).abs(), best);
    }

    #[test]
    fn random_is_reproducible() {
        let sim = vec![vec![0.5; 6]; 6];
        let clusters = [0; 6];
        let phi = vec![vec![0.0]; 6];
        let schema = vec!["x".to_string()];
        let c = ctx(&sim, &clusters, &phi, &schema, &[]);
        let a: Vec<_> = (0..5).map({ let mut s = QuerySelector::new(Strategy::Random, 9); move |_| s.next(&c).unwrap() }).collect();
        let b: Vec<_> = (0..5).map({ let mut s = QuerySelector::new(Strategy::Random, 9); move |_| s.next(&c).unwrap() }).collect();
        assert_eq!(a, b);
        assert!(matches!("nope".parse::<Strategy>(), Err(PrefsError::UnknownStrategy(_))));
    }

    #[test]
    fn too_few_concepts() {
        let sim = vec![vec![1.0]];
        let phi = vec![vec![0.0]];
        let schema = vec!["x".to_string()];
        assert!(matches!(next_query(&ctx(&sim, &[0], &phi, &schema, &[])), Err(PrefsError::NotEnoughConcepts(1))));
    }
}
