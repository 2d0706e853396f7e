use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Draft, SummarizerError};
use crate::corpus::{Concept, Corpus};
use crate::eval::redundancy;
use crate::search::{self, EXACT_SEARCH_LIMIT};

/// Multiplicative jitter applied to concept weights in perturbed greedy runs.
const PERTURBATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPool {
    pub summaries: Vec<Draft>,
    /// Smallest Jaccard distance between two members' sentence sets.
    pub diversity_floor: f64,
    /// Fewer than the requested number of members survived.
    pub too_small: bool,
}

/// Weighted concept coverage of sentence selections: each concept counts once.
#[derive(Debug, Clone)]
pub struct CoverageObjective {
    sentence_concepts: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl CoverageObjective {
    /// `weights[c]` is the weight of the concept with id `c`.
    pub fn new(corpus: &Corpus, concepts: &[Concept], weights: &[f64]) -> Self {
        let mut sentence_concepts = vec![Vec::new(); corpus.len()];
        for c in concepts {
            for &s in &c.mention_sentence_ids {
                sentence_concepts[s].push(c.concept_id);
            }
        }
        Self {
            sentence_concepts,
            weights: weights.to_vec(),
        }
    }

    pub fn covered(&self, ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().flat_map(|&i| self.sentence_concepts[i].iter().copied()).collect()
    }

    pub fn value(&self, ids: &[usize]) -> f64 {
        self.covered(ids).into_iter().map(|c| self.weights[c]).sum()
    }

    fn with_weights(&self, weights: Vec<f64>) -> Self {
        Self {
            sentence_concepts: self.sentence_concepts.clone(),
            weights,
        }
    }

    /// Greedy by marginal gain per word, then swap improvement.
    fn greedy(&self, candidates: &[usize], lengths: &[usize], budget: usize) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        let mut covered = BTreeSet::new();
        let mut used = 0;
        loop {
            let mut best: Option<(usize, f64)> = None;
            for &s in candidates {
                if chosen.contains(&s) || used + lengths[s] > budget {
                    continue;
                }
                let gain: f64 = self.sentence_concepts[s]
                    .iter()
                    .filter(|c| !covered.contains(*c))
                    .map(|&c| self.weights[c])
                    .sum();
                let ratio = gain / lengths[s] as f64;
                if best.is_none_or(|(_, r)| ratio > r) {
                    best = Some((s, ratio));
                }
            }
            match best {
                Some((s, r)) if r > 0.0 || chosen.is_empty() => {
                    used += lengths[s];
                    covered.extend(self.sentence_concepts[s].iter().copied());
                    chosen.push(s);
                }
                _ => break,
            }
        }
        chosen.sort_unstable();
        let f = |ids: &[usize]| self.value(ids);
        search::local_search(&f, chosen, candidates, lengths, budget).0
    }
}

fn jaccard_distance(a: &[usize], b: &[usize]) -> f64 {
    let x: BTreeSet<_> = a.iter().collect();
    let y: BTreeSet<_> = b.iter().collect();
    1.0 - x.intersection(&y).count() as f64 / x.union(&y).count().max(1) as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The single best coverage summary: exact up to [`EXACT_SEARCH_LIMIT`]
/// fitting sentences, greedy with swap repair beyond.
pub fn coverage_summary(
    corpus: &Corpus,
    concepts: &[Concept],
    weights: &[f64],
    budget: usize,
) -> Result<Draft, SummarizerError> {
    let lengths: Vec<usize> = corpus.sentences.iter().map(|s| s.length_words).collect();
    let candidates: Vec<usize> = (0..corpus.len()).filter(|&i| lengths[i] > 0 && lengths[i] <= budget).collect();
    if candidates.is_empty() {
        return Err(SummarizerError::InfeasibleBudget(budget));
    }
    let objective = CoverageObjective::new(corpus, concepts, weights);
    let ids = if candidates.len() <= EXACT_SEARCH_LIMIT {
        let f = |ids: &[usize]| objective.value(ids);
        search::exact(&f, &candidates, &lengths, budget).expect("a candidate fits").0
    } else {
        objective.greedy(&candidates, &lengths, budget)
    };
    let mut d = Draft::new(corpus, ids);
    d.objective = objective.value(&d.sentence_ids);
    Ok(d)
}

/// A pool of distinct high-coverage summaries within `budget` words.
///
/// Up to [`EXACT_SEARCH_LIMIT`] fitting sentences, candidates are the best
/// feasible subsets by enumeration. Otherwise they come from the plain greedy
/// solution plus greedy runs under jittered concept weights, each of which
/// must do without one sentence of the plain solution. Members whose internal redundancy exceeds
/// the candidate median are dropped, except the top-objective candidate.
pub fn generate_pool(
    corpus: &Corpus,
    concepts: &[Concept],
    weights: &[f64],
    budget: usize,
    pool_size: usize,
    seed: u64,
) -> Result<SummaryPool, SummarizerError> {
    if pool_size < 2 {
        return Err(SummarizerError::InvalidOption("pool_size must be at least 2".into()));
    }
    let lengths: Vec<usize> = corpus.sentences.iter().map(|s| s.length_words).collect();
    let candidates: Vec<usize> = (0..corpus.len()).filter(|&i| lengths[i] > 0 && lengths[i] <= budget).collect();
    if candidates.is_empty() {
        return Err(SummarizerError::InfeasibleBudget(budget));
    }
    let objective = CoverageObjective::new(corpus, concepts, weights);
    let wanted = 2 * pool_size;

    let mut found: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    if candidates.len() <= EXACT_SEARCH_LIMIT {
        for ids in search::feasible_subsets(&candidates, &lengths, budget) {
            let v = objective.value(&ids);
            found.insert(ids, v);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = objective.greedy(&candidates, &lengths, budget);
        found.insert(base.clone(), objective.value(&base));
        for trial in 0..4 * wanted {
            let w = weights
                .iter()
                .map(|w| w * (1.0 + rng.gen_range(-PERTURBATION..PERTURBATION)))
                .collect();
            let banned = base[trial % base.len()];
            let allowed: Vec<usize> = candidates.iter().copied().filter(|&c| c != banned).collect();
            if allowed.is_empty() {
                break;
            }
            let ids = objective.with_weights(w).greedy(&allowed, &lengths, budget);
            let v = objective.value(&ids);
            found.insert(ids, v);
        }
    }
    let mut ranked: Vec<(Vec<usize>, f64)> = found.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(wanted);

    let reds: Vec<f64> = ranked.iter().map(|(ids, _)| redundancy(corpus, ids)).collect();
    let cap = median(&reds);
    let mut summaries: Vec<Draft> = ranked
        .iter()
        .zip(&reds)
        .enumerate()
        .filter(|(k, (_, r))| *k == 0 || **r <= cap)
        .map(|(_, ((ids, v), r))| Draft {
            word_count: corpus.word_count(ids),
            sentence_ids: ids.clone(),
            objective: *v,
            redundancy: *r,
        })
        .take(pool_size)
        .collect();
    summaries.shrink_to_fit();
    let mut floor = f64::INFINITY;
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            floor = floor.min(jaccard_distance(&a.sentence_ids, &b.sentence_ids));
        }
    }
    let too_small = summaries.len() < pool_size;
    if too_small {
        log::warn!("summary pool has {} of {pool_size} requested members", summaries.len());
    }
    Ok(SummaryPool {
        diversity_floor: if floor.is_finite() { floor } else { 1.0 },
        too_small,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_concepts, ConceptUnit, Document, Stopwords};

    fn corpus(text: &str) -> Corpus {
        Corpus::from_documents(vec![Document::new("d", text)], Stopwords::english()).unwrap()
    }

    #[test]
    fn single_concept_sentence() {
        let c = corpus("Rivers flood towns. Rivers rise. Cats purr.");
        let concepts = extract_concepts(&c, ConceptUnit::Unigram).unwrap();
        let w = vec![1.0; concepts.len()];
        let pool = generate_pool(&c, &concepts, &w, 2, 3, 0).unwrap();
        assert_eq!(pool.summaries[0].sentence_ids, vec![1]);
        assert!(pool.too_small);
    }

    #[test]
    fn members_distinct_and_within_budget() {
        let text = (0..20)
            .map(|i| format!("Topic {} meets river {} near town {}.", i % 5, i % 3, i % 4))
            .collect::<Vec<_>>()
            .join(" ");
        let c = corpus(&text);
        let concepts = extract_concepts(&c, ConceptUnit::Unigram).unwrap();
        let w: Vec<f64> = (0..concepts.len()).map(|i| (i % 4) as f64).collect();
        let pool = generate_pool(&c, &concepts, &w, 20, 5, 1).unwrap();
        let sets: BTreeSet<_> = pool.summaries.iter().map(|d| d.sentence_ids.clone()).collect();
        assert_eq!(sets.len(), pool.summaries.len());
        assert!(pool.summaries.iter().all(|d| d.word_count <= 20));
        assert!(pool.diversity_floor > 0.0);
    }
}
