use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExDosHyper, ExDosModel, ExdosError, Polarity};
use crate::corpus::{Corpus, Embeddings, Similarity, SimilarityKind};
use crate::search;

pub use crate::search::EXACT_SEARCH_LIMIT;

/// Discourse connectives that mark a sentence as continuing its predecessor.
const CUE_WORDS: [&str; 20] = [
    "also",
    "additionally",
    "besides",
    "but",
    "consequently",
    "finally",
    "furthermore",
    "hence",
    "however",
    "instead",
    "later",
    "meanwhile",
    "moreover",
    "nevertheless",
    "nonetheless",
    "similarly",
    "still",
    "then",
    "therefore",
    "thus",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub coverage: f64,
    pub coherence: f64,
    pub redundancy: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Selected sentence ids in document order.
    pub sentence_ids: Vec<usize>,
    pub word_count: usize,
    pub budget: usize,
    pub score_breakdown: ScoreBreakdown,
}

impl Summary {
    pub fn text(&self, corpus: &Corpus) -> String {
        self.sentence_ids
            .iter()
            .map(|&i| corpus.sentences[i].text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Precomputed per-sentence coverage and pairwise edge and similarity tables.
#[derive(Debug, Clone)]
pub struct SummaryScorer {
    coverage: Vec<f64>,
    edges: Vec<Vec<f64>>,
    similarity: Vec<Vec<f64>>,
    lambda: f64,
    phi: f64,
}

fn coverage_of(model: &ExDosModel, x: &[f64]) -> f64 {
    let pos = model.nearest_polar_distance(x, Polarity::Positive).unwrap_or(0.0);
    let neg = model.nearest_polar_distance(x, Polarity::Negative).unwrap_or(0.0);
    (pos - neg).abs()
}

fn edge_weight(corpus: &Corpus, a: usize, b: usize) -> f64 {
    let nouns = |i: usize| -> BTreeSet<&str> {
        corpus
            .content_tokens(i)
            .into_iter()
            .filter(|t| corpus.stopwords.is_noun_like(t))
            .collect()
    };
    let (na, nb) = (nouns(a), nouns(b));
    let union = na.union(&nb).count();
    let overlap = if union == 0 {
        0.0
    } else {
        na.intersection(&nb).count() as f64 / union as f64
    };
    let cue = corpus.sentences[b]
        .tokens
        .first()
        .is_some_and(|t| CUE_WORDS.contains(&t.as_str()));
    if overlap == 0.0 && !cue {
        -1.0
    } else {
        0.5 * overlap + if cue { 0.5 } else { 0.0 }
    }
}

impl SummaryScorer {
    pub fn new(
        model: &ExDosModel,
        corpus: &Corpus,
        embeddings: &Embeddings,
        lambda: f64,
        phi: f64,
    ) -> Result<Self, ExdosError> {
        if !corpus.is_featurized() {
            return Err(ExdosError::UntrainedModel);
        }
        model.check_dim(corpus.feature_names.len())?;
        let n = corpus.len();
        let coverage = corpus.sentences.iter().map(|s| coverage_of(model, &s.features)).collect();
        let sim = Similarity::new(corpus, Some(embeddings));
        let mut similarity = vec![vec![0.0; n]; n];
        let mut edges = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    let s = sim.sentences(i, j, SimilarityKind::Embedding)?;
                    similarity[i][j] = s;
                    similarity[j][i] = s;
                }
                if i != j {
                    edges[i][j] = edge_weight(corpus, i, j);
                }
            }
        }
        Ok(Self {
            coverage,
            edges,
            similarity,
            lambda,
            phi,
        })
    }

    pub fn coverage(&self, sentence: usize) -> f64 {
        self.coverage[sentence]
    }

    /// Components of a selection given in document order.
    pub fn breakdown(&self, ids: &[usize]) -> ScoreBreakdown {
        let coverage: f64 = ids.iter().map(|&i| self.coverage[i]).sum();
        let coherence: f64 = ids.windows(2).map(|w| self.edges[w[0]][w[1]]).sum();
        let mut redundancy = 0.0;
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[..k] {
                redundancy += self.similarity[i][j];
            }
        }
        ScoreBreakdown {
            coverage,
            coherence,
            redundancy,
            total: coverage + self.lambda * coherence - self.phi * redundancy,
        }
    }

    pub fn score(&self, ids: &[usize]) -> f64 {
        self.breakdown(ids).total
    }
}

/// Coverage, coherence and redundancy of `ids` (document order) under the
/// model's own `lambda_coh` and `phi_red`.
pub fn score_components(
    ids: &[usize],
    model: &ExDosModel,
    corpus: &Corpus,
    embeddings: &Embeddings,
) -> Result<ScoreBreakdown, ExdosError> {
    let scorer = SummaryScorer::new(model, corpus, embeddings, model.hyper.lambda_coh, model.hyper.phi_red)?;
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    Ok(scorer.breakdown(&sorted))
}

pub(crate) fn check_budget(corpus: &Corpus, budget: usize) -> Result<Vec<usize>, ExdosError> {
    let shortest = corpus.sentences.iter().map(|s| s.length_words).min().unwrap_or(0);
    let candidates: Vec<usize> = corpus
        .sentences
        .iter()
        .filter(|s| s.length_words > 0 && s.length_words <= budget)
        .map(|s| s.id)
        .collect();
    if candidates.is_empty() {
        return Err(ExdosError::InfeasibleBudget { budget, shortest });
    }
    Ok(candidates)
}

/// Best-scoring selection within `budget` words.
///
/// Up to [`EXACT_SEARCH_LIMIT`] fitting sentences are enumerated outright.
/// Larger inputs use hill climbing: restart 0 starts from a greedy fill by
/// coverage per word, later restarts from seeded random fills.
pub fn select_summary(
    model: &ExDosModel,
    corpus: &Corpus,
    embeddings: &Embeddings,
    budget: usize,
    hyper: &ExDosHyper,
    seed: u64,
    restarts: usize,
) -> Result<Summary, ExdosError> {
    let candidates = check_budget(corpus, budget)?;
    let scorer = SummaryScorer::new(model, corpus, embeddings, hyper.lambda_coh, hyper.phi_red)?;
    let lengths: Vec<usize> = corpus.sentences.iter().map(|s| s.length_words).collect();
    let value = |ids: &[usize]| scorer.score(ids);

    let (ids, _) = if candidates.len() <= EXACT_SEARCH_LIMIT {
        search::exact(&value, &candidates, &lengths, budget).expect("a candidate fits")
    } else {
        let mut order = candidates.clone();
        order.sort_by(|&a, &b| {
            let ra = scorer.coverage(a) / lengths[a] as f64;
            let rb = scorer.coverage(b) / lengths[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(Vec<usize>, f64)> = None;
        for r in 0..restarts.max(1) {
            let start = if r == 0 {
                search::greedy_fill(&order, &lengths, budget)
            } else {
                search::random_fill(&candidates, &lengths, budget, &mut rng)
            };
            let (ids, v) = search::local_search(&value, start, &candidates, &lengths, budget);
            if best.as_ref().is_none_or(|(b, bv)| search::better(v, &ids, *bv, b)) {
                best = Some((ids, v));
            }
        }
        best.expect("at least one restart")
    };
    Ok(Summary {
        word_count: corpus.word_count(&ids),
        score_breakdown: scorer.breakdown(&ids),
        sentence_ids: ids,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Stopwords};

    fn model(weights: Vec<Vec<f64>>, centroids: Vec<Vec<f64>>, polarity: Vec<Polarity>) -> ExDosModel {
        let d = centroids[0].len();
        ExDosModel {
            schema: super::super::MODEL_SCHEMA.into(),
            weights,
            centroids,
            polarity,
            hyper: ExDosHyper::default(),
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            assignment: vec![],
            objective_trace: vec![],
        }
    }

    #[test]
    fn coverage_at_positive_centroid() {
        let m = model(
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![vec![0.0, 0.0], vec![3.0, 1.0]],
            vec![Polarity::Positive, Polarity::Negative],
        );
        let expected = (9.0f64 + 4.0).sqrt();
        assert!((coverage_of(&m, &[0.0, 0.0]) - expected).abs() < 1e-12);
    }

    fn featurized(text: &str) -> (Corpus, Embeddings) {
        let mut c = Corpus::from_documents(vec![Document::new("d", text)], Stopwords::english()).unwrap();
        crate::corpus::featurize(&mut c, 0);
        let e = crate::corpus::corpus_embeddings(&c, 0).unwrap();
        (c, e)
    }

    fn unit_model(d: usize) -> ExDosModel {
        model(
            vec![vec![1.0; d]; 2],
            vec![vec![1.0; d], vec![0.0; d]],
            vec![Polarity::Positive, Polarity::Negative],
        )
    }

    #[test]
    fn singleton_has_no_pairs() {
        let (c, e) = featurized("Rivers flood towns. Rivers flood towns again. Dry deserts stay hot.");
        let m = unit_model(c.feature_names.len());
        let b = score_components(&[1], &m, &c, &e).unwrap();
        assert_eq!(b.coherence, 0.0);
        assert_eq!(b.redundancy, 0.0);
    }

    #[test]
    fn duplicated_text_is_redundant() {
        let (c, e) = featurized("Rivers flood towns. Rivers flood towns. Dry deserts stay hot.");
        let m = unit_model(c.feature_names.len());
        let b = score_components(&[0, 1], &m, &c, &e).unwrap();
        assert!(b.redundancy >= 1.0);
    }

    #[test]
    fn cue_and_overlap_edges() {
        let (c, _) = featurized("Rivers flood towns. However dry deserts stay hot. Cats purr softly.");
        assert_eq!(edge_weight(&c, 0, 1), 0.5);
        assert_eq!(edge_weight(&c, 0, 2), -1.0);
    }

    #[test]
    fn budget_and_determinism() {
        let text = (0..20)
            .map(|i| format!("Sentence number {i} talks about topic {} and river {}.", i % 4, i % 3))
            .collect::<Vec<_>>()
            .join(" ");
        let (c, e) = featurized(&text);
        let m = unit_model(c.feature_names.len());
        let h = ExDosHyper::default();
        let a = select_summary(&m, &c, &e, 30, &h, 3, 4).unwrap();
        let b = select_summary(&m, &c, &e, 30, &h, 3, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.word_count <= 30);
        assert!(a.sentence_ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn infeasible_budget() {
        let (c, e) = featurized("Rivers flood towns. Deserts stay hot.");
        let m = unit_model(c.feature_names.len());
        assert!(matches!(
            select_summary(&m, &c, &e, 1, &ExDosHyper::default(), 0, 1),
            Err(ExdosError::InfeasibleBudget { budget: 1, shortest: 3 })
        ));
    }
}
