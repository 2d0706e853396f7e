use std::collections::BTreeSet;

use crate::corpus::embed_cosine;
use crate::corpus::text::stem_lite;
use crate::corpus::{Concept, Embeddings, Stopwords};

/// Names of the pair features fed to the coreference classifier.
pub const PAIR_FEATURES: [&str; 4] = ["bias", "label_similarity", "stem_jaccard", "embedding_cosine"];

/// Hand-set weights: a pair needs agreement on at least two signals to
/// cross one half.
pub const DEFAULT_THETA: [f64; 4] = [-5.0, 3.0, 3.0, 4.0];

const EXPONENT_CLAMP: f64 = 30.0;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)).exp())
}

/// Pair features: bias, one minus normalised Levenshtein distance of the
/// labels, Jaccard over stemmed content words, and embedding cosine clipped
/// at zero. Every feature is symmetric in its arguments.
pub fn pair_features(a: &Concept, b: &Concept, stopwords: &Stopwords, embeddings: Option<&Embeddings>) -> [f64; 4] {
    let lev = strsim::normalized_levenshtein(&a.label, &b.label);
    let stems = |c: &Concept| -> BTreeSet<String> {
        c.tokens
            .iter()
            .filter(|t| !stopwords.contains(t))
            .map(|t| stem_lite(t).to_string())
            .collect()
    };
    let (sa, sb) = (stems(a), stems(b));
    let union = sa.union(&sb).count();
    let jaccard = if union == 0 {
        0.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    };
    let cos = if a.tokens == b.tokens {
        1.0
    } else {
        embeddings
            .and_then(|e| Some(embed_cosine(&e.centroid(&a.tokens)?, &e.centroid(&b.tokens)?)))
            .unwrap_or(0.0)
            .clamp(0.0, 1.0)
    };
    [1.0, lev, jaccard, cos]
}

/// Probability that two concepts refer to the same thing.
pub fn concept_similarity(
    a: &Concept,
    b: &Concept,
    theta: &[f64; 4],
    stopwords: &Stopwords,
    embeddings: Option<&Embeddings>,
) -> f64 {
    let d = pair_features(a, b, stopwords, embeddings);
    logistic(theta.iter().zip(&d).map(|(t, x)| t * x).sum())
}

/// Full symmetric matrix of [`concept_similarity`] with ones on the diagonal.
pub fn similarity_matrix(
    concepts: &[Concept],
    theta: &[f64; 4],
    stopwords: &Stopwords,
    embeddings: Option<&Embeddings>,
) -> Vec<Vec<f64>> {
    let n = concepts.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = concept_similarity(&concepts[i], &concepts[j], theta, stopwords, embeddings);
            m[i][j] = p;
            m[j][i] = p;
        }
    }
    m
}

/// Fits `theta` by full-batch gradient ascent on the logistic log-likelihood
/// of labelled pair features (`true` = coreferent).
pub fn fit_theta(examples: &[([f64; 4], bool)], lr: f64, epochs: usize) -> [f64; 4] {
    let mut theta = [0.0; 4];
    for _ in 0..epochs {
        let mut grad = [0.0; 4];
        for (x, y) in examples {
            let p = logistic(theta.iter().zip(x).map(|(t, v)| t * v).sum());
            let err = if *y { 1.0 } else { 0.0 } - p;
            for (g, v) in grad.iter_mut().zip(x) {
                *g += err * v;
            }
        }
        for (t, g) in theta.iter_mut().zip(grad) {
            *t += lr * g;
        }
    }
    theta
}
