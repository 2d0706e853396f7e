//! Deterministic word vectors: positive PMI over a symmetric co-occurrence
//! window, reduced by seeded randomized power iteration.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

const WINDOW: usize = 5;
const POWER_ITERATIONS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    /// Mean of the known token vectors, `None` when no token has a vector.
    pub fn centroid<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Some(acc)
    }

    /// Whitespace-separated `term v1 v2 ...` lines. Vectors are unit-normalised on load.
    pub fn from_text(text: &str, origin: &str) -> Result<Self, CorpusError> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(term) = parts.next() else { continue };
            let location = format!("{origin}:{}", lineno + 1);
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CorpusError::MalformedInput {
                    location: location.clone(),
                    reason: e.to_string(),
                })?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(CorpusError::MalformedInput {
                        location,
                        reason: format!("expected {d} components, found {}", values.len()),
                    })
                }
                _ => {}
            }
            vectors.insert(term.to_lowercase(), unit(values));
        }
        match dim {
            Some(dim) if dim > 0 => Ok(Self { dim, vectors }),
            _ => Err(CorpusError::MalformedInput {
                location: origin.to_string(),
                reason: "no vectors".into(),
            }),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

type SparseRows = Vec<Vec<(usize, f64)>>;

fn ppmi(corpus: &Corpus) -> SparseRows {
    let v = corpus.terms.len();
    let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); v];
    for s in &corpus.sentences {
        let ids: Vec<usize> = s.tokens.iter().map(|t| corpus.vocabulary[t]).collect();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len().min(i + WINDOW + 1) {
                if ids[i] == ids[j] {
                    continue;
                }
                *counts[ids[i]].entry(ids[j]).or_default() += 1.0;
                *counts[ids[j]].entry(ids[i]).or_default() += 1.0;
            }
        }
    }
    let row_sums: Vec<f64> = counts.iter().map(|r| r.values().sum()).collect();
    let total: f64 = row_sums.iter().sum();
    counts
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .filter_map(|(j, c)| {
                    let pmi = (c * total / (row_sums[i] * row_sums[j])).ln();
                    (pmi > 0.0).then_some((j, pmi))
                })
                .collect()
        })
        .collect()
}

/// `(M + shift I) Q` for a symmetric sparse `M` and dense column block `Q` (rows = terms).
fn multiply(m: &SparseRows, shift: f64, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out: Vec<f64> = q[i].iter().map(|x| shift * x).collect();
            for &(j, w) in row {
                for (o, x) in out.iter_mut().zip(&q[j]) {
                    *o += w * x;
                }
            }
            out
        })
        .collect()
}

/// Modified Gram-Schmidt over the columns of a row-major block.
fn orthonormalize(y: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let rows = y.len();
    let cols = y.first().map_or(0, Vec::len);
    for k in 0..cols {
        for prev in 0..k {
            let dot: f64 = (0..rows).map(|r| y[r][k] * y[r][prev]).sum();
            for row in y.iter_mut() {
                row[k] -= dot * row[prev];
            }
        }
        let mut n: f64 = (0..rows).map(|r| y[r][k] * y[r][k]).sum::<f64>().sqrt();
        if n < 1e-12 {
            // collapsed column: redraw and orthogonalise again
            for row in y.iter_mut() {
                row[k] = rng.gen_range(-1.0..1.0);
            }
            for prev in 0..k {
                let dot: f64 = (0..rows).map(|r| y[r][k] * y[r][prev]).sum();
                for row in y.iter_mut() {
                    row[k] -= dot * row[prev];
                }
            }
            n = (0..rows).map(|r| y[r][k] * y[r][k]).sum::<f64>().sqrt();
        }
        for row in y.iter_mut() {
            row[k] /= n;
        }
    }
}

/// Default embedding width used wherever the engine builds its own vectors.
pub const DEFAULT_EMBED_DIM: usize = 16;

/// Embeddings at `min(DEFAULT_EMBED_DIM, |vocabulary|)` dimensions, or `None`
/// for an empty vocabulary.
pub fn corpus_embeddings(corpus: &Corpus, seed: u64) -> Option<Embeddings> {
    let dim = DEFAULT_EMBED_DIM.min(corpus.terms.len());
    build_embeddings(corpus, dim, seed).ok()
}

/// Builds `dim`-dimensional unit vectors for every vocabulary term.
///
/// The PPMI matrix is shifted by its largest absolute row sum so that it is
/// positive semi-definite; the power iteration then recovers the subspace of
/// the largest signed eigenvalues, where terms sharing contexts align.
pub fn build_embeddings(corpus: &Corpus, dim: usize, seed: u64) -> Result<Embeddings, CorpusError> {
    let vocab = corpus.terms.len();
    if dim > vocab {
        return Err(CorpusError::DimTooLarge { dim, vocab });
    }
    if dim == 0 {
        return Err(CorpusError::MalformedInput {
            location: "embeddings".into(),
            reason: "dimension must be positive".into(),
        });
    }
    let m = ppmi(corpus);
    let shift = m
        .iter()
        .map(|row| row.iter().map(|(_, w)| w.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = (0..vocab)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);
    for _ in 0..POWER_ITERATIONS {
        q = multiply(&m, shift, &q);
        orthonormalize(&mut q, &mut rng);
    }
    let projected = multiply(&m, shift, &q);
    let vectors = corpus
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let v = if norm(&projected[i]) > 0.0 {
                projected[i].clone()
            } else {
                q[i].clone()
            };
            (t.clone(), unit(v))
        })
        .collect();
    Ok(Embeddings { dim, vectors })
}
