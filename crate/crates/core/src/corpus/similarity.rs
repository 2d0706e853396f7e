use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::embed::cosine;
use super::{Corpus, CorpusError, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    CosineTfidf,
    Jaccard,
    Embedding,
}

/// Token-list similarity in `[0, 1]` backed by corpus statistics.
#[derive(Debug, Clone, Copy)]
pub struct Similarity<'a> {
    corpus: &'a Corpus,
    embeddings: Option<&'a Embeddings>,
}

impl<'a> Similarity<'a> {
    pub fn new(corpus: &'a Corpus, embeddings: Option<&'a Embeddings>) -> Self {
        Self { corpus, embeddings }
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn embeddings(&self) -> Option<&'a Embeddings> {
        self.embeddings
    }

    pub fn similarity<S: AsRef<str>>(&self, a: &[S], b: &[S], kind: SimilarityKind) -> Result<f64, CorpusError> {
        if a.is_empty() || b.is_empty() {
            return Err(CorpusError::EmptyInput);
        }
        let mut sa: Vec<&str> = a.iter().map(AsRef::as_ref).collect();
        let mut sb: Vec<&str> = b.iter().map(AsRef::as_ref).collect();
        sa.sort_unstable();
        sb.sort_unstable();
        if sa == sb {
            return Ok(1.0);
        }
        let value = match kind {
            SimilarityKind::Jaccard => {
                let x: BTreeSet<&str> = sa.into_iter().collect();
                let y: BTreeSet<&str> = sb.into_iter().collect();
                let inter = x.intersection(&y).count() as f64;
                let union = x.union(&y).count() as f64;
                inter / union
            }
            SimilarityKind::CosineTfidf => {
                let wa = self.tfidf(&sa);
                let wb = self.tfidf(&sb);
                let dot: f64 = wa
                    .iter()
                    .filter_map(|(t, x)| wb.get(t).map(|y| x * y))
                    .sum();
                let na = wa.values().map(|x| x * x).sum::<f64>().sqrt();
                let nb = wb.values().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                }
            }
            SimilarityKind::Embedding => {
                let emb = self.embeddings.ok_or(CorpusError::MissingEmbeddings)?;
                match (emb.centroid(&sa), emb.centroid(&sb)) {
                    (Some(x), Some(y)) => cosine(&x, &y),
                    _ => 0.0,
                }
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Similarity of two sentences over their content tokens, falling back to
    /// all tokens when a sentence has no content words. Empty sentences score 0.
    pub fn sentences(&self, i: usize, j: usize, kind: SimilarityKind) -> Result<f64, CorpusError> {
        let a = self.sentence_tokens(i);
        let b = self.sentence_tokens(j);
        match self.similarity(&a, &b, kind) {
            Err(CorpusError::EmptyInput) => Ok(0.0),
            other => other,
        }
    }

    fn sentence_tokens(&self, i: usize) -> Vec<&'a str> {
        let content = self.corpus.content_tokens(i);
        if content.is_empty() {
            self.corpus.sentences[i].tokens.iter().map(String::as_str).collect()
        } else {
            content
        }
    }

    fn tfidf<'t>(&self, tokens: &[&'t str]) -> BTreeMap<&'t str, f64> {
        let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t).or_default() += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.corpus.smooth_idf(t);
        }
        tf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_embeddings, Document, Stopwords};
    use proptest::prelude::*;

    fn corpus() -> Corpus {
        Corpus::from_documents(
            vec![
                Document::new("a", "Rain fell on the dry valley. Farmers watched the rain."),
                Document::new("b", "The valley farmers sold water. Water prices rose fast."),
            ],
            Stopwords::english(),
        )
        .unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_is_one() {
        let c = corpus();
        let sim = Similarity::new(&c, None);
        for kind in [SimilarityKind::CosineTfidf, SimilarityKind::Jaccard] {
            assert_eq!(sim.similarity(&toks("rain valley"), &toks("rain valley"), kind).unwrap(), 1.0);
        }
    }

    #[test]
    fn disjoint_is_zero() {
        let c = corpus();
        let sim = Similarity::new(&c, None);
        assert_eq!(sim.similarity(&toks("rain"), &toks("water"), SimilarityKind::Jaccard).unwrap(), 0.0);
        assert_eq!(sim.similarity(&toks("rain"), &toks("water"), SimilarityKind::CosineTfidf).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_half() {
        let c = corpus();
        let sim = Similarity::new(&c, None);
        let v = sim.similarity(&toks("a b c"), &toks("a b d"), SimilarityKind::Jaccard).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn empty_input_errors() {
        let c = corpus();
        let sim = Similarity::new(&c, None);
        let empty: Vec<String> = vec![];
        assert!(matches!(
            sim.similarity(&empty, &toks("a"), SimilarityKind::Jaccard),
            Err(CorpusError::EmptyInput)
        ));
    }

    #[test]
    fn embedding_requires_vectors() {
        let c = corpus();
        let sim = Similarity::new(&c, None);
        assert!(matches!(
            sim.similarity(&toks("rain"), &toks("water"), SimilarityKind::Embedding),
            Err(CorpusError::MissingEmbeddings)
        ));
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["rain", "valley", "farmers", "water", "prices", "dry", "zebra", "the"])
            .prop_map(String::from)
    }

    proptest! {
        #[test]
        fn symmetric_bounded_reflexive(
            a in prop::collection::vec(word(), 1..8),
            b in prop::collection::vec(word(), 1..8),
        ) {
            let c = corpus();
            let emb = build_embeddings(&c, 4, 3).unwrap();
            let sim = Similarity::new(&c, Some(&emb));
            for kind in [SimilarityKind::CosineTfidf, SimilarityKind::Jaccard, SimilarityKind::Embedding] {
                let ab = sim.similarity(&a, &b, kind).unwrap();
                let ba = sim.similarity(&b, &a, kind).unwrap();
                prop_assert_eq!(ab.to_bits(), ba.to_bits());
                prop_assert!((0.0..=1.0).contains(&ab));
                prop_assert_eq!(sim.similarity(&a, &a, kind).unwrap(), 1.0);
            }
        }
    }
}
