//! The fixed 11-feature surface schema, min-max scaled corpus-wide.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{corpus_embeddings, Corpus};

pub const FEATURE_NAMES: [&str; 11] = [
    "tf_mean",
    "tfidf_mean",
    "ridf_mean",
    "title_overlap",
    "uppercase_count",
    "embedding_centroid_similarity",
    "jaccard_doc_centroid",
    "position_score",
    "length_words",
    "length_cutoff",
    "signature_word_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Frequency,
    Word,
    Similarity,
    Position,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Frequency,
        FeatureGroup::Word,
        FeatureGroup::Similarity,
        FeatureGroup::Position,
    ];

    /// Group of a feature in the `FEATURE_NAMES` schema.
    pub fn of(name: &str) -> Option<FeatureGroup> {
        Some(match name {
            "tf_mean" | "tfidf_mean" | "ridf_mean" => FeatureGroup::Frequency,
            "title_overlap" | "uppercase_count" | "signature_word_count" => FeatureGroup::Word,
            "embedding_centroid_similarity" | "jaccard_doc_centroid" => FeatureGroup::Similarity,
            "position_score" | "length_words" | "length_cutoff" => FeatureGroup::Position,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Frequency => "frequency",
            FeatureGroup::Word => "word",
            FeatureGroup::Similarity => "similarity",
            FeatureGroup::Position => "position",
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn raw_features(corpus: &Corpus, seed: u64) -> Vec<[f64; 11]> {
    let n_docs = corpus.num_documents() as f64;
    let idf = |t: &str| (n_docs / corpus.df[t] as f64).ln();

    // per-document term counts and lengths
    let mut doc_counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); corpus.num_documents()];
    let mut doc_len = vec![0usize; corpus.num_documents()];
    for s in &corpus.sentences {
        doc_len[s.doc_index] += s.tokens.len();
        for t in &s.tokens {
            *doc_counts[s.doc_index].entry(t.as_str()).or_default() += 1;
        }
    }
    let doc_centroids: Vec<BTreeSet<&str>> = doc_counts
        .iter()
        .map(|counts| {
            let content = counts.iter().filter(|(t, _)| !corpus.stopwords.contains(t));
            let repeated: BTreeSet<&str> = content.clone().filter(|(_, &c)| c >= 2).map(|(t, _)| *t).collect();
            if repeated.is_empty() {
                content.map(|(t, _)| *t).collect()
            } else {
                repeated
            }
        })
        .collect();
    let titles: Vec<BTreeSet<String>> = corpus
        .documents
        .iter()
        .map(|d| {
            d.title
                .as_deref()
                .map(super::text::tokenize)
                .unwrap_or_default()
                .into_iter()
                .filter(|t| !corpus.stopwords.contains(t))
                .collect()
        })
        .collect();

    // top-decile corpus tf-idf terms
    let mut scored: Vec<(f64, &str)> = corpus
        .cf
        .iter()
        .filter(|(t, _)| !corpus.stopwords.contains(t))
        .map(|(t, &cf)| (cf as f64 * idf(t), t.as_str()))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let keep = scored.len().div_ceil(10);
    let signature: BTreeSet<&str> = scored.iter().take(keep).map(|(_, t)| *t).collect();

    // normalised embedding centroids
    let emb = corpus_embeddings(corpus, seed);
    let centroids: Vec<Option<Vec<f64>>> = (0..corpus.len())
        .map(|i| {
            let emb = emb.as_ref()?;
            let mut c = emb.centroid(&corpus.content_tokens(i))?;
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                return None;
            }
            c.iter_mut().for_each(|x| *x /= n);
            Some(c)
        })
        .collect();
    let mut total = vec![0.0; emb.as_ref().map_or(1, |e| e.dim.max(1))];
    let mut with_vec = 0usize;
    for c in centroids.iter().flatten() {
        with_vec += 1;
        for (a, x) in total.iter_mut().zip(c) {
            *a += x;
        }
    }

    corpus
        .sentences
        .iter()
        .map(|s| {
            let content = corpus.content_tokens(s.id);
            let content_set: BTreeSet<&str> = content.iter().copied().collect();
            let dl = doc_len[s.doc_index].max(1) as f64;
            let tf = |t: &str| doc_counts[s.doc_index][t] as f64 / dl;

            let tf_mean = mean(content.iter().map(|t| tf(t)));
            let tfidf_mean = mean(content.iter().map(|t| tf(t) * idf(t)));
            let ridf_mean = mean(content.iter().map(|t| {
                let lambda = corpus.cf[*t] as f64 / n_docs;
                idf(t) + (1.0 - (-lambda).exp()).ln()
            }));
            let title = &titles[s.doc_index];
            let title_overlap = if title.is_empty() {
                0.0
            } else {
                content_set.iter().filter(|t| title.contains(**t)).count() as f64 / title.len() as f64
            };
            let uppercase = s
                .text
                .split_whitespace()
                .filter(|w| w.chars().next().is_some_and(char::is_uppercase))
                .count() as f64;
            let embed_sim = match &centroids[s.id] {
                Some(c) if with_vec > 1 => {
                    let dot_all: f64 = c.iter().zip(&total).map(|(x, y)| x * y).sum();
                    (dot_all - 1.0) / (with_vec - 1) as f64
                }
                _ => 0.0,
            };
            let centroid = &doc_centroids[s.doc_index];
            let jaccard = if content_set.is_empty() || centroid.is_empty() {
                0.0
            } else {
                let inter = content_set.intersection(centroid).count() as f64;
                inter / content_set.union(centroid).count() as f64
            };
            let words = s.length_words as f64;
            [
                tf_mean,
                tfidf_mean,
                ridf_mean,
                title_overlap,
                uppercase,
                embed_sim,
                jaccard,
                1.0 / (1.0 + s.position as f64),
                words,
                if (8..=40).contains(&s.length_words) { 1.0 } else { 0.0 },
                content_set.iter().filter(|t| signature.contains(**t)).count() as f64,
            ]
        })
        .collect()
}

/// Fills every sentence's feature vector. Returns the names of features that
/// were constant over the corpus; those are scaled to 0.
pub fn featurize(corpus: &mut Corpus, seed: u64) -> Vec<String> {
    let raw = raw_features(corpus, seed);
    let mut degenerate = Vec::new();
    let mut scaled = vec![vec![0.0; FEATURE_NAMES.len()]; raw.len()];
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        let lo = raw.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            log::warn!("degenerate feature `{name}`: constant over the corpus");
            degenerate.push(name.to_string());
            continue;
        }
        for (row, r) in scaled.iter_mut().zip(&raw) {
            row[f] = (r[f] - lo) / (hi - lo);
        }
    }
    for (s, f) in corpus.sentences.iter_mut().zip(scaled) {
        s.features = f;
    }
    corpus.feature_names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    corpus.degenerate_features = degenerate.clone();
    degenerate
}

/// Unscaled feature rows, exposed for inspection and tests.
pub fn raw_feature_rows(corpus: &Corpus, seed: u64) -> Vec<Vec<f64>> {
    raw_features(corpus, seed).into_iter().map(|r| r.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Stopwords};

    fn sample() -> Corpus {
        Corpus::from_documents(
            vec![
                Document::new(
                    "a",
                    "Severe drought hit the California valley this spring. Farmers in the valley lost crops. \
                     Officials announced water limits for every county in the state.",
                )
                .with_title("California drought"),
                Document::new(
                    "b",
                    "Water prices rose across the state. The drought forced new rules. Rain finally arrived in May.",
                ),
            ],
            Stopwords::english(),
        )
        .unwrap()
    }

    #[test]
    fn first_sentence_position_score_is_one() {
        let c = sample();
        let raw = raw_feature_rows(&c, 0);
        assert_eq!(raw[0][7], 1.0);
        assert_eq!(raw[1][7], 0.5);
    }

    #[test]
    fn scaled_range_is_exact() {
        let mut c = sample();
        let degenerate = featurize(&mut c, 0);
        for (f, name) in FEATURE_NAMES.iter().enumerate() {
            if degenerate.iter().any(|d| d == name) {
                assert!(c.sentences.iter().all(|s| s.features[f] == 0.0));
                continue;
            }
            let lo = c.sentences.iter().map(|s| s.features[f]).fold(f64::INFINITY, f64::min);
            let hi = c.sentences.iter().map(|s| s.features[f]).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0, "{name}");
            assert_eq!(hi, 1.0, "{name}");
        }
        assert!(c.sentences.iter().all(|s| s.features.len() == 11 && s.features.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn identical_sentences_are_degenerate() {
        let mut c = Corpus::from_documents(
            vec![Document::new("a", "Same words here. Same words here."), Document::new("b", "Same words here.")],
            Stopwords::english(),
        )
        .unwrap();
        let degenerate = featurize(&mut c, 0);
        // position differs, everything else is constant
        assert!(degenerate.len() >= 9, "{degenerate:?}");
        assert!(!degenerate.contains(&"position_score".to_string()));
    }

    #[test]
    fn all_constant_sentences() {
        let mut c = Corpus::from_documents(
            vec![Document::new("a", "Same words here."), Document::new("b", "Same words here.")],
            Stopwords::english(),
        )
        .unwrap();
        let degenerate = featurize(&mut c, 0);
        assert_eq!(degenerate.len(), 11);
        assert!(c.sentences.iter().all(|s| s.features.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn tfidf_zero_for_ubiquitous_term() {
        let c = Corpus::from_documents(
            vec![Document::new("a", "Drought drought."), Document::new("b", "Drought.")],
            Stopwords::english(),
        )
        .unwrap();
        let raw = raw_feature_rows(&c, 0);
        assert!(raw.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn groups_cover_schema() {
        for name in FEATURE_NAMES {
            assert!(FeatureGroup::of(name).is_some(), "{name}");
        }
    }
}
