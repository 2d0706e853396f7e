use serde::{Deserialize, Serialize};

use super::ExdosError;
use crate::corpus::{Corpus, FeatureGroup};
use crate::eval::rouge::{rouge_n, RougeMode};

/// Feature vectors with binary labels: 1 = belongs in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub sentence_ids: Vec<usize>,
}

impl LabeledSet {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<u8>, sentence_ids: Vec<usize>) -> Result<Self, ExdosError> {
        if samples.len() != labels.len() || samples.len() != sentence_ids.len() {
            return Err(ExdosError::DimensionMismatch {
                expected: samples.len(),
                found: labels.len().min(sentence_ids.len()),
            });
        }
        if let Some(first) = samples.first() {
            if let Some(bad) = samples.iter().find(|s| s.len() != first.len()) {
                return Err(ExdosError::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        if !labels.contains(&0) || !labels.contains(&1) {
            return Err(ExdosError::SingleLabel);
        }
        Ok(Self {
            samples,
            labels,
            sentence_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }
}

/// Labels every sentence of a featurised corpus.
///
/// With reference summaries, a sentence is positive when its best ROUGE-1
/// recall against any reference reaches half of the corpus maximum. Without
/// references, the top third of sentences by summed frequency features is
/// positive.
pub fn label_sentences(corpus: &Corpus) -> Result<LabeledSet, ExdosError> {
    if !corpus.is_featurized() {
        return Err(ExdosError::UntrainedModel);
    }
    let n = corpus.len();
    let scores: Vec<f64> = if corpus.reference_summaries.iter().any(|r| !r.is_empty()) {
        corpus
            .sentences
            .iter()
            .map(|s| {
                corpus
                    .reference_summaries
                    .iter()
                    .filter(|r| !r.is_empty())
                    .map(|r| {
                        rouge_n(&s.tokens, std::slice::from_ref(r), 1, RougeMode::Recall, None)
                            .map(|x| x.value)
                            .unwrap_or(0.0)
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    } else {
        let freq: Vec<usize> = corpus
            .feature_names
            .iter()
            .enumerate()
            .filter(|(_, name)| FeatureGroup::of(name) == Some(FeatureGroup::Frequency))
            .map(|(i, _)| i)
            .collect();
        let sums: Vec<f64> = corpus
            .sentences
            .iter()
            .map(|s| freq.iter().map(|&i| s.features[i]).sum())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
        let top = n.div_ceil(3).max(1);
        let mut s = vec![0.0; n];
        for &i in &order[..top] {
            s[i] = 1.0;
        }
        s
    };
    let max = scores.iter().copied().fold(0.0, f64::max);
    let labels: Vec<u8> = scores
        .iter()
        .map(|&s| u8::from(max > 0.0 && s >= 0.5 * max))
        .collect();
    LabeledSet::new(
        corpus.sentences.iter().map(|s| s.features.clone()).collect(),
        labels,
        (0..n).collect(),
    )
}
