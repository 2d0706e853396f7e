use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeMetric {
    Rouge1,
    Rouge2,
    RougeL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeMode {
    Recall,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub metric: RougeMetric,
    pub mode: RougeMode,
    pub value: f64,
    pub truncation: Option<usize>,
}

fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut out = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
    }
    out
}

fn check_refs<S: AsRef<str>>(references: &[Vec<S>]) -> Result<(), EvalError> {
    if references.is_empty() || references.iter().all(Vec::is_empty) {
        return Err(EvalError::EmptyReference);
    }
    Ok(())
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// N-gram overlap with clipped counts. Recall pools hits and reference
/// n-grams over all references; precision clips each candidate n-gram by its
/// largest count in any single reference.
pub fn rouge_n<S: AsRef<str>, R: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<R>],
    n: usize,
    mode: RougeMode,
    truncation: Option<usize>,
) -> Result<RougeScore, EvalError> {
    check_refs(references)?;
    let metric = match n {
        1 => RougeMetric::Rouge1,
        2 => RougeMetric::Rouge2,
        _ => return Err(EvalError::UnsupportedOrder(n)),
    };
    let cut = truncation.map_or(candidate.len(), |k| k.min(candidate.len()));
    let cand = ngrams(&candidate[..cut], n);
    let mut hits = 0;
    let mut total = 0;
    let mut union: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
    for r in references {
        let grams = ngrams(r, n);
        for (g, &c) in &grams {
            total += c;
            hits += c.min(cand.get(g).copied().unwrap_or(0));
            let slot = union.entry(g.clone()).or_default();
            *slot = (*slot).max(c);
        }
    }
    let recall = ratio(hits, total);
    let value = match mode {
        RougeMode::Recall => recall,
        RougeMode::F1 => {
            let cand_total: usize = cand.values().sum();
            let clipped: usize = cand.iter().map(|(g, &c)| c.min(union.get(g).copied().unwrap_or(0))).sum();
            f1(ratio(clipped, cand_total), recall)
        }
    };
    Ok(RougeScore {
        metric,
        mode,
        value,
        truncation,
    })
}

/// Length of the longest common subsequence.
pub fn lcs_len<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based score averaged over references.
pub fn rouge_l<S: AsRef<str>, R: AsRef<str>>(
    candidate: &[S],
    references: &[Vec<R>],
    mode: RougeMode,
) -> Result<RougeScore, EvalError> {
    check_refs(references)?;
    let per_ref: Vec<f64> = references
        .iter()
        .map(|r| {
            let l = lcs_len(candidate, r);
            let recall = ratio(l, r.len());
            match mode {
                RougeMode::Recall => recall,
                RougeMode::F1 => f1(ratio(l, candidate.len()), recall),
            }
        })
        .collect();
    Ok(RougeScore {
        metric: RougeMetric::RougeL,
        mode,
        value: per_ref.iter().sum::<f64>() / per_ref.len() as f64,
        truncation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_is_one() {
        let a = toks("the cat sat on the mat");
        for n in [1, 2] {
            for mode in [RougeMode::Recall, RougeMode::F1] {
                assert_eq!(rouge_n(&a, &[a.clone()], n, mode, None).unwrap().value, 1.0);
            }
        }
        assert_eq!(rouge_l(&a, &[a.clone()], RougeMode::F1).unwrap().value, 1.0);
    }

    #[test]
    fn unigram_recall_by_hand() {
        let v = rouge_n(&toks("the cat sat"), &[toks("the cat ran")], 1, RougeMode::Recall, None).unwrap();
        assert_eq!(v.value, 2.0 / 3.0);
    }

    #[test]
    fn disjoint_is_zero() {
        let v = rouge_n(&toks("a b"), &[toks("c d")], 1, RougeMode::F1, None).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn lcs_cases() {
        let r = rouge_l(&toks("a x b y c"), &[toks("a b c")], RougeMode::Recall).unwrap();
        assert_eq!(r.value, 1.0);
        let r = rouge_l(&toks("a b c"), &[toks("c b a")], RougeMode::Recall).unwrap();
        assert_eq!(r.value, 1.0 / 3.0);
    }

    #[test]
    fn truncation_cuts_candidate() {
        let v = rouge_n(&toks("x y a b"), &[toks("a b")], 1, RougeMode::Recall, Some(2)).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.truncation, Some(2));
    }

    #[test]
    fn empty_reference() {
        let none: Vec<Vec<String>> = vec![];
        assert!(matches!(rouge_n(&toks("a"), &none, 1, RougeMode::Recall, None), Err(EvalError::EmptyReference)));
        assert!(matches!(rouge_l(&toks("a"), &[Vec::<String>::new()], RougeMode::Recall), Err(EvalError::EmptyReference)));
    }
}
