use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::{ground_truth_reward, RewardCoeffs};
use super::EvalError;
use crate::adaptive::{Action, Feedback};
use crate::corpus::{Concept, Corpus};
use crate::prefs::Winner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserKind {
    /// Utilities come from an explicit term or label dictionary.
    Dictionary,
    /// A concept is worth 1 when it occurs in some reference summary, else 0.
    Reference,
}

/// What a simulated user can be asked.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Concept { concept: &'a Concept, round: usize },
    ConceptPair { left: &'a Concept, right: &'a Concept },
    SummaryPair { corpus: &'a Corpus, left: &'a [usize], right: &'a [usize] },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    Feedback(Feedback),
    Winner(Winner),
}

/// Oracle that answers feedback queries from known utilities.
#[derive(Debug, Clone)]
pub struct SimUser {
    pub kind: UserKind,
    pub utilities: BTreeMap<String, f64>,
    pub references: Vec<Vec<String>>,
    pub coeffs: RewardCoeffs,
    pub noise: f64,
    rng: ChaCha8Rng,
}

impl SimUser {
    pub fn dictionary(utilities: BTreeMap<String, f64>, references: Vec<Vec<String>>, seed: u64) -> Self {
        Self {
            kind: UserKind::Dictionary,
            utilities,
            references,
            coeffs: RewardCoeffs::default(),
            noise: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reference(references: Vec<Vec<String>>, seed: u64) -> Self {
        Self {
            kind: UserKind::Reference,
            utilities: BTreeMap::new(),
            references,
            coeffs: RewardCoeffs::default(),
            noise: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Probability of flipping each preference answer, in `[0, 0.5)`.
    pub fn with_noise(mut self, noise: f64) -> Result<Self, EvalError> {
        if !(0.0..0.5).contains(&noise) {
            return Err(EvalError::InvalidNoise(noise));
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn with_coeffs(mut self, coeffs: RewardCoeffs) -> Self {
        self.coeffs = coeffs;
        self
    }

    /// Truth utility of a concept. Dictionary users look the label up, then
    /// fall back to the mean over its tokens with unknown tokens counting 0.
    pub fn utility(&self, concept: &Concept) -> Result<f64, EvalError> {
        match self.kind {
            UserKind::Reference => Ok(if self.references.iter().any(|r| concept.occurs_in(r)) {
                1.0
            } else {
                0.0
            }),
            UserKind::Dictionary => {
                if let Some(&u) = self.utilities.get(&concept.label) {
                    return Ok(u);
                }
                let known: Vec<f64> = concept.tokens.iter().filter_map(|t| self.utilities.get(t).copied()).collect();
                if known.is_empty() {
                    return Err(EvalError::UnknownTarget(concept.label.clone()));
                }
                Ok(known.iter().sum::<f64>() / concept.tokens.len() as f64)
            }
        }
    }

    fn max_abs_utility(&self) -> f64 {
        match self.kind {
            UserKind::Reference => 1.0,
            UserKind::Dictionary => self.utilities.values().map(|u| u.abs()).fold(0.0, f64::max),
        }
    }

    /// Accept when the utility is positive. The weight is the utility
    /// magnitude over the largest magnitude; a zero-utility rejection carries
    /// full weight so that it has an effect.
    pub fn concept_feedback(&self, concept: &Concept, round: usize) -> Result<Feedback, EvalError> {
        let u = self.utility(concept)?;
        let max = self.max_abs_utility();
        let magnitude = if max > 0.0 { (u.abs() / max).min(1.0) } else { 0.0 };
        let (action, weight) = if u > 0.0 {
            (Action::Accept, magnitude)
        } else if u < 0.0 {
            (Action::Reject, magnitude)
        } else {
            (Action::Reject, 1.0)
        };
        Ok(Feedback {
            concept_id: concept.concept_id,
            action,
            weight,
            confidence: 1.0,
            round,
        })
    }

    fn flip(&mut self, w: Winner) -> Winner {
        if self.noise > 0.0 && self.rng.gen_bool(self.noise) {
            w.other()
        } else {
            w
        }
    }

    /// Higher utility wins; ties go left.
    pub fn prefer_concepts(&mut self, left: &Concept, right: &Concept) -> Result<Winner, EvalError> {
        let w = if self.utility(right)? > self.utility(left)? {
            Winner::Right
        } else {
            Winner::Left
        };
        Ok(self.flip(w))
    }

    pub fn reward(&self, corpus: &Corpus, ids: &[usize]) -> Result<f64, EvalError> {
        ground_truth_reward(&self.coeffs, corpus, ids, &self.references)
    }

    /// Higher ground-truth reward wins; ties go left.
    pub fn prefer_summaries(&mut self, corpus: &Corpus, left: &[usize], right: &[usize]) -> Result<Winner, EvalError> {
        let w = if self.reward(corpus, right)? > self.reward(corpus, left)? {
            Winner::Right
        } else {
            Winner::Left
        };
        Ok(self.flip(w))
    }

    pub fn answer(&mut self, query: Query<'_>) -> Result<Answer, EvalError> {
        match query {
            Query::Concept { concept, round } => self.concept_feedback(concept, round).map(Answer::Feedback),
            Query::ConceptPair { left, right } => self.prefer_concepts(left, right).map(Answer::Winner),
            Query::SummaryPair { corpus, left, right } => {
                self.prefer_summaries(corpus, left, right).map(Answer::Winner)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConceptStatus, ConceptUnit};
    use std::collections::BTreeSet;

    fn concept(id: usize, label: &str) -> Concept {
        Concept {
            concept_id: id,
            label: label.into(),
            tokens: label.split(' ').map(String::from).collect(),
            unit: ConceptUnit::Unigram,
            mention_sentence_ids: BTreeSet::from([0]),
            base_score: 1.0,
            user_weight: 1.0,
            status: ConceptStatus::Unqueried,
        }
    }

    #[test]
    fn reference_user_accepts_present_concepts() {
        let u = SimUser::reference(vec![vec!["river".into(), "flood".into()]], 0);
        let fb = u.concept_feedback(&concept(3, "river"), 0).unwrap();
        assert_eq!(fb.action, Action::Accept);
        assert_eq!(fb.weight, 1.0);
        assert_eq!(fb.confidence, 1.0);
        assert_eq!(u.concept_feedback(&concept(4, "desert"), 0).unwrap().action, Action::Reject);
    }

    #[test]
    fn noiseless_answers_follow_utilities() {
        let utilities: BTreeMap<String, f64> = (0..6).map(|i| (format!("w{i}"), i as f64)).collect();
        let mut u = SimUser::dictionary(utilities, vec![], 1);
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                let w = u.prefer_concepts(&concept(i, &format!("w{i}")), &concept(j, &format!("w{j}"))).unwrap();
                assert_eq!(w == Winner::Left, i > j);
            }
        }
    }

    #[test]
    fn flip_rate_matches_noise() {
        let utilities = BTreeMap::from([("a".to_string(), 1.0), ("b".to_string(), 0.0)]);
        let noise = 0.49;
        let mut u = SimUser::dictionary(utilities, vec![], 5).with_noise(noise).unwrap();
        let (a, b) = (concept(0, "a"), concept(1, "b"));
        let flips = (0..10_000).filter(|_| u.prefer_concepts(&a, &b).unwrap() == Winner::Right).count();
        assert!((flips as f64 / 10_000.0 - noise).abs() <= 0.02);
    }

    #[test]
    fn unknown_dictionary_label() {
        let u = SimUser::dictionary(BTreeMap::new(), vec![], 0);
        assert!(matches!(u.utility(&concept(0, "zzz")), Err(EvalError::UnknownTarget(_))));
        assert!(SimUser::reference(vec![], 0).with_noise(0.5).is_err());
    }
}
