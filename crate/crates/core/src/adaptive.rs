//! Interactive concept-feedback summarisation.
//!
//! A session starts from the ExDoS summary. Each round the user accepts or
//! rejects concepts (with a weight and a confidence) or rejects sentences, and
//! the summary is re-solved as a budgeted knapsack over per-sentence values.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_concepts, Concept, ConceptStatus, ConceptUnit, Corpus, CorpusError, Embeddings};
use crate::exdos::{select_summary, ExDosHyper, ExDosModel, ExdosError, Summary, SummaryScorer};
use crate::search::{self, EXACT_SEARCH_LIMIT};

/// Scale of the base-score term credited to unqueried and accepted concepts.
pub const EPSILON: f64 = 0.01;
/// Mention sentences shown per queried concept.
pub const EXAMPLES_PER_CONCEPT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum AdaptiveError {
    #[error("no unqueried concepts remain")]
    SessionConverged,
    #[error("unknown concept {0}")]
    UnknownConcept(usize),
    #[error("unknown sentence {0}")]
    UnknownSentence(usize),
    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),
    #[error(transparent)]
    Exdos(#[from] ExdosError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Action {
    Accept,
    Reject,
}

impl Action {
    pub fn sign(self) -> f64 {
        match self {
            Action::Accept => 1.0,
            Action::Reject => -1.0,
        }
    }
}

impl TryFrom<i8> for Action {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Action::Accept),
            -1 => Ok(Action::Reject),
            other => Err(format!("action must be 1 or -1, got {other}")),
        }
    }
}

impl From<Action> for i8 {
    fn from(a: Action) -> i8 {
        match a {
            Action::Accept => 1,
            Action::Reject => -1,
        }
    }
}

fn default_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub concept_id: usize,
    pub action: Action,
    pub weight: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub round: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Concept,
    /// Removes a sentence from every later summary.
    Sentence,
    /// Overrides the word budget from this round on.
    Budget,
}

/// One line of the session event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub round: usize,
    pub kind: EventKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Event {
    pub fn concept(f: Feedback) -> Self {
        Self {
            round: f.round,
            kind: EventKind::Concept,
            target: f.concept_id,
            action: Some(f.action),
            weight: Some(f.weight),
            confidence: Some(f.confidence),
        }
    }

    pub fn reject_sentence(sentence_id: usize) -> Self {
        Self {
            round: 0,
            kind: EventKind::Sentence,
            target: sentence_id,
            action: Some(Action::Reject),
            weight: None,
            confidence: None,
        }
    }

    pub fn budget(words: usize) -> Self {
        Self {
            round: 0,
            kind: EventKind::Budget,
            target: words,
            action: None,
            weight: None,
            confidence: None,
        }
    }

    fn same_effect(&self, other: &Event) -> bool {
        self.kind == other.kind
            && self.target == other.target
            && self.action == other.action
            && self.weight == other.weight
            && self.confidence == other.confidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub budget: usize,
    pub unit: ConceptUnit,
    pub seed: u64,
    /// Hill-climbing restarts for the initial ExDoS summary.
    pub restarts: usize,
    pub hyper: ExDosHyper,
}

impl AdaptiveConfig {
    pub fn new(budget: usize, unit: ConceptUnit, seed: u64) -> Self {
        Self {
            budget,
            unit,
            seed,
            restarts: 5,
            hyper: ExDosHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub concept_id: usize,
    pub label: String,
    /// `(sentence id, text)` examples mentioning the concept.
    pub sentences: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct Session {
    corpus: Arc<Corpus>,
    pub config: AdaptiveConfig,
    pub budget: usize,
    pub concepts: Vec<Concept>,
    sentence_concepts: Vec<BTreeSet<usize>>,
    pub sentence_weights: Vec<f64>,
    pub queried: BTreeSet<usize>,
    pub round: usize,
    pub initial_summary: Summary,
    pub current_summary: Summary,
    /// Value of the feedback objective for `current_summary`.
    pub objective: f64,
    pub events: Vec<Event>,
    scorer: SummaryScorer,
}

fn sentence_concepts(corpus: &Corpus, scorer: &SummaryScorer, unit: ConceptUnit) -> Result<Vec<Concept>, CorpusError> {
    if unit != ConceptUnit::Sentence {
        return extract_concepts(corpus, unit);
    }
    let max = (0..corpus.len()).map(|i| scorer.coverage(i)).fold(0.0, f64::max);
    Ok(corpus
        .sentences
        .iter()
        .map(|s| {
            let base = if max > 0.0 { scorer.coverage(s.id) / max } else { 1.0 };
            Concept {
                concept_id: s.id,
                label: s.tokens.join(" "),
                tokens: s.tokens.clone(),
                unit,
                mention_sentence_ids: BTreeSet::from([s.id]),
                base_score: base,
                user_weight: base,
                status: ConceptStatus::Unqueried,
            }
        })
        .collect())
}

impl Session {
    pub fn start(
        corpus: Arc<Corpus>,
        model: &ExDosModel,
        embeddings: &Embeddings,
        config: AdaptiveConfig,
    ) -> Result<Self, AdaptiveError> {
        let hyper = config.hyper;
        let scorer = SummaryScorer::new(model, &corpus, embeddings, hyper.lambda_coh, hyper.phi_red)?;
        let initial = select_summary(model, &corpus, embeddings, config.budget, &hyper, config.seed, config.restarts)?;
        let concepts = sentence_concepts(&corpus, &scorer, config.unit)?;
        let mut sc = vec![BTreeSet::new(); corpus.len()];
        for c in &concepts {
            for &sid in &c.mention_sentence_ids {
                sc[sid].insert(c.concept_id);
            }
        }
        let mut s = Self {
            sentence_weights: vec![1.0; corpus.len()],
            budget: config.budget,
            corpus,
            config,
            concepts,
            sentence_concepts: sc,
            queried: BTreeSet::new(),
            round: 0,
            current_summary: initial.clone(),
            initial_summary: initial,
            objective: 0.0,
            events: Vec::new(),
            scorer,
        };
        s.objective = s.objective_of(&s.current_summary.sentence_ids);
        Ok(s)
    }

    /// Rebuilds a session by applying a recorded log round by round.
    pub fn replay(
        corpus: Arc<Corpus>,
        model: &ExDosModel,
        embeddings: &Embeddings,
        config: AdaptiveConfig,
        events: &[Event],
    ) -> Result<Self, AdaptiveError> {
        let mut s = Self::start(corpus, model, embeddings, config)?;
        for batch in events.chunk_by(|a, b| a.round == b.round) {
            s.apply(batch.to_vec())?;
        }
        Ok(s)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn converged(&self) -> bool {
        self.queried.len() >= self.concepts.len()
    }

    /// Contribution of one concept to every sentence that mentions it.
    pub fn concept_value(&self, c: &Concept) -> f64 {
        match c.status {
            ConceptStatus::Unqueried => EPSILON * c.base_score,
            ConceptStatus::Accepted => c.user_weight + EPSILON * c.base_score,
            ConceptStatus::Rejected => -c.user_weight,
        }
    }

    pub fn sentence_value(&self, sentence: usize) -> f64 {
        self.sentence_concepts[sentence]
            .iter()
            .map(|&c| self.concept_value(&self.concepts[c]))
            .sum()
    }

    pub fn objective_of(&self, ids: &[usize]) -> f64 {
        ids.iter().map(|&i| self.sentence_value(i)).sum()
    }

    /// Up to `group_size` unqueried concepts by base score, each with example
    /// sentences that share the most concepts with the rest of the group.
    pub fn next_query_group(&self, group_size: usize) -> Result<Vec<QueryItem>, AdaptiveError> {
        let group: Vec<&Concept> = self
            .concepts
            .iter()
            .filter(|c| !self.queried.contains(&c.concept_id))
            .take(group_size.max(1))
            .collect();
        if group.is_empty() {
            return Err(AdaptiveError::SessionConverged);
        }
        let ids: BTreeSet<usize> = group.iter().map(|c| c.concept_id).collect();
        Ok(group
            .iter()
            .map(|c| {
                let mut mentions: Vec<usize> = c.mention_sentence_ids.iter().copied().collect();
                mentions.sort_by_key(|&s| (std::cmp::Reverse(self.sentence_concepts[s].intersection(&ids).count()), s));
                QueryItem {
                    concept_id: c.concept_id,
                    label: c.label.clone(),
                    sentences: mentions
                        .into_iter()
                        .take(EXAMPLES_PER_CONCEPT)
                        .map(|s| (s, self.corpus.sentences[s].text.clone()))
                        .collect(),
                }
            })
            .collect())
    }

    pub fn apply_feedback(&mut self, feedback: Feedback) -> Result<&Summary, AdaptiveError> {
        self.apply(vec![Event::concept(feedback)])?;
        Ok(&self.current_summary)
    }

    pub fn reject_sentence(&mut self, sentence_id: usize) -> Result<&Summary, AdaptiveError> {
        self.apply(vec![Event::reject_sentence(sentence_id)])?;
        Ok(&self.current_summary)
    }

    fn validate(&self, e: &Event) -> Result<(), AdaptiveError> {
        match e.kind {
            EventKind::Concept => {
                if e.target >= self.concepts.len() {
                    return Err(AdaptiveError::UnknownConcept(e.target));
                }
                let w = e.weight.ok_or_else(|| AdaptiveError::InvalidFeedback("weight is required".into()))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(AdaptiveError::InvalidFeedback(format!("weight {w} outside [0, 1]")));
                }
                let conf = e.confidence.unwrap_or(1.0);
                if !(conf > 0.0 && conf <= 1.0) {
                    return Err(AdaptiveError::InvalidFeedback(format!("confidence {conf} outside (0, 1]")));
                }
                if e.action.is_none() {
                    return Err(AdaptiveError::InvalidFeedback("action is required".into()));
                }
            }
            EventKind::Sentence if e.target >= self.corpus.len() => {
                return Err(AdaptiveError::UnknownSentence(e.target));
            }
            EventKind::Budget if e.target == 0 => {
                return Err(AdaptiveError::InvalidFeedback("budget must be positive".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Applies one round of events atomically, then re-solves. Each event is
    /// stamped with the current round; repeats of the latest event on the same
    /// target are dropped.
    pub fn apply(&mut self, events: Vec<Event>) -> Result<&Summary, AdaptiveError> {
        for e in &events {
            self.validate(e)?;
        }
        let mut trial = self.clone();
        let mut changed = false;
        for mut e in events {
            e.round = trial.round;
            let last = trial.events.iter().rev().find(|p| p.kind == e.kind && p.target == e.target);
            if last.is_some_and(|p| p.same_effect(&e)) {
                continue;
            }
            if e.kind == EventKind::Concept && last.is_some() {
                log::info!("concept {} re-rated in round {}; keeping the latest", e.target, e.round);
            }
            match e.kind {
                EventKind::Concept => {
                    let c = &mut trial.concepts[e.target];
                    let action = e.action.expect("validated");
                    c.status = match action {
                        Action::Accept => ConceptStatus::Accepted,
                        Action::Reject => ConceptStatus::Rejected,
                    };
                    c.user_weight = e.confidence.unwrap_or(1.0) * e.weight.expect("validated");
                    trial.queried.insert(e.target);
                }
                EventKind::Sentence => trial.sentence_weights[e.target] = 0.0,
                EventKind::Budget => trial.budget = e.target,
            }
            trial.events.push(e);
            changed = true;
        }
        if changed {
            let summary = trial.solve()?;
            trial.objective = trial.objective_of(&summary.sentence_ids);
            trial.current_summary = summary;
            trial.round += 1;
        }
        *self = trial;
        Ok(&self.current_summary)
    }

    /// Maximises the summed sentence values within the budget, skipping
    /// rejected sentences. Small candidate sets are enumerated exactly.
    pub fn solve(&self) -> Result<Summary, AdaptiveError> {
        let lengths: Vec<usize> = self.corpus.sentences.iter().map(|s| s.length_words).collect();
        let candidates: Vec<usize> = (0..self.corpus.len())
            .filter(|&i| self.sentence_weights[i] > 0.0 && lengths[i] > 0 && lengths[i] <= self.budget)
            .collect();
        if candidates.is_empty() {
            let shortest = lengths.iter().copied().min().unwrap_or(0);
            return Err(ExdosError::InfeasibleBudget {
                budget: self.budget,
                shortest,
            }
            .into());
        }
        let values: Vec<f64> = (0..self.corpus.len()).map(|i| self.sentence_value(i)).collect();
        let f = |ids: &[usize]| ids.iter().map(|&i| values[i]).sum::<f64>();
        let (ids, _) = if candidates.len() <= EXACT_SEARCH_LIMIT {
            search::exact(&f, &candidates, &lengths, self.budget).expect("a candidate fits")
        } else {
            let mut order = candidates.clone();
            order.sort_by(|&a, &b| {
                (values[b] / lengths[b] as f64)
                    .total_cmp(&(values[a] / lengths[a] as f64))
                    .then(a.cmp(&b))
            });
            let positive: Vec<usize> = order.iter().copied().filter(|&i| values[i] > 0.0).collect();
            let mut start = search::greedy_fill(&positive, &lengths, self.budget);
            if start.is_empty() {
                start.push(order[0]);
            }
            search::local_search(&f, start, &candidates, &lengths, self.budget)
        };
        Ok(Summary {
            word_count: self.corpus.word_count(&ids),
            score_breakdown: self.scorer.breakdown(&ids),
            sentence_ids: ids,
            budget: self.budget,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_embeddings, featurize, Document, Stopwords};
    use crate::exdos::{Polarity, MODEL_SCHEMA};

    fn fixture(text: &str, budget: usize) -> Session {
        let mut c = Corpus::from_documents(vec![Document::new("d", text)], Stopwords::english()).unwrap();
        featurize(&mut c, 0);
        let e = corpus_embeddings(&c, 0).unwrap();
        let d = c.feature_names.len();
        let m = ExDosModel {
            schema: MODEL_SCHEMA.into(),
            weights: vec![vec![1.0; d]; 2],
            centroids: vec![vec![1.0; d], vec![0.0; d]],
            polarity: vec![Polarity::Positive, Polarity::Negative],
            hyper: ExDosHyper::default(),
            feature_names: c.feature_names.clone(),
            assignment: vec![],
            objective_trace: vec![],
        };
        Session::start(Arc::new(c), &m, &e, AdaptiveConfig::new(budget, ConceptUnit::Unigram, 1)).unwrap()
    }

    const TEXT: &str = "Rivers flood towns. Deserts bake towns. Rivers feed deserts. Glaciers melt slowly. Glaciers carve rivers.";

    fn accept(id: usize, w: f64) -> Feedback {
        Feedback {
            concept_id: id,
            action: Action::Accept,
            weight: w,
            confidence: 1.0,
            round: 0,
        }
    }

    fn id_of(s: &Session, label: &str) -> usize {
        s.concepts.iter().find(|c| c.label == label).unwrap().concept_id
    }

    #[test]
    fn starts_from_exdos_summary() {
        let s = fixture(TEXT, 6);
        assert_eq!(s.current_summary, s.initial_summary);
        assert_eq!(s.round, 0);
    }

    #[test]
    fn accepted_concept_pulls_its_sentence() {
        let mut s = fixture(TEXT, 3);
        let g = id_of(&s, "glaciers");
        s.apply_feedback(accept(g, 0.9)).unwrap();
        let chosen = s.current_summary.sentence_ids[0];
        assert!(s.corpus().sentences[chosen].tokens.contains(&"glaciers".to_string()));
        assert!(s.concept_value(&s.concepts[g]) >= 0.9);
    }

    #[test]
    fn rejected_sentence_never_returns() {
        let mut s = fixture(TEXT, 3);
        let g = id_of(&s, "glaciers");
        s.reject_sentence(3).unwrap();
        s.apply_feedback(accept(g, 1.0)).unwrap();
        assert!(!s.current_summary.sentence_ids.contains(&3));
        assert_eq!(s.sentence_weights[3], 0.0);
    }

    #[test]
    fn rejected_only_sentence_scores_minus_weight() {
        // sentence 3 mentions only `glaciers` among extracted concepts
        let mut s = fixture(TEXT, 3);
        let g = id_of(&s, "glaciers");
        s.apply_feedback(Feedback {
            action: Action::Reject,
            ..accept(g, 0.7)
        })
        .unwrap();
        assert_eq!(s.sentence_value(3), -0.7);
    }

    #[test]
    fn group_queries_and_convergence() {
        let mut s = fixture(TEXT, 6);
        let one = s.next_query_group(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].concept_id, 0);
        for item in s.next_query_group(50).unwrap() {
            for (sid, _) in &item.sentences {
                assert!(s.concepts[item.concept_id].occurs_in(&s.corpus().sentences[*sid].tokens));
            }
        }
        let all: Vec<Event> = (0..s.concepts.len()).map(|c| Event::concept(accept(c, 0.5))).collect();
        s.apply(all).unwrap();
        assert!(matches!(s.next_query_group(1), Err(AdaptiveError::SessionConverged)));
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = fixture(TEXT, 6);
        s.apply_feedback(accept(0, 0.4)).unwrap();
        s.reject_sentence(1).unwrap();
        s.apply(vec![Event::budget(5), Event::concept(accept(1, 1.0))]).unwrap();
        let log: Vec<Event> = s
            .events
            .iter()
            .map(|e| serde_json::from_str(&serde_json::to_string(e).unwrap()).unwrap())
            .collect();
        let fresh = fixture(TEXT, 6);
        let mut r = fresh.clone();
        for batch in log.chunk_by(|a, b| a.round == b.round) {
            r.apply(batch.to_vec()).unwrap();
        }
        assert_eq!(r.current_summary, s.current_summary);
        assert_eq!(r.events, s.events);
        assert_eq!(r.round, s.round);
    }

    #[test]
    fn repeated_event_is_idempotent() {
        let mut s = fixture(TEXT, 6);
        s.apply_feedback(accept(0, 0.4)).unwrap();
        let before = (s.events.len(), s.round);
        s.apply_feedback(accept(0, 0.4)).unwrap();
        assert_eq!((s.events.len(), s.round), before);
    }

    #[test]
    fn bad_feedback_rejected() {
        let mut s = fixture(TEXT, 6);
        assert!(matches!(s.apply_feedback(accept(999, 0.5)), Err(AdaptiveError::UnknownConcept(999))));
        assert!(matches!(s.apply_feedback(accept(0, 1.5)), Err(AdaptiveError::InvalidFeedback(_))));
        assert!(matches!(s.reject_sentence(99), Err(AdaptiveError::UnknownSentence(99))));
        assert!(s.events.is_empty());
    }

    #[test]
    fn action_wire_format() {
        assert_eq!(serde_json::to_string(&Action::Reject).unwrap(), "-1");
        assert!(serde_json::from_str::<Action>("0").is_err());
    }
}
