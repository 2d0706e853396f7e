//! Interactive preference-based summarisation.
//!
//! A session first asks concept pairs, chosen by the configured query
//! strategy, and fits a Bradley-Terry utility to the answers. The ranked
//! concepts weight a pool of candidate summaries; pairs of pool members are
//! then shown to the user, a summary reward is fitted to those answers, and a
//! TD policy trained on that reward builds the final summary. The whole state
//! is a function of the prepared corpus, the config and the list of answers.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::corpus::{extract_concepts, Concept, ConceptUnit, Corpus};
use crate::eval::SimUser;
use crate::pipeline::{PipelineError, Prepared};
use crate::prefs::{
    cluster_of, concept_features, fit_utility, partition_concepts, rank, similarity_matrix, FitOptions,
    PreferencePair, PrefsError, QueryContext, QuerySelector, RankerModel, Winner, DEFAULT_THETA,
};
use crate::summarizer::{
    coverage_summary, fit_reward, generate_pool, learn_policy, Draft, PolicyOptions, RewardModel,
    RewardOptions, RewardSamples, SummaryFeaturizer, SummaryPool, SummaryTask, SUMMARY_FEATURES,
};

/// What the user is asked next. Concept indices refer to
/// [`SumRecomSession::concepts`], summary indices to the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PendingQuery {
    Concepts { left: usize, right: usize },
    Summaries { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct SumRecomSession {
    corpus: Arc<Corpus>,
    cfg: EngineConfig,
    pub concepts: Vec<Concept>,
    phi: Vec<Vec<f64>>,
    phi_schema: Vec<String>,
    sim: Vec<Vec<f64>>,
    clusters: Vec<usize>,
    selector: QuerySelector,
    pub concept_prefs: Vec<PreferencePair>,
    pub summary_prefs: Vec<PreferencePair>,
    schedule: Vec<(usize, usize)>,
    pub ranker: Option<RankerModel>,
    pub pool: Option<SummaryPool>,
    pub reward: Option<RewardModel>,
    /// The greedy policy's summary, once trained.
    pub rollout: Option<Draft>,
    pending: Option<PendingQuery>,
    final_pick: Option<Draft>,
    /// Every answer so far, in order.
    pub answers: Vec<Winner>,
}

impl SumRecomSession {
    pub fn start(prepared: &Prepared, cfg: &EngineConfig) -> Result<Self, PipelineError> {
        let corpus = prepared.corpus.clone();
        let unit = if cfg.unit == ConceptUnit::Sentence { ConceptUnit::Unigram } else { cfg.unit };
        let concepts = extract_concepts(&corpus, unit)?;
        if concepts.len() < 2 {
            return Err(PrefsError::NotEnoughConcepts(concepts.len()).into());
        }
        let emb = Some(prepared.embeddings.as_ref());
        let (phi, phi_schema) = concept_features(&corpus, &concepts, emb);
        let sim = similarity_matrix(&concepts, &DEFAULT_THETA, &corpus.stopwords, emb);
        let clusters = cluster_of(&partition_concepts(&sim, cfg.seed), concepts.len());
        let mut s = Self {
            corpus,
            cfg: cfg.clone(),
            concepts,
            phi,
            phi_schema,
            sim,
            clusters,
            selector: QuerySelector::new(cfg.prefs.strategy, cfg.seed),
            concept_prefs: Vec::new(),
            summary_prefs: Vec::new(),
            schedule: Vec::new(),
            ranker: None,
            pool: None,
            reward: None,
            rollout: None,
            pending: None,
            final_pick: None,
            answers: Vec::new(),
        };
        s.advance()?;
        Ok(s)
    }

    /// Rebuilds a session from its recorded answers.
    pub fn replay(prepared: &Prepared, cfg: &EngineConfig, answers: &[Winner]) -> Result<Self, PipelineError> {
        let mut s = Self::start(prepared, cfg)?;
        for &w in answers {
            s.answer(w)?;
        }
        Ok(s)
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn pending(&self) -> Option<PendingQuery> {
        self.pending
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn concept_phase(&self) -> bool {
        self.pool.is_none()
    }

    pub fn converged(&self) -> bool {
        self.final_pick.is_some()
    }

    fn context<'a>(&'a self, history: &'a [PreferencePair]) -> QueryContext<'a> {
        QueryContext {
            sim: &self.sim,
            clusters: &self.clusters,
            phi: &self.phi,
            phi_schema: &self.phi_schema,
            history,
            budget: self.cfg.prefs.query_budget,
        }
    }

    /// Fitted utilities; before any answer, the concepts' base scores.
    pub fn utilities(&self) -> Vec<f64> {
        match &self.ranker {
            Some(m) => m.utilities(&self.phi),
            None => self.concepts.iter().map(|c| c.base_score).collect(),
        }
    }

    fn fit_ranker(&self) -> Result<Option<RankerModel>, PipelineError> {
        if self.concept_prefs.is_empty() {
            return Ok(None);
        }
        let opts = FitOptions {
            lr: self.cfg.prefs.lr,
            epochs: self.cfg.prefs.epochs,
            stochastic: false,
            seed: self.cfg.seed,
        };
        Ok(Some(fit_utility(&self.concept_prefs, &self.phi, self.phi_schema.clone(), &opts)?))
    }

    /// Concept weights for the pool: rank plus one, scaled to `(0, 1]`.
    fn rank_weights(ranks: &[usize]) -> Vec<f64> {
        let n = ranks.len() as f64;
        ranks.iter().map(|&r| (r as f64 + 1.0) / n).collect()
    }

    fn ranks(&self) -> Vec<usize> {
        rank(&self.utilities())
    }

    /// Moves to the next question, or through the phase changes when the
    /// current phase has nothing left to ask.
    fn advance(&mut self) -> Result<(), PipelineError> {
        if self.concept_phase() {
            if self.concept_prefs.len() < self.cfg.prefs.query_budget {
                let history = self.concept_prefs.clone();
                let mut selector = self.selector.clone();
                let next = selector.next(&self.context(&history));
                match next {
                    Ok((left, right)) => {
                        self.selector = selector;
                        self.pending = Some(PendingQuery::Concepts { left, right });
                        return Ok(());
                    }
                    Err(PrefsError::BudgetExhausted(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            self.ranker = self.fit_ranker()?;
            let weights = Self::rank_weights(&self.ranks());
            let pool = generate_pool(
                &self.corpus,
                &self.concepts,
                &weights,
                self.cfg.budget,
                self.cfg.pool_size,
                self.cfg.seed,
            )?;
            let n = pool.summaries.len();
            let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(self.cfg.seed));
            pairs.truncate(self.cfg.summarizer.summary_queries);
            self.schedule = pairs;
            self.pool = Some(pool);
        }
        if let Some(&(left, right)) = self.schedule.get(self.summary_prefs.len()) {
            self.pending = Some(PendingQuery::Summaries { left, right });
            return Ok(());
        }
        self.pending = None;
        self.final_pick = Some(self.finish()?);
        Ok(())
    }

    /// Fits the summary reward, trains the policy on it, and returns the
    /// policy's greedy summary. Without enough summary answers to fit a
    /// reward, the pool's top member stands.
    fn finish(&mut self) -> Result<Draft, PipelineError> {
        let pool = self.pool.as_ref().expect("pool exists after the concept phase");
        let top = pool.summaries.first().cloned().ok_or(crate::summarizer::SummarizerError::EmptyPool)?;
        if self.summary_prefs.len() < 2 {
            return Ok(top);
        }
        let ranks = self.ranks();
        let featurizer = SummaryFeaturizer::new(&self.corpus, &self.concepts, &ranks, self.cfg.budget, None);
        let samples = RewardSamples::Pairs(
            self.summary_prefs
                .iter()
                .map(|p| {
                    (
                        featurizer.features(&pool.summaries[p.left].sentence_ids),
                        featurizer.features(&pool.summaries[p.right].sentence_ids),
                        p.winner,
                    )
                })
                .collect(),
        );
        let opts = RewardOptions {
            lr: self.cfg.summarizer.reward_lr,
            epochs: self.cfg.summarizer.reward_epochs,
        };
        let reward = fit_reward(&samples, SUMMARY_FEATURES.iter().map(|s| s.to_string()).collect(), &opts)?;
        let task = SummaryTask::all_sentences(&featurizer, &reward);
        let policy = learn_policy(
            &task,
            &PolicyOptions {
                episodes: self.cfg.summarizer.episodes,
                epsilon0: self.cfg.summarizer.epsilon0,
                eta: self.cfg.summarizer.eta,
                init: 0.0,
                seed: self.cfg.seed,
            },
        );
        let rolled = Draft::new(&self.corpus, policy.rollout(&task));
        let pick = if rolled.sentence_ids.is_empty() { top } else { rolled.clone() };
        self.rollout = Some(rolled);
        self.reward = Some(reward);
        Ok(pick)
    }

    /// Records the answer to the pending question.
    pub fn answer(&mut self, winner: Winner) -> Result<(), PipelineError> {
        let Some(q) = self.pending else {
            return Err(PrefsError::BudgetExhausted(self.answers.len()).into());
        };
        match q {
            PendingQuery::Concepts { left, right } => self.concept_prefs.push(PreferencePair {
                left,
                right,
                winner,
                round: self.concept_prefs.len(),
            }),
            PendingQuery::Summaries { left, right } => self.summary_prefs.push(PreferencePair {
                left,
                right,
                winner,
                round: self.summary_prefs.len(),
            }),
        }
        self.answers.push(winner);
        self.advance()
    }

    /// Lets a simulated user answer `query`.
    pub fn ask(&self, user: &mut SimUser, query: PendingQuery) -> Result<Winner, PipelineError> {
        Ok(match query {
            PendingQuery::Concepts { left, right } => user.prefer_concepts(&self.concepts[left], &self.concepts[right])?,
            PendingQuery::Summaries { left, right } => {
                let pool = &self.pool.as_ref().expect("summary queries need a pool").summaries;
                user.prefer_summaries(&self.corpus, &pool[left].sentence_ids, &pool[right].sentence_ids)?
            }
        })
    }

    /// The final pick once converged; the pool's top member during the
    /// summary phase; the best coverage summary under the current utilities
    /// before that.
    pub fn current_summary(&self) -> Result<Draft, PipelineError> {
        if let Some(d) = &self.final_pick {
            return Ok(d.clone());
        }
        if let Some(p) = &self.pool {
            return p.summaries.first().cloned().ok_or_else(|| crate::summarizer::SummarizerError::EmptyPool.into());
        }
        let ranker = self.fit_ranker()?;
        let utilities = match &ranker {
            Some(m) => m.utilities(&self.phi),
            None => self.utilities(),
        };
        let weights = Self::rank_weights(&rank(&utilities));
        Ok(coverage_summary(&self.corpus, &self.concepts, &weights, self.cfg.budget)?)
    }
}
