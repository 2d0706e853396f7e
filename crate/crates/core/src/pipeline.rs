//! Glue between the modules: preparing a corpus, training and applying the
//! generic model, and the simulated-user experiments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adaptive::{AdaptiveConfig, AdaptiveError, Session};
use crate::config::{ConfigError, EngineConfig};
use crate::corpus::{build_embeddings, featurize, Corpus, CorpusError, Embeddings};
use crate::eval::{ground_truth_reward, rouge_l, rouge_n, synth_corpus, EvalError, RougeMode, SimUser, SynthConfig};
use crate::exdos::{label_sentences, select_summary, train, ExDosModel, ExdosError, KChoice, Summary};
use crate::prefs::PrefsError;
use crate::summarizer::SummarizerError;
use crate::sumrecom::SumRecomSession;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Exdos(#[from] ExdosError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error(transparent)]
    Prefs(#[from] PrefsError),
    #[error(transparent)]
    Summarizer(#[from] SummarizerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus has an empty vocabulary")]
    EmptyVocabulary,
    #[error("feature schema of the model ({model:?}) differs from the corpus ({corpus:?})")]
    FeatureSchema { model: Vec<String>, corpus: Vec<String> },
}

/// A featurised corpus with its embeddings, ready to share across sessions.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Arc<Corpus>,
    pub embeddings: Arc<Embeddings>,
}

pub fn prepare(mut corpus: Corpus, cfg: &EngineConfig) -> Result<Prepared, PipelineError> {
    featurize(&mut corpus, cfg.seed);
    let dim = cfg.embed_dim.min(corpus.terms.len());
    if dim == 0 {
        return Err(PipelineError::EmptyVocabulary);
    }
    let embeddings = build_embeddings(&corpus, dim, cfg.seed)?;
    Ok(Prepared {
        corpus: Arc::new(corpus),
        embeddings: Arc::new(embeddings),
    })
}

/// Trains an ExDoS model on a prepared corpus, labelling sentences from its
/// references when present.
pub fn train_model(prepared: &Prepared, cfg: &EngineConfig) -> Result<ExDosModel, PipelineError> {
    let data = label_sentences(&prepared.corpus)?;
    let k = cfg.clusters.map_or(KChoice::Auto, KChoice::Fixed);
    let mut model = train(&data, k, &cfg.exdos, cfg.seed)?;
    model.feature_names = prepared.corpus.feature_names.clone();
    Ok(model)
}

fn check_schema(model: &ExDosModel, corpus: &Corpus) -> Result<(), PipelineError> {
    if model.feature_names != corpus.feature_names {
        return Err(PipelineError::FeatureSchema {
            model: model.feature_names.clone(),
            corpus: corpus.feature_names.clone(),
        });
    }
    Ok(())
}

/// One-shot ExDoS summary under the configured budget.
pub fn summarize(prepared: &Prepared, model: &ExDosModel, cfg: &EngineConfig) -> Result<Summary, PipelineError> {
    check_schema(model, &prepared.corpus)?;
    Ok(select_summary(
        model,
        &prepared.corpus,
        &prepared.embeddings,
        cfg.budget,
        &cfg.exdos,
        cfg.seed,
        cfg.restarts,
    )?)
}

pub fn adaptive_config(cfg: &EngineConfig) -> AdaptiveConfig {
    AdaptiveConfig {
        budget: cfg.budget,
        unit: cfg.unit,
        seed: cfg.seed,
        restarts: cfg.restarts,
        hyper: cfg.exdos,
    }
}

pub fn start_adaptive(prepared: &Prepared, model: &ExDosModel, cfg: &EngineConfig) -> Result<Session, PipelineError> {
    check_schema(model, &prepared.corpus)?;
    Ok(Session::start(
        prepared.corpus.clone(),
        model,
        &prepared.embeddings,
        adaptive_config(cfg),
    )?)
}

/// Seed offset of the corpus the generic model is trained on, so it never
/// sees the evaluation corpus or its references.
pub const SIBLING_SEED_OFFSET: u64 = 0x5EED;

/// The non-personalised model: trained on a sibling synthetic corpus drawn
/// with a different seed.
pub fn generic_model(synth: &SynthConfig, seed: u64, cfg: &EngineConfig) -> Result<ExDosModel, PipelineError> {
    let sibling = synth_corpus(synth, seed.wrapping_add(SIBLING_SEED_OFFSET));
    let prepared = prepare(sibling.corpus, cfg)?;
    train_model(&prepared, cfg)
}

/// One line of a simulation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    /// Ground-truth reward of the summary.
    pub reward: f64,
    pub words: usize,
    pub sentence_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: String,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    /// Ground-truth reward of the generic ExDoS summary on the same corpus.
    pub generic_reward: f64,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,rouge1,rouge2,rouge_l,reward,words,sentence_ids\n");
        for r in &self.rounds {
            let ids: Vec<String> = r.sentence_ids.iter().map(usize::to_string).collect();
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                r.round,
                r.rouge1,
                r.rouge2,
                r.rouge_l,
                r.reward,
                r.words,
                ids.join(" ")
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn final_reward(&self) -> f64 {
        self.rounds.last().map_or(f64::NAN, |r| r.reward)
    }
}

pub fn score_round(corpus: &Corpus, cfg: &EngineConfig, round: usize, ids: &[usize]) -> Result<RoundRecord, PipelineError> {
    let refs = &corpus.reference_summaries;
    let toks = corpus.summary_tokens(ids);
    Ok(RoundRecord {
        round,
        rouge1: rouge_n(&toks, refs, 1, RougeMode::Recall, None)?.value,
        rouge2: rouge_n(&toks, refs, 2, RougeMode::Recall, None)?.value,
        rouge_l: rouge_l(&toks, refs, RougeMode::Recall)?.value,
        reward: ground_truth_reward(&cfg.reward, corpus, ids, refs)?,
        words: corpus.word_count(ids),
        sentence_ids: ids.to_vec(),
    })
}

/// Adaptive loop against a reference-oracle user: round 0 is the ExDoS
/// summary, every later round answers one concept group.
pub fn simulate_adaptive(
    synth: &SynthConfig,
    cfg: &EngineConfig,
    rounds: usize,
) -> Result<SimulationReport, PipelineError> {
    let data = synth_corpus(synth, cfg.seed);
    let refs = data.corpus.reference_summaries.clone();
    let prepared = prepare(data.corpus, cfg)?;
    let model = generic_model(synth, cfg.seed, cfg)?;
    let mut session = start_adaptive(&prepared, &model, cfg)?;
    let user = SimUser::reference(refs, cfg.seed);
    let corpus = prepared.corpus.clone();
    let generic = session.current_summary.sentence_ids.clone();
    let mut out = vec![score_round(&corpus, cfg, 0, &generic)?];
    for round in 1..=rounds {
        if !session.converged() {
            let group = session.next_query_group(cfg.group_size)?;
            let events = group
                .iter()
                .map(|q| {
                    user.concept_feedback(&session.concepts[q.concept_id], session.round)
                        .map(crate::adaptive::Event::concept)
                })
                .collect::<Result<Vec<_>, _>>()?;
            session.apply(events)?;
        }
        out.push(score_round(&corpus, cfg, round, &session.current_summary.sentence_ids)?);
    }
    Ok(SimulationReport {
        mode: "adaptive".into(),
        seed: cfg.seed,
        generic_reward: out[0].reward,
        rounds: out,
    })
}

/// Full preference-based loop against a dictionary user holding the planted
/// utilities. Rows trace the provisional summary after each concept query,
/// and the last row is the final pick.
pub fn simulate_sumrecom(
    synth: &SynthConfig,
    cfg: &EngineConfig,
    noise: f64,
) -> Result<SimulationReport, PipelineError> {
    let data = synth_corpus(synth, cfg.seed);
    let refs = data.corpus.reference_summaries.clone();
    let prepared = prepare(data.corpus, cfg)?;
    let model = generic_model(synth, cfg.seed, cfg)?;
    let generic = summarize(&prepared, &model, cfg)?;
    let corpus = prepared.corpus.clone();
    let mut user = SimUser::dictionary(data.utilities, refs, cfg.seed).with_noise(noise)?;
    let mut session = SumRecomSession::start(&prepared, cfg)?;
    let mut out = Vec::new();
    let mut round = 0;
    while let Some(q) = session.pending() {
        let winner = session.ask(&mut user, q)?;
        session.answer(winner)?;
        round += 1;
        if session.concept_phase() || !session.has_pending() {
            out.push(score_round(&corpus, cfg, round, &session.current_summary()?.sentence_ids)?);
        }
    }
    Ok(SimulationReport {
        mode: "sumrecom".into(),
        seed: cfg.seed,
        generic_reward: ground_truth_reward(&cfg.reward, &corpus, &generic.sentence_ids, &corpus.reference_summaries)?,
        rounds: out,
    })
}

/// Outcome of one simulated concept-preference phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTrial {
    /// Kendall tau between fitted and planted concept utilities.
    pub tau: f64,
    pub queries: usize,
}

/// Runs only the concept-pair phase of a session with a dictionary user and
/// scores the recovered utility ranking.
pub fn preference_trial(synth: &SynthConfig, cfg: &EngineConfig, noise: f64) -> Result<PreferenceTrial, PipelineError> {
    let data = synth_corpus(synth, cfg.seed);
    let refs = data.corpus.reference_summaries.clone();
    let prepared = prepare(data.corpus, cfg)?;
    let mut cfg = cfg.clone();
    cfg.summarizer.summary_queries = 0;
    let mut user = SimUser::dictionary(data.utilities, refs, cfg.seed).with_noise(noise)?;
    let mut session = SumRecomSession::start(&prepared, &cfg)?;
    while let Some(q) = session.pending() {
        let w = session.ask(&mut user, q)?;
        session.answer(w)?;
    }
    let truth = session
        .concepts
        .iter()
        .map(|c| user.utility(c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PreferenceTrial {
        tau: crate::eval::stats::kendall_tau_b(&session.utilities(), &truth),
        queries: session.concept_prefs.len(),
    })
}
