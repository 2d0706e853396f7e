//! Corpus registry and the live session state behind each session id.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use persum_core::adaptive::{Action, AdaptiveError, Event, Feedback, QueryItem, Session};
use persum_core::summarizer::SummarizerError;
use persum_core::config::EngineConfig;
use persum_core::corpus::{load_corpus, load_references, CorpusFormat};
use persum_core::eval::{synth_corpus, SynthConfig};
use persum_core::exdos::{ExDosModel, ExdosError, ScoreBreakdown};
use persum_core::pipeline::{self, generic_model, prepare, start_adaptive, train_model, PipelineError, Prepared};
use persum_core::prefs::Winner;
use persum_core::sumrecom::{PendingQuery, SumRecomSession};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::store::{Mode, PreferenceEvent, SessionMeta, Store};

/// A prepared corpus with the ExDoS model used on it.
pub struct Loaded {
    pub prepared: Prepared,
    pub model: ExDosModel,
}

type Slot = Arc<OnceLock<Result<Arc<Loaded>, String>>>;

/// Corpora by id, loaded once per distinct engine config.
///
/// `synth-<seed>` names a generated corpus whose model is trained on a
/// sibling corpus. Any other id is read from `<data>/corpora/<id>.jsonl`
/// (references in an optional `<id>.refs/` directory) or from the text
/// directory `<data>/corpora/<id>/`, and the model is trained on the corpus
/// itself.
pub struct Corpora {
    dir: PathBuf,
    slots: Mutex<HashMap<(String, String), Slot>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn pipeline_error(e: PipelineError) -> ApiError {
    let infeasible = matches!(
        e,
        PipelineError::Exdos(ExdosError::InfeasibleBudget { .. })
            | PipelineError::Adaptive(AdaptiveError::Exdos(ExdosError::InfeasibleBudget { .. }))
            | PipelineError::Summarizer(SummarizerError::InfeasibleBudget(_))
    );
    if infeasible {
        ApiError::field("budget", e.to_string())
    } else {
        ApiError::internal(e.to_string())
    }
}

impl Corpora {
    pub fn new(data_dir: &Path) -> Self {
        Self {
            dir: data_dir.join("corpora"),
            slots: Mutex::new(HashMap::new()),
        }
    }

    fn source(&self, id: &str) -> Option<(PathBuf, Option<PathBuf>)> {
        let file = self.dir.join(format!("{id}.jsonl"));
        if file.is_file() {
            let refs = self.dir.join(format!("{id}.refs"));
            return Some((file, refs.is_dir().then_some(refs)));
        }
        let dir = self.dir.join(id);
        dir.is_dir().then_some((dir, None))
    }

    fn build(&self, id: &str, cfg: &EngineConfig) -> Result<Arc<Loaded>, String> {
        let fail = |e: PipelineError| e.to_string();
        if let Some(seed) = id.strip_prefix("synth-").and_then(|s| s.parse::<u64>().ok()) {
            let synth = SynthConfig::default();
            let prepared = prepare(synth_corpus(&synth, seed).corpus, cfg).map_err(fail)?;
            let model = generic_model(&synth, seed, cfg).map_err(fail)?;
            return Ok(Arc::new(Loaded { prepared, model }));
        }
        let (path, refs) = self.source(id).ok_or_else(|| format!("no corpus named `{id}`"))?;
        let mut corpus = load_corpus(&path, CorpusFormat::detect(&path)).map_err(|e| e.to_string())?;
        if let Some(r) = refs {
            corpus = corpus.with_references(load_references(&r).map_err(|e| e.to_string())?);
        }
        let prepared = prepare(corpus, cfg).map_err(fail)?;
        let model = train_model(&prepared, cfg).map_err(fail)?;
        Ok(Arc::new(Loaded { prepared, model }))
    }

    /// Blocking: may featurise and train.
    pub fn get(&self, id: &str, cfg: &EngineConfig) -> Result<Arc<Loaded>, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::field("corpus_id", "must be 1-128 characters of [A-Za-z0-9_-]"));
        }
        let known = id.starts_with("synth-") || self.source(id).is_some();
        if !known {
            return Err(ApiError::field("corpus_id", format!("no corpus named `{id}`")));
        }
        let mut key_cfg = cfg.clone();
        key_cfg.budget = 0;
        let key = (id.to_string(), key_cfg.to_toml());
        let slot = self.slots.lock().expect("registry lock").entry(key.clone()).or_default().clone();
        match slot.get_or_init(|| self.build(id, cfg)) {
            Ok(l) => Ok(l.clone()),
            Err(msg) => {
                self.slots.lock().expect("registry lock").remove(&key);
                Err(ApiError::internal(format!("cannot load corpus `{id}`: {msg}")))
            }
        }
    }
}

pub enum Engine {
    Adaptive(Session),
    Sumrecom(SumRecomSession),
}

/// One session: its record, the engine state and the corpus it runs on.
pub struct Live {
    pub meta: SessionMeta,
    pub engine: Engine,
    pub loaded: Arc<Loaded>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingFeedback,
    Converged,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptAnswer {
    pub concept_id: usize,
    pub action: Action,
    pub weight: f64,
    #[serde(default = "one")]
    pub confidence: f64,
}

fn one() -> f64 {
    1.0
}

/// Feedback body. Adaptive sessions take `items` (and optionally
/// `reject_sentences`); preference sessions take `winner`. A `round`, when
/// given, must match the round of the pending query.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackBody {
    #[serde(default)]
    pub round: Option<usize>,
    #[serde(default)]
    pub items: Vec<ConceptAnswer>,
    #[serde(default)]
    pub reject_sentences: Vec<usize>,
    #[serde(default)]
    pub winner: Option<Winner>,
}

impl Live {
    pub fn start(meta: SessionMeta, loaded: Arc<Loaded>) -> Result<Self, ApiError> {
        let engine = match meta.mode {
            Mode::Adaptive => Engine::Adaptive(
                start_adaptive(&loaded.prepared, &loaded.model, &meta.config).map_err(pipeline_error)?,
            ),
            Mode::Sumrecom => {
                Engine::Sumrecom(SumRecomSession::start(&loaded.prepared, &meta.config).map_err(pipeline_error)?)
            }
        };
        Ok(Self { meta, engine, loaded })
    }

    /// Rebuilds a session from its directory.
    pub fn restore(store: &Store, meta: SessionMeta, loaded: Arc<Loaded>) -> Result<Self, ApiError> {
        let id = meta.session_id;
        let engine = match meta.mode {
            Mode::Adaptive => {
                let events = store.adaptive_events(id)?;
                Engine::Adaptive(
                    Session::replay(
                        loaded.prepared.corpus.clone(),
                        &loaded.model,
                        &loaded.prepared.embeddings,
                        pipeline::adaptive_config(&meta.config),
                        &events,
                    )
                    .map_err(|e| ApiError::internal(format!("replay of {id} failed: {e}")))?,
                )
            }
            Mode::Sumrecom => {
                let answers: Vec<Winner> = store.preferences(id)?.into_iter().map(|p| p.winner).collect();
                Engine::Sumrecom(
                    SumRecomSession::replay(&loaded.prepared, &meta.config, &answers)
                        .map_err(|e| ApiError::internal(format!("replay of {id} failed: {e}")))?,
                )
            }
        };
        Ok(Self { meta, engine, loaded })
    }

    pub fn status(&self) -> Status {
        let done = match &self.engine {
            Engine::Adaptive(s) => s.converged(),
            Engine::Sumrecom(s) => s.converged() || !s.has_pending(),
        };
        if done {
            Status::Converged
        } else {
            Status::AwaitingFeedback
        }
    }

    pub fn round(&self) -> usize {
        match &self.engine {
            Engine::Adaptive(s) => s.round,
            Engine::Sumrecom(s) => s.answers.len(),
        }
    }

    fn pending_group(&self, s: &Session) -> Result<Vec<QueryItem>, ApiError> {
        s.next_query_group(self.meta.config.group_size)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    fn header(&self) -> Value {
        json!({
            "schema_version": crate::SCHEMA_VERSION,
            "session_id": self.meta.session_id,
            "mode": self.meta.mode,
            "status": self.status(),
            "round": self.round(),
        })
    }

    pub fn query_view(&self) -> Result<Value, ApiError> {
        let mut v = self.header();
        let query = if self.status() == Status::Converged {
            Value::Null
        } else {
            match &self.engine {
                Engine::Adaptive(s) => json!({"kind": "concept_group", "items": self.pending_group(s)?}),
                Engine::Sumrecom(s) => match s.pending().expect("awaiting feedback") {
                    PendingQuery::Concepts { left, right } => {
                        let item = |i: usize| json!({"index": i, "label": s.concepts[i].label});
                        json!({"kind": "concepts", "left": item(left), "right": item(right)})
                    }
                    PendingQuery::Summaries { left, right } => {
                        let pool = &s.pool.as_ref().expect("summary phase has a pool").summaries;
                        let corpus = s.corpus();
                        let item = |i: usize| {
                            let ids = &pool[i].sentence_ids;
                            let text: Vec<&str> = ids.iter().map(|&k| corpus.sentences[k].text.as_str()).collect();
                            json!({"index": i, "sentence_ids": ids, "sentences": text})
                        };
                        json!({"kind": "summaries", "left": item(left), "right": item(right)})
                    }
                },
            }
        };
        v["query"] = query;
        Ok(v)
    }

    pub fn summary_view(&self) -> Result<Value, ApiError> {
        let corpus = &self.loaded.prepared.corpus;
        let (ids, words, score) = match &self.engine {
            Engine::Adaptive(s) => {
                let sm = &s.current_summary;
                (sm.sentence_ids.clone(), sm.word_count, breakdown(&sm.score_breakdown))
            }
            Engine::Sumrecom(s) => {
                let d = s.current_summary().map_err(pipeline_error)?;
                let score = json!({"objective": d.objective, "redundancy": d.redundancy});
                (d.sentence_ids, d.word_count, score)
            }
        };
        let mut v = self.header();
        v["budget"] = json!(self.meta.config.budget);
        v["word_count"] = json!(words);
        v["sentences"] = ids
            .iter()
            .map(|&i| json!({"id": i, "text": corpus.sentences[i].text}))
            .collect();
        v["sentence_ids"] = json!(ids);
        v["score"] = score;
        Ok(v)
    }

    /// Applies feedback and persists the resulting log lines. The in-memory
    /// state changes only after the lines are on disk.
    pub fn feedback(&mut self, store: &Store, body: FeedbackBody) -> Result<Value, ApiError> {
        if self.status() == Status::Converged {
            return Err(ApiError::conflict("session has converged; no query is pending"));
        }
        if let Some(r) = body.round {
            if r != self.round() {
                return Err(ApiError::conflict(format!(
                    "feedback is for round {r}, but the pending query is round {}",
                    self.round()
                )));
            }
        }
        let id = self.meta.session_id;
        match &mut self.engine {
            Engine::Adaptive(s) => {
                if body.winner.is_some() {
                    return Err(ApiError::field("winner", "adaptive sessions take `items`, not `winner`"));
                }
                if body.items.is_empty() && body.reject_sentences.is_empty() {
                    return Err(ApiError::field("items", "at least one concept answer is required"));
                }
                let group = s
                    .next_query_group(self.meta.config.group_size)
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                let mut events = Vec::new();
                for (k, a) in body.items.iter().enumerate() {
                    if !(0.0..=1.0).contains(&a.weight) {
                        return Err(ApiError::field(format!("items[{k}].weight"), "must lie in [0, 1]"));
                    }
                    if !(a.confidence > 0.0 && a.confidence <= 1.0) {
                        return Err(ApiError::field(format!("items[{k}].confidence"), "must lie in (0, 1]"));
                    }
                    if !group.iter().any(|q| q.concept_id == a.concept_id) {
                        return Err(ApiError::conflict(format!(
                            "concept {} is not part of the pending query",
                            a.concept_id
                        )));
                    }
                    events.push(Event::concept(Feedback {
                        concept_id: a.concept_id,
                        action: a.action,
                        weight: a.weight,
                        confidence: a.confidence,
                        round: s.round,
                    }));
                }
                for (k, &sid) in body.reject_sentences.iter().enumerate() {
                    if sid >= s.corpus().len() {
                        return Err(ApiError::field(format!("reject_sentences[{k}]"), format!("unknown sentence {sid}")));
                    }
                    events.push(Event::reject_sentence(sid));
                }
                let mut next = s.clone();
                let before = next.events.len();
                next.apply(events).map_err(|e| match e {
                    AdaptiveError::Exdos(ExdosError::InfeasibleBudget { .. }) => {
                        ApiError::conflict(format!("feedback leaves no feasible summary: {e}"))
                    }
                    other => ApiError::internal(other.to_string()),
                })?;
                store.append(id, &next.events[before..])?;
                *s = next;
            }
            Engine::Sumrecom(s) => {
                if !body.items.is_empty() || !body.reject_sentences.is_empty() {
                    return Err(ApiError::field("items", "preference sessions take `winner`"));
                }
                let winner = body.winner.ok_or_else(|| ApiError::field("winner", "missing field `winner`"))?;
                let mut next = s.clone();
                let round = next.answers.len();
                next.answer(winner).map_err(pipeline_error)?;
                store.append(id, &[PreferenceEvent { round, winner }])?;
                *s = next;
            }
        }
        let mut v = self.header();
        v["summary"] = self.summary_view()?;
        Ok(v)
    }
}

fn breakdown(b: &ScoreBreakdown) -> Value {
    json!({
        "coverage": b.coverage,
        "coherence": b.coherence,
        "redundancy": b.redundancy,
        "total": b.total,
    })
}

/// One-shot ExDoS summary as returned by `POST /summarize`.
pub fn one_shot(loaded: &Loaded, corpus_id: &str, cfg: &EngineConfig) -> Result<Value, ApiError> {
    let s = pipeline::summarize(&loaded.prepared, &loaded.model, cfg).map_err(pipeline_error)?;
    let corpus = &loaded.prepared.corpus;
    Ok(json!({
        "schema_version": crate::SCHEMA_VERSION,
        "corpus_id": corpus_id,
        "budget": s.budget,
        "word_count": s.word_count,
        "sentence_ids": s.sentence_ids,
        "sentences": s.sentence_ids.iter().map(|&i| json!({"id": i, "text": corpus.sentences[i].text})).collect::<Vec<_>>(),
        "score": breakdown(&s.score_breakdown),
    }))
}
