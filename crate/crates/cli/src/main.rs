use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use persum_core::adaptive::{Action, Event, Feedback};
use persum_core::config::EngineConfig;
use persum_core::corpus::text::tokenize;
use persum_core::corpus::{load_corpus, load_references, ConceptUnit, CorpusFormat};
use persum_core::eval::{rouge_l, rouge_n, synth_corpus, RougeMode, SynthConfig};
use persum_core::exdos::ExDosModel;
use persum_core::pipeline::{self, generic_model, prepare, train_model, Prepared};
use persum_service::AppState;

#[derive(Parser)]
#[command(name = "persum", version, about = "Personalised extractive summarisation")]
struct Cli {
    /// TOML engine configuration; defaults to $PERSUM_CONFIG, then built-in values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a generic extractive summary of a corpus.
    Summarize(SummarizeArgs),
    /// Refine a summary interactively by answering concept questions.
    Interact(InteractArgs),
    /// Run a simulated user against a synthetic corpus and print the trace.
    Simulate(SimulateArgs),
    /// Score a candidate summary against references with ROUGE.
    Eval(EvalArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
    /// Fit an ExDoS model to a corpus and write it as JSON.
    TrainExdos(TrainArgs),
}

#[derive(Args)]
struct Source {
    /// Corpus: a JSONL file or a directory of .txt documents.
    #[arg(long, conflicts_with = "synth")]
    corpus: Option<PathBuf>,
    /// Directory of reference summaries for the corpus.
    #[arg(long, requires = "corpus")]
    refs: Option<PathBuf>,
    /// Use the synthetic corpus generated from this seed.
    #[arg(long)]
    synth: Option<u64>,
    /// Previously trained model; otherwise one is fitted on the spot.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Summary length in words.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    source: Source,
    /// Print JSON with sentence ids and score terms.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InteractArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    unit: Option<ConceptUnit>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Adaptive,
    Sumrecom,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: SimMode,
    /// Feedback rounds for the adaptive mode.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Probability that the simulated user flips a preference answer.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Rouge1,
    Rouge2,
    RougeL,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    cand: PathBuf,
    /// Reference summary; repeat for several.
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Metric::All)]
    metric: Metric,
    /// Report F1 instead of recall.
    #[arg(long)]
    f1: bool,
    /// Score only the first N candidate words (ROUGE-N only).
    #[arg(long)]
    truncate: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Session and corpus storage; defaults to $PERSUM_DATA_DIR, then ./persum-data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, conflicts_with = "synth")]
    corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    refs: Option<PathBuf>,
    #[arg(long)]
    synth: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::from_env()?,
    };
    match cli.command {
        Command::Summarize(a) => summarize(cfg, a),
        Command::Interact(a) => interact(cfg, a, &mut io::stdin().lock(), &mut io::stdout()),
        Command::Simulate(a) => simulate(cfg, a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(cfg, a),
        Command::TrainExdos(a) => train(cfg, a),
    }
}

fn read_corpus(path: &Path, refs: Option<&Path>, cfg: &EngineConfig) -> Result<Prepared> {
    let mut corpus =
        load_corpus(path, CorpusFormat::detect(path)).with_context(|| format!("reading {}", path.display()))?;
    if let Some(r) = refs {
        corpus = corpus.with_references(load_references(r)?);
    }
    Ok(prepare(corpus, cfg)?)
}

/// Corpus and model named by the source flags.
fn load_source(src: &Source, cfg: &EngineConfig) -> Result<(Prepared, ExDosModel)> {
    let (prepared, fallback) = match (&src.corpus, src.synth) {
        (Some(path), _) => (read_corpus(path, src.refs.as_deref(), cfg)?, None),
        (None, Some(seed)) => {
            let synth = SynthConfig::default();
            let prepared = prepare(synth_corpus(&synth, seed).corpus, cfg)?;
            (prepared, Some(generic_model(&synth, seed, cfg)?))
        }
        (None, None) => bail!("one of --corpus or --synth is required"),
    };
    let model = match &src.model {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExDosModel::from_json(&text).with_context(|| format!("parsing model {}", p.display()))?
        }
        None => match fallback {
            Some(m) => m,
            None => train_model(&prepared, cfg)?,
        },
    };
    Ok((prepared, model))
}

fn summarize(mut cfg: EngineConfig, a: SummarizeArgs) -> Result<()> {
    if let Some(b) = a.source.budget {
        cfg.budget = b;
    }
    let (prepared, model) = load_source(&a.source, &cfg)?;
    let s = pipeline::summarize(&prepared, &model, &cfg)?;
    if a.json {
        let sentences: Vec<_> = s
            .sentence_ids
            .iter()
            .map(|&i| serde_json::json!({"id": i, "text": prepared.corpus.sentences[i].text}))
            .collect();
        let v = serde_json::json!({
            "budget": s.budget,
            "word_count": s.word_count,
            "sentences": sentences,
            "score": s.score_breakdown,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("{}", s.text(&prepared.corpus));
    }
    Ok(())
}

/// One answer line: whitespace-separated entries of the form `ID+`, `ID-`
/// (optionally followed by `:WEIGHT`) for concepts and `xID` to strike a
/// sentence.
fn parse_answers(line: &str, round: usize, pending: &[usize]) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for tok in line.split_whitespace() {
        if let Some(id) = tok.strip_prefix('x') {
            events.push(Event::reject_sentence(id.parse().with_context(|| format!("bad sentence id in `{tok}`"))?));
            continue;
        }
        let (head, weight) = match tok.split_once(':') {
            Some((h, w)) => (h, w.parse::<f64>().with_context(|| format!("bad weight in `{tok}`"))?),
            None => (tok, 1.0),
        };
        let (id, action) = if let Some(id) = head.strip_suffix('+') {
            (id, Action::Accept)
        } else if let Some(id) = head.strip_suffix('-') {
            (id, Action::Reject)
        } else {
            bail!("`{tok}` should look like 12+ or 12-:0.5 or x7");
        };
        let concept_id: usize = id.parse().with_context(|| format!("bad concept id in `{tok}`"))?;
        if !pending.contains(&concept_id) {
            bail!("concept {concept_id} is not in this round's question");
        }
        events.push(Event::concept(Feedback {
            concept_id,
            action,
            weight,
            confidence: 1.0,
            round,
        }));
    }
    Ok(events)
}

fn interact(mut cfg: EngineConfig, a: InteractArgs, input: &mut impl BufRead, out: &mut impl Write) -> Result<()> {
    if let Some(b) = a.source.budget {
        cfg.budget = b;
    }
    if let Some(u) = a.unit {
        cfg.unit = u;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let (prepared, model) = load_source(&a.source, &cfg)?;
    let mut session = pipeline::start_adaptive(&prepared, &model, &cfg)?;
    let corpus = prepared.corpus.clone();
    writeln!(out, "Answer with entries like `3+` (more of this), `5-:0.5` (less, weight 0.5) or `x12` (drop sentence 12).")?;
    writeln!(out, "`q` stops.")?;
    loop {
        let sm = &session.current_summary;
        writeln!(out, "\nSummary after round {} ({} of {} words):", session.round, sm.word_count, cfg.budget)?;
        for &i in &sm.sentence_ids {
            writeln!(out, "  [{i}] {}", corpus.sentences[i].text)?;
        }
        if session.converged() {
            writeln!(out, "\nEvery concept has been asked about.")?;
            return Ok(());
        }
        let group = session.next_query_group(cfg.group_size)?;
        writeln!(out, "\nConcepts:")?;
        for q in &group {
            let example = q.sentences.first().map(|(_, t)| t.as_str()).unwrap_or("");
            writeln!(out, "  {:>4}  {:<24} e.g. {example}", q.concept_id, q.label)?;
        }
        let pending: Vec<usize> = group.iter().map(|q| q.concept_id).collect();
        loop {
            write!(out, "> ")?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 || line.trim() == "q" {
                return Ok(());
            }
            match parse_answers(&line, session.round, &pending) {
                Ok(events) if events.is_empty() => continue,
                Ok(events) => match session.apply(events) {
                    Ok(_) => break,
                    Err(e) => writeln!(out, "not applied: {e}")?,
                },
                Err(e) => writeln!(out, "{e:#}")?,
            }
        }
    }
}

fn simulate(mut cfg: EngineConfig, a: SimulateArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    cfg.validate()?;
    let synth = SynthConfig::default();
    let report = match a.mode {
        SimMode::Adaptive => pipeline::simulate_adaptive(&synth, &cfg, a.rounds)?,
        SimMode::Sumrecom => pipeline::simulate_sumrecom(&synth, &cfg, a.noise)?,
    };
    let text = if a.json { report.to_json() } else { report.to_csv() };
    match a.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_tokens(p: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(tokenize(&text))
}

fn eval(a: EvalArgs) -> Result<()> {
    let cand = read_tokens(&a.cand)?;
    let refs = a.refs.iter().map(|p| read_tokens(p)).collect::<Result<Vec<_>>>()?;
    let mode = if a.f1 { RougeMode::F1 } else { RougeMode::Recall };
    let label = if a.f1 { "f1" } else { "recall" };
    let wanted = |m: Metric| a.metric == Metric::All || a.metric == m;
    if wanted(Metric::Rouge1) {
        println!("rouge-1 {label} {:.4}", rouge_n(&cand, &refs, 1, mode, a.truncate)?.value);
    }
    if wanted(Metric::Rouge2) {
        println!("rouge-2 {label} {:.4}", rouge_n(&cand, &refs, 2, mode, a.truncate)?.value);
    }
    if wanted(Metric::RougeL) {
        println!("rouge-l {label} {:.4}", rouge_l(&cand, &refs, mode)?.value);
    }
    Ok(())
}

fn serve(cfg: EngineConfig, a: ServeArgs) -> Result<()> {
    let dir = a
        .data_dir
        .or_else(|| std::env::var_os("PERSUM_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("persum-data"));
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("invalid address {}:{}", a.host, a.port))?;
    let state = Arc::new(AppState::new(cfg, &dir));
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving on http://{addr} with data in {}", dir.display());
    rt.block_on(persum_service::serve(state, addr))?;
    Ok(())
}

fn train(cfg: EngineConfig, a: TrainArgs) -> Result<()> {
    let prepared = match (&a.corpus, a.synth) {
        (Some(p), _) => read_corpus(p, a.refs.as_deref(), &cfg)?,
        (None, Some(seed)) => prepare(synth_corpus(&SynthConfig::default(), seed).corpus, &cfg)?,
        (None, None) => bail!("one of --corpus or --synth is required"),
    };
    let model = train_model(&prepared, &cfg)?;
    std::fs::write(&a.out, model.to_json()).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "trained {} clusters over {} features; objective {:.4} -> {:.4}",
        model.k(),
        model.dim(),
        model.objective_trace.first().copied().unwrap_or(f64::NAN),
        model.objective_trace.last().copied().unwrap_or(f64::NAN),
    );
    Ok(())
}
