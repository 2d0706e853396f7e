//! Seeded synthetic corpora with a planted user interest.
//!
//! Each topic owns a set of invented content words. Documents mix a dominant
//! topic with others; reference summaries are written about one focus topic,
//! favouring its highest-utility words.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::text::tokenize;
use crate::corpus::{Corpus, Document, Stopwords};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["k", "l", "m", "n", "r", "s", "t"];
const FILLERS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "for", "on", "with", "as", "by", "at", "from",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub topics: usize,
    pub words_per_topic: usize,
    pub documents: usize,
    pub sentences_per_doc: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Content words per sentence, the rest being function words.
    pub min_content: usize,
    pub max_content: usize,
    /// Share of a document's sentences drawn from its dominant topic.
    pub dominance: f64,
    pub references: usize,
    pub reference_sentences: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            topics: 4,
            words_per_topic: 10,
            documents: 4,
            sentences_per_doc: 8,
            min_words: 8,
            max_words: 14,
            min_content: 3,
            max_content: 5,
            dominance: 0.6,
            references: 2,
            reference_sentences: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub topic_words: Vec<Vec<String>>,
    pub focus: usize,
    /// Planted utility of every content word.
    pub utilities: BTreeMap<String, f64>,
    pub reference_texts: Vec<String>,
}

fn invent_words(count: usize, rng: &mut ChaCha8Rng, stop: &Stopwords) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = format!(
            "{}{}{}{}{}",
            ONSETS.choose(rng).unwrap(),
            VOWELS.choose(rng).unwrap(),
            ONSETS.choose(rng).unwrap(),
            VOWELS.choose(rng).unwrap(),
            CODAS.choose(rng).unwrap()
        );
        if stop.contains(&w) || !stop.is_noun_like(&w) || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

fn sentence(words: &[String], weights: &[f64], cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(cfg.min_words..=cfg.max_words);
    let content = rng.gen_range(cfg.min_content..=cfg.max_content.max(cfg.min_content)).min(len);
    let dist = WeightedIndex::new(weights).expect("positive weights");
    let mut toks: Vec<String> = (0..content).map(|_| words[dist.sample(rng)].clone()).collect();
    toks.extend((content..len).map(|_| FILLERS.choose(rng).unwrap().to_string()));
    toks.shuffle(rng);
    let mut first = toks[0].chars();
    let head: String = first.next().map(|c| c.to_uppercase().collect::<String>() + first.as_str()).unwrap_or_default();
    toks[0] = head;
    format!("{}.", toks.join(" "))
}

pub fn synth_corpus(cfg: &SynthConfig, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stop = Stopwords::english();
    let all = invent_words(cfg.topics * cfg.words_per_topic, &mut rng, &stop);
    let topic_words: Vec<Vec<String>> = all.chunks(cfg.words_per_topic).map(<[String]>::to_vec).collect();
    let focus = rng.gen_range(0..cfg.topics);

    let w = cfg.words_per_topic as f64;
    let mut utilities = BTreeMap::new();
    for (t, words) in topic_words.iter().enumerate() {
        let scale = if t == focus { 1.0 } else { rng.gen_range(0.05..0.45) };
        for (i, word) in words.iter().enumerate() {
            utilities.insert(word.clone(), scale * (1.0 - i as f64 / (w + 1.0)));
        }
    }
    let zipf: Vec<f64> = (0..cfg.words_per_topic).map(|i| 1.0 / (i as f64 + 1.0)).collect();

    let offset = rng.gen_range(0..cfg.topics);
    let documents = (0..cfg.documents)
        .map(|d| {
            let dominant = (d + offset) % cfg.topics;
            let text = (0..cfg.sentences_per_doc)
                .map(|_| {
                    let t = if rng.gen_bool(cfg.dominance) {
                        dominant
                    } else {
                        rng.gen_range(0..cfg.topics)
                    };
                    sentence(&topic_words[t], &zipf, cfg, &mut rng)
                })
                .collect::<Vec<_>>()
                .join(" ");
            let title = format!("{} {}", topic_words[dominant][0], topic_words[dominant][1]);
            Document::new(format!("doc{d:02}"), text).with_title(title)
        })
        .collect();

    let focus_weights: Vec<f64> = topic_words[focus].iter().map(|t| utilities[t].powi(2)).collect();
    let reference_texts: Vec<String> = (0..cfg.references)
        .map(|_| {
            (0..cfg.reference_sentences)
                .map(|_| sentence(&topic_words[focus], &focus_weights, cfg, &mut rng))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let references = reference_texts.iter().map(|t| tokenize(t)).collect();
    let corpus = Corpus::from_documents(documents, stop)
        .expect("generated documents are well formed")
        .with_references(references);
    SynthCorpus {
        corpus,
        topic_words,
        focus,
        utilities,
        reference_texts,
    }
}
