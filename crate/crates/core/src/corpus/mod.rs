//! Corpus ingestion, preprocessing, surface features, concepts and similarity.

mod concepts;
mod embed;
mod features;
mod similarity;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use concepts::{extract_concepts, Concept, ConceptStatus, ConceptUnit};
pub use embed::{build_embeddings, corpus_embeddings, cosine as embed_cosine, Embeddings, DEFAULT_EMBED_DIM};
pub use features::{featurize, raw_feature_rows, FeatureGroup, FEATURE_NAMES};
pub use similarity::{Similarity, SimilarityKind};
pub use text::{preprocess, Preprocessed, Stopwords};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed input at {location}: {reason}")]
    MalformedInput { location: String, reason: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("no concept survived the frequency thresholds")]
    EmptyConceptSet,
    #[error("concept unit `{0}` is not extracted from corpus statistics")]
    UnsupportedUnit(String),
    #[error("similarity input is empty")]
    EmptyInput,
    #[error("embedding dimension {dim} exceeds vocabulary size {vocab}")]
    DimTooLarge { dim: usize, vocab: usize },
    #[error("embedding similarity requested without embeddings")]
    MissingEmbeddings,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    TxtDir,
}

impl CorpusFormat {
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            CorpusFormat::TxtDir
        } else {
            CorpusFormat::Jsonl
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub raw_text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: None,
            raw_text: raw_text.into(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: usize,
    pub doc_id: String,
    /// Index of the owning document in `Corpus::documents`.
    pub doc_index: usize,
    pub position: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub length_words: usize,
    /// Min-max scaled surface features, empty until `featurize` runs.
    pub features: Vec<f64>,
    pub concept_ids: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub sentences: Vec<SentenceRecord>,
    /// Term to dense id, ids assigned in first-occurrence order.
    pub vocabulary: BTreeMap<String, usize>,
    /// Terms by id.
    pub terms: Vec<String>,
    /// Number of documents containing each term.
    pub df: BTreeMap<String, usize>,
    /// Total occurrences of each term.
    pub cf: BTreeMap<String, usize>,
    pub reference_summaries: Vec<Vec<String>>,
    pub feature_names: Vec<String>,
    pub degenerate_features: Vec<String>,
    pub stopwords: Stopwords,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>, stopwords: Stopwords) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::MalformedInput {
                location: "corpus".into(),
                reason: "empty document set".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId(d.doc_id.clone()));
            }
        }

        let mut sentences = Vec::new();
        let mut vocabulary = BTreeMap::new();
        let mut terms = Vec::new();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut cf: BTreeMap<String, usize> = BTreeMap::new();
        for (doc_index, doc) in documents.iter().enumerate() {
            let pre = preprocess(&doc.raw_text);
            let mut doc_terms = BTreeSet::new();
            for (position, (text, tokens)) in pre.sentences.into_iter().zip(pre.tokens).enumerate() {
                for t in &tokens {
                    if !vocabulary.contains_key(t) {
                        vocabulary.insert(t.clone(), terms.len());
                        terms.push(t.clone());
                    }
                    *cf.entry(t.clone()).or_default() += 1;
                    doc_terms.insert(t.clone());
                }
                sentences.push(SentenceRecord {
                    id: sentences.len(),
                    doc_id: doc.doc_id.clone(),
                    doc_index,
                    position,
                    text,
                    length_words: tokens.len(),
                    tokens,
                    features: Vec::new(),
                    concept_ids: BTreeSet::new(),
                });
            }
            for t in doc_terms {
                *df.entry(t).or_default() += 1;
            }
        }
        Ok(Self {
            documents,
            sentences,
            vocabulary,
            terms,
            df,
            cf,
            reference_summaries: Vec::new(),
            feature_names: Vec::new(),
            degenerate_features: Vec::new(),
            stopwords,
        })
    }

    pub fn with_references(mut self, references: Vec<Vec<String>>) -> Self {
        self.reference_summaries = references;
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn is_featurized(&self) -> bool {
        !self.feature_names.is_empty()
    }

    /// Non-stopword tokens of a sentence, in order.
    pub fn content_tokens(&self, sentence: usize) -> Vec<&str> {
        self.sentences[sentence]
            .tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    /// Number of sentences in a document.
    pub fn document_len(&self, doc_index: usize) -> usize {
        self.sentences.iter().filter(|s| s.doc_index == doc_index).count()
    }

    /// Smoothed idf used by tf-idf cosine similarity; unseen terms get the maximum.
    pub fn smooth_idf(&self, term: &str) -> f64 {
        let n = self.documents.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub fn word_count(&self, ids: &[usize]) -> usize {
        ids.iter().map(|&i| self.sentences[i].length_words).sum()
    }

    /// Concatenated tokens of the given sentences, in the order given.
    pub fn summary_tokens(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .flat_map(|&i| self.sentences[i].tokens.iter().cloned())
            .collect()
    }

    pub fn attach_concepts(&mut self, concepts: &[Concept]) {
        for s in &mut self.sentences {
            s.concept_ids.clear();
        }
        for c in concepts {
            for &sid in &c.mention_sentence_ids {
                self.sentences[sid].concept_ids.insert(c.concept_id);
            }
        }
    }
}

#[derive(Deserialize)]
struct JsonlLine {
    doc_id: Option<String>,
    text: Option<String>,
    title: Option<String>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, format, Stopwords::english())
}

pub fn load_corpus_with(path: &Path, format: CorpusFormat, stopwords: Stopwords) -> Result<Corpus, CorpusError> {
    let io = |e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    };
    match format {
        CorpusFormat::Jsonl => {
            let raw = fs::read_to_string(path).map_err(io)?;
            let mut docs = Vec::new();
            for (lineno, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let location = format!("{}:{}", path.display(), lineno + 1);
                let parsed: JsonlLine = serde_json::from_str(line).map_err(|e| CorpusError::MalformedInput {
                    location: location.clone(),
                    reason: e.to_string(),
                })?;
                let missing = |field: &str| CorpusError::MalformedInput {
                    location: location.clone(),
                    reason: format!("missing field `{field}`"),
                };
                let doc_id = parsed.doc_id.ok_or_else(|| missing("doc_id"))?;
                let text = parsed.text.ok_or_else(|| missing("text"))?;
                docs.push(Document {
                    doc_id,
                    title: parsed.title,
                    raw_text: text,
                });
            }
            if docs.is_empty() {
                return Err(CorpusError::MalformedInput {
                    location: path.display().to_string(),
                    reason: "empty document set".into(),
                });
            }
            Corpus::from_documents(docs, stopwords)
        }
        CorpusFormat::TxtDir => {
            let mut files = txt_files(path)?;
            files.sort();
            let mut docs = Vec::new();
            for f in files {
                let text = fs::read_to_string(&f).map_err(|e| CorpusError::Io {
                    path: f.display().to_string(),
                    source: e,
                })?;
                let doc_id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                docs.push(Document::new(doc_id, text));
            }
            if docs.is_empty() {
                return Err(CorpusError::MalformedInput {
                    location: path.display().to_string(),
                    reason: "no .txt documents in directory".into(),
                });
            }
            let corpus = Corpus::from_documents(docs, stopwords)?;
            let refs = path.join("refs");
            if refs.is_dir() {
                Ok(corpus.with_references(load_references(&refs)?))
            } else {
                Ok(corpus)
            }
        }
    }
}

fn txt_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|e| CorpusError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut out = Vec::new();
    for e in entries {
        let p = e
            .map_err(|e| CorpusError::Io {
                path: dir.display().to_string(),
                source: e,
            })?
            .path();
        if p.is_file() && p.extension().is_some_and(|x| x == "txt") {
            out.push(p);
        }
    }
    Ok(out)
}

/// Reads `<cluster_id>.<k>.txt` reference summaries, sorted by file name.
pub fn load_references(dir: &Path) -> Result<Vec<Vec<String>>, CorpusError> {
    let mut files = txt_files(dir)?;
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let text = fs::read_to_string(&f).map_err(|e| CorpusError::Io {
                path: f.display().to_string(),
                source: e,
            })?;
            Ok(text::tokenize(&text))
        })
        .collect()
}
