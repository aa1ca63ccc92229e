//! Knowledge memory over curated facts and performer memory over successful
//! action sequences, both backed by a deterministic hashed bag-of-words
//! embedding.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actions::ActionStep;
use crate::world::{Inventory, RecipeBook};

pub const EMBEDDING_DIM: usize = 256;
pub const KNOWLEDGE_THRESHOLD: f64 = 0.05;
pub const PERFORMER_TOP_K: usize = 2;

const CURATED_FACTS: &str = include_str!("../../data/facts.jsonl");
pub const PERFORMER_DOC: &str = "performer_memory.json";
pub const PERFORMER_INDEX: &str = "performer_index.jsonl";

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MemoryError + '_ {
    move |source| MemoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Unit-length token histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lowercased alphanumeric runs; punctuation and underscores separate tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn token_bin(token: &str) -> usize {
    let h = Sha256::digest(token.as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&h[..8]);
    (u64::from_le_bytes(first) % EMBEDDING_DIM as u64) as usize
}

pub fn embed(text: &str) -> Result<Embedding, MemoryError> {
    let toks = tokens(text);
    if toks.is_empty() {
        return Err(MemoryError::EmptyText);
    }
    let mut v = vec![0.0; EMBEDDING_DIM];
    for t in &toks {
        v[token_bin(t)] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(Embedding(v))
}

/// `1 - cosine`; 0 for identical texts, 1 for disjoint bins.
pub fn distance(a: &Embedding, b: &Embedding) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    (1.0 - dot).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSource {
    RecipeBook,
    Curated,
    Supplement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub text: String,
    pub source: KnowledgeSource,
    #[serde(skip)]
    embedding: Option<Embedding>,
}

impl KnowledgeEntry {
    /// Facts are keyed on the topic before the first `:`, so a question about
    /// the topic matches regardless of how long the fact body is.
    pub fn new(text: impl Into<String>, source: KnowledgeSource) -> Result<KnowledgeEntry, MemoryError> {
        let text = text.into();
        let key = topic_key(&text);
        let embedding = embed(key)?;
        Ok(KnowledgeEntry {
            text,
            source,
            embedding: Some(embedding),
        })
    }

    pub fn topic(&self) -> &str {
        topic_key(&self.text)
    }

    pub fn embedding(&self) -> &Embedding {
        self.embedding.as_ref().expect("entries are built through KnowledgeEntry::new")
    }
}

fn topic_key(text: &str) -> &str {
    match text.split_once(':') {
        Some((k, _)) if !tokens(k).is_empty() => k,
        _ => text,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<'a> {
    Hit { entry: &'a KnowledgeEntry, distance: f64 },
    /// Nothing close enough; the caller should supplement this knowledge.
    Miss { nearest: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    entries: Vec<KnowledgeEntry>,
    pub threshold: f64,
}

impl Default for KnowledgeStore {
    fn default() -> Self {
        KnowledgeStore {
            entries: Vec::new(),
            threshold: KNOWLEDGE_THRESHOLD,
        }
    }
}

#[derive(Deserialize)]
struct FactLine {
    text: String,
    #[serde(default = "curated")]
    source: KnowledgeSource,
}

fn curated() -> KnowledgeSource {
    KnowledgeSource::Curated
}

/// Recipe fact text, e.g. `craft wooden pickaxe recipe: 3 planks, 2 stick at crafting table`.
pub fn recipe_fact(book: &RecipeBook, item: &str) -> Option<String> {
    let r = book.get(item).ok()?;
    let body = if let Some(block) = r.source_block {
        let mut s = format!("break {}", block.name().replace('_', " "));
        if let Some(tool) = book.tool_for(r.required_tool_tier) {
            s.push_str(&format!(" with a {} or better", tool.spoken()));
        }
        if let Some(y) = r.max_y {
            s.push_str(&format!(" below y {y}"));
        }
        if r.surface_only {
            s.push_str(" on the surface");
        }
        s
    } else {
        let parts: Vec<String> = r.inputs.iter().map(|(i, n)| format!("{n} {}", i.spoken())).collect();
        let mut s = parts.join(", ");
        if r.output_count > 1 {
            s.push_str(&format!(" makes {}", r.output_count));
        }
        if let Some(p) = r.platform.item() {
            s.push_str(&format!(" at {}", p.spoken()));
        }
        s
    };
    Some(format!("{} recipe: {body}", r.description()))
}

impl KnowledgeStore {
    /// Recipe facts plus the bundled curated facts.
    pub fn standard(book: &RecipeBook) -> KnowledgeStore {
        let mut store = KnowledgeStore::default();
        for item in book.items() {
            if let Some(text) = recipe_fact(book, item.as_str()) {
                store
                    .push(KnowledgeEntry::new(text, KnowledgeSource::RecipeBook).expect("recipe facts are non-empty"));
            }
        }
        store
            .load_facts_str(CURATED_FACTS, Path::new("data/facts.jsonl"))
            .expect("bundled facts parse");
        store
    }

    pub fn push(&mut self, entry: KnowledgeEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a manually supplied fact after a miss.
    pub fn supplement(&mut self, text: &str) -> Result<(), MemoryError> {
        self.push(KnowledgeEntry::new(text, KnowledgeSource::Supplement)?);
        Ok(())
    }

    /// Appends JSONL facts `{text, source}`.
    pub fn load_facts(&mut self, path: &Path) -> Result<(), MemoryError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        self.load_facts_str(&text, path)
    }

    fn load_facts_str(&mut self, text: &str, path: &Path) -> Result<(), MemoryError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| MemoryError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let fact: FactLine = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            let entry = KnowledgeEntry::new(fact.text, fact.source).map_err(|e| corrupt(e.to_string()))?;
            self.push(entry);
        }
        Ok(())
    }

    /// Nearest entry, returned only when strictly closer than the threshold.
    /// Ties go to the earlier entry.
    pub fn lookup(&self, query: &str) -> Lookup<'_> {
        let Ok(q) = embed(query) else {
            return Lookup::Miss { nearest: None };
        };
        let mut best: Option<(&KnowledgeEntry, f64)> = None;
        for e in &self.entries {
            let d = distance(&q, e.embedding());
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
            }
        }
        match best {
            Some((entry, d)) if d < self.threshold => Lookup::Hit { entry, distance: d },
            Some((_, d)) => Lookup::Miss { nearest: Some(d) },
            None => Lookup::Miss { nearest: None },
        }
    }
}

/// What the performer had and saw when a sequence succeeded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Situation {
    pub inventory: Inventory,
    pub scene: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformerRecord {
    pub description: String,
    pub position_index: u32,
    pub sequence: Vec<ActionStep>,
    pub situation: Situation,
}

/// Body of a record inside the keyed JSON document.
#[derive(Serialize, Deserialize)]
struct StoredRecord {
    description: String,
    sequence: Vec<ActionStep>,
    #[serde(default)]
    situation: Situation,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    position_index: u32,
    description: String,
    embedding: Embedding,
}

/// Append-only store of successful sequences keyed by sub-objective position.
#[derive(Debug, Clone, Default)]
pub struct PerformerStore {
    records: Vec<PerformerRecord>,
    embeddings: Vec<Embedding>,
}

impl PerformerStore {
    pub fn new() -> PerformerStore {
        PerformerStore::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PerformerRecord] {
        &self.records
    }

    pub fn insert(&mut self, record: PerformerRecord) -> Result<(), MemoryError> {
        let e = embed(&record.description)?;
        self.records.push(record);
        self.embeddings.push(e);
        self.normalize_order();
        Ok(())
    }

    /// Keeps records grouped by position index so a reload sees the same order.
    fn normalize_order(&mut self) {
        let mut paired: Vec<(PerformerRecord, Embedding)> =
            self.records.drain(..).zip(self.embeddings.drain(..)).collect();
        paired.sort_by_key(|(r, _)| r.position_index);
        for (r, e) in paired {
            self.records.push(r);
            self.embeddings.push(e);
        }
    }

    /// Up to two nearest records; ties go to the lower position index, then
    /// to the earlier insertion.
    pub fn retrieve(&self, description: &str) -> Vec<&PerformerRecord> {
        let Ok(q) = embed(description) else { return Vec::new() };
        let mut scored: Vec<(f64, usize)> = self
            .embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| (distance(&q, e), i))
            .collect();
        scored.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(self.records[a.1].position_index.cmp(&self.records[b.1].position_index))
                .then(a.1.cmp(&b.1))
        });
        scored.into_iter().take(PERFORMER_TOP_K).map(|(_, i)| &self.records[i]).collect()
    }

    /// Writes the keyed JSON document and the vector index into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<(), MemoryError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut doc: BTreeMap<u32, Vec<StoredRecord>> = BTreeMap::new();
        for r in &self.records {
            doc.entry(r.position_index).or_default().push(StoredRecord {
                description: r.description.clone(),
                sequence: r.sequence.clone(),
                situation: r.situation.clone(),
            });
        }
        let keyed: BTreeMap<String, Vec<StoredRecord>> = doc.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let doc_path = dir.join(PERFORMER_DOC);
        let text = serde_json::to_string_pretty(&keyed).expect("records serialize");
        fs::write(&doc_path, text).map_err(io_err(&doc_path))?;

        let index_path = dir.join(PERFORMER_INDEX);
        let mut f = io::BufWriter::new(fs::File::create(&index_path).map_err(io_err(&index_path))?);
        for (r, e) in self.records.iter().zip(&self.embeddings) {
            let line = IndexLine {
                position_index: r.position_index,
                description: r.description.clone(),
                embedding: e.clone(),
            };
            writeln!(f, "{}", serde_json::to_string(&line).expect("index serializes")).map_err(io_err(&index_path))?;
        }
        f.flush().map_err(io_err(&index_path))
    }

    /// Reads a store written by [`PerformerStore::persist`]; a missing
    /// directory or document yields an empty store.
    pub fn load(dir: &Path) -> Result<PerformerStore, MemoryError> {
        let doc_path = dir.join(PERFORMER_DOC);
        let text = match fs::read_to_string(&doc_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(PerformerStore::new()),
            Err(e) => return Err(io_err(&doc_path)(e)),
        };
        let keyed: BTreeMap<String, Vec<StoredRecord>> =
            serde_json::from_str(&text).map_err(|e| MemoryError::Corrupt {
                path: doc_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
        let mut doc: BTreeMap<u32, Vec<StoredRecord>> = BTreeMap::new();
        for (k, v) in keyed {
            let idx: u32 = k.parse().map_err(|_| MemoryError::Corrupt {
                path: doc_path.clone(),
                line: 0,
                message: format!("key `{k}` is not a position index"),
            })?;
            doc.insert(idx, v);
        }
        let mut records = Vec::new();
        for (idx, list) in doc {
            for s in list {
                records.push(PerformerRecord {
                    description: s.description,
                    position_index: idx,
                    sequence: s.sequence,
                    situation: s.situation,
                });
            }
        }

        let index_path = dir.join(PERFORMER_INDEX);
        let mut embeddings = Vec::with_capacity(records.len());
        match fs::File::open(&index_path) {
            Ok(f) => {
                for (i, line) in io::BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(io_err(&index_path))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let corrupt = |message: String| MemoryError::Corrupt {
                        path: index_path.clone(),
                        line: i + 1,
                        message,
                    };
                    let entry: IndexLine = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                    let Some(r) = records.get(embeddings.len()) else {
                        return Err(corrupt("more index lines than records".into()));
                    };
                    if r.position_index != entry.position_index || r.description != entry.description {
                        return Err(corrupt("index line does not match the record document".into()));
                    }
                    if entry.embedding.as_slice().len() != EMBEDDING_DIM {
                        return Err(corrupt(format!("embedding has {} dimensions", entry.embedding.as_slice().len())));
                    }
                    embeddings.push(entry.embedding);
                }
                if embeddings.len() != records.len() {
                    return Err(MemoryError::Corrupt {
                        path: index_path.clone(),
                        line: embeddings.len() + 1,
                        message: format!("{} index lines for {} records", embeddings.len(), records.len()),
                    });
                }
            }
            // The index is derived data; rebuild it when absent.
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                for r in &records {
                    embeddings.push(embed(&r.description)?);
                }
            }
            Err(e) => return Err(io_err(&index_path)(e)),
        }
        Ok(PerformerStore { records, embeddings })
    }
}

#[cfg(test)]
mod tests;
