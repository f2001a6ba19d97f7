//! Corpus ingestion: JSONL parsing, event interning, frequency
//! filtering, and token vocabulary construction.
//!
//! A corpus file holds one event instance per line:
//! `{"doc_id": "...", "subject": [...], "predicate": [...], "object": [...]}`.
//! Identical triples are interned to one event id; documents group lines
//! that share a `doc_id`, in file order.

mod cooc;
mod synth;

pub use cooc::{build_cooccurrence, CoocStats, SamplingMode};
pub use synth::{generate_synthetic, load_labels, write_labels, write_synthetic, SynthSpec, Synthetic};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Index into an [`EventTable`].
pub type EventId = usize;

/// One (subject, predicate, object) triple. Each slot is a token list;
/// subject and object may be empty, the predicate may not.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub subject: Vec<String>,
    pub predicate: Vec<String>,
    pub object: Vec<String>,
}

impl Event {
    pub fn new(subject: &[&str], predicate: &[&str], object: &[&str]) -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Event {
            subject: own(subject),
            predicate: own(predicate),
            object: own(object),
        }
    }

    /// All tokens in display order: subject, predicate, object.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.subject
            .iter()
            .chain(&self.predicate)
            .chain(&self.object)
            .map(String::as_str)
    }

    /// Human-readable rendering for reports.
    pub fn text(&self) -> String {
        self.tokens().collect::<Vec<_>>().join(" ")
    }
}

/// Ordered list of event ids appearing in one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub events: Vec<EventId>,
}

/// Distinct events with corpus frequencies, interned in first-appearance
/// order.
#[derive(Debug, Clone, Default)]
pub struct EventTable {
    events: Vec<Event>,
    freq: Vec<usize>,
    index: HashMap<Event, EventId>,
}

impl EventTable {
    pub fn new() -> Self {
        EventTable::default()
    }

    /// Returns the id for `event`, interning it on first sight, and
    /// counts one occurrence.
    pub fn intern(&mut self, event: Event) -> EventId {
        if let Some(&id) = self.index.get(&event) {
            self.freq[id] += 1;
            return id;
        }
        let id = self.events.len();
        self.index.insert(event.clone(), id);
        self.events.push(event);
        self.freq.push(1);
        id
    }

    pub fn get(&self, id: EventId) -> Option<&Event> {
        self.events.get(id)
    }

    pub fn freq(&self, id: EventId) -> usize {
        self.freq.get(id).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventId, &Event)> {
        self.events.iter().enumerate()
    }
}

/// Parsed corpus: documents over an interned event table.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub events: EventTable,
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    doc_id: String,
    subject: Vec<String>,
    predicate: Vec<String>,
    object: Vec<String>,
}

/// Parses a JSONL corpus file.
///
/// Lines sharing a `doc_id` form one document (in file order, first
/// appearance fixing document order); duplicate triples intern to one
/// event id. Whitespace-only lines are skipped.
///
/// # Errors
/// Reports malformed lines and empty predicates with their 1-based line
/// number; a file with no events is an empty corpus.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::default();
    let mut doc_index: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(format!("{}:{lineno}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno,
            message: e.to_string(),
        })?;
        if parsed.predicate.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                message: "event has an empty predicate".into(),
            });
        }
        let event = Event {
            subject: parsed.subject,
            predicate: parsed.predicate,
            object: parsed.object,
        };
        let id = corpus.events.intern(event);
        let di = *doc_index.entry(parsed.doc_id.clone()).or_insert_with(|| {
            corpus.docs.push(Document {
                doc_id: parsed.doc_id,
                events: Vec::new(),
            });
            corpus.docs.len() - 1
        });
        corpus.docs[di].events.push(id);
    }
    if corpus.events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Writes a corpus back to JSONL, one line per document event in order.
/// Reloading the written file reproduces the corpus exactly.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for doc in &corpus.docs {
        for &id in &doc.events {
            let e = corpus.events.get(id).expect("document references interned event");
            let line = CorpusLine {
                doc_id: doc.doc_id.clone(),
                subject: e.subject.clone(),
                predicate: e.predicate.clone(),
                object: e.object.clone(),
            };
            let json = serde_json::to_string(&line)
                .map_err(|e| Error::json(path.display().to_string(), e))?;
            writeln!(w, "{json}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

const RESERVED: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Token vocabulary. Ids 0..5 are the reserved sentinels; content tokens
/// follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const CLS: usize = 2;
    pub const SEP: usize = 3;
    pub const MASK: usize = 4;

    fn from_sorted_content(content: Vec<String>) -> Vocab {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(content);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Rebuilds a vocabulary from a stored token list.
    ///
    /// # Errors
    /// The list must start with the five reserved sentinels and contain
    /// no duplicates.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.len() < RESERVED.len()
            || tokens[..RESERVED.len()] != RESERVED.map(str::to_string)
        {
            return Err(Error::Config(
                "vocabulary must start with the reserved sentinel tokens".into(),
            ));
        }
        let mut index = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Maps out-of-vocabulary tokens to `[UNK]`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(Vocab::UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Frequency filtering plus vocabulary construction.
#[derive(Debug, Clone)]
pub struct VocabBuild {
    /// Corpus restricted to surviving events, ids re-interned densely.
    pub corpus: Corpus,
    pub vocab: Vocab,
    /// Old event id to new event id; `None` for dropped events.
    pub remap: Vec<Option<EventId>>,
}

/// Drops events occurring fewer than `min_event_freq` times, re-interns
/// the survivors, remaps documents (dropping any left empty), and builds
/// the token vocabulary over the surviving events.
///
/// # Errors
/// All events filtered out is an empty vocabulary.
pub fn build_vocab(corpus: &Corpus, min_event_freq: usize) -> Result<VocabBuild> {
    let mut remap = vec![None; corpus.events.len()];
    let mut events = EventTable::new();
    for (old_id, event) in corpus.events.iter() {
        let f = corpus.events.freq(old_id);
        if f >= min_event_freq {
            let new_id = events.intern(event.clone());
            events.freq[new_id] = f;
            remap[old_id] = Some(new_id);
        }
    }
    if events.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut docs = Vec::new();
    for doc in &corpus.docs {
        let kept: Vec<EventId> = doc.events.iter().filter_map(|&id| remap[id]).collect();
        if !kept.is_empty() {
            docs.push(Document {
                doc_id: doc.doc_id.clone(),
                events: kept,
            });
        }
    }
    let mut content: Vec<String> = events
        .iter()
        .flat_map(|(_, e)| e.tokens())
        .filter(|t| !RESERVED.contains(t))
        .map(str::to_string)
        .collect();
    content.sort_unstable();
    content.dedup();
    let vocab = Vocab::from_sorted_content(content);
    Ok(VocabBuild {
        corpus: Corpus { docs, events },
        vocab,
        remap,
    })
}
