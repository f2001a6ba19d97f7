//! Synthetic corpus generator with known cluster structure, used by the
//! acceptance suite and the sweep harness.
//!
//! Each latent cluster owns a disjoint token sub-vocabulary and a pool of
//! distinct events over it. Documents are pure (all events from one
//! cluster) with probability `within_cluster_doc_prob`, otherwise each
//! slot draws its cluster independently. Within a pool, events are drawn
//! with 1/rank popularity so document co-occurrence counts spread well
//! beyond {0, 1} and the min-max weights carry signal.

use super::{Corpus, Document, Event, EventId, EventTable};
use crate::numerics::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Shape of a generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_clusters: usize,
    pub events_per_cluster: usize,
    pub docs: usize,
    pub events_per_doc: usize,
    pub within_cluster_doc_prob: f64,
    pub vocab_per_cluster: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_clusters: 5,
            events_per_cluster: 200,
            docs: 600,
            events_per_doc: 6,
            within_cluster_doc_prob: 0.9,
            vocab_per_cluster: 16,
            seed: 7,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(Error::Config("synthetic corpus needs at least 2 clusters".into()));
        }
        if self.events_per_cluster == 0 || self.docs == 0 {
            return Err(Error::Config("cluster and document counts must be positive".into()));
        }
        if self.events_per_doc < 2 {
            return Err(Error::Config(
                "documents need at least 2 events for co-occurrence".into(),
            ));
        }
        if self.vocab_per_cluster < 3 {
            return Err(Error::Config(
                "vocab_per_cluster must be at least 3 to form triples".into(),
            ));
        }
        let combos = (self.vocab_per_cluster as u128).pow(3);
        if combos < self.events_per_cluster as u128 {
            return Err(Error::Config(format!(
                "{} tokens admit only {combos} distinct triples, fewer than {} events",
                self.vocab_per_cluster, self.events_per_cluster
            )));
        }
        if !(0.0..=1.0).contains(&self.within_cluster_doc_prob) {
            return Err(Error::Config("within_cluster_doc_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Generated corpus plus per-event ground-truth cluster labels.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub corpus: Corpus,
    /// Cluster of each interned event id.
    pub labels: Vec<usize>,
}

/// Generates a corpus per `spec`. Deterministic in `spec.seed`; events
/// that the document draws never touch are absent from the result.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let root = Rng::new(spec.seed);

    let mut pools: Vec<Vec<Event>> = Vec::with_capacity(spec.n_clusters);
    let mut pool_rng = root.split("pools");
    for c in 0..spec.n_clusters {
        let mut pool = Vec::with_capacity(spec.events_per_cluster);
        let mut seen = HashSet::new();
        let mut attempts = 0usize;
        while pool.len() < spec.events_per_cluster {
            attempts += 1;
            if attempts > 1000 * spec.events_per_cluster {
                return Err(Error::Config(
                    "could not draw enough distinct triples; enlarge vocab_per_cluster".into(),
                ));
            }
            let tok = |rng: &mut Rng| format!("c{c}_t{}", rng.next_below(spec.vocab_per_cluster));
            let event = Event {
                subject: vec![tok(&mut pool_rng)],
                predicate: vec![tok(&mut pool_rng)],
                object: vec![tok(&mut pool_rng)],
            };
            if seen.insert(event.clone()) {
                pool.push(event);
            }
        }
        pools.push(pool);
    }

    // 1/rank popularity, as cumulative mass for inverse-CDF draws.
    let cum: Vec<f64> = {
        let mut cum = Vec::with_capacity(spec.events_per_cluster);
        let mut acc = 0.0;
        for k in 0..spec.events_per_cluster {
            acc += 1.0 / (k + 1) as f64;
            cum.push(acc);
        }
        cum
    };
    let total_mass = *cum.last().expect("at least one event per cluster");
    let pick = |rng: &mut Rng| {
        let r = rng.next_f64() * total_mass;
        cum.partition_point(|&c| c <= r).min(cum.len() - 1)
    };

    let mut doc_rng = root.split("docs");
    let mut events = EventTable::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut docs = Vec::with_capacity(spec.docs);
    for j in 0..spec.docs {
        let pure = doc_rng.next_f64() < spec.within_cluster_doc_prob;
        let home = doc_rng.next_below(spec.n_clusters);
        let mut ids = Vec::with_capacity(spec.events_per_doc);
        for _ in 0..spec.events_per_doc {
            let cluster = if pure {
                home
            } else {
                doc_rng.next_below(spec.n_clusters)
            };
            let event = pools[cluster][pick(&mut doc_rng)].clone();
            let id = events.intern(event);
            if id == labels.len() {
                labels.push(cluster);
            }
            ids.push(id);
        }
        docs.push(Document {
            doc_id: format!("d{j}"),
            events: ids,
        });
    }

    Ok(Synthetic {
        corpus: Corpus { docs, events },
        labels,
    })
}

/// Writes the corpus and its label file side by side.
pub fn write_synthetic(
    synth: &Synthetic,
    corpus_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    super::write_corpus(&synth.corpus, corpus_path)?;
    write_labels(&synth.labels, labels_path)
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    event_id: EventId,
    cluster: usize,
}

/// Writes ground-truth labels as JSONL `{"event_id": .., "cluster": ..}`.
pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for (event_id, &cluster) in labels.iter().enumerate() {
        let json = serde_json::to_string(&LabelLine { event_id, cluster })
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a label file into an id-keyed map.
pub fn load_labels(path: impl AsRef<Path>) -> Result<HashMap<EventId, usize>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut labels = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("{}:{}", path.display(), lineno + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        labels.insert(parsed.event_id, parsed.cluster);
    }
    Ok(labels)
}
