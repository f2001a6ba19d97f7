//! Document-level co-occurrence counts and their min-max-normalized
//! weights, the weak supervision signal for contrastive positives.

use super::{Corpus, EventId};
use crate::numerics::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

/// How `sample_positive` picks among an anchor's co-occurring partners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Proportional to the raw co-occurrence count.
    #[default]
    Proportional,
    /// Uniform over distinct partners.
    Uniform,
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proportional" => Ok(SamplingMode::Proportional),
            "uniform" => Ok(SamplingMode::Uniform),
            other => Err(Error::Config(format!("unknown sampling mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingMode::Proportional => "proportional",
            SamplingMode::Uniform => "uniform",
        })
    }
}

/// Symmetric co-occurrence counts over event ids, diagonal excluded.
///
/// A pair's count is the number of documents in which both events appear,
/// regardless of how often within each. Weights min-max normalize the
/// nonzero counts into [0, 1]; when all counts are equal every weight is 1.
#[derive(Debug, Clone)]
pub struct CoocStats {
    n_events: usize,
    counts: HashMap<(EventId, EventId), u64>,
    partners: Vec<Vec<(EventId, u64)>>,
    min_count: u64,
    max_count: u64,
}

/// Counts document-level co-presence for every unordered pair of distinct
/// events in `corpus`.
pub fn build_cooccurrence(corpus: &Corpus) -> CoocStats {
    let n = corpus.events.len();
    let mut counts: HashMap<(EventId, EventId), u64> = HashMap::new();
    for doc in &corpus.docs {
        let unique: BTreeSet<EventId> = doc.events.iter().copied().collect();
        let ids: Vec<EventId> = unique.into_iter().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    CoocStats::from_counts(n, counts)
}

impl CoocStats {
    fn from_counts(n_events: usize, counts: HashMap<(EventId, EventId), u64>) -> CoocStats {
        let mut partners = vec![Vec::new(); n_events];
        let mut min_count = u64::MAX;
        let mut max_count = 0;
        for (&(a, b), &c) in &counts {
            partners[a].push((b, c));
            partners[b].push((a, c));
            min_count = min_count.min(c);
            max_count = max_count.max(c);
        }
        if counts.is_empty() {
            min_count = 0;
        }
        for list in &mut partners {
            list.sort_unstable();
        }
        CoocStats {
            n_events,
            counts,
            partners,
            min_count,
            max_count,
        }
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Raw count for a pair; zero for unseen pairs and for the diagonal.
    pub fn count(&self, a: EventId, b: EventId) -> u64 {
        if a == b {
            return 0;
        }
        let key = (a.min(b), a.max(b));
        self.counts.get(&key).copied().unwrap_or(0)
    }

    /// Min-max-normalized weight in [0, 1]. Pairs at the minimum count
    /// get 0; if every count is equal all weights are 1.
    pub fn weight(&self, a: EventId, b: EventId) -> f64 {
        let c = self.count(a, b);
        if c == 0 {
            return 0.0;
        }
        if self.max_count == self.min_count {
            return 1.0;
        }
        (c - self.min_count) as f64 / (self.max_count - self.min_count) as f64
    }

    /// Distinct partners of `a` with raw counts, sorted by partner id.
    pub fn partners(&self, a: EventId) -> &[(EventId, u64)] {
        &self.partners[a]
    }

    /// Number of distinct co-occurring pairs.
    pub fn n_pairs(&self) -> usize {
        self.counts.len()
    }

    /// Draws a co-occurring partner for `anchor`, returning its id and
    /// normalized weight, or `None` for an isolated anchor.
    ///
    /// # Errors
    /// The anchor id must be in range.
    pub fn sample_positive(
        &self,
        anchor: EventId,
        mode: SamplingMode,
        rng: &mut Rng,
    ) -> Result<Option<(EventId, f64)>> {
        if anchor >= self.n_events {
            return Err(Error::UnknownEvent(anchor));
        }
        let partners = &self.partners[anchor];
        if partners.is_empty() {
            return Ok(None);
        }
        let pick = match mode {
            SamplingMode::Uniform => partners[rng.next_below(partners.len())].0,
            SamplingMode::Proportional => {
                let total: u64 = partners.iter().map(|&(_, c)| c).sum();
                let mut t = (rng.next_f64() * total as f64) as u64;
                let mut chosen = partners[partners.len() - 1].0;
                for &(id, c) in partners {
                    if t < c {
                        chosen = id;
                        break;
                    }
                    t -= c;
                }
                chosen
            }
        };
        Ok(Some((pick, self.weight(anchor, pick))))
    }

    /// Serializes to JSON with pairs sorted, so output is deterministic.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut pairs: Vec<PairRecord> = self
            .counts
            .iter()
            .map(|(&(a, b), &count)| PairRecord {
                a,
                b,
                count,
                weight: self.weight(a, b),
            })
            .collect();
        pairs.sort_unstable_by_key(|p| (p.a, p.b));
        let file = CoocFile {
            n_events: self.n_events,
            pairs,
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CoocStats> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: CoocFile =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut counts = HashMap::new();
        for p in file.pairs {
            if p.a >= file.n_events || p.b >= file.n_events || p.a >= p.b || p.count == 0 {
                return Err(Error::Config(format!(
                    "invalid co-occurrence pair ({}, {})",
                    p.a, p.b
                )));
            }
            counts.insert((p.a, p.b), p.count);
        }
        Ok(CoocStats::from_counts(file.n_events, counts))
    }
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    a: EventId,
    b: EventId,
    count: u64,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct CoocFile {
    n_events: usize,
    pairs: Vec<PairRecord>,
}
