//! Evaluation protocols over trained encoders: hard-similarity accuracy,
//! transitive-pair rank correlation, zero-shot narrative cloze, prototype
//! cluster reports, and 2D PCA export. Every encoding here runs with
//! dropout disabled, so repeated evaluation of one checkpoint is
//! bit-identical. Benchmark items travel as JSONL; results as CSV rows of
//! metric name, value, item count, and skipped count.

use crate::corpus::{Event, EventId, EventTable, Synthetic, Vocab};
use crate::encoder::{encode, format_input, EncoderState};
use crate::losses::PrototypeBank;
use crate::numerics::{pca_2d, spearman, Matrix, Real, Rng, Vector};
use crate::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

/// Eval-mode encoder: parameters paired with their vocabulary, dropout off.
#[derive(Clone, Copy)]
pub struct EventEncoder<'a, T> {
    state: &'a EncoderState<T>,
    vocab: &'a Vocab,
}

impl<'a, T: Real> EventEncoder<'a, T> {
    pub fn new(state: &'a EncoderState<T>, vocab: &'a Vocab) -> EventEncoder<'a, T> {
        EventEncoder { state, vocab }
    }

    /// Encodes one event deterministically (no dropout).
    ///
    /// # Errors
    /// The event needs a nonempty predicate and must not collapse to the
    /// zero vector.
    pub fn encode(&self, event: &Event) -> Result<Vector<T>> {
        let seq = format_input(event, self.vocab)?;
        encode(self.state, &seq, None)
    }
}

/// Cosine similarity of two vectors.
///
/// # Errors
/// Dimensions must match and both norms must be positive and finite.
pub fn cosine<T: Real>(z1: &Vector<T>, z2: &Vector<T>) -> Result<T> {
    if z1.len() != z2.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine over dims {} and {}",
            z1.len(),
            z2.len()
        )));
    }
    let n1 = z1.norm();
    let n2 = z2.norm();
    if !(n1.is_finite() && n2.is_finite()) {
        return Err(Error::NonFinite("cosine input"));
    }
    if !(n1 > T::zero()) || !(n2 > T::zero()) {
        return Err(Error::Domain("cosine of a zero-norm vector"));
    }
    Ok(z1.dot(z2) / (n1 * n2))
}

/// One pair of events that belong close together and one pair that does
/// not; the metric checks the encoder orders their cosines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardSimItem {
    pub similar: (Event, Event),
    pub dissimilar: (Event, Event),
}

/// An event pair annotated with a similarity score from 1 to 7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitiveItem {
    pub left: Event,
    pub right: Event,
    pub gold: f64,
}

impl TransitiveItem {
    fn validate(&self) -> Result<()> {
        if !(self.gold >= 1.0 && self.gold <= 7.0) {
            return Err(Error::Domain("similarity score outside [1, 7]"));
        }
        Ok(())
    }
}

/// A context chain of events plus candidates for the next event, one of
/// which (at `gold`) actually follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McncItem {
    pub context: Vec<Event>,
    pub candidates: Vec<Event>,
    pub gold: usize,
}

impl McncItem {
    fn validate(&self) -> Result<()> {
        if self.candidates.len() < 2 {
            return Err(Error::Domain("cloze item needs at least two candidates"));
        }
        if self.gold >= self.candidates.len() {
            return Err(Error::Domain("gold index outside the candidate list"));
        }
        Ok(())
    }
}

fn load_jsonl<It, F>(path: &Path, check: F) -> Result<Vec<It>>
where
    It: DeserializeOwned,
    F: Fn(&It) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message,
        };
        let item: It = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        check(&item).map_err(|e| parse(e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

/// Loads a JSONL hard-similarity benchmark.
pub fn load_hard_sim(path: impl AsRef<Path>) -> Result<Vec<HardSimItem>> {
    load_jsonl(path.as_ref(), |_| Ok(()))
}

/// Loads a JSONL transitive-similarity benchmark, checking score ranges.
pub fn load_transitive(path: impl AsRef<Path>) -> Result<Vec<TransitiveItem>> {
    load_jsonl(path.as_ref(), TransitiveItem::validate)
}

/// Loads a JSONL narrative-cloze benchmark, checking candidate counts and
/// gold indices.
pub fn load_mcnc(path: impl AsRef<Path>) -> Result<Vec<McncItem>> {
    load_jsonl(path.as_ref(), McncItem::validate)
}

/// Writes items as JSONL, one object per line.
pub fn write_jsonl<S: Serialize>(items: &[S], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::json("serializing item", e))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// One evaluated metric: its score, how many items entered the score, and
/// how many were skipped as unencodable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary<T> {
    pub metric: String,
    pub value: T,
    pub items: usize,
    pub skipped: usize,
}

/// Renders metric summaries as a CSV table with a header row.
pub fn metrics_csv<T: Real>(summaries: &[MetricSummary<T>]) -> String {
    let mut out = String::from("metric,value,items,skipped\n");
    for s in summaries {
        out.push_str(&format!("{},{},{},{}\n", s.metric, s.value, s.items, s.skipped));
    }
    out
}

/// Writes [`metrics_csv`] output to a file.
pub fn write_metrics_csv<T: Real>(
    summaries: &[MetricSummary<T>],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_csv(summaries)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Fraction of items whose similar pair gets a strictly higher cosine than
/// their dissimilar pair; ties count as failures. Items that fail to
/// encode are skipped with a warning and reported in the summary.
///
/// # Errors
/// The list must be nonempty and at least one item must encode.
pub fn hard_similarity_accuracy<T: Real>(
    items: &[HardSimItem],
    enc: &EventEncoder<'_, T>,
) -> Result<MetricSummary<T>> {
    if items.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut correct = 0usize;
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for (i, item) in items.iter().enumerate() {
        let pair = (|| -> Result<(T, T)> {
            let sim = cosine(&enc.encode(&item.similar.0)?, &enc.encode(&item.similar.1)?)?;
            let dis = cosine(&enc.encode(&item.dissimilar.0)?, &enc.encode(&item.dissimilar.1)?)?;
            Ok((sim, dis))
        })();
        match pair {
            Ok((sim, dis)) => {
                scored += 1;
                if sim > dis {
                    correct += 1;
                }
            }
            Err(err) => {
                skipped += 1;
                log::warn!("hard-similarity item {} skipped: {err}", i + 1);
            }
        }
    }
    if scored == 0 {
        return Err(Error::Domain("every hard-similarity item was unencodable"));
    }
    Ok(MetricSummary {
        metric: "hard_similarity".into(),
        value: T::of(correct as f64) / T::of(scored as f64),
        items: scored,
        skipped,
    })
}

/// Spearman correlation between predicted cosines and annotated scores.
///
/// # Errors
/// Needs at least two items with distinct gold scores; encoding failures
/// propagate.
pub fn transitive_similarity<T: Real>(
    items: &[TransitiveItem],
    enc: &EventEncoder<'_, T>,
) -> Result<MetricSummary<T>> {
    let mut preds = Vec::with_capacity(items.len());
    let mut golds = Vec::with_capacity(items.len());
    for item in items {
        item.validate()?;
        preds.push(cosine(&enc.encode(&item.left)?, &enc.encode(&item.right)?)?);
        golds.push(T::of(item.gold));
    }
    let rho = spearman(&preds, &golds)?;
    Ok(MetricSummary {
        metric: "transitive_similarity".into(),
        value: rho,
        items: items.len(),
        skipped: 0,
    })
}

/// How candidate-to-context cosines collapse to one score in the cloze
/// task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean cosine over the context chain.
    #[default]
    Mean,
    /// Best single cosine over the chain.
    Max,
    /// Cosine with the chain's final event only.
    Last,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Aggregation> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            "last" => Ok(Aggregation::Last),
            other => Err(Error::Config(format!("unknown aggregation \"{other}\""))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Last => "last",
        })
    }
}

/// Fraction of cloze items where the gold candidate scores highest against
/// the context chain; score ties go to the lowest candidate index.
///
/// # Errors
/// The list must be nonempty, every item valid with a nonempty context,
/// and every event encodable.
pub fn mcnc_accuracy<T: Real>(
    items: &[McncItem],
    enc: &EventEncoder<'_, T>,
    aggregation: Aggregation,
) -> Result<MetricSummary<T>> {
    if items.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut correct = 0usize;
    for item in items {
        item.validate()?;
        if item.context.is_empty() {
            return Err(Error::Domain("cloze item has an empty context chain"));
        }
        let ctx: Vec<Vector<T>> = item
            .context
            .iter()
            .map(|e| enc.encode(e))
            .collect::<Result<_>>()?;
        let mut winner = 0usize;
        let mut best = T::neg_infinity();
        for (j, cand) in item.candidates.iter().enumerate() {
            let z = enc.encode(cand)?;
            let score = match aggregation {
                Aggregation::Mean => {
                    let mut sum = T::zero();
                    for c in &ctx {
                        sum += cosine(&z, c)?;
                    }
                    sum / T::of(ctx.len() as f64)
                }
                Aggregation::Max => {
                    let mut m = T::neg_infinity();
                    for c in &ctx {
                        m = m.max(cosine(&z, c)?);
                    }
                    m
                }
                Aggregation::Last => cosine(&z, ctx.last().expect("nonempty context"))?,
            };
            if score > best {
                best = score;
                winner = j;
            }
        }
        if winner == item.gold {
            correct += 1;
        }
    }
    Ok(MetricSummary {
        metric: format!("mcnc_{aggregation}"),
        value: T::of(correct as f64) / T::of(items.len() as f64),
        items: items.len(),
        skipped: 0,
    })
}

/// Prototype assignment summary over a set of events.
#[derive(Debug, Clone)]
pub struct ClusterReport<T> {
    /// Winning prototype and its score for each input event, input order.
    pub assignments: Vec<(EventId, usize, T)>,
    /// Per-prototype top events ranked by score, ties in input order.
    pub top_events: Vec<Vec<(EventId, T)>>,
    /// Number of events assigned to each prototype.
    pub histogram: Vec<usize>,
    /// Fraction of events carrying their cluster's dominant ground-truth
    /// label, when labels are supplied.
    pub purity: Option<T>,
}

fn best_prototype<T: Real>(z: &Vector<T>, bank: &PrototypeBank<T>) -> Result<(usize, T)> {
    let scores = bank.scores(z)?;
    let mut best = 0usize;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    Ok((best, scores[best]))
}

fn purity_of<T: Real>(
    assignments: &[(EventId, usize, T)],
    labels: &HashMap<EventId, usize>,
    m: usize,
) -> Result<T> {
    let mut counts: Vec<HashMap<usize, usize>> = vec![HashMap::new(); m];
    for &(id, proto, _) in assignments {
        let &label = labels
            .get(&id)
            .ok_or_else(|| Error::Config(format!("no ground-truth label for event {id}")))?;
        *counts[proto].entry(label).or_insert(0) += 1;
    }
    let dominant: usize = counts
        .iter()
        .map(|c| c.values().copied().max().unwrap_or(0))
        .sum();
    Ok(T::of(dominant as f64) / T::of(assignments.len() as f64))
}

/// Assigns each event to its highest-scoring prototype and reports the
/// top `top_k` events per prototype, the cluster-size histogram, and, when
/// ground-truth labels are given, cluster purity.
///
/// # Errors
/// The id list must be nonempty and resolvable, every event encodable,
/// and, when labels are supplied, every listed event labeled.
pub fn cluster_report<T: Real>(
    ids: &[EventId],
    table: &EventTable,
    enc: &EventEncoder<'_, T>,
    bank: &PrototypeBank<T>,
    top_k: usize,
    labels: Option<&HashMap<EventId, usize>>,
) -> Result<ClusterReport<T>> {
    if ids.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut assignments = Vec::with_capacity(ids.len());
    for &id in ids {
        let event = table.get(id).ok_or(Error::UnknownEvent(id))?;
        let z = enc.encode(event)?;
        let (proto, score) = best_prototype(&z, bank)?;
        assignments.push((id, proto, score));
    }
    let m = bank.n_prototypes();
    let mut histogram = vec![0usize; m];
    let mut members: Vec<Vec<(usize, EventId, T)>> = vec![Vec::new(); m];
    for (pos, &(id, proto, score)) in assignments.iter().enumerate() {
        histogram[proto] += 1;
        members[proto].push((pos, id, score));
    }
    let top_events = members
        .into_iter()
        .map(|mut v| {
            v.sort_by(|a, b| {
                b.2.partial_cmp(&a.2)
                    .expect("finite scores")
                    .then(a.0.cmp(&b.0))
            });
            v.truncate(top_k);
            v.into_iter().map(|(_, id, s)| (id, s)).collect()
        })
        .collect();
    let purity = match labels {
        None => None,
        Some(map) => Some(purity_of(&assignments, map, m)?),
    };
    Ok(ClusterReport {
        assignments,
        top_events,
        histogram,
        purity,
    })
}

/// Projects the events onto their top two principal components and writes
/// a plot-ready CSV of `event_id,x,y,prototype_id` rows.
///
/// # Errors
/// Needs at least two encodable events of dimension two or more; I/O
/// failures surface.
pub fn export_pca<T: Real>(
    ids: &[EventId],
    table: &EventTable,
    enc: &EventEncoder<'_, T>,
    bank: &PrototypeBank<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if ids.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut zs = Vec::with_capacity(ids.len());
    let mut protos = Vec::with_capacity(ids.len());
    for &id in ids {
        let event = table.get(id).ok_or(Error::UnknownEvent(id))?;
        let z = enc.encode(event)?;
        protos.push(best_prototype(&z, bank)?.0);
        zs.push(z);
    }
    let d = zs[0].len();
    let mut points = Matrix::zeros(ids.len(), d);
    for (i, z) in zs.iter().enumerate() {
        for j in 0..d {
            points[(i, j)] = z[j];
        }
    }
    let pca = pca_2d(&points)?;
    let mut out = String::from("event_id,x,y,prototype_id\n");
    for (i, &id) in ids.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            id,
            pca.coords[(i, 0)],
            pca.coords[(i, 1)],
            protos[i]
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

const DRAW_ATTEMPTS: usize = 10_000;

fn clusters_of(synth: &Synthetic) -> Result<Vec<Vec<EventId>>> {
    let table = &synth.corpus.events;
    if synth.labels.len() != table.len() {
        return Err(Error::Config(
            "ground-truth labels do not cover the event table".into(),
        ));
    }
    let k = synth.labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut clusters = vec![Vec::new(); k];
    for (id, &c) in synth.labels.iter().enumerate() {
        clusters[c].push(id);
    }
    if clusters.len() < 2 || clusters.iter().any(|c| c.len() < 2) {
        return Err(Error::Config(
            "probe generation needs at least two clusters of two events".into(),
        ));
    }
    Ok(clusters)
}

fn token_set(event: &Event) -> HashSet<&str> {
    event.tokens().collect()
}

fn shared_tokens(a: &Event, b: &Event) -> usize {
    let ta = token_set(a);
    b.tokens().collect::<HashSet<_>>().intersection(&ta).count()
}

fn draw_where<F>(pool: &[EventId], rng: &mut Rng, what: &'static str, keep: F) -> Result<EventId>
where
    F: Fn(EventId) -> bool,
{
    for _ in 0..DRAW_ATTEMPTS {
        let id = pool[rng.next_below(pool.len())];
        if keep(id) {
            return Ok(id);
        }
    }
    Err(Error::Config(format!(
        "could not draw {what}; enlarge the cluster vocabulary or relax the probe shape"
    )))
}

fn other_cluster(n: usize, avoid: usize, rng: &mut Rng) -> usize {
    let pick = rng.next_below(n - 1);
    if pick < avoid {
        pick
    } else {
        pick + 1
    }
}

fn graft_slot(dst: &mut Event, src: &Event, rng: &mut Rng) {
    let mut slots = Vec::with_capacity(3);
    if !src.subject.is_empty() {
        slots.push(0);
    }
    if !src.predicate.is_empty() {
        slots.push(1);
    }
    if !src.object.is_empty() {
        slots.push(2);
    }
    match slots[rng.next_below(slots.len())] {
        0 => dst.subject = src.subject.clone(),
        1 => dst.predicate = src.predicate.clone(),
        _ => dst.object = src.object.clone(),
    }
}

/// Hard-similarity probes over a generated corpus: similar pairs come from
/// one latent cluster with disjoint surface tokens; dissimilar pairs span
/// two clusters and, by default, share exactly one grafted token. The
/// `balanced` variant leaves dissimilar pairs token-disjoint too, making a
/// random encoder score exactly chance.
pub fn hard_sim_probes(
    synth: &Synthetic,
    n: usize,
    balanced: bool,
    rng: &mut Rng,
) -> Result<Vec<HardSimItem>> {
    if n == 0 {
        return Err(Error::Domain("probe count must be positive"));
    }
    let clusters = clusters_of(synth)?;
    let table = &synth.corpus.events;
    let event = |id: EventId| table.get(id).expect("labeled event id");
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.next_below(clusters.len());
        let a = clusters[c][rng.next_below(clusters[c].len())];
        let b = draw_where(&clusters[c], rng, "a token-disjoint similar pair", |id| {
            id != a && shared_tokens(event(a), event(id)) == 0
        })?;
        let c1 = rng.next_below(clusters.len());
        let c2 = other_cluster(clusters.len(), c1, rng);
        let x = clusters[c1][rng.next_below(clusters[c1].len())];
        let y = clusters[c2][rng.next_below(clusters[c2].len())];
        let mut dis = event(y).clone();
        if !balanced {
            graft_slot(&mut dis, event(x), rng);
        }
        items.push(HardSimItem {
            similar: (event(a).clone(), event(b).clone()),
            dissimilar: (event(x).clone(), dis),
        });
    }
    Ok(items)
}

fn cluster_vocab(table: &EventTable, members: &[EventId]) -> Vec<String> {
    let mut tokens: Vec<String> = members
        .iter()
        .flat_map(|&id| table.get(id).expect("labeled event id").tokens())
        .map(str::to_string)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    tokens.sort();
    tokens
}

fn fresh_token(vocab: &[String], avoid: &HashSet<&str>, rng: &mut Rng) -> Result<String> {
    for _ in 0..DRAW_ATTEMPTS {
        let t = &vocab[rng.next_below(vocab.len())];
        if !avoid.contains(t.as_str()) {
            return Ok(t.clone());
        }
    }
    Err(Error::Config(
        "could not draw a fresh token; enlarge the cluster vocabulary".into(),
    ))
}

fn replace_slots(base: &Event, count: usize, vocab: &[String], rng: &mut Rng) -> Result<Event> {
    let avoid = token_set(base);
    let mut slots = [0usize, 1, 2];
    rng.shuffle(&mut slots);
    let mut out = base.clone();
    for &slot in slots.iter().take(count) {
        let token = vec![fresh_token(vocab, &avoid, rng)?];
        match slot {
            0 => out.subject = token,
            1 => out.predicate = token,
            _ => out.object = token,
        }
    }
    Ok(out)
}

/// Graded similarity probes over a generated corpus. Each item's score
/// follows its construction: same-cluster pairs sharing two, one, or zero
/// slots score 7, 6, and 5; cross-cluster pairs with one grafted shared
/// token score 3; token-disjoint cross-cluster pairs score 1.
pub fn transitive_probes(synth: &Synthetic, n: usize, rng: &mut Rng) -> Result<Vec<TransitiveItem>> {
    if n == 0 {
        return Err(Error::Domain("probe count must be positive"));
    }
    let clusters = clusters_of(synth)?;
    let table = &synth.corpus.events;
    let vocabs: Vec<Vec<String>> = clusters.iter().map(|m| cluster_vocab(table, m)).collect();
    let event = |id: EventId| table.get(id).expect("labeled event id");
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.next_below(clusters.len());
        let left = event(clusters[a][rng.next_below(clusters[a].len())]).clone();
        let (right, gold) = match rng.next_below(5) {
            0 => (replace_slots(&left, 1, &vocabs[a], rng)?, 7.0),
            1 => (replace_slots(&left, 2, &vocabs[a], rng)?, 6.0),
            2 => (replace_slots(&left, 3, &vocabs[a], rng)?, 5.0),
            3 => {
                let b = other_cluster(clusters.len(), a, rng);
                let mut right = event(clusters[b][rng.next_below(clusters[b].len())]).clone();
                graft_slot(&mut right, &left, rng);
                (right, 3.0)
            }
            _ => {
                let b = other_cluster(clusters.len(), a, rng);
                (event(clusters[b][rng.next_below(clusters[b].len())]).clone(), 1.0)
            }
        };
        items.push(TransitiveItem { left, right, gold });
    }
    Ok(items)
}

/// Narrative-cloze probes over a generated corpus: the context chain and
/// the gold candidate come from one cluster but share no surface tokens,
/// distractors come from other clusters, and the gold position is uniform,
/// so a random encoder scores 1/candidates.
pub fn mcnc_probes(
    synth: &Synthetic,
    n: usize,
    candidates: usize,
    context_len: usize,
    rng: &mut Rng,
) -> Result<Vec<McncItem>> {
    if n == 0 {
        return Err(Error::Domain("probe count must be positive"));
    }
    if candidates < 2 {
        return Err(Error::Domain("cloze probes need at least two candidates"));
    }
    if context_len == 0 {
        return Err(Error::Domain("context chains must be nonempty"));
    }
    let clusters = clusters_of(synth)?;
    let table = &synth.corpus.events;
    let event = |id: EventId| table.get(id).expect("labeled event id");
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        // A context can exhaust the tokens its cluster pool avoids, so
        // redraw the whole chain until a disjoint gold candidate exists.
        let mut built = None;
        for _ in 0..100 {
            let c = rng.next_below(clusters.len());
            if clusters[c].len() <= context_len {
                continue;
            }
            let mut ctx_ids: Vec<EventId> = Vec::with_capacity(context_len);
            for _ in 0..context_len {
                let next = draw_where(&clusters[c], rng, "a distinct context event", |id| {
                    !ctx_ids.contains(&id)
                })?;
                ctx_ids.push(next);
            }
            let ctx_tokens: HashSet<&str> =
                ctx_ids.iter().flat_map(|&id| event(id).tokens()).collect();
            let eligible: Vec<EventId> = clusters[c]
                .iter()
                .copied()
                .filter(|&id| {
                    !ctx_ids.contains(&id) && event(id).tokens().all(|t| !ctx_tokens.contains(t))
                })
                .collect();
            if eligible.is_empty() {
                continue;
            }
            let gold_id = eligible[rng.next_below(eligible.len())];
            built = Some((c, ctx_ids, gold_id));
            break;
        }
        let Some((c, ctx_ids, gold_id)) = built else {
            return Err(Error::Config(
                "could not build a token-disjoint cloze item; shorten the context or enlarge the cluster vocabulary".into(),
            ));
        };
        let mut cand_ids: Vec<EventId> = Vec::with_capacity(candidates);
        for _ in 1..candidates {
            let b = other_cluster(clusters.len(), c, rng);
            let next = draw_where(&clusters[b], rng, "a distinct distractor", |id| {
                id != gold_id && !cand_ids.contains(&id)
            })?;
            cand_ids.push(next);
        }
        let gold = rng.next_below(candidates);
        cand_ids.insert(gold, gold_id);
        items.push(McncItem {
            context: ctx_ids.iter().map(|&id| event(id).clone()).collect(),
            candidates: cand_ids.iter().map(|&id| event(id).clone()).collect(),
            gold,
        });
    }
    Ok(items)
}
