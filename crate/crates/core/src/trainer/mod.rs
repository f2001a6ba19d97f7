//! The training loop: batch construction over the co-occurrence graph,
//! one step of the combined objective with exact gradients, Adam updates
//! over two parameter groups (encoder and prototype bank), and
//! checkpoint/metrics output.
//!
//! Every random choice derives from labeled splits of the config seed,
//! so runs are reproducible to the byte and view dropout is a pure
//! function of (seed, step, batch position).

mod adam;
mod checkpoint;
mod config;

pub use adam::AdamState;
pub use checkpoint::{BankDump, Checkpoint, EncoderDump, FORMAT_VERSION};
pub use config::{Objective, TrainConfig};

use std::path::{Path, PathBuf};

use crate::assigner::assign_batch;
use crate::corpus::{
    build_cooccurrence, build_vocab, load_corpus, CoocStats, Corpus, EventId, Vocab,
};
use crate::encoder::{
    encode_backward, encode_cached, format_input, mlm_mask, EncodeCache, EncoderState, MaskTarget,
    TokenSeq,
};
use crate::losses::{
    cluster_fit_grads, margin_loss_grads, mlm_loss_grads, overall_loss, weighted_contrastive_grads,
    LossReport, ParamGrads, Positive, PositiveSet, PositiveSource, PrototypeBank,
};
use crate::numerics::{Rng, Vector};
use crate::{Error, Result};

/// One anchor of a batch with its sampled co-occurrence positive and a
/// pre-drawn masked sequence for the reconstruction term.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub anchor: EventId,
    /// Co-occurring event and its normalized weight; `None` for isolated
    /// anchors.
    pub positive: Option<(EventId, f64)>,
    pub masked: TokenSeq,
    pub targets: Vec<MaskTarget>,
}

/// A batch of distinct anchors.
#[derive(Debug, Clone)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

impl Batch {
    pub fn anchors(&self) -> Vec<EventId> {
        self.items.iter().map(|item| item.anchor).collect()
    }
}

/// Shared read-only inputs of a training step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub corpus: &'a Corpus,
    pub vocab: &'a Vocab,
    pub cfg: &'a TrainConfig,
}

/// Shuffles all events for one epoch and cuts them into batches,
/// resampling each anchor's co-occurrence positive and masked tokens.
/// The tail keeps its shorter batch; a tail of a single event is merged
/// into the previous batch, since one event has no in-batch negatives.
pub fn make_batches(
    corpus: &Corpus,
    vocab: &Vocab,
    stats: &CoocStats,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<Vec<Batch>> {
    let n = corpus.events.len();
    if cfg.batch_size > n {
        return Err(Error::BatchTooLarge {
            batch: cfg.batch_size,
            events: n,
        });
    }
    let mut rng = Rng::new(cfg.seed).split("batches").split_index(epoch);
    let mut order: Vec<EventId> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut cuts: Vec<usize> = (0..n / cfg.batch_size).map(|c| (c + 1) * cfg.batch_size).collect();
    match n % cfg.batch_size {
        0 => {}
        1 => {} // fold the lone trailing event into the previous batch
        _ => cuts.push(n),
    }
    *cuts.last_mut().expect("batch_size <= n guarantees one cut") = n;
    let mut batches = Vec::with_capacity(cuts.len());
    let mut start = 0;
    for end in cuts {
        let mut items = Vec::with_capacity(end - start);
        for &anchor in &order[start..end] {
            let positive = stats.sample_positive(anchor, cfg.positive_sampling, &mut rng)?;
            let event = corpus
                .events
                .get(anchor)
                .ok_or(Error::UnknownEvent(anchor))?;
            let seq = format_input(event, vocab)?;
            let (masked, targets) = mlm_mask(&seq, cfg.mlm_rate, &mut rng)?;
            items.push(BatchItem {
                anchor,
                positive,
                masked,
                targets,
            });
        }
        batches.push(Batch { items });
        start = end;
    }
    Ok(batches)
}

/// Per-term losses with gradients, plus the assignments the clustering
/// term used (empty for objectives without it).
#[derive(Debug, Clone)]
pub struct StepLosses {
    pub report: LossReport<f64>,
    /// Per-anchor assignment of view a1.
    pub q1: Vec<Vec<f64>>,
    /// Per-anchor assignment of view a2.
    pub q2: Vec<Vec<f64>>,
}

/// All encodings of one anchor needed by the step.
struct ViewCaches {
    a1: EncodeCache<f64>,
    /// Second dropout view; only the full objective needs it.
    a2: Option<EncodeCache<f64>>,
    /// Independent anchor view; `None` reuses a1.
    zi: Option<EncodeCache<f64>>,
    /// One view of the co-occurring event.
    co: Option<EncodeCache<f64>>,
}

impl ViewCaches {
    fn anchor_z(&self) -> &Vector<f64> {
        match &self.zi {
            Some(c) => c.z(),
            None => self.a1.z(),
        }
    }
}

/// Loss gradients with respect to each view's representation, per anchor.
struct ViewGrads {
    anchor: Vec<Vector<f64>>,
    a1: Vec<Vector<f64>>,
    a2: Vec<Vector<f64>>,
    co: Vec<Vector<f64>>,
}

impl ViewGrads {
    fn zeros(n: usize, d: usize) -> ViewGrads {
        ViewGrads {
            anchor: vec![Vector::zeros(d); n],
            a1: vec![Vector::zeros(d); n],
            a2: vec![Vector::zeros(d); n],
            co: vec![Vector::zeros(d); n],
        }
    }

    /// Backpropagates every accumulated dz through its encoding.
    fn backward_into(
        self,
        state: &EncoderState<f64>,
        caches: &[ViewCaches],
        out: &mut ParamGrads<f64>,
    ) {
        fn bw(
            state: &EncoderState<f64>,
            cache: &EncodeCache<f64>,
            dz: &Vector<f64>,
            out: &mut ParamGrads<f64>,
        ) {
            if dz.iter().any(|&x| x != 0.0) {
                encode_backward(state, cache, dz, &mut out.encoder);
            }
        }
        for (i, c) in caches.iter().enumerate() {
            let mut dz_a1 = self.a1[i].clone();
            match &c.zi {
                Some(cache) => bw(state, cache, &self.anchor[i], out),
                // With the anchor view reused, its gradient lands on a1.
                None => dz_a1.axpy(1.0, &self.anchor[i]),
            }
            bw(state, &c.a1, &dz_a1, out);
            if let Some(a2) = &c.a2 {
                bw(state, a2, &self.a2[i], out);
            }
            if let Some(co) = &c.co {
                bw(state, co, &self.co[i], out);
            }
        }
    }
}

fn other_indices(n: usize, i: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&k| k != i)
}

/// Runs the forward and backward pass of one step without touching any
/// parameters. `q_override` substitutes fixed cluster assignments (the
/// assignments are constants of the objective, which gradient checks
/// exploit); `None` solves them with the assignment module.
pub fn compute_losses(
    state: &EncoderState<f64>,
    bank: &PrototypeBank<f64>,
    ctx: StepContext<'_>,
    batch: &Batch,
    step: usize,
    q_override: Option<(&[Vec<f64>], &[Vec<f64>])>,
) -> Result<StepLosses> {
    let cfg = ctx.cfg;
    let n = batch.items.len();
    if n < 2 {
        return Err(Error::Domain(
            "a batch needs at least two events for in-batch negatives",
        ));
    }
    let is_swcc = cfg.objective == Objective::Swcc;

    // One fixed pass of per-anchor seeds: anchor view, a1, a2,
    // co-occurrence view, masked-forward dropout. Drawn unconditionally
    // so the stream does not depend on objective flags or isolation.
    let mut step_rng = Rng::new(cfg.seed).split("step").split_index(step as u64);
    let seeds: Vec<[u64; 5]> = (0..n)
        .map(|_| std::array::from_fn(|_| step_rng.next_u64()))
        .collect();
    let margin_pick: Vec<usize> = (0..n).map(|_| step_rng.next_below(n - 1)).collect();

    let mut caches = Vec::with_capacity(n);
    for (item, s) in batch.items.iter().zip(&seeds) {
        let event = ctx
            .corpus
            .events
            .get(item.anchor)
            .ok_or(Error::UnknownEvent(item.anchor))?;
        let seq = format_input(event, ctx.vocab)?;
        let a1 = encode_cached(state, &seq, Some(s[1]))?;
        let a2 = if is_swcc {
            Some(encode_cached(state, &seq, Some(s[2]))?)
        } else {
            None
        };
        let zi = if cfg.reuse_anchor_view {
            None
        } else {
            Some(encode_cached(state, &seq, Some(s[0]))?)
        };
        let co = match item.positive {
            Some((p, _)) => {
                let partner = ctx.corpus.events.get(p).ok_or(Error::UnknownEvent(p))?;
                let pseq = format_input(partner, ctx.vocab)?;
                Some(encode_cached(state, &pseq, Some(s[3]))?)
            }
            None => None,
        };
        caches.push(ViewCaches { a1, a2, zi, co });
    }
    let d = state.d();

    // Cluster assignments over both dropout views.
    let (q1, q2) = if !is_swcc {
        (Vec::new(), Vec::new())
    } else if let Some((q1, q2)) = q_override {
        if q1.len() != n || q2.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "assignment override covers {}+{} anchors, batch has {n}",
                q1.len(),
                q2.len()
            )));
        }
        (q1.to_vec(), q2.to_vec())
    } else if cfg.joint_view_assignment {
        let views: Vec<Vector<f64>> = caches
            .iter()
            .map(|c| c.a1.z().clone())
            .chain(caches.iter().map(|c| c.a2.as_ref().expect("swcc encodes a2").z().clone()))
            .collect();
        let plan = assign_batch(bank, &views, cfg.epsilon, cfg.sinkhorn_iters)?;
        (
            (0..n).map(|i| plan.event_assignment(i)).collect(),
            (0..n).map(|i| plan.event_assignment(n + i)).collect(),
        )
    } else {
        let v1: Vec<Vector<f64>> = caches.iter().map(|c| c.a1.z().clone()).collect();
        let v2: Vec<Vector<f64>> = caches
            .iter()
            .map(|c| c.a2.as_ref().expect("swcc encodes a2").z().clone())
            .collect();
        let p1 = assign_batch(bank, &v1, cfg.epsilon, cfg.sinkhorn_iters)?;
        let p2 = assign_batch(bank, &v2, cfg.epsilon, cfg.sinkhorn_iters)?;
        (
            (0..n).map(|i| p1.event_assignment(i)).collect(),
            (0..n).map(|i| p2.event_assignment(i)).collect(),
        )
    };

    // Contrastive (or margin) term.
    let mut l_cl = 0.0;
    let mut g_cl = ParamGrads::zeros(state, bank);
    let mut vg_cl = ViewGrads::zeros(n, d);
    match cfg.objective {
        Objective::Swcc | Objective::InfonceOnly => {
            for i in 0..n {
                let negs: Vec<&Vector<f64>> =
                    other_indices(n, i).map(|k| caches[k].anchor_z()).collect();
                let positives = if is_swcc {
                    let self_views = vec![
                        caches[i].a1.z().clone(),
                        caches[i].a2.as_ref().expect("swcc encodes a2").z().clone(),
                    ];
                    let cooc = match (&caches[i].co, batch.items[i].positive) {
                        (Some(c), Some((_, w))) => Some((c.z().clone(), w)),
                        _ => None,
                    };
                    PositiveSet::for_anchor(self_views, cooc)?
                } else {
                    // Single positive: the co-occurrence view, or a
                    // dropout self-view for isolated anchors.
                    let (z, source) = match &caches[i].co {
                        Some(c) => (c.z().clone(), PositiveSource::CoOccurrence),
                        None => (caches[i].a1.z().clone(), PositiveSource::SelfView),
                    };
                    PositiveSet::new(vec![Positive {
                        z,
                        weight: 1.0,
                        source,
                    }])?
                };
                let grads = weighted_contrastive_grads(
                    caches[i].anchor_z(),
                    &positives,
                    &negs,
                    cfg.temperature,
                    cfg.weight_mode,
                )?;
                l_cl += grads.loss;
                vg_cl.anchor[i].axpy(1.0, &grads.d_anchor);
                if is_swcc {
                    vg_cl.a1[i].axpy(1.0, &grads.d_positives[0]);
                    vg_cl.a2[i].axpy(1.0, &grads.d_positives[1]);
                    if let Some(dco) = grads.d_positives.get(2) {
                        vg_cl.co[i].axpy(1.0, dco);
                    }
                } else if caches[i].co.is_some() {
                    vg_cl.co[i].axpy(1.0, &grads.d_positives[0]);
                } else {
                    vg_cl.a1[i].axpy(1.0, &grads.d_positives[0]);
                }
                for (dk, k) in grads.d_negatives.iter().zip(other_indices(n, i)) {
                    vg_cl.anchor[k].axpy(1.0, dk);
                }
            }
        }
        Objective::MarginOnly => {
            for i in 0..n {
                let pick = margin_pick[i];
                let j = if pick < i { pick } else { pick + 1 };
                let co_positive = caches[i].co.is_some();
                let pos_z = match &caches[i].co {
                    Some(c) => c.z(),
                    None => caches[i].a1.z(),
                };
                let g = margin_loss_grads(
                    caches[i].anchor_z(),
                    pos_z,
                    caches[j].anchor_z(),
                    cfg.margin,
                )?;
                l_cl += g.loss;
                vg_cl.anchor[i].axpy(1.0, &g.d_anchor);
                if co_positive {
                    vg_cl.co[i].axpy(1.0, &g.d_positive);
                } else {
                    vg_cl.a1[i].axpy(1.0, &g.d_positive);
                }
                vg_cl.anchor[j].axpy(1.0, &g.d_negative);
            }
        }
    }
    vg_cl.backward_into(state, &caches, &mut g_cl);

    // Swapped-prediction clustering term: each view scored against the
    // other view's assignment, the assignments held constant.
    let mut l_cp = 0.0;
    let mut g_cp = ParamGrads::zeros(state, bank);
    if is_swcc {
        let mut vg_cp = ViewGrads::zeros(n, d);
        for i in 0..n {
            let a2 = caches[i].a2.as_ref().expect("swcc encodes a2");
            let f1 = cluster_fit_grads(bank, caches[i].a1.z(), &q2[i])?;
            let f2 = cluster_fit_grads(bank, a2.z(), &q1[i])?;
            l_cp += f1.loss + f2.loss;
            vg_cp.a1[i].axpy(1.0, &f1.d_z);
            vg_cp.a2[i].axpy(1.0, &f2.d_z);
            g_cp.prototypes.axpy(1.0, &f1.d_prototypes);
            g_cp.prototypes.axpy(1.0, &f2.d_prototypes);
        }
        vg_cp.backward_into(state, &caches, &mut g_cp);
    }

    // Masked-token reconstruction term.
    let mut l_mlm = 0.0;
    let mut g_mlm = ParamGrads::zeros(state, bank);
    if is_swcc {
        for (item, s) in batch.items.iter().zip(&seeds) {
            l_mlm +=
                mlm_loss_grads(state, &item.masked, &item.targets, Some(s[4]), &mut g_mlm.encoder)?;
        }
    }

    // Mean over anchors keeps gradient scale independent of batch size.
    let inv = 1.0 / n as f64;
    l_cl *= inv;
    l_cp *= inv;
    l_mlm *= inv;
    g_cl.scale(inv);
    g_cp.scale(inv);
    g_mlm.scale(inv);
    let (beta, gamma) = if is_swcc { (cfg.beta, cfg.gamma) } else { (0.0, 0.0) };
    let report = overall_loss(l_cl, l_cp, l_mlm, g_cl, g_cp, g_mlm, beta, gamma)?;
    Ok(StepLosses { report, q1, q2 })
}

/// Adam states for the two parameter groups.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub encoder: AdamState<f64>,
    pub prototypes: AdamState<f64>,
}

impl Optimizers {
    pub fn new(
        state: &EncoderState<f64>,
        bank: &PrototypeBank<f64>,
        cfg: &TrainConfig,
    ) -> Result<Optimizers> {
        Ok(Optimizers {
            encoder: AdamState::new(state.n_params(), cfg.lr_encoder)?,
            prototypes: AdamState::new(bank.n_prototypes() * bank.d(), cfg.lr_prototypes)?,
        })
    }
}

fn diverged(step: usize, batch: &Batch, detail: String) -> Error {
    Error::Diverged {
        step,
        detail: format!("{detail}; batch anchors {:?}", batch.anchors()),
    }
}

/// One full optimization step: losses, gradients, and an Adam update per
/// parameter group. The prototype bank is only updated (and
/// re-normalized) when the clustering term is active, so with beta = 0
/// it stays bit-identical.
pub fn train_step(
    state: &mut EncoderState<f64>,
    bank: &mut PrototypeBank<f64>,
    opt: &mut Optimizers,
    ctx: StepContext<'_>,
    batch: &Batch,
    step: usize,
) -> Result<LossReport<f64>> {
    let losses = match compute_losses(state, bank, ctx, batch, step, None) {
        Ok(x) => x,
        Err(Error::NonFinite(what)) => {
            return Err(diverged(step, batch, format!("{what} became non-finite")));
        }
        Err(e) => return Err(e),
    };
    let report = losses.report;
    if !report.overall.is_finite() || !report.grad_overall.is_finite() {
        return Err(diverged(step, batch, "non-finite loss or gradient".into()));
    }
    let mut flat = state.flatten();
    opt.encoder.step(&mut flat, &report.grad_overall.encoder.flatten())?;
    state.assign_flat(&flat)?;
    if !state.is_finite() {
        return Err(diverged(step, batch, "encoder parameters overflowed".into()));
    }
    if ctx.cfg.objective == Objective::Swcc && ctx.cfg.beta > 0.0 {
        opt.prototypes.step(
            bank.prototypes_mut().as_mut_slice(),
            report.grad_overall.prototypes.as_slice(),
        )?;
        if ctx.cfg.normalize {
            bank.renormalize()?;
        }
        if !bank.is_finite() {
            return Err(diverged(step, batch, "prototypes overflowed".into()));
        }
    }
    Ok(report)
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    pub steps_run: usize,
}

/// Loads a corpus and trains; see [`train_on`].
pub fn train(
    cfg: &TrainConfig,
    corpus_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<TrainOutcome> {
    let corpus = load_corpus(corpus_path)?;
    train_on(cfg, &corpus, out_dir)
}

/// Runs the full loop on an in-memory corpus: frequency filtering,
/// vocabulary and co-occurrence construction, `cfg.steps` optimization
/// steps over reshuffled epochs, a metrics CSV, periodic checkpoints
/// when configured, and a final checkpoint. With `steps = 0` the final
/// checkpoint is the untouched initialization.
pub fn train_on(
    cfg: &TrainConfig,
    corpus: &Corpus,
    out_dir: impl AsRef<Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating output directory {}", out_dir.display()), e))?;
    let build = build_vocab(corpus, cfg.min_event_freq)?;
    let stats = build_cooccurrence(&build.corpus);
    let ctx = StepContext {
        corpus: &build.corpus,
        vocab: &build.vocab,
        cfg,
    };
    log::info!(
        "training on {} events, vocabulary of {} tokens, {} co-occurring pairs",
        build.corpus.events.len(),
        build.vocab.len(),
        stats.n_pairs()
    );
    let mut init_rng = Rng::new(cfg.seed).split("init");
    let mut state: EncoderState<f64> = EncoderState::init(
        build.vocab.len(),
        cfg.d_emb,
        cfg.d,
        cfg.dropout_rate,
        cfg.normalize,
        &mut init_rng,
    )?;
    let mut bank: PrototypeBank<f64> = PrototypeBank::init(
        cfg.prototypes,
        cfg.d,
        cfg.effective_proto_temperature(),
        &mut init_rng,
    )?;
    let mut opt = Optimizers::new(&state, &bank, cfg)?;
    let mut metrics = String::from("step,l_cl,l_cp,l_mlm,overall\n");
    let mut step = 0;
    let mut epoch = 0;
    'run: while step < cfg.steps {
        let batches = make_batches(&build.corpus, &build.vocab, &stats, cfg, epoch)?;
        for batch in &batches {
            if step >= cfg.steps {
                break 'run;
            }
            let report = train_step(&mut state, &mut bank, &mut opt, ctx, batch, step)?;
            metrics.push_str(&format!(
                "{},{},{},{},{}\n",
                step, report.l_cl, report.l_cp, report.l_mlm, report.overall
            ));
            step += 1;
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.steps {
                let path = out_dir.join(format!("checkpoint_step{step}.json"));
                Checkpoint::new(step, cfg, &build.vocab, &state, &bank).save(path)?;
            }
        }
        epoch += 1;
    }
    let metrics_path = out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics.as_bytes())
        .map_err(|e| Error::io(format!("writing metrics {}", metrics_path.display()), e))?;
    let checkpoint = Checkpoint::new(step, cfg, &build.vocab, &state, &bank);
    let checkpoint_path = out_dir.join("checkpoint.json");
    checkpoint.save(&checkpoint_path)?;
    log::info!("finished after {step} steps, checkpoint at {}", checkpoint_path.display());
    Ok(TrainOutcome {
        checkpoint,
        checkpoint_path,
        metrics_path,
        steps_run: step,
    })
}
