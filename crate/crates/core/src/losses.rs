//! Training objectives and their closed-form gradients.
//!
//! Four losses are defined over encoder outputs: a weighted multi-positive
//! contrastive loss, a prototype clustering loss that predicts one view's
//! assignment from the other, a masked-token reconstruction loss with the
//! output head tied to the input embeddings, and a cosine margin loss used
//! as a baseline objective. Each `*_grads` function returns the loss along
//! with exact gradients; all of them are validated against central
//! differences in the tests below. `overall_loss` combines the three main
//! terms and aggregates their gradients per parameter group.

use serde::{Deserialize, Serialize};

use crate::encoder::{hidden_cached, EncoderGrads, EncoderState, MaskTarget, TokenSeq};
use crate::numerics::{log_sum_exp, Matrix, Real, Rng, Vector};
use crate::{Error, Result};

/// How per-positive weights enter the contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Weight scales each positive's loss term: `w * (-ln g_pos/Z)`.
    /// A zero weight silently drops that positive.
    #[default]
    OutsideLog,
    /// Weight multiplies the similarity inside the log: `-ln (w g_pos)/Z`.
    /// This shifts the loss by `-ln w` but leaves gradients unchanged,
    /// so weights must be strictly positive.
    Literal,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<WeightMode> {
        match s {
            "outside_log" => Ok(WeightMode::OutsideLog),
            "literal" => Ok(WeightMode::Literal),
            other => Err(Error::Config(format!(
                "unknown weight mode {other:?}, expected outside_log or literal"
            ))),
        }
    }
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::OutsideLog => "outside_log",
            WeightMode::Literal => "literal",
        })
    }
}

/// Where a contrastive positive came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveSource {
    /// A dropout view of the anchor itself.
    SelfView,
    /// A view of an event sharing a document with the anchor.
    CoOccurrence,
}

/// One contrastive positive with its instance weight.
#[derive(Debug, Clone)]
pub struct Positive<T> {
    pub z: Vector<T>,
    pub weight: T,
    pub source: PositiveSource,
}

/// The positive set of one anchor.
#[derive(Debug, Clone)]
pub struct PositiveSet<T> {
    members: Vec<Positive<T>>,
}

impl<T: Real> PositiveSet<T> {
    /// # Errors
    /// The set must be non-empty with finite, nonnegative weights.
    pub fn new(members: Vec<Positive<T>>) -> Result<PositiveSet<T>> {
        if members.is_empty() {
            return Err(Error::Domain("a positive set needs at least one member"));
        }
        for p in &members {
            if !(p.weight >= T::zero()) || !p.weight.is_finite() {
                return Err(Error::Domain(
                    "positive weights must be finite and nonnegative",
                ));
            }
        }
        Ok(PositiveSet { members })
    }

    /// Assembles an anchor's set: self views weighted uniformly by
    /// `1/(|A|-1)` plus an optional co-occurrence view carrying its own
    /// weight.
    pub fn for_anchor(
        self_views: Vec<Vector<T>>,
        cooc: Option<(Vector<T>, T)>,
    ) -> Result<PositiveSet<T>> {
        let total = self_views.len() + usize::from(cooc.is_some());
        if total < 2 {
            return Err(Error::Domain(
                "self-view weighting needs a set of at least two positives",
            ));
        }
        let w = T::one() / T::of((total - 1) as f64);
        let mut members: Vec<Positive<T>> = self_views
            .into_iter()
            .map(|z| Positive {
                z,
                weight: w,
                source: PositiveSource::SelfView,
            })
            .collect();
        if let Some((z, weight)) = cooc {
            members.push(Positive {
                z,
                weight,
                source: PositiveSource::CoOccurrence,
            });
        }
        PositiveSet::new(members)
    }

    pub fn members(&self) -> &[Positive<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Exponentiated scaled similarity `exp(z1·z2 / tau)`.
pub fn g_sim<T: Real>(z1: &Vector<T>, z2: &Vector<T>, tau: T) -> Result<T> {
    check_tau(tau)?;
    check_dim(z1.len(), z2.len())?;
    Ok((z1.dot(z2) / tau).exp())
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::Domain("temperature must be positive and finite"));
    }
    Ok(())
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "vector dimensions differ: {a} vs {b}"
        )));
    }
    Ok(())
}

/// Scaled similarities of the anchor against every negative.
fn negative_scores<T: Real>(
    anchor: &Vector<T>,
    negatives: &[&Vector<T>],
    tau: T,
) -> Result<Vec<T>> {
    check_tau(tau)?;
    if negatives.is_empty() {
        return Err(Error::NoNegatives);
    }
    negatives
        .iter()
        .map(|n| {
            check_dim(anchor.len(), n.len())?;
            Ok(anchor.dot(n) / tau)
        })
        .collect()
}

/// Per-positive terms `-ln g(z_i, z_a) / (g(z_i, z_a) + sum_k g(z_i, z_k))`:
/// each positive competes against the full set of negatives, but not
/// against the other positives.
fn per_positive_terms<T: Real>(
    anchor: &Vector<T>,
    positives: &[&Vector<T>],
    negatives: &[&Vector<T>],
    tau: T,
) -> Result<Vec<T>> {
    if positives.is_empty() {
        return Err(Error::Domain("at least one positive is required"));
    }
    let s_neg = negative_scores(anchor, negatives, tau)?;
    let mut scores = Vec::with_capacity(1 + s_neg.len());
    positives
        .iter()
        .map(|p| {
            check_dim(anchor.len(), p.len())?;
            let s_pos = anchor.dot(p) / tau;
            scores.clear();
            scores.push(s_pos);
            scores.extend_from_slice(&s_neg);
            Ok(log_sum_exp(&scores)? - s_pos)
        })
        .collect()
}

/// Contrastive loss for one positive against a set of negatives.
pub fn info_nce<T: Real>(
    anchor: &Vector<T>,
    positive: &Vector<T>,
    negatives: &[&Vector<T>],
    tau: T,
) -> Result<T> {
    Ok(per_positive_terms(anchor, &[positive], negatives, tau)?[0])
}

/// Sum of per-positive contrastive terms, one denominator per positive.
pub fn multi_pos_info_nce<T: Real>(
    anchor: &Vector<T>,
    positives: &[&Vector<T>],
    negatives: &[&Vector<T>],
    tau: T,
) -> Result<T> {
    Ok(per_positive_terms(anchor, positives, negatives, tau)?
        .into_iter()
        .sum())
}

/// Multi-positive contrastive loss over a weighted positive set.
pub fn weighted_contrastive<T: Real>(
    anchor: &Vector<T>,
    positives: &PositiveSet<T>,
    negatives: &[&Vector<T>],
    tau: T,
    mode: WeightMode,
) -> Result<T> {
    let refs: Vec<&Vector<T>> = positives.members().iter().map(|p| &p.z).collect();
    let terms = per_positive_terms(anchor, &refs, negatives, tau)?;
    let mut loss = T::zero();
    for (term, p) in terms.into_iter().zip(positives.members()) {
        match mode {
            WeightMode::OutsideLog => loss += p.weight * term,
            WeightMode::Literal => {
                if !(p.weight > T::zero()) {
                    return Err(Error::ZeroWeight);
                }
                loss += term - p.weight.ln();
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("contrastive loss"));
    }
    Ok(loss)
}

/// Loss and input gradients of the weighted contrastive objective.
#[derive(Debug, Clone)]
pub struct ContrastiveGrads<T> {
    pub loss: T,
    pub d_anchor: Vector<T>,
    /// One gradient per positive, in member order.
    pub d_positives: Vec<Vector<T>>,
    /// One gradient per negative, in input order.
    pub d_negatives: Vec<Vector<T>>,
}

/// Computes [`weighted_contrastive`] together with exact gradients for
/// the anchor, every positive, and every negative.
pub fn weighted_contrastive_grads<T: Real>(
    anchor: &Vector<T>,
    positives: &PositiveSet<T>,
    negatives: &[&Vector<T>],
    tau: T,
    mode: WeightMode,
) -> Result<ContrastiveGrads<T>> {
    let s_neg = negative_scores(anchor, negatives, tau)?;
    let d = anchor.len();
    let inv_tau = T::one() / tau;
    let mut loss = T::zero();
    let mut d_anchor = Vector::zeros(d);
    let mut d_positives = Vec::with_capacity(positives.len());
    let mut neg_coef = vec![T::zero(); negatives.len()];
    let mut scores = Vec::with_capacity(1 + s_neg.len());
    for p in positives.members() {
        check_dim(d, p.z.len())?;
        let s_pos = anchor.dot(&p.z) * inv_tau;
        scores.clear();
        scores.push(s_pos);
        scores.extend_from_slice(&s_neg);
        let log_z = log_sum_exp(&scores)?;
        // In literal mode the weight only shifts the loss, so the
        // gradient weight is 1.
        let grad_w = match mode {
            WeightMode::OutsideLog => {
                loss += p.weight * (log_z - s_pos);
                p.weight
            }
            WeightMode::Literal => {
                if !(p.weight > T::zero()) {
                    return Err(Error::ZeroWeight);
                }
                loss += log_z - s_pos - p.weight.ln();
                T::one()
            }
        };
        let sigma_pos = (s_pos - log_z).exp();
        d_anchor.axpy(grad_w * (sigma_pos - T::one()) * inv_tau, &p.z);
        for (coef, &s_k) in neg_coef.iter_mut().zip(&s_neg) {
            *coef += grad_w * (s_k - log_z).exp() * inv_tau;
        }
        let mut dp = Vector::zeros(d);
        dp.axpy(grad_w * (sigma_pos - T::one()) * inv_tau, anchor);
        d_positives.push(dp);
    }
    for (coef, n) in neg_coef.iter().zip(negatives) {
        d_anchor.axpy(*coef, n);
    }
    let d_negatives = neg_coef
        .into_iter()
        .map(|coef| {
            let mut dn = Vector::zeros(d);
            dn.axpy(coef, anchor);
            dn
        })
        .collect();
    if !loss.is_finite() {
        return Err(Error::NonFinite("contrastive loss"));
    }
    Ok(ContrastiveGrads {
        loss,
        d_anchor,
        d_positives,
        d_negatives,
    })
}

/// Learnable cluster centers with a softmax temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank<T> {
    protos: Matrix<T>,
    temperature: T,
}

impl<T: Real> PrototypeBank<T> {
    /// Random unit-norm prototypes.
    pub fn init(m: usize, d: usize, temperature: T, rng: &mut Rng) -> Result<PrototypeBank<T>> {
        if m == 0 || d == 0 {
            return Err(Error::Config(
                "prototype bank dimensions must be positive".into(),
            ));
        }
        check_tau(temperature)?;
        let mut protos = Matrix::zeros(m, d);
        for x in protos.as_mut_slice() {
            *x = T::of(rng.normal());
        }
        let mut bank = PrototypeBank {
            protos,
            temperature,
        };
        bank.renormalize()?;
        Ok(bank)
    }

    /// Wraps an existing prototype matrix (for checkpoint restore).
    pub fn from_matrix(protos: Matrix<T>, temperature: T) -> Result<PrototypeBank<T>> {
        if protos.rows() == 0 || protos.cols() == 0 {
            return Err(Error::Config(
                "prototype bank dimensions must be positive".into(),
            ));
        }
        check_tau(temperature)?;
        Ok(PrototypeBank {
            protos,
            temperature,
        })
    }

    pub fn n_prototypes(&self) -> usize {
        self.protos.rows()
    }

    pub fn d(&self) -> usize {
        self.protos.cols()
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn prototypes(&self) -> &Matrix<T> {
        &self.protos
    }

    pub fn prototypes_mut(&mut self) -> &mut Matrix<T> {
        &mut self.protos
    }

    /// Raw similarities `z·c_j`, without temperature scaling.
    pub fn scores(&self, z: &Vector<T>) -> Result<Vec<T>> {
        check_dim(self.d(), z.len())?;
        Ok(self.protos.matvec(z.as_slice()))
    }

    /// Softmax assignment probabilities `softmax(z·c / tau)`, computed
    /// with a max shift so extreme scores stay finite.
    pub fn probs(&self, z: &Vector<T>) -> Result<Vec<T>> {
        let mut s = self.scores(z)?;
        for x in &mut s {
            *x /= self.temperature;
        }
        let log_z = log_sum_exp(&s)?;
        Ok(s.into_iter().map(|x| (x - log_z).exp()).collect())
    }

    /// Rescales every prototype back to unit norm.
    ///
    /// # Errors
    /// A zero-norm prototype cannot be normalized.
    pub fn renormalize(&mut self) -> Result<()> {
        for j in 0..self.protos.rows() {
            let row = self.protos.row_mut(j);
            let n = row.iter().map(|&x| x * x).sum::<T>().sqrt();
            if !(n > T::zero()) || !n.is_finite() {
                return Err(Error::Domain("prototype collapsed to the zero vector"));
            }
            for x in row {
                *x /= n;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.protos.is_finite()
    }
}

fn check_assignment<T: Real>(q: &[T], m: usize) -> Result<()> {
    check_dim(m, q.len())?;
    let mut sum = T::zero();
    for &qi in q {
        if !(qi >= T::zero()) {
            return Err(Error::Domain("assignment entries must be nonnegative"));
        }
        sum += qi;
    }
    if (sum - T::one()).abs() > T::of(1e-6) {
        return Err(Error::Domain("assignment must sum to one"));
    }
    Ok(())
}

/// Cross-entropy between a target assignment `q` and the softmax
/// prototype probabilities of `z`: `ln Z - sum_j q_j s_j` with
/// `s_j = z·c_j / tau`. The target is treated as a constant.
pub fn cluster_fit<T: Real>(bank: &PrototypeBank<T>, z: &Vector<T>, q: &[T]) -> Result<T> {
    check_assignment(q, bank.n_prototypes())?;
    let mut s = bank.scores(z)?;
    for x in &mut s {
        *x /= bank.temperature;
    }
    let log_z = log_sum_exp(&s)?;
    let mut loss = log_z;
    for (&qj, &sj) in q.iter().zip(&s) {
        loss -= qj * sj;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("cluster fit loss"));
    }
    Ok(loss)
}

/// Loss and gradients of [`cluster_fit`].
#[derive(Debug, Clone)]
pub struct ClusterFitGrads<T> {
    pub loss: T,
    pub d_z: Vector<T>,
    /// One gradient row per prototype.
    pub d_prototypes: Matrix<T>,
}

/// Computes [`cluster_fit`] with gradients `(p - q)/tau` routed through
/// the scores: `dL/dz = sum_j (p_j - q_j) c_j / tau` and
/// `dL/dc_j = (p_j - q_j) z / tau`.
pub fn cluster_fit_grads<T: Real>(
    bank: &PrototypeBank<T>,
    z: &Vector<T>,
    q: &[T],
) -> Result<ClusterFitGrads<T>> {
    check_assignment(q, bank.n_prototypes())?;
    let mut s = bank.scores(z)?;
    let inv_tau = T::one() / bank.temperature;
    for x in &mut s {
        *x *= inv_tau;
    }
    let log_z = log_sum_exp(&s)?;
    let mut loss = log_z;
    let d = bank.d();
    let mut d_z = Vector::zeros(d);
    let mut d_protos = Matrix::zeros(bank.n_prototypes(), d);
    for j in 0..bank.n_prototypes() {
        loss -= q[j] * s[j];
        let coef = ((s[j] - log_z).exp() - q[j]) * inv_tau;
        let c_j = bank.prototypes().row(j);
        for (dzk, &cjk) in d_z.as_mut_slice().iter_mut().zip(c_j) {
            *dzk += coef * cjk;
        }
        for (g, &zk) in d_protos.row_mut(j).iter_mut().zip(z.iter()) {
            *g += coef * zk;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("cluster fit loss"));
    }
    Ok(ClusterFitGrads {
        loss,
        d_z,
        d_prototypes: d_protos,
    })
}

/// Swapped-prediction clustering loss for two views of one event: each
/// view is scored against the other view's assignment,
/// `cluster_fit(z1, q2) + cluster_fit(z2, q1)`.
pub fn cluster_prediction_loss<T: Real>(
    bank: &PrototypeBank<T>,
    z1: &Vector<T>,
    z2: &Vector<T>,
    q1: &[T],
    q2: &[T],
) -> Result<T> {
    Ok(cluster_fit(bank, z1, q2)? + cluster_fit(bank, z2, q1)?)
}

fn check_mask_targets(seq: &TokenSeq, targets: &[MaskTarget], vocab_size: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Domain(
            "masked-token loss requires at least one target",
        ));
    }
    let content = seq.content_positions();
    for t in targets {
        if !content.contains(&t.pos) || seq.ids()[t.pos] != crate::corpus::Vocab::MASK {
            return Err(Error::Config(format!(
                "target position {} is not a masked content token",
                t.pos
            )));
        }
        if t.token >= vocab_size {
            return Err(Error::Config(format!(
                "target token {} outside vocabulary of {vocab_size}",
                t.token
            )));
        }
    }
    Ok(())
}

fn mlm_forward<T: Real>(
    state: &EncoderState<T>,
    masked: &TokenSeq,
    targets: &[MaskTarget],
    mask_seed: Option<u64>,
) -> Result<(T, crate::encoder::HiddenCache<T>, Vec<T>, T)> {
    check_mask_targets(masked, targets, state.vocab_size())?;
    let hidden = hidden_cached(state, masked, mask_seed)?;
    let logits = state.embed.matvec(&hidden.h);
    let log_z = log_sum_exp(&logits)?;
    let inv_p = T::one() / T::of(targets.len() as f64);
    let mut loss = T::zero();
    for t in targets {
        loss += (log_z - logits[t.token]) * inv_p;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("masked-token loss"));
    }
    Ok((loss, hidden, logits, log_z))
}

/// Mean cross-entropy of reconstructing masked tokens from the pooled
/// hidden state, scored against the full vocabulary with the output head
/// tied to the input embeddings.
pub fn mlm_loss<T: Real>(
    state: &EncoderState<T>,
    masked: &TokenSeq,
    targets: &[MaskTarget],
    mask_seed: Option<u64>,
) -> Result<T> {
    Ok(mlm_forward(state, masked, targets, mask_seed)?.0)
}

/// Computes [`mlm_loss`] and accumulates its gradients. Only the
/// embedding table receives gradient (from both the tied output head and
/// the pooled input side); the projection is untouched.
pub fn mlm_loss_grads<T: Real>(
    state: &EncoderState<T>,
    masked: &TokenSeq,
    targets: &[MaskTarget],
    mask_seed: Option<u64>,
    grads: &mut EncoderGrads<T>,
) -> Result<T> {
    let (loss, hidden, logits, log_z) = mlm_forward(state, masked, targets, mask_seed)?;
    let inv_p = T::one() / T::of(targets.len() as f64);
    let mut dlogits: Vec<T> = logits.iter().map(|&s| (s - log_z).exp()).collect();
    for t in targets {
        dlogits[t.token] -= inv_p;
    }
    for (v, &dv) in dlogits.iter().enumerate() {
        for (g, &hk) in grads.embed.row_mut(v).iter_mut().zip(&hidden.h) {
            *g += dv * hk;
        }
    }
    let dh = state.embed.tr_matvec(&dlogits);
    hidden.backward(&dh, &mut grads.embed);
    Ok(loss)
}

/// Cosine hinge `max(0, margin - cos(anchor, positive) + cos(anchor, negative))`.
pub fn margin_loss<T: Real>(
    anchor: &Vector<T>,
    positive: &Vector<T>,
    negative: &Vector<T>,
    margin: T,
) -> Result<T> {
    check_margin(margin)?;
    let cos_pos = cosine_checked(anchor, positive)?;
    let cos_neg = cosine_checked(anchor, negative)?;
    Ok((margin - cos_pos + cos_neg).max(T::zero()))
}

fn check_margin<T: Real>(margin: T) -> Result<()> {
    if !(margin > T::zero()) || !margin.is_finite() {
        return Err(Error::Domain("margin must be positive and finite"));
    }
    Ok(())
}

fn cosine_checked<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Result<T> {
    check_dim(a.len(), b.len())?;
    let na = a.norm();
    let nb = b.norm();
    if !(na > T::zero()) || !(nb > T::zero()) {
        return Err(Error::Domain("cosine of a zero vector is undefined"));
    }
    Ok(a.dot(b) / (na * nb))
}

/// Loss and input gradients of [`margin_loss`].
#[derive(Debug, Clone)]
pub struct MarginGrads<T> {
    pub loss: T,
    pub d_anchor: Vector<T>,
    pub d_positive: Vector<T>,
    pub d_negative: Vector<T>,
}

/// Computes [`margin_loss`] with gradients; in the flat region (and on
/// its boundary) all gradients are zero.
pub fn margin_loss_grads<T: Real>(
    anchor: &Vector<T>,
    positive: &Vector<T>,
    negative: &Vector<T>,
    margin: T,
) -> Result<MarginGrads<T>> {
    let loss = margin_loss(anchor, positive, negative, margin)?;
    let d = anchor.len();
    let mut out = MarginGrads {
        loss,
        d_anchor: Vector::zeros(d),
        d_positive: Vector::zeros(d),
        d_negative: Vector::zeros(d),
    };
    if loss <= T::zero() {
        return Ok(out);
    }
    // d cos(a,b)/da = b/(|a||b|) - (a·b) a/(|a|^3 |b|), and symmetrically
    // for b. The positive enters with sign -1, the negative with +1.
    let na = anchor.norm();
    for (other, sign, d_other) in [
        (positive, -T::one(), &mut out.d_positive),
        (negative, T::one(), &mut out.d_negative),
    ] {
        let nb = other.norm();
        let dot = anchor.dot(other);
        out.d_anchor.axpy(sign / (na * nb), other);
        out.d_anchor
            .axpy(-sign * dot / (na * na * na * nb), anchor);
        d_other.axpy(sign / (na * nb), anchor);
        d_other.axpy(-sign * dot / (nb * nb * nb * na), other);
    }
    Ok(out)
}

/// Gradients for both trainable parameter groups.
#[derive(Debug, Clone)]
pub struct ParamGrads<T> {
    pub encoder: EncoderGrads<T>,
    /// One gradient row per prototype.
    pub prototypes: Matrix<T>,
}

impl<T: Real> ParamGrads<T> {
    pub fn zeros(state: &EncoderState<T>, bank: &PrototypeBank<T>) -> Self {
        ParamGrads {
            encoder: EncoderGrads::zeros_like(state),
            prototypes: Matrix::zeros(bank.n_prototypes(), bank.d()),
        }
    }

    /// self += alpha * other; a zero coefficient leaves self untouched
    /// bit for bit.
    pub fn axpy(&mut self, alpha: T, other: &ParamGrads<T>) {
        if alpha == T::zero() {
            return;
        }
        self.encoder.axpy(alpha, &other.encoder);
        self.prototypes.axpy(alpha, &other.prototypes);
    }

    pub fn scale(&mut self, alpha: T) {
        self.encoder.scale(alpha);
        self.prototypes.scale(alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.prototypes.is_finite()
    }

    /// Encoder gradients followed by prototype gradients, matching the
    /// concatenation of `EncoderState::flatten` and the bank rows.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = self.encoder.flatten();
        out.extend_from_slice(self.prototypes.as_slice());
        out
    }
}

/// The three objective terms with per-term and combined gradients.
#[derive(Debug, Clone)]
pub struct LossReport<T> {
    pub l_cl: T,
    pub l_cp: T,
    pub l_mlm: T,
    /// `l_cl + beta * l_cp + gamma * l_mlm`.
    pub overall: T,
    pub grad_cl: ParamGrads<T>,
    pub grad_cp: ParamGrads<T>,
    pub grad_mlm: ParamGrads<T>,
    pub grad_overall: ParamGrads<T>,
}

/// Combines the three objective terms, aggregating gradients across the
/// shared parameter groups. Zero coefficients contribute nothing, bit
/// for bit.
pub fn overall_loss<T: Real>(
    l_cl: T,
    l_cp: T,
    l_mlm: T,
    grad_cl: ParamGrads<T>,
    grad_cp: ParamGrads<T>,
    grad_mlm: ParamGrads<T>,
    beta: T,
    gamma: T,
) -> Result<LossReport<T>> {
    if !(beta >= T::zero()) || !(gamma >= T::zero()) || !beta.is_finite() || !gamma.is_finite() {
        return Err(Error::Domain(
            "objective coefficients must be finite and nonnegative",
        ));
    }
    let overall = l_cl + beta * l_cp + gamma * l_mlm;
    let mut grad_overall = grad_cl.clone();
    grad_overall.axpy(beta, &grad_cp);
    grad_overall.axpy(gamma, &grad_mlm);
    Ok(LossReport {
        l_cl,
        l_cp,
        l_mlm,
        overall,
        grad_cl,
        grad_cp,
        grad_mlm,
        grad_overall,
    })
}
