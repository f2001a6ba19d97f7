//! Bag-of-tokens event encoder.
//!
//! An event is rendered as `[CLS] predicate subject object [SEP]`, each
//! content token embedded, inverted dropout applied, the survivors
//! mean-pooled, affinely projected, and L2-normalized onto the unit
//! sphere. Dropout masks are a pure function of an explicit seed, so two
//! encodings of one event with different seeds are the two "views" the
//! contrastive loss treats as positives.
//!
//! All backward passes here are hand-derived; `encode_backward` is
//! validated against central differences by the loss-level tests.

use crate::corpus::{Event, Vocab};
use crate::numerics::{Matrix, Real, Rng, Vector};
use crate::{Error, Result};

/// Token id sequence bracketed by `[CLS]` and `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    ids: Vec<usize>,
}

impl TokenSeq {
    /// Validates the sentinel bracket.
    pub fn from_ids(ids: Vec<usize>) -> Result<TokenSeq> {
        if ids.len() < 2 || ids[0] != Vocab::CLS || *ids.last().unwrap() != Vocab::SEP {
            return Err(Error::Config(
                "token sequence must be bracketed by [CLS] and [SEP]".into(),
            ));
        }
        Ok(TokenSeq { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Positions strictly between the sentinels.
    pub fn content_positions(&self) -> std::ops::Range<usize> {
        1..self.ids.len() - 1
    }

    pub fn content(&self) -> &[usize] {
        &self.ids[1..self.ids.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Renders an event as `[CLS] predicate subject object [SEP]`, mapping
/// out-of-vocabulary tokens to `[UNK]`.
///
/// # Errors
/// An event with an empty predicate cannot be encoded.
pub fn format_input(event: &Event, vocab: &Vocab) -> Result<TokenSeq> {
    if event.predicate.is_empty() {
        return Err(Error::EmptyPredicate);
    }
    let mut ids = Vec::with_capacity(2 + event.predicate.len() + event.subject.len() + event.object.len());
    ids.push(Vocab::CLS);
    for tok in event.predicate.iter().chain(&event.subject).chain(&event.object) {
        ids.push(vocab.id_or_unk(tok));
    }
    ids.push(Vocab::SEP);
    Ok(TokenSeq { ids })
}

/// Encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState<T> {
    /// Token embeddings, |V| × d_emb. Also the tied output matrix of the
    /// masked-token head.
    pub embed: Matrix<T>,
    /// Projection, d_emb × d.
    pub proj_w: Matrix<T>,
    /// Projection bias, d.
    pub proj_b: Vector<T>,
    /// Component dropout rate in [0, 1), applied to content embeddings
    /// with inverted scaling 1/(1-rate).
    pub dropout_rate: f64,
    /// Whether outputs are L2-normalized to the unit sphere.
    pub normalize: bool,
}

impl<T: Real> EncoderState<T> {
    /// Random initialization: embeddings and projection N(0, 1/d_emb),
    /// zero bias.
    pub fn init(
        vocab_size: usize,
        d_emb: usize,
        d: usize,
        dropout_rate: f64,
        normalize: bool,
        rng: &mut Rng,
    ) -> Result<EncoderState<T>> {
        if vocab_size < 5 || d_emb == 0 || d == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config("dropout rate must lie in [0, 1)".into()));
        }
        let scale = 1.0 / (d_emb as f64).sqrt();
        let mut embed = Matrix::zeros(vocab_size, d_emb);
        for x in embed.as_mut_slice() {
            *x = T::of(rng.normal() * scale);
        }
        let mut proj_w = Matrix::zeros(d_emb, d);
        for x in proj_w.as_mut_slice() {
            *x = T::of(rng.normal() * scale);
        }
        Ok(EncoderState {
            embed,
            proj_w,
            proj_b: Vector::zeros(d),
            dropout_rate,
            normalize,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.rows()
    }

    pub fn d_emb(&self) -> usize {
        self.embed.cols()
    }

    pub fn d(&self) -> usize {
        self.proj_w.cols()
    }

    pub fn n_params(&self) -> usize {
        self.embed.rows() * self.embed.cols()
            + self.proj_w.rows() * self.proj_w.cols()
            + self.proj_b.len()
    }

    /// Parameters as one flat vector: embed, proj_w, proj_b.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(self.embed.as_slice());
        out.extend_from_slice(self.proj_w.as_slice());
        out.extend_from_slice(self.proj_b.as_slice());
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters supplied, encoder has {}",
                flat.len(),
                self.n_params()
            )));
        }
        let ne = self.embed.as_slice().len();
        let nw = self.proj_w.as_slice().len();
        self.embed.as_mut_slice().copy_from_slice(&flat[..ne]);
        self.proj_w
            .as_mut_slice()
            .copy_from_slice(&flat[ne..ne + nw]);
        self.proj_b
            .as_mut_slice()
            .copy_from_slice(&flat[ne + nw..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.embed.is_finite() && self.proj_w.is_finite() && self.proj_b.is_finite()
    }
}

/// Gradients with the same shapes as [`EncoderState`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads<T> {
    pub embed: Matrix<T>,
    pub proj_w: Matrix<T>,
    pub proj_b: Vector<T>,
}

impl<T: Real> EncoderGrads<T> {
    pub fn zeros_like(state: &EncoderState<T>) -> Self {
        EncoderGrads {
            embed: Matrix::zeros(state.embed.rows(), state.embed.cols()),
            proj_w: Matrix::zeros(state.proj_w.rows(), state.proj_w.cols()),
            proj_b: Vector::zeros(state.proj_b.len()),
        }
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: T, other: &EncoderGrads<T>) {
        self.embed.axpy(alpha, &other.embed);
        self.proj_w.axpy(alpha, &other.proj_w);
        self.proj_b.axpy(alpha, &other.proj_b);
    }

    pub fn scale(&mut self, alpha: T) {
        self.embed.scale(alpha);
        self.proj_w.scale(alpha);
        self.proj_b.scale(alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.embed.is_finite()
            && self.proj_w.is_finite()
            && self.proj_b.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        out.extend_from_slice(self.embed.as_slice());
        out.extend_from_slice(self.proj_w.as_slice());
        out.extend_from_slice(self.proj_b.as_slice());
        out
    }
}

/// Pooled hidden state plus what the embedding backward pass needs.
/// The masked-token head consumes this directly, before projection.
#[derive(Debug, Clone)]
pub(crate) struct HiddenCache<T> {
    /// Content token ids, in sequence order.
    pub(crate) content: Vec<usize>,
    /// Dropout factors per content position (0 or 1/(1-rate)); `None`
    /// in eval mode.
    pub(crate) mask: Option<Matrix<T>>,
    /// Mean-pooled hidden state, d_emb.
    pub(crate) h: Vec<T>,
}

impl<T: Real> HiddenCache<T> {
    /// Scatters d(loss)/dh back onto the token embeddings.
    pub(crate) fn backward(&self, dh: &[T], embed_grad: &mut Matrix<T>) {
        pool_backward(&self.content, self.mask.as_ref(), dh, embed_grad);
    }
}

/// Forward-pass record for one encoding, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncodeCache<T> {
    pub(crate) hidden: HiddenCache<T>,
    /// Pre-normalization norm; 1 when normalization is disabled.
    pub(crate) norm: T,
    /// Final representation.
    z: Vector<T>,
}

impl<T: Real> EncodeCache<T> {
    pub fn z(&self) -> &Vector<T> {
        &self.z
    }
}

fn dropout_mask<T: Real>(rate: f64, rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = Rng::new(seed);
    let keep = T::of(1.0 / (1.0 - rate));
    let mut mask = Matrix::zeros(rows, cols);
    for x in mask.as_mut_slice() {
        if rng.next_f64() >= rate {
            *x = keep;
        }
    }
    mask
}

/// Pools the (optionally dropout-masked) content embeddings.
fn pooled_hidden<T: Real>(
    state: &EncoderState<T>,
    content: &[usize],
    mask: Option<&Matrix<T>>,
) -> Vec<T> {
    let d_emb = state.d_emb();
    let inv_len = T::one() / T::of(content.len() as f64);
    let mut h = vec![T::zero(); d_emb];
    for (p, &tok) in content.iter().enumerate() {
        let row = state.embed.row(tok);
        match mask {
            Some(m) => {
                for ((hk, &ek), &mk) in h.iter_mut().zip(row).zip(m.row(p)) {
                    *hk += ek * mk;
                }
            }
            None => {
                for (hk, &ek) in h.iter_mut().zip(row) {
                    *hk += ek;
                }
            }
        }
    }
    for hk in &mut h {
        *hk *= inv_len;
    }
    h
}

/// Scatters a pooled-hidden gradient back onto the token embeddings.
pub(crate) fn pool_backward<T: Real>(
    content: &[usize],
    mask: Option<&Matrix<T>>,
    dh: &[T],
    embed_grad: &mut Matrix<T>,
) {
    let inv_len = T::one() / T::of(content.len() as f64);
    for (p, &tok) in content.iter().enumerate() {
        let row = embed_grad.row_mut(tok);
        match mask {
            Some(m) => {
                for ((g, &dhk), &mk) in row.iter_mut().zip(dh).zip(m.row(p)) {
                    *g += dhk * mk * inv_len;
                }
            }
            None => {
                for (g, &dhk) in row.iter_mut().zip(dh) {
                    *g += dhk * inv_len;
                }
            }
        }
    }
}

/// Embeds, applies dropout, and mean-pools a sequence's content tokens.
pub(crate) fn hidden_cached<T: Real>(
    state: &EncoderState<T>,
    seq: &TokenSeq,
    mask_seed: Option<u64>,
) -> Result<HiddenCache<T>> {
    let content = seq.content();
    if content.is_empty() {
        return Err(Error::NoContentTokens);
    }
    if let Some(&bad) = content.iter().find(|&&t| t >= state.vocab_size()) {
        return Err(Error::Config(format!(
            "token id {bad} outside vocabulary of {}",
            state.vocab_size()
        )));
    }
    let mask =
        mask_seed.map(|seed| dropout_mask(state.dropout_rate, content.len(), state.d_emb(), seed));
    let h = pooled_hidden(state, content, mask.as_ref());
    Ok(HiddenCache {
        content: content.to_vec(),
        mask,
        h,
    })
}

/// Encodes a token sequence, keeping the intermediates needed to
/// backpropagate. `mask_seed` selects the dropout pattern; `None`
/// disables dropout (eval mode).
///
/// # Errors
/// The sequence must contain a content token, every id must be in range,
/// and the pre-normalization output must not be the zero vector.
pub fn encode_cached<T: Real>(
    state: &EncoderState<T>,
    seq: &TokenSeq,
    mask_seed: Option<u64>,
) -> Result<EncodeCache<T>> {
    let hidden = hidden_cached(state, seq, mask_seed)?;
    let mut u = state.proj_w.tr_matvec(&hidden.h);
    for (uj, &bj) in u.iter_mut().zip(state.proj_b.iter()) {
        *uj += bj;
    }
    let (z, norm) = if state.normalize {
        let n = u.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("representation norm"));
        }
        if !(n > T::zero()) {
            return Err(Error::Domain("representation collapsed to the zero vector"));
        }
        for x in &mut u {
            *x /= n;
        }
        (Vector::from_vec(u), n)
    } else {
        (Vector::from_vec(u), T::one())
    };
    Ok(EncodeCache { hidden, norm, z })
}

/// Encodes a token sequence; see [`encode_cached`].
pub fn encode<T: Real>(
    state: &EncoderState<T>,
    seq: &TokenSeq,
    mask_seed: Option<u64>,
) -> Result<Vector<T>> {
    Ok(encode_cached(state, seq, mask_seed)?.z)
}

/// Accumulates d(loss)/d(params) for one encoding, given d(loss)/dz.
pub fn encode_backward<T: Real>(
    state: &EncoderState<T>,
    cache: &EncodeCache<T>,
    dz: &Vector<T>,
    grads: &mut EncoderGrads<T>,
) {
    let d = state.d();
    // Through the normalization: du = (dz - (dz·z) z) / ‖u‖.
    let mut du = vec![T::zero(); d];
    if state.normalize {
        let dzz = dz.dot(&cache.z);
        for j in 0..d {
            du[j] = (dz[j] - dzz * cache.z[j]) / cache.norm;
        }
    } else {
        du.copy_from_slice(dz.as_slice());
    }
    for (g, &duj) in grads.proj_b.as_mut_slice().iter_mut().zip(&du) {
        *g += duj;
    }
    for k in 0..state.d_emb() {
        let hk = cache.hidden.h[k];
        for (g, &duj) in grads.proj_w.row_mut(k).iter_mut().zip(&du) {
            *g += hk * duj;
        }
    }
    let dh = state.proj_w.matvec(&du);
    cache.hidden.backward(&dh, &mut grads.embed);
}

/// Two dropout views of one sequence, for use as contrastive positives.
/// Draws two mask seeds from `rng`.
pub fn augment_views<T: Real>(
    state: &EncoderState<T>,
    seq: &TokenSeq,
    rng: &mut Rng,
) -> Result<(Vector<T>, Vector<T>)> {
    let z1 = encode(state, seq, Some(rng.next_u64()))?;
    let z2 = encode(state, seq, Some(rng.next_u64()))?;
    Ok((z1, z2))
}

/// One masked position and the token it originally held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskTarget {
    /// Position within the full sequence (sentinels included).
    pub pos: usize,
    /// Original token id to reconstruct.
    pub token: usize,
}

/// Replaces each content token by `[MASK]` with probability `rate`,
/// forcing at least one mask. Sentinels are never masked.
///
/// # Errors
/// The rate must lie in (0, 1].
pub fn mlm_mask(seq: &TokenSeq, rate: f64, rng: &mut Rng) -> Result<(TokenSeq, Vec<MaskTarget>)> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config("mask rate must lie in (0, 1]".into()));
    }
    if seq.content().is_empty() {
        return Err(Error::NoContentTokens);
    }
    let mut ids = seq.ids.clone();
    let mut targets = Vec::new();
    for pos in seq.content_positions() {
        if rng.next_f64() < rate {
            targets.push(MaskTarget {
                pos,
                token: ids[pos],
            });
            ids[pos] = Vocab::MASK;
        }
    }
    if targets.is_empty() {
        let pos = 1 + rng.next_below(seq.content().len());
        targets.push(MaskTarget {
            pos,
            token: ids[pos],
        });
        ids[pos] = Vocab::MASK;
    }
    Ok((TokenSeq { ids }, targets))
}
