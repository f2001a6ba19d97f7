//! Versioned JSON checkpoints holding everything needed to evaluate or
//! resume: config, vocabulary, encoder parameters, and the prototype
//! bank. Writes go to a temporary file first and are renamed into place,
//! and serialization is field-ordered, so identical states produce
//! byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::encoder::EncoderState;
use crate::losses::PrototypeBank;
use crate::numerics::{Matrix, Real, Vector};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// Bumped on any incompatible layout change.
pub const FORMAT_VERSION: u32 = 1;

/// Serialized encoder parameters, always stored as f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderDump {
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d: usize,
    pub dropout_rate: f64,
    pub normalize: bool,
    /// Row-major vocab_size x d_emb.
    pub embed: Vec<f64>,
    /// Row-major d_emb x d.
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

/// Serialized prototype bank, always stored as f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankDump {
    pub temperature: f64,
    pub m: usize,
    pub d: usize,
    /// Row-major m x d.
    pub prototypes: Vec<f64>,
}

/// A complete training snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Number of optimizer steps taken when this snapshot was written.
    pub step: usize,
    pub config: TrainConfig,
    /// Full token list, including the reserved sentinels.
    pub vocab: Vec<String>,
    pub encoder: EncoderDump,
    pub bank: BankDump,
}

impl Checkpoint {
    pub fn new<T: Real>(
        step: usize,
        config: &TrainConfig,
        vocab: &Vocab,
        state: &EncoderState<T>,
        bank: &PrototypeBank<T>,
    ) -> Checkpoint {
        let f64s = |xs: &[T]| xs.iter().map(|&x| x.to_f64_lossy()).collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            step,
            config: config.clone(),
            vocab: vocab.tokens().to_vec(),
            encoder: EncoderDump {
                vocab_size: state.vocab_size(),
                d_emb: state.d_emb(),
                d: state.d(),
                dropout_rate: state.dropout_rate,
                normalize: state.normalize,
                embed: f64s(state.embed.as_slice()),
                proj_w: f64s(state.proj_w.as_slice()),
                proj_b: f64s(state.proj_b.as_slice()),
            },
            bank: BankDump {
                temperature: bank.temperature().to_f64_lossy(),
                m: bank.n_prototypes(),
                d: bank.d(),
                prototypes: f64s(bank.prototypes().as_slice()),
            },
        }
    }

    /// Atomic write: serialize to `<path>.tmp`, then rename over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)
            .map_err(|e| Error::json(format!("serializing checkpoint {}", path.display()), e))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json.as_bytes())
            .map_err(|e| Error::io(format!("writing checkpoint {}", tmp.display()), e))?;
        std::fs::rename(&tmp, path)
            .map_err(|e| Error::io(format!("renaming checkpoint into {}", path.display()), e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::json(format!("parsing checkpoint {}", path.display()), e))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion(ckpt.format_version));
        }
        Ok(ckpt)
    }

    /// Rebuilds the live vocabulary, encoder, and bank.
    pub fn restore(&self) -> Result<(Vocab, EncoderState<f64>, PrototypeBank<f64>)> {
        let vocab = Vocab::from_tokens(self.vocab.clone())?;
        let e = &self.encoder;
        if vocab.len() != e.vocab_size {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint vocab has {} tokens but encoder expects {}",
                vocab.len(),
                e.vocab_size
            )));
        }
        let embed = matrix_from(e.vocab_size, e.d_emb, &e.embed, "embed")?;
        let proj_w = matrix_from(e.d_emb, e.d, &e.proj_w, "proj_w")?;
        if e.proj_b.len() != e.d {
            return Err(Error::ShapeMismatch(format!(
                "proj_b holds {} values, expected {}",
                e.proj_b.len(),
                e.d
            )));
        }
        if !(0.0..1.0).contains(&e.dropout_rate) {
            return Err(Error::Config("checkpoint dropout rate out of range".into()));
        }
        let state = EncoderState {
            embed,
            proj_w,
            proj_b: Vector::from_vec(e.proj_b.clone()),
            dropout_rate: e.dropout_rate,
            normalize: e.normalize,
        };
        let protos = matrix_from(self.bank.m, self.bank.d, &self.bank.prototypes, "prototypes")?;
        let bank = PrototypeBank::from_matrix(protos, self.bank.temperature)?;
        if bank.d() != state.d() {
            return Err(Error::ShapeMismatch(format!(
                "bank dimension {} does not match encoder output {}",
                bank.d(),
                state.d()
            )));
        }
        Ok((vocab, state, bank))
    }
}

fn matrix_from(rows: usize, cols: usize, data: &[f64], what: &str) -> Result<Matrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "{what} holds {} values, expected {rows}x{cols}",
            data.len()
        )));
    }
    let mut m = Matrix::zeros(rows, cols);
    m.as_mut_slice().copy_from_slice(data);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn sample() -> (TrainConfig, Vocab, EncoderState<f64>, PrototypeBank<f64>) {
        let mut cfg = TrainConfig::default();
        cfg.d = 4;
        cfg.d_emb = 3;
        cfg.prototypes = 2;
        let vocab = Vocab::from_tokens(
            ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "eat", "pasta"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .unwrap();
        let mut rng = Rng::new(3);
        let state = EncoderState::init(vocab.len(), 3, 4, 0.1, true, &mut rng).unwrap();
        let bank = PrototypeBank::init(2, 4, 0.3, &mut rng).unwrap();
        (cfg, vocab, state, bank)
    }

    #[test]
    fn roundtrip_restores_every_parameter() {
        let (cfg, vocab, state, bank) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let ckpt = Checkpoint::new(17, &cfg, &vocab, &state, &bank);
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
        assert_eq!(loaded.step, 17);
        let (v2, s2, b2) = loaded.restore().unwrap();
        assert_eq!(v2.tokens(), vocab.tokens());
        assert_eq!(s2, state);
        assert_eq!(b2, bank);
        // No stray temporary file left behind.
        assert!(!dir.path().join("ckpt.tmp").exists());
    }

    #[test]
    fn identical_states_write_identical_bytes() {
        let (cfg, vocab, state, bank) = sample();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        Checkpoint::new(5, &cfg, &vocab, &state, &bank).save(&a).unwrap();
        Checkpoint::new(5, &cfg, &vocab, &state, &bank).save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn version_and_shape_mismatches_are_rejected() {
        let (cfg, vocab, state, bank) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let mut ckpt = Checkpoint::new(0, &cfg, &vocab, &state, &bank);
        ckpt.format_version = 99;
        ckpt.save(&path).unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(Error::CheckpointVersion(99))
        ));
        let mut broken = Checkpoint::new(0, &cfg, &vocab, &state, &bank);
        broken.encoder.embed.pop();
        assert!(broken.restore().is_err());
        let mut broken = Checkpoint::new(0, &cfg, &vocab, &state, &bank);
        broken.vocab.pop();
        assert!(broken.restore().is_err());
        assert!(Checkpoint::load(dir.path().join("missing.json")).is_err());
    }

    #[test]
    fn f32_states_checkpoint_as_f64() {
        let (cfg, vocab, _, _) = sample();
        let mut rng = Rng::new(9);
        let state: EncoderState<f32> =
            EncoderState::init(vocab.len(), 3, 4, 0.0, true, &mut rng).unwrap();
        let bank: PrototypeBank<f32> = PrototypeBank::init(2, 4, 0.3, &mut rng).unwrap();
        let ckpt = Checkpoint::new(0, &cfg, &vocab, &state, &bank);
        let (_, s2, _) = ckpt.restore().unwrap();
        for (&x32, &x64) in state.embed.as_slice().iter().zip(s2.embed.as_slice()) {
            assert_eq!(f64::from(x32), x64);
        }
    }
}
