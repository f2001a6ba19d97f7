//! Training configuration: defaults, validation, and the flat key-value
//! config file format. Every field can also be overridden by name via
//! `set`, which the CLI uses for flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SamplingMode;
use crate::losses::WeightMode;
use crate::{Error, Result};

/// Which training objective the step runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Full objective: contrastive + clustering + masked-token terms.
    #[default]
    Swcc,
    /// Contrastive term only, with the co-occurrence view as the single
    /// positive.
    InfonceOnly,
    /// Cosine margin loss against one random in-batch negative.
    MarginOnly,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Objective> {
        match s {
            "swcc" => Ok(Objective::Swcc),
            "infonce_only" => Ok(Objective::InfonceOnly),
            "margin_only" => Ok(Objective::MarginOnly),
            other => Err(Error::Config(format!(
                "unknown objective {other:?}, expected swcc, infonce_only or margin_only"
            ))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Swcc => "swcc",
            Objective::InfonceOnly => "infonce_only",
            Objective::MarginOnly => "margin_only",
        })
    }
}

/// All knobs of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Representation dimension.
    pub d: usize,
    /// Token embedding dimension.
    pub d_emb: usize,
    /// Contrastive softmax temperature.
    pub temperature: f64,
    /// Prototype softmax temperature; falls back to `temperature`.
    pub proto_temperature: Option<f64>,
    /// Number of prototypes M.
    pub prototypes: usize,
    /// Clustering term coefficient.
    pub beta: f64,
    /// Masked-token term coefficient.
    pub gamma: f64,
    pub lr_encoder: f64,
    pub lr_prototypes: f64,
    pub dropout_rate: f64,
    pub mlm_rate: f64,
    /// Entropic regularizer of the assignment solver.
    pub epsilon: f64,
    pub sinkhorn_iters: usize,
    pub weight_mode: WeightMode,
    /// Events occurring fewer times are dropped before training.
    pub min_event_freq: usize,
    /// Margin of the margin_only objective.
    pub margin: f64,
    /// L2-normalize representations (and prototypes after updates).
    pub normalize: bool,
    /// Reuse view a1 as the anchor view instead of a third encoding.
    pub reuse_anchor_view: bool,
    /// Solve one joint assignment over both views (2B columns) instead
    /// of one per view.
    pub joint_view_assignment: bool,
    pub positive_sampling: SamplingMode,
    /// Write a numbered checkpoint every N steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Swcc,
            batch_size: 64,
            steps: 2000,
            seed: 42,
            d: 32,
            d_emb: 32,
            temperature: 0.3,
            proto_temperature: None,
            prototypes: 10,
            beta: 0.1,
            gamma: 1.0,
            lr_encoder: 1e-3,
            lr_prototypes: 1e-2,
            dropout_rate: 0.1,
            mlm_rate: 0.15,
            epsilon: 0.05,
            sinkhorn_iters: 3,
            weight_mode: WeightMode::OutsideLog,
            min_event_freq: 1,
            margin: 0.5,
            normalize: true,
            reuse_anchor_view: false,
            joint_view_assignment: true,
            positive_sampling: SamplingMode::Proportional,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Settings sized for full-scale corpora, which presuppose a pre-trained
    /// backbone: batch 256, learning rates 2e-7 / 2e-5, frequency cutoff 3.
    pub fn full_scale_preset() -> Self {
        TrainConfig {
            batch_size: 256,
            lr_encoder: 2e-7,
            lr_prototypes: 2e-5,
            min_event_freq: 3,
            ..TrainConfig::default()
        }
    }

    pub fn effective_proto_temperature(&self) -> f64 {
        self.proto_temperature.unwrap_or(self.temperature)
    }

    /// # Errors
    /// Any out-of-range field is a config error naming the field.
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: String) -> Result<()> {
            Err(Error::Config(msg))
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.d == 0 || self.d_emb == 0 {
            return bad("d and d_emb must be positive".into());
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if let Some(t) = self.proto_temperature {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("proto_temperature must be positive, got {t}"));
            }
        }
        if self.prototypes < 2 {
            return bad(format!("prototypes must be at least 2, got {}", self.prototypes));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        for (name, lr) in [("lr_encoder", self.lr_encoder), ("lr_prototypes", self.lr_prototypes)] {
            if !(lr > 0.0) || !lr.is_finite() {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if !(self.mlm_rate > 0.0 && self.mlm_rate <= 1.0) {
            return bad(format!("mlm_rate must lie in (0, 1], got {}", self.mlm_rate));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.sinkhorn_iters == 0 {
            return bad("sinkhorn_iters must be at least 1".into());
        }
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        Ok(())
    }

    /// Sets one field from its textual name and value, as used both by
    /// the config file and by CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Config(format!("bad value for {key}: {e}")))
        }
        match key {
            "objective" => self.objective = value.parse()?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "d_emb" => self.d_emb = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "proto_temperature" => {
                self.proto_temperature = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "prototypes" => self.prototypes = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "lr_encoder" => self.lr_encoder = parse(key, value)?,
            "lr_prototypes" => self.lr_prototypes = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "mlm_rate" => self.mlm_rate = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "sinkhorn_iters" => self.sinkhorn_iters = parse(key, value)?,
            "weight_mode" => self.weight_mode = value.parse()?,
            "min_event_freq" => self.min_event_freq = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "normalize" => self.normalize = parse(key, value)?,
            "reuse_anchor_view" => self.reuse_anchor_view = parse(key, value)?,
            "joint_view_assignment" => self.joint_view_assignment = parse(key, value)?,
            "positive_sampling" => self.positive_sampling = value.parse()?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment, blank
    /// lines are ignored. Unknown keys are errors.
    pub fn from_file(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected key = value, got {raw:?}"),
                });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
