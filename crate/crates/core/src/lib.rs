//! Desk-scale event representation learning.
//!
//! Events are (subject, predicate, object) triples extracted from documents.
//! A small bag-of-tokens encoder maps each event to a unit vector, trained by
//! three cooperating objectives: a weighted contrastive loss whose positives
//! are dropout views of the anchor plus one document-co-occurring event, a
//! prototype clustering loss with balanced assignments from Sinkhorn-Knopp,
//! and a masked-token reconstruction loss. Everything runs deterministically
//! on one CPU core from a single seed.
//!
//! Core math is generic over the scalar type via [`numerics::Real`]; the
//! aliases at the crate root fix the default `f64` instantiation used by the
//! trainer and the CLI.

// Validation guards are written `!(x > limit)` on purpose: unlike the
// inverted comparison, the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assigner;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod losses;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};

/// Dense matrix over the default scalar.
pub type Matrix64 = numerics::Matrix<f64>;
/// Dense vector over the default scalar.
pub type Vector64 = numerics::Vector<f64>;
/// Encoder parameters over the default scalar.
pub type Encoder64 = encoder::EncoderState<f64>;
/// Prototype bank over the default scalar.
pub type Bank64 = losses::PrototypeBank<f64>;
