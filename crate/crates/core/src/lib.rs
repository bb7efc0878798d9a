//! Generation of listener backchannel smiles as facial-landmark motion.
//!
//! The crate covers the full path from a dyad corpus to an embodied agent:
//!
//! - [`corpus`] — manifest/annotation ingestion, reliability filtering,
//!   non-smile augmentation, dyad-level splits, and a synthetic corpus
//!   generator for desk-scale experiments.
//! - [`landmark`] — mean-face alignment, downsampling, displacement
//!   conversion, min-max normalization, and reconstruction.
//! - [`features`] — prosody (pitch/energy) and lexical turn features,
//!   z-scoring, and the 6-entry conditioning vector.
//! - [`stats`] — Type-III ANOVA, Tukey HSD, and an inverse-link GLM.
//! - [`seq2seq`] — the attention-based encoder/decoder that predicts
//!   normalized landmark displacements, plus its training loop.
//! - [`metrics`] — APE/PCK, run-pair significance, performance regression.
//! - [`adapter`] — conversion of generated landmarks into facial-parameter
//!   commands and their delivery to a file or remote endpoint.
//! - [`pipeline`] — end-to-end orchestration used by the CLI.

pub mod adapter;
pub mod corpus;
pub mod error;
pub mod features;
pub mod landmark;
pub mod metrics;
pub mod pipeline;
pub mod seeds;
pub mod seq2seq;
pub mod stats;

pub use error::{Error, Result};
