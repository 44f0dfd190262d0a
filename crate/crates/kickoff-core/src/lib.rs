//! kickoff-core: a self-contained pipeline for learning 2v2 soccer with
//! decentralized multi-agent TD3, a three-stage curriculum (1v0 → 1v1 → 2v2),
//! experience sharing from fixed opponents, and Nash-averaging-based
//! champion selection.
//!
//! The crate is organized around the flow of a training run:
//!
//! - [`pitch`] — deterministic 2D disc-soccer physics with sudden-death rules
//! - [`observe`] — egocentric observation vectors (polar-normalized)
//! - [`reward`] — dense and sparse reward functions
//! - [`net`] — f64 MLP stack: forward/backward, Adam, Polyak targets,
//!   permutation-invariant opponent encoder, binary checkpoints
//! - [`matd3`] — the trainer: replay buffers, exploration, twin-critic
//!   targets, delayed actor updates, experience-sharing batches
//! - [`curriculum`] — stage orchestration, checkpoint cadence, HCT variant
//! - [`arena`] — evaluation metrics, Pareto filtering, round robins,
//!   maximum-entropy Nash averaging, champion selection
//! - [`config`] — flat key=value run configuration files
//! - [`policy`] — action-selection interface shared by trainer and arena

pub mod arena;
pub mod config;
pub mod curriculum;
pub mod error;
pub mod matd3;
pub mod net;
pub mod observe;
pub mod pitch;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod trace;
pub mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;
