//! Power-quality event laboratory: signal synthesis, wavelet-domain feature
//! extraction, classifier-backed subset evaluation, and a family of feature
//! selection searches built around a two-dimensional particle swarm.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`synth`] renders parametric power-quality waveforms (14 event classes)
//!    with optional additive white Gaussian noise at a target SNR.
//! 2. [`wavelet`] decomposes a waveform with an orthogonal filter bank
//!    (sym6, periodic extension) into detail and approximation bands.
//! 3. [`features`] summarizes each band with eleven statistics, producing a
//!    99-dimensional feature vector per waveform.
//! 4. [`classify`] + [`evalcore`] score a feature subset by stratified
//!    cross-validated error of a k-NN or kernel-density naive Bayes model.
//! 5. [`twodim`] and [`baselines`] search the subset lattice; [`metrics`],
//!    [`npstats`], and [`harness`] aggregate, rank, and persist the results.

pub mod baselines;
pub mod classify;
pub mod evalcore;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod npstats;
pub mod rng;
pub mod synth;
pub mod twodim;
pub mod types;
pub mod wavelet;

pub use types::{ClassId, SnrDb, CLASS_COUNT};
