//! Mixture transition distribution (MTD) models over finite alphabets:
//! model construction, perfect and forward simulation, empirical transition
//! statistics, relevant-lag estimators and EM fitting.

// Negated comparisons deliberately treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alphabet;
pub mod dist;
pub mod em;
pub mod empirics;
pub mod error;
pub mod lags;
pub mod model;
pub mod rng;
pub mod sample;
pub mod sampler;
pub mod select;

pub use alphabet::Alphabet;
pub use em::{em_fit, mtd_log_likelihood, EmOptions, EmResult, MtdParams};
pub use empirics::{empirical_oscillations, CountsTable, FreqTable, PairTable};
pub use error::{Error, Result};
pub use lags::{ContextCodec, LagSet};
pub use model::{Matrix, ModelBuilder, MtdModel, TransitionTable};
pub use rng::RandomSource;
pub use sample::Sample;
pub use sampler::{forward_sample, perfect_sample, PerfectSampler, SamplerStats};
pub use select::{
    bic_select, cut_select, fs_select, fsc_select, BicOptions, CutParams, Diagnostics, Method, SelectionResult,
};
