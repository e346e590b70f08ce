//! Relevant-lag estimators: forward stepwise (FS), pairwise CUT, penalized
//! likelihood (BIC) and FS followed by CUT on a split sample (FSC).
//!
//! All estimators are pure functions of the sample and their parameters.
//! Candidate evaluation runs on the rayon pool; results are gathered in
//! candidate order, so the output does not depend on the worker count.

mod bic;
mod cut;
mod fs;

use serde::{Deserialize, Serialize};

pub use bic::{bic_select, bic_value, log_likelihood, parameter_count, BicCandidate, BicOptions, BicReport};
pub use cut::{cut_select, cut_select_counts, cut_threshold, CutDecision, CutParams};
pub use fs::{fs_select, fs_select_counts, nu_hat, FsStep};

use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fs,
    Cut,
    Bic,
    Fsc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Diagnostics {
    Fs { steps: Vec<FsStep> },
    Cut { decisions: Vec<CutDecision> },
    Bic(BicReport),
    Fsc { steps: Vec<FsStep>, decisions: Vec<CutDecision>, split: usize },
}

/// Output of a lag estimator. For FS the lags are listed in inclusion
/// order; every other method lists them ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub selected: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl SelectionResult {
    pub fn lag_set(&self) -> LagSet {
        LagSet::new(self.selected.clone()).expect("selected lags are distinct and positive")
    }
}

pub(crate) fn check_order(sample: &Sample, d: usize) -> Result<()> {
    if d == 0 || d >= sample.len() {
        return Err(Error::InvalidOrder { d, n: sample.len() });
    }
    Ok(())
}

/// FS on the oldest `⌊n/2⌋` observations, then CUT over the FS output on
/// the remaining ones.
pub fn fsc_select(sample: &Sample, d: usize, l: usize, params: &CutParams) -> Result<SelectionResult> {
    let n = sample.len();
    if n < 2 * (d + 1) {
        return Err(Error::InvalidArgument(format!("FSC needs n >= 2(d+1) = {}, got {n}", 2 * (d + 1))));
    }
    let split = n / 2;
    let fs = fs_select(&sample.slice(0..split)?, d, l)?;
    let cut = cut_select(&sample.slice(split..n)?, d, &fs.lag_set(), params)?;
    let steps = match fs.diagnostics {
        Diagnostics::Fs { steps } => steps,
        _ => unreachable!("fs_select returns FS diagnostics"),
    };
    let decisions = match cut.diagnostics {
        Diagnostics::Cut { decisions } => decisions,
        _ => unreachable!("cut_select returns CUT diagnostics"),
    };
    Ok(SelectionResult {
        method: Method::Fsc,
        selected: cut.selected,
        diagnostics: Diagnostics::Fsc { steps, decisions, split },
    })
}
