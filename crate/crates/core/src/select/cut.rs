use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_order, Diagnostics, Method, SelectionResult};
use crate::dist::total_variation;
use crate::empirics::{CountsTable, FreqTable};
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::sample::Sample;

/// Constants of the adaptive CUT threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutParams {
    pub alpha: f64,
    pub mu: f64,
    pub xi: f64,
}

impl Default for CutParams {
    fn default() -> Self {
        Self { alpha: 0.05, mu: 1.0, xi: 0.5 }
    }
}

impl CutParams {
    pub fn new(alpha: f64, mu: f64, xi: f64) -> Result<Self> {
        let p = Self { alpha, mu, xi };
        p.validate()?;
        Ok(p)
    }

    /// `ψ(μ) = e^μ − μ − 1`.
    pub fn psi(&self) -> f64 {
        self.mu.exp() - self.mu - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(Error::InvalidArgument(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.mu > 0.0 && self.mu < 3.0) || self.mu - self.psi() <= 0.0 {
            return Err(Error::InvalidArgument(format!("mu must lie in (0,3) with mu > psi(mu), got {}", self.mu)));
        }
        Ok(())
    }
}

/// Outcome of the CUT test for one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutDecision {
    pub lag: usize,
    pub retained: bool,
    /// Largest `d_TV − (s_n(x) + s_n(y))` over compared pairs; `None` when
    /// no compatible pair was observed.
    pub max_excess: Option<f64>,
    /// `d_TV` and `s_n(x) + s_n(y)` of the pair attaining `max_excess`.
    pub gap: Option<f64>,
    pub threshold: Option<f64>,
    pub pairs: usize,
}

/// `s_n(x_S)` for the observed context at index `i`.
pub fn cut_threshold(freq: &FreqTable, i: usize, params: &CutParams) -> Result<f64> {
    let nbar = freq.context_count(i);
    if nbar == 0 {
        return Err(Error::UnseenContext);
    }
    let nbar = nbar as f64;
    let CutParams { alpha, mu, xi } = *params;
    let coef = mu / (mu - params.psi());
    let root_sum: f64 = freq.conditional(i).iter().map(|p| (coef * (p + alpha / nbar)).sqrt()).sum();
    let size = freq.alphabet_size() as f64;
    Ok((alpha * (1.0 + xi) / (2.0 * nbar)).sqrt() * root_sum + alpha * size / (6.0 * nbar))
}

/// Keeps lag `j ∈ S` iff some pair of observed contexts that agree outside
/// `j` has `d_TV(P̂(·|x), P̂(·|y)) > s_n(x) + s_n(y)`.
pub fn cut_select(sample: &Sample, d: usize, lags: &LagSet, params: &CutParams) -> Result<SelectionResult> {
    check_order(sample, d)?;
    if let Some(max) = lags.max() {
        if max > d {
            return Err(Error::LagExceedsOrder { lag: max, d });
        }
    }
    let counts = CountsTable::new(sample, d)?;
    cut_select_counts(&counts, lags, params)
}

pub fn cut_select_counts(counts: &CountsTable, lags: &LagSet, params: &CutParams) -> Result<SelectionResult> {
    params.validate()?;
    let freq = FreqTable::new(counts, lags)?;
    let rows: Vec<Vec<f64>> = (0..freq.len()).map(|i| freq.conditional(i)).collect();
    let thresholds = (0..freq.len()).map(|i| cut_threshold(&freq, i, params)).collect::<Result<Vec<f64>>>()?;

    let decisions: Vec<CutDecision> = lags
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(pos, &lag)| {
            let mut best: Option<(f64, f64)> = None;
            let mut pairs = 0;
            for group in freq.compatible_groups(pos) {
                for (k, &x) in group.iter().enumerate() {
                    for &y in &group[k + 1..] {
                        let gap = total_variation(&rows[x], &rows[y]);
                        let threshold = thresholds[x] + thresholds[y];
                        if best.is_none_or(|(g, t)| gap - threshold > g - t) {
                            best = Some((gap, threshold));
                        }
                        pairs += 1;
                    }
                }
            }
            CutDecision {
                lag,
                retained: best.is_some_and(|(g, t)| g > t),
                max_excess: best.map(|(g, t)| g - t),
                gap: best.map(|(g, _)| g),
                threshold: best.map(|(_, t)| t),
                pairs,
            }
        })
        .collect();

    Ok(SelectionResult {
        method: Method::Cut,
        selected: decisions.iter().filter(|d| d.retained).map(|d| d.lag).collect(),
        diagnostics: Diagnostics::Cut { decisions },
    })
}
