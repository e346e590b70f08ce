use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_order, Diagnostics, Method, SelectionResult};
use crate::empirics::{CountsTable, FreqTable};
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::sample::Sample;

pub const DEFAULT_CANDIDATE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicOptions {
    pub xi: f64,
    pub single_matrix: bool,
    pub indep_part: bool,
    pub minl: usize,
    pub maxl: usize,
    /// Report the best set of every size.
    pub byl: bool,
    pub budget: u64,
}

impl BicOptions {
    /// Defaults for searching sets of size `minl..=maxl`.
    pub fn sizes(minl: usize, maxl: usize) -> Self {
        Self {
            xi: 0.5,
            single_matrix: false,
            indep_part: true,
            minl,
            maxl,
            byl: false,
            budget: DEFAULT_CANDIDATE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicCandidate {
    pub lags: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicReport {
    pub evaluated: usize,
    pub by_size: Vec<BicCandidate>,
    pub best: BicCandidate,
}

/// Number of free parameters `θ(S)` of an MTD over `k` lags.
///
/// With an independent part, `k + (|A|−1)(1 + |A|ζ)`; without it,
/// `(k−1) + (|A|−1)|A|ζ`. `ζ` is 1 for a single shared matrix, else `k`.
pub fn parameter_count(alphabet_size: usize, k: usize, single_matrix: bool, indep_part: bool) -> f64 {
    let a = alphabet_size as f64;
    let k = k as f64;
    let zeta = if single_matrix { 1.0 } else { k };
    if indep_part {
        k + (a - 1.0) * (1.0 + a * zeta)
    } else {
        (k - 1.0) + (a - 1.0) * a * zeta
    }
}

/// `Σ_{x_S,a} N(x_S,a) log P̂(a|x_S)` over cells with `N > 0`.
pub fn log_likelihood(freq: &FreqTable) -> f64 {
    let mut ll = 0.0;
    for i in 0..freq.len() {
        let nx = freq.context_count(i) as f64;
        for &n in freq.row_counts(i) {
            if n > 0 {
                ll += n as f64 * (n as f64 / nx).ln();
            }
        }
    }
    ll
}

/// Penalized negative log-likelihood `−LL(S) + θ(S) log(n) ξ`.
pub fn bic_value(counts: &CountsTable, lags: &LagSet, xi: f64, single_matrix: bool, indep_part: bool) -> Result<f64> {
    if lags.is_empty() {
        return Err(Error::EmptyLags);
    }
    let freq = FreqTable::new(counts, lags)?;
    let theta = parameter_count(counts.alphabet_size(), lags.len(), single_matrix, indep_part);
    Ok(-log_likelihood(&freq) + theta * (counts.sample_len() as f64).ln() * xi)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Minimizes the BIC over every subset of `candidates` (default `1..=d`)
/// whose size lies in `minl..=maxl`. Subsets are enumerated by size, then
/// lexicographically; ties go to the earlier subset.
pub fn bic_select(
    sample: &Sample,
    d: usize,
    candidates: Option<&LagSet>,
    opts: &BicOptions,
) -> Result<SelectionResult> {
    check_order(sample, d)?;
    let universe = candidates.cloned().unwrap_or_else(|| LagSet::range(d));
    if let Some(max) = universe.max() {
        if max > d {
            return Err(Error::LagExceedsOrder { lag: max, d });
        }
    }
    if opts.minl == 0 || opts.minl > opts.maxl || opts.maxl > universe.len() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= minl <= maxl <= |S| = {}, got minl = {}, maxl = {}",
            universe.len(),
            opts.minl,
            opts.maxl
        )));
    }
    if !(opts.xi > 0.0) {
        return Err(Error::InvalidArgument(format!("xi must be positive, got {}", opts.xi)));
    }
    let total: u128 = (opts.minl..=opts.maxl).map(|l| binomial(universe.len(), l)).sum();
    if total > opts.budget as u128 {
        return Err(Error::CandidateBudget { candidates: total, budget: opts.budget });
    }

    let counts = CountsTable::new(sample, d)?;
    let subsets: Vec<Vec<usize>> =
        (opts.minl..=opts.maxl).flat_map(|l| universe.as_slice().iter().copied().combinations(l)).collect();
    let values = subsets
        .par_iter()
        .map(|s| bic_value(&counts, &LagSet::new(s.clone())?, opts.xi, opts.single_matrix, opts.indep_part))
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    let mut by_size: Vec<BicCandidate> = Vec::new();
    let mut size_best: Option<usize> = None;
    for (i, s) in subsets.iter().enumerate() {
        if values[i] < values[best] {
            best = i;
        }
        match size_best {
            Some(b) if subsets[b].len() == s.len() => {
                if values[i] < values[b] {
                    size_best = Some(i);
                }
            }
            Some(b) => {
                by_size.push(BicCandidate { lags: subsets[b].clone(), value: values[b] });
                size_best = Some(i);
            }
            None => size_best = Some(i),
        }
    }
    if let Some(b) = size_best {
        by_size.push(BicCandidate { lags: subsets[b].clone(), value: values[b] });
    }

    let best = BicCandidate { lags: subsets[best].clone(), value: values[best] };
    Ok(SelectionResult {
        method: Method::Bic,
        selected: best.lags.clone(),
        diagnostics: Diagnostics::Bic(BicReport {
            evaluated: subsets.len(),
            by_size: if opts.byl { by_size } else { Vec::new() },
            best,
        }),
    })
}
