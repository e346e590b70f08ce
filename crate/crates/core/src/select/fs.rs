use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_order, Diagnostics, Method, SelectionResult};
use crate::dist::total_variation;
use crate::empirics::{CountsTable, PairTable};
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsStep {
    pub lag: usize,
    pub nu: f64,
}

/// Empirical influence `ν̂_{n,j,S}` of lag `j` given the lags in `S`:
///
/// ```text
/// Σ_{x_S} Σ_{b,c} π̂_j(x_S,b) π̂_j(x_S,c) d_TV(P̂_j(·|x_S,b), P̂_j(·|x_S,c)) / π̂(x_S)
/// ```
///
/// summed over the observed contexts.
pub fn nu_hat(counts: &CountsTable, j: usize, lags: &LagSet) -> Result<f64> {
    let table = PairTable::new(counts, lags, j)?;
    let size = table.alphabet_size();
    let total = table.total() as f64;
    let mut nu = 0.0;
    for i in 0..table.len() {
        let rows: Vec<(f64, Vec<f64>)> = (0..size)
            .filter_map(|b| {
                let nb = table.count_b(i, b);
                (nb > 0).then(|| (nb as f64, table.conditional(i, b)))
            })
            .collect();
        let mut inner = 0.0;
        for (k, (nb, pb)) in rows.iter().enumerate() {
            for (nc, pc) in &rows[k + 1..] {
                inner += nb * nc * total_variation(pb, pc);
            }
        }
        // both orderings (b, c) and (c, b)
        nu += 2.0 * inner / (table.context_count(i) as f64 * total);
    }
    Ok(nu)
}

/// Forward stepwise selection of `l` lags among `1..=d`.
pub fn fs_select(sample: &Sample, d: usize, l: usize) -> Result<SelectionResult> {
    check_order(sample, d)?;
    let counts = CountsTable::new(sample, d)?;
    fs_select_counts(&counts, l)
}

/// FS over a prebuilt counts table; candidates are `1..=order`.
pub fn fs_select_counts(counts: &CountsTable, l: usize) -> Result<SelectionResult> {
    let d = counts.order();
    if l == 0 || l > d {
        return Err(Error::InvalidArgument(format!("FS needs 1 <= l <= d, got l = {l}, d = {d}")));
    }
    let mut chosen = LagSet::empty();
    let mut steps = Vec::with_capacity(l);
    for _ in 0..l {
        let candidates: Vec<usize> = (1..=d).filter(|&j| !chosen.contains(j)).collect();
        let values = candidates.par_iter().map(|&j| nu_hat(counts, j, &chosen)).collect::<Result<Vec<f64>>>()?;
        // strict comparison keeps the smallest lag on ties
        let mut best = 0;
        for (k, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = k;
            }
        }
        let step = FsStep { lag: candidates[best], nu: values[best] };
        chosen = chosen.with(step.lag)?;
        steps.push(step);
    }
    Ok(SelectionResult {
        method: Method::Fs,
        selected: steps.iter().map(|s| s.lag).collect(),
        diagnostics: Diagnostics::Fs { steps },
    })
}
