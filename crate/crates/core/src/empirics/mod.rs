//! Count tables and empirical probabilities over arbitrary lag subsets.

mod counts;
mod freq;

use std::collections::BTreeMap;

pub use counts::CountsTable;
pub use freq::{FreqTable, PairTable};

use crate::dist::total_variation;
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::sample::Sample;

/// Estimated oscillation of every lag in `lags`, using order `d = max(S)`.
///
/// For each lag `j`, the largest d_TV between the empirical conditionals of
/// two observed contexts that agree outside `j`. Unobserved contexts are
/// never compared.
pub fn empirical_oscillations(sample: &Sample, lags: &LagSet) -> Result<BTreeMap<usize, f64>> {
    let d = lags.max().ok_or(Error::EmptyLags)?;
    let counts = CountsTable::new(sample, d)?;
    let freq = FreqTable::new(&counts, lags)?;
    let rows: Vec<Vec<f64>> = (0..freq.len()).map(|i| freq.conditional(i)).collect();
    Ok(lags
        .iter()
        .enumerate()
        .map(|(pos, lag)| {
            let mut best: f64 = 0.0;
            for group in freq.compatible_groups(pos) {
                for (k, &x) in group.iter().enumerate() {
                    for &y in &group[k + 1..] {
                        best = best.max(total_variation(&rows[x], &rows[y]));
                    }
                }
            }
            (lag, best)
        })
        .collect())
}
