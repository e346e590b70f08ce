//! Equal-range binning of numeric series into symbols `1..=k`.

use anyhow::{bail, Result};
use mtd_core::{Alphabet, Sample};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bins {
    pub min: f64,
    pub max: f64,
    pub k: usize,
    /// Interior boundaries `min + i (max − min) / k`, `i = 1..k−1`.
    pub boundaries: Vec<f64>,
}

impl Bins {
    pub fn new(values: &[f64], k: usize) -> Result<Self> {
        if k < 2 {
            bail!("need at least 2 bins, got {k}");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            bail!("cannot discretize non-finite value {v}");
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            bail!("cannot discretize a constant series");
        }
        let width = (max - min) / k as f64;
        let boundaries = (1..k).map(|i| min + i as f64 * width).collect();
        Ok(Self { min, max, k, boundaries })
    }

    /// 0-based bin of `x`: bins are `[b_{i−1}, b_i)` except the last, which
    /// is closed at `max`.
    pub fn bin(&self, x: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= x)
    }

    /// Interval notation for each bin, e.g. `[12.046,20.923)`.
    pub fn intervals(&self) -> Vec<String> {
        let edges: Vec<f64> =
            std::iter::once(self.min).chain(self.boundaries.iter().copied()).chain([self.max]).collect();
        edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let close = if i + 1 == self.k { ']' } else { ')' };
                format!("[{},{}{close}", w[0], w[1])
            })
            .collect()
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new((1..=self.k).map(|i| i.to_string())).expect("k >= 2 distinct labels")
    }
}

pub fn discretize(values: &[f64], k: usize) -> Result<(Sample, Bins)> {
    let bins = Bins::new(values, k)?;
    let symbols = values.iter().map(|&v| bins.bin(v)).collect();
    Ok((Sample::new(bins.alphabet(), symbols)?, bins))
}
