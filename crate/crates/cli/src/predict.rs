//! One-step-ahead prediction from an estimated conditional table, and the
//! train/test evaluation built on it.

use anyhow::{bail, Result};
use clap::ValueEnum;
use mtd_core::{CountsTable, FreqTable, LagSet, RandomSource, Sample};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Serialize;

use crate::metrics::{classification_metrics, ConfusionMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    /// Most probable symbol (lowest index on ties).
    Mode,
    /// A draw from the estimated conditional law.
    #[default]
    Sample,
}

/// Conditional table over `lags` estimated on `train`, with `d = max(S)`
/// (`d = 1` for the empty set).
pub fn fit_table(train: &Sample, lags: &LagSet) -> Result<FreqTable> {
    let d = lags.max().unwrap_or(1);
    if train.len() <= d {
        bail!("training sample of length {} is too short for lag {d}", train.len());
    }
    Ok(FreqTable::new(&CountsTable::new(train, d)?, lags)?)
}

/// Predicts `X_t` for `t = start..n` from the observed past of `series`.
pub fn predict(
    freq: &FreqTable,
    series: &Sample,
    start: usize,
    mode: PredictMode,
    rng: &mut RandomSource,
) -> Result<Sample> {
    let d = freq.lags().max().unwrap_or(0);
    if start < d || start >= series.len() {
        bail!("prediction start {start} must lie in {d}..{}", series.len());
    }
    let codec = freq.codec();
    let out = (start..series.len())
        .map(|t| {
            let row = freq.conditional_for(codec.encode_at(series.values(), t));
            Ok(match mode {
                PredictMode::Mode => {
                    row.iter().enumerate().fold(0, |best, (a, &p)| if p > row[best] { a } else { best })
                }
                PredictMode::Sample => WeightedIndex::new(&row)?.sample(rng),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(Sample::new(series.alphabet().clone(), out)?)
}

/// Fits on `series[..train_len]`, predicts the rest and scores the
/// predictions for symbol `positive`.
pub fn evaluate_split(
    series: &Sample,
    train_len: usize,
    lags: &LagSet,
    positive: &str,
    mode: PredictMode,
    rng: &mut RandomSource,
) -> Result<ConfusionMetrics> {
    series.alphabet().index_of(positive)?;
    let freq = fit_table(&series.prefix(train_len)?, lags)?;
    let predicted = predict(&freq, series, train_len, mode, rng)?;
    let actual = series.slice(train_len..series.len())?;
    classification_metrics(&predicted, &actual, positive)
}
