//! Monte Carlo comparison of lag estimators on a known generator.
//!
//! Each replication draws a perfect sample of length `N` and, for every
//! prefix length `m`, estimates `P̂_m(·|x⁰_S)` at a fixed target context
//! `x⁰` (one symbol repeated) for three choices of `S`:
//!
//! * `FS`: forward stepwise selection with `(d, l)`;
//! * `Naive`: all lags `1..=order`;
//! * `Oracle`: the size-`s` subset of `1..=d` whose estimate is closest in
//!   total variation to the true conditional `P(·|x⁰_Λ)`.
//!
//! Every estimate uses `d = max(S)`. The error of an estimate is
//! `Δ = |P̂_m(a₀|x⁰_S) − P(a₀|x⁰_Λ)|`, and its standardized version divides
//! by `min_a P(a|x⁰_Λ)`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use itertools::Itertools;
use mtd_core::dist::total_variation;
use mtd_core::select::fs_select_counts;
use mtd_core::{perfect_sample, Alphabet, CountsTable, LagSet, ModelBuilder, MtdModel, RandomSource};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_alphabet() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

fn default_oracle_size() -> usize {
    2
}

fn default_oracle_budget() -> u64 {
    4950
}

/// Flat experiment description, read from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Generator model JSON; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    /// Generator lags, used when `model_file` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    #[serde(default = "default_alphabet")]
    pub alphabet: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    /// Seed for the generator parameters that are not given.
    #[serde(default)]
    pub model_seed: u64,
    pub replications: usize,
    pub sample_len: usize,
    pub prefix_lengths: Vec<usize>,
    pub fs_d: usize,
    pub fs_l: usize,
    /// Defaults to the generator order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_order: Option<usize>,
    #[serde(default = "default_oracle_size")]
    pub oracle_size: usize,
    /// Largest number of subsets the oracle may scan.
    #[serde(default = "default_oracle_budget")]
    pub oracle_budget: u64,
    /// Symbol repeated over the target context; defaults to the first symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_context: Option<String>,
    /// Symbol whose probability is compared; defaults to the first symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_symbol: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Reads a `.toml` file, or JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        if let (Some(file), Some(dir)) = (&cfg.model_file, path.parent()) {
            if file.is_relative() {
                cfg.model_file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    /// The generator: loaded from `model_file`, or built from the inline
    /// fields with missing blocks drawn from `model_seed`.
    pub fn generator(&self) -> Result<MtdModel> {
        if let Some(file) = &self.model_file {
            let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
            return Ok(MtdModel::from_json(&text)?);
        }
        let Some(lags) = &self.lags else {
            bail!("config needs either model_file or lags");
        };
        let mut builder = ModelBuilder::new(Alphabet::new(self.alphabet.clone())?, LagSet::new(lags.clone())?);
        if let Some(w) = self.lambda0 {
            builder = builder.lambda0(w);
        }
        if let Some(w) = &self.lambdas {
            builder = builder.lambdas(w.clone());
        }
        if let Some(p) = &self.p0 {
            builder = builder.p0(p.clone());
        }
        Ok(builder.build(&mut RandomSource::new(self.model_seed, 0))?)
    }

    fn validate(&self, model: &MtdModel) -> Result<()> {
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if self.prefix_lengths.is_empty() {
            bail!("prefix_lengths is empty");
        }
        let naive = self.naive_order.unwrap_or(model.order());
        let longest = self.fs_d.max(naive);
        for &m in &self.prefix_lengths {
            if m > self.sample_len {
                bail!("prefix length {m} exceeds sample_len {}", self.sample_len);
            }
            if m <= longest {
                bail!("prefix length {m} must exceed every lag used ({longest})");
            }
        }
        if self.fs_l == 0 || self.fs_l > self.fs_d {
            bail!("need 1 <= fs_l <= fs_d");
        }
        if naive == 0 {
            bail!("naive_order must be positive");
        }
        if self.oracle_size == 0 || self.oracle_size > self.fs_d {
            bail!("need 1 <= oracle_size <= fs_d");
        }
        let subsets = binomial(self.fs_d, self.oracle_size);
        if subsets > self.oracle_budget as u128 {
            bail!("oracle would scan {subsets} subsets, budget is {}", self.oracle_budget);
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Estimator {
    #[serde(rename = "FS")]
    Fs,
    Naive,
    Oracle,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Fs => "FS",
            Estimator::Naive => "Naive",
            Estimator::Oracle => "Oracle",
        })
    }
}

/// Counts at one target context via bitsets: `lagged[i−1]` has bit `t`
/// set iff `t ≥ i` and `X_{t−i} = c`; `symbol[a]` has bit `t` set iff
/// `X_t = a`. Intersecting the lag bitsets of `S` selects exactly the times
/// `t ≥ max(S)` whose context over `S` is all `c`.
pub struct TargetIndex {
    lagged: Vec<Vec<u64>>,
    symbol: Vec<Vec<u64>>,
}

fn bitset(len: usize, mut bit: impl FnMut(usize) -> bool) -> Vec<u64> {
    let mut words = vec![0u64; len.div_ceil(64)];
    for t in 0..len {
        if bit(t) {
            words[t / 64] |= 1 << (t % 64);
        }
    }
    words
}

impl TargetIndex {
    pub fn new(values: &[usize], size: usize, context_symbol: usize, max_lag: usize) -> Self {
        let n = values.len();
        let lagged = (1..=max_lag).map(|i| bitset(n, |t| t >= i && values[t - i] == context_symbol)).collect();
        let symbol = (0..size).map(|a| bitset(n, |t| values[t] == a)).collect();
        Self { lagged, symbol }
    }

    /// Symbol counts following the target context over `lags`.
    pub fn counts(&self, lags: &[usize]) -> Vec<u64> {
        let mut acc = self.lagged[lags[0] - 1].clone();
        for &j in &lags[1..] {
            acc.iter_mut().zip(&self.lagged[j - 1]).for_each(|(a, b)| *a &= b);
        }
        self.symbol.iter().map(|s| s.iter().zip(&acc).map(|(x, y)| (x & y).count_ones() as u64).sum()).collect()
    }

    /// `P̂(·|x⁰_S)`, uniform when the context is unseen; the flag reports
    /// whether it was seen.
    pub fn conditional(&self, lags: &[usize]) -> (Vec<f64>, bool) {
        let counts = self.counts(lags);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            (vec![1.0 / counts.len() as f64; counts.len()], false)
        } else {
            (counts.iter().map(|&c| c as f64 / total as f64).collect(), true)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub lags: Vec<usize>,
    pub p_hat: f64,
    pub delta: f64,
    pub seen: bool,
}

/// Estimates of one replication at one prefix length, in the order FS,
/// Naive, Oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixOutcome {
    pub m: usize,
    pub fs: Estimate,
    pub naive: Estimate,
    pub oracle: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsCell {
    pub estimator: Estimator,
    pub m: usize,
    pub mean: f64,
    pub mean_std: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub sd: f64,
    pub se: f64,
    /// Replications whose target context was never observed.
    pub unseen: usize,
    /// FS only: replications where FS and the oracle chose the same set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agreement: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    /// `P(·|x⁰_Λ)` of the generator.
    pub truth: Vec<f64>,
    pub target_context: String,
    pub target_symbol: String,
    pub cells: Vec<MetricsCell>,
    /// `outcomes[rep][k]` for prefix length `prefix_lengths[k]`.
    #[serde(skip)]
    pub outcomes: Vec<Vec<PrefixOutcome>>,
}

/// Type 7 quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Target {
    context: usize,
    symbol: usize,
    truth: Vec<f64>,
}

impl Target {
    fn estimate(&self, index: &TargetIndex, lags: Vec<usize>) -> Estimate {
        let (row, seen) = index.conditional(&lags);
        let p_hat = row[self.symbol];
        Estimate { lags, p_hat, delta: (p_hat - self.truth[self.symbol]).abs(), seen }
    }
}

fn replicate(cfg: &ExperimentConfig, model: &MtdModel, target: &Target, rep: u64) -> Result<Vec<PrefixOutcome>> {
    let sample = perfect_sample(model, cfg.sample_len, &mut RandomSource::new(cfg.seed, rep))?;
    let naive_order = cfg.naive_order.unwrap_or(model.order());
    let size = model.alphabet().len();
    cfg.prefix_lengths
        .iter()
        .map(|&m| {
            let prefix = sample.prefix(m)?;
            let counts = CountsTable::new(&prefix, cfg.fs_d)?;
            let fs_lags = fs_select_counts(&counts, cfg.fs_l)?.lag_set().as_slice().to_vec();
            let index = TargetIndex::new(prefix.values(), size, target.context, cfg.fs_d.max(naive_order));

            let mut best: Option<(f64, Vec<usize>)> = None;
            for subset in (1..=cfg.fs_d).combinations(cfg.oracle_size) {
                let distance = total_variation(&index.conditional(&subset).0, &target.truth);
                if best.as_ref().is_none_or(|(b, _)| distance < *b) {
                    best = Some((distance, subset));
                }
            }
            let oracle_lags = best.expect("at least one subset").1;

            Ok(PrefixOutcome {
                m,
                fs: target.estimate(&index, fs_lags),
                naive: target.estimate(&index, (1..=naive_order).collect()),
                oracle: target.estimate(&index, oracle_lags),
            })
        })
        .collect()
}

fn summarize(estimator: Estimator, m: usize, estimates: &[&Estimate], min_truth: f64) -> MetricsCell {
    let n = estimates.len() as f64;
    let mut deltas: Vec<f64> = estimates.iter().map(|e| e.delta).collect();
    let mean = deltas.iter().sum::<f64>() / n;
    let sd = if estimates.len() > 1 {
        (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    deltas.sort_by(f64::total_cmp);
    MetricsCell {
        estimator,
        m,
        mean,
        mean_std: deltas.iter().map(|d| d / min_truth).sum::<f64>() / n,
        q1: quantile(&deltas, 0.25),
        median: quantile(&deltas, 0.5),
        q3: quantile(&deltas, 0.75),
        sd,
        se: sd / n.sqrt(),
        unseen: estimates.iter().filter(|e| !e.seen).count(),
        oracle_agreement: None,
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let model = cfg.generator()?;
    cfg.validate(&model)?;
    let alphabet = model.alphabet();
    let context = match &cfg.target_context {
        Some(label) => alphabet.index_of(label)?,
        None => 0,
    };
    let symbol = match &cfg.target_symbol {
        Some(label) => alphabet.index_of(label)?,
        None => 0,
    };
    let truth = model.conditional(&vec![context; model.lags().len()]);
    let min_truth = truth.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_truth > 0.0) {
        bail!("true conditional at the target context has a zero entry; standardized error is undefined");
    }
    let target = Target { context, symbol, truth: truth.clone() };

    let run = || -> Result<Vec<Vec<PrefixOutcome>>> {
        (0..cfg.replications as u64).into_par_iter().map(|rep| replicate(cfg, &model, &target, rep)).collect()
    };
    let outcomes = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build()?.install(run)?,
        None => run()?,
    };

    let mut cells = Vec::new();
    for (k, &m) in cfg.prefix_lengths.iter().enumerate() {
        let at = |pick: fn(&PrefixOutcome) -> &Estimate| -> Vec<&Estimate> {
            outcomes.iter().map(|rep| pick(&rep[k])).collect()
        };
        let mut fs = summarize(Estimator::Fs, m, &at(|o| &o.fs), min_truth);
        let agree = outcomes
            .iter()
            .filter(|rep| {
                let mut a = rep[k].fs.lags.clone();
                a.sort_unstable();
                a == rep[k].oracle.lags
            })
            .count();
        fs.oracle_agreement = Some(agree);
        cells.push(fs);
        cells.push(summarize(Estimator::Naive, m, &at(|o| &o.naive), min_truth));
        cells.push(summarize(Estimator::Oracle, m, &at(|o| &o.oracle), min_truth));
    }

    // the worker count does not affect results, so it stays out of the report
    let config = ExperimentConfig { workers: None, ..cfg.clone() };
    Ok(MetricsReport {
        config,
        truth,
        target_context: alphabet.label(context).to_string(),
        target_symbol: alphabet.label(symbol).to_string(),
        cells,
        outcomes,
    })
}

impl MetricsReport {
    pub fn cell(&self, estimator: Estimator, m: usize) -> Option<&MetricsCell> {
        self.cells.iter().find(|c| c.estimator == estimator && c.m == m)
    }

    /// Long format: `estimator,m,metric,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["estimator", "m", "metric", "value"])?;
        for c in &self.cells {
            let mut metrics = vec![
                ("mean", c.mean.to_string()),
                ("mean_std", c.mean_std.to_string()),
                ("q1", c.q1.to_string()),
                ("median", c.median.to_string()),
                ("q3", c.q3.to_string()),
                ("sd", c.sd.to_string()),
                ("se", c.se.to_string()),
                ("unseen", c.unseen.to_string()),
            ];
            if let Some(a) = c.oracle_agreement {
                metrics.push(("oracle_agreement", a.to_string()));
            }
            for (name, value) in metrics {
                out.write_record([c.estimator.to_string(), c.m.to_string(), name.to_string(), value])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
