//! EM estimation of MTD weights and matrices for a fixed lag set.
//!
//! The latent variable at each time is the mixture component (independent
//! part or one lag) that produced `X_t`. With `D_t` the mixture likelihood
//! of `X_t`, the E-step computes posteriors
//! `w_t(0) = λ₀p₀(X_t)/D_t` and `w_t(j) = λ_j p_j(X_t|X_{t−j})/D_t`; the
//! M-step sets `λ_r` to the mean posterior of component `r` and each
//! distribution row to its posterior-weighted symbol frequencies. Rows that
//! receive no posterior mass keep their previous value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::model::{normalize_distribution, Matrix, MtdModel, INPUT_TOLERANCE};
use crate::sample::Sample;

/// MTD parameters in fitting layout: `lambdas[0]` is `λ₀`, followed by the
/// lag weights in ascending lag order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtdParams {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub p0: Vec<f64>,
    pub pj: Vec<Matrix>,
}

impl MtdParams {
    pub fn from_model(model: &MtdModel) -> Self {
        let mut lambdas = vec![model.lambda0()];
        lambdas.extend_from_slice(model.lambdas());
        Self { lambdas, p0: model.p0().to_vec(), pj: model.pj().to_vec() }
    }

    /// Checks shapes and simplex constraints for `k` lags over `size`
    /// symbols. An empty `p0` is accepted (as uniform) when `λ₀ = 0`.
    pub fn validated(mut self, size: usize, k: usize) -> Result<Self> {
        if self.lambdas.len() != k + 1 {
            return Err(Error::Dimension(format!("lambdas has length {}, expected {}", self.lambdas.len(), k + 1)));
        }
        normalize_distribution(&mut self.lambdas, INPUT_TOLERANCE, "lambdas")?;
        if self.p0.is_empty() && self.lambdas[0] == 0.0 {
            self.p0 = vec![1.0 / size as f64; size];
        }
        if self.p0.len() != size {
            return Err(Error::Dimension(format!("p0 has length {}, expected {size}", self.p0.len())));
        }
        normalize_distribution(&mut self.p0, INPUT_TOLERANCE, "p0")?;
        if self.pj.len() != k {
            return Err(Error::Dimension(format!("pj has {} matrices, expected {k}", self.pj.len())));
        }
        for m in &mut self.pj {
            if m.len() != size || m.iter().any(|r| r.len() != size) {
                return Err(Error::Dimension(format!("pj matrices must be {size}x{size}")));
            }
            for row in m.iter_mut() {
                normalize_distribution(row, INPUT_TOLERANCE, "pj row")?;
            }
        }
        Ok(self)
    }

    fn apply_floor(&mut self, eps: f64) {
        let floor_row = |row: &mut Vec<f64>| {
            row.iter_mut().for_each(|x| *x = x.max(eps));
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        };
        floor_row(&mut self.p0);
        self.pj.iter_mut().flat_map(|m| m.iter_mut()).for_each(floor_row);
    }

    pub fn to_model(&self, sample: &Sample, lags: &LagSet) -> Result<MtdModel> {
        MtdModel::new(
            sample.alphabet().clone(),
            lags.clone(),
            self.lambdas[0],
            self.lambdas[1..].to_vec(),
            self.p0.clone(),
            self.pj.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Stop once an iteration raises the log-likelihood by less than this;
    /// `None` runs exactly `max_iter` iterations.
    pub threshold: Option<f64>,
    pub max_iter: usize,
    pub oscillations: bool,
    /// Lower bound applied to every initial probability entry.
    pub floor: Option<f64>,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { threshold: Some(0.01), max_iter: 100, oscillations: false, floor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResult {
    #[serde(flatten)]
    pub params: MtdParams,
    pub iterations: usize,
    #[serde(rename = "distlogL")]
    pub distlogl: Vec<f64>,
    #[serde(rename = "logL")]
    pub log_likelihood: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillations: Option<BTreeMap<usize, f64>>,
}

/// Present symbols and their lagged predecessors for `t = d+1..n`.
struct Design {
    size: usize,
    k: usize,
    present: Vec<usize>,
    // k predecessors per time, ascending lag order
    lagged: Vec<usize>,
}

impl Design {
    fn new(sample: &Sample, lags: &LagSet) -> Result<Self> {
        let d = lags.max().ok_or(Error::EmptyLags)?;
        let n = sample.len();
        if d >= n {
            return Err(Error::InvalidOrder { d, n });
        }
        let v = sample.values();
        let present = v[d..].to_vec();
        let lagged = (d..n).flat_map(|t| lags.iter().map(move |j| v[t - j])).collect();
        Ok(Self { size: sample.alphabet().len(), k: lags.len(), present, lagged })
    }

    fn len(&self) -> usize {
        self.present.len()
    }

    fn components(&self, p: &MtdParams, t: usize, out: &mut [f64]) {
        let a = self.present[t];
        out[0] = p.lambdas[0] * p.p0[a];
        for i in 0..self.k {
            let b = self.lagged[t * self.k + i];
            out[i + 1] = p.lambdas[i + 1] * p.pj[i][b][a];
        }
    }

    fn log_likelihood(&self, p: &MtdParams, offset: usize) -> Result<f64> {
        let mut comp = vec![0.0; self.k + 1];
        let mut ll = 0.0;
        for t in 0..self.len() {
            self.components(p, t, &mut comp);
            let total: f64 = comp.iter().sum();
            if !(total > 0.0) {
                return Err(Error::ZeroLikelihood(t + offset + 1));
            }
            ll += total.ln();
        }
        Ok(ll)
    }

    fn step(&self, p: &MtdParams, offset: usize) -> Result<MtdParams> {
        let (size, k) = (self.size, self.k);
        let mut comp = vec![0.0; k + 1];
        let mut weight = vec![0.0; k + 1];
        let mut p0_mass = vec![0.0; size];
        let mut pj_mass = vec![vec![vec![0.0; size]; size]; k];
        for t in 0..self.len() {
            self.components(p, t, &mut comp);
            let total: f64 = comp.iter().sum();
            if !(total > 0.0) {
                return Err(Error::ZeroLikelihood(t + offset + 1));
            }
            let a = self.present[t];
            weight[0] += comp[0] / total;
            p0_mass[a] += comp[0] / total;
            for i in 0..k {
                let post = comp[i + 1] / total;
                weight[i + 1] += post;
                pj_mass[i][self.lagged[t * k + i]][a] += post;
            }
        }

        let wsum: f64 = weight.iter().sum();
        let lambdas = weight.iter().map(|w| w / wsum).collect();
        let renormalized = |mass: &[f64], old: &[f64]| -> Vec<f64> {
            let s: f64 = mass.iter().sum();
            if s > 0.0 {
                mass.iter().map(|m| m / s).collect()
            } else {
                old.to_vec()
            }
        };
        let p0 = renormalized(&p0_mass, &p.p0);
        let pj = pj_mass
            .iter()
            .zip(&p.pj)
            .map(|(mass, old)| mass.iter().zip(old).map(|(m, o)| renormalized(m, o)).collect())
            .collect();
        Ok(MtdParams { lambdas, p0, pj })
    }
}

/// `Σ_{t=d+1}^{n} log(λ₀p₀(X_t) + Σ_j λ_j p_j(X_t | X_{t−j}))`, `d = max(S)`.
pub fn mtd_log_likelihood(sample: &Sample, lags: &LagSet, params: &MtdParams) -> Result<f64> {
    let params = params.clone().validated(sample.alphabet().len(), lags.len())?;
    let design = Design::new(sample, lags)?;
    design.log_likelihood(&params, lags.max().unwrap_or(0))
}

/// Runs EM from `init` until the log-likelihood gain of an iteration falls
/// below the threshold or `max_iter` iterations have been made.
pub fn em_fit(sample: &Sample, lags: &LagSet, init: &MtdParams, opts: &EmOptions) -> Result<EmResult> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let mut params = init.clone().validated(sample.alphabet().len(), lags.len())?;
    if let Some(eps) = opts.floor {
        params.apply_floor(eps);
    }
    let design = Design::new(sample, lags)?;
    let offset = lags.max().unwrap_or(0);
    let mut ll = design.log_likelihood(&params, offset)?;
    let mut distlogl = Vec::new();
    while distlogl.len() < opts.max_iter {
        let next = design.step(&params, offset)?;
        let next_ll = design.log_likelihood(&next, offset)?;
        let gain = next_ll - ll;
        distlogl.push(gain);
        params = next;
        ll = next_ll;
        if opts.threshold.is_some_and(|m| gain < m) {
            break;
        }
    }

    let oscillations = if opts.oscillations { Some(params.to_model(sample, lags)?.oscillations()) } else { None };
    Ok(EmResult { iterations: distlogl.len(), params, distlogl, log_likelihood: ll, oscillations })
}
