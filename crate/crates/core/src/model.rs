//! MTD models: parameters, validation, the induced transition table and
//! exact oscillations.
//!
//! A model over alphabet `A` with lags `j_1 < ... < j_k` has transition law
//!
//! ```text
//! P(a | x) = λ₀ p₀(a) + Σ_i λ_i p_{j_i}(a | x_{-j_i})
//! ```
//!
//! Weights are listed in ascending lag order (first weight belongs to the
//! most recent lag) and `pj[i][b][a] = p_{j_i}(a | b)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::dist::{max_pairwise_tv, total_variation};
use crate::error::{Error, Result};
use crate::lags::{ContextCodec, LagSet};
use crate::rng::RandomSource;

/// Row-major square matrix, `m[b][a]`.
pub type Matrix = Vec<Vec<f64>>;

/// Tolerance accepted on user supplied probability vectors.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Tolerance accepted on supplied transition matrix rows and `p0`. Looser
/// than [`INPUT_TOLERANCE`] so that tables printed to 7 or 8 significant
/// digits load; such rows are renormalized on entry.
pub const ROW_INPUT_TOLERANCE: f64 = 1e-6;
/// Tolerance guaranteed on stored probability vectors.
pub const STORED_TOLERANCE: f64 = 1e-12;
/// Largest transition table built by default.
pub const DEFAULT_ROW_BUDGET: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub struct MtdModel {
    alphabet: Alphabet,
    lags: LagSet,
    lambda0: f64,
    lambdas: Vec<f64>,
    p0: Vec<f64>,
    pj: Vec<Matrix>,
}

/// Checks a probability vector against `tol` and renormalizes it when the
/// sum is off by more than [`STORED_TOLERANCE`].
pub(crate) fn normalize_distribution(v: &mut [f64], tol: f64, what: &str) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidProbability(format!("{what} has entry {x}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidProbability(format!("{what} sums to {sum}")));
    }
    if (sum - 1.0).abs() > STORED_TOLERANCE {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(())
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn check_matrix(m: &mut Matrix, size: usize, what: &str) -> Result<()> {
    check_len(m.len(), size, what)?;
    for (b, row) in m.iter_mut().enumerate() {
        check_len(row.len(), size, &format!("{what} row {b}"))?;
        normalize_distribution(row, ROW_INPUT_TOLERANCE, &format!("{what} row {b}"))?;
    }
    Ok(())
}

fn uniform_simplex(size: usize, rng: &mut RandomSource) -> Vec<f64> {
    use rand::Rng;
    let mut v: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

impl MtdModel {
    /// Validates and stores a fully specified model.
    pub fn new(
        alphabet: Alphabet,
        lags: LagSet,
        lambda0: f64,
        lambdas: Vec<f64>,
        mut p0: Vec<f64>,
        mut pj: Vec<Matrix>,
    ) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::EmptyLags);
        }
        let k = lags.len();
        let size = alphabet.len();
        check_len(lambdas.len(), k, "lambdas")?;
        check_len(p0.len(), size, "p0")?;
        check_len(pj.len(), k, "pj")?;

        let mut weights = Vec::with_capacity(k + 1);
        weights.push(lambda0);
        weights.extend_from_slice(&lambdas);
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidProbability(format!("negative or non-finite weight in {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > INPUT_TOLERANCE {
            return Err(Error::WeightSum { sum });
        }
        normalize_distribution(&mut weights, INPUT_TOLERANCE, "weights")?;
        normalize_distribution(&mut p0, ROW_INPUT_TOLERANCE, "p0")?;
        for (i, m) in pj.iter_mut().enumerate() {
            check_matrix(m, size, &format!("p_{}", lags.as_slice()[i]))?;
        }
        let lambda0 = weights[0];
        let lambdas = weights[1..].to_vec();
        Ok(Self { alphabet, lags, lambda0, lambdas, p0, pj })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn lags(&self) -> &LagSet {
        &self.lags
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn pj(&self) -> &[Matrix] {
        &self.pj
    }

    /// Largest lag, i.e. the order of the chain.
    pub fn order(&self) -> usize {
        self.lags.max().expect("model lags are non-empty")
    }

    /// Transition law given the past over the model's lags, oldest lag
    /// first.
    pub fn conditional(&self, context: &[usize]) -> Vec<f64> {
        let k = self.lags.len();
        debug_assert_eq!(context.len(), k);
        let mut row: Vec<f64> = self.p0.iter().map(|p| self.lambda0 * p).collect();
        for (i, (&w, m)) in self.lambdas.iter().zip(&self.pj).enumerate() {
            let b = context[k - 1 - i];
            for (r, p) in row.iter_mut().zip(&m[b]) {
                *r += w * p;
            }
        }
        row
    }

    pub fn transition_table(&self) -> Result<TransitionTable> {
        self.transition_table_with_budget(DEFAULT_ROW_BUDGET)
    }

    pub fn transition_table_with_budget(&self, budget: u64) -> Result<TransitionTable> {
        let rows = (self.alphabet.len() as u128).checked_pow(self.lags.len() as u32).unwrap_or(u128::MAX);
        if rows > budget as u128 {
            return Err(Error::RowBudget { rows, budget });
        }
        let codec = ContextCodec::new(self.alphabet.len(), &self.lags)?;
        let rows = (0..codec.cardinality()).map(|code| self.conditional(&codec.decode(code))).collect();
        Ok(TransitionTable { alphabet: self.alphabet.clone(), codec, rows })
    }

    /// `δ_j = λ_j · max_{b,c} d_TV(p_j(·|b), p_j(·|c))` for every lag.
    pub fn oscillations(&self) -> BTreeMap<usize, f64> {
        self.lags
            .iter()
            .zip(self.lambdas.iter().zip(&self.pj))
            .map(|(lag, (&w, m))| (lag, w * max_pairwise_tv(m)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// Serialized form of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub alphabet: Alphabet,
    pub lags: LagSet,
    pub lambda0: f64,
    pub lambdas: Vec<f64>,
    pub p0: Vec<f64>,
    pub pj: Vec<Matrix>,
}

impl From<&MtdModel> for ModelDoc {
    fn from(m: &MtdModel) -> Self {
        Self {
            alphabet: m.alphabet.clone(),
            lags: m.lags.clone(),
            lambda0: m.lambda0,
            lambdas: m.lambdas.clone(),
            p0: m.p0.clone(),
            pj: m.pj.clone(),
        }
    }
}

impl TryFrom<ModelDoc> for MtdModel {
    type Error = Error;

    fn try_from(d: ModelDoc) -> Result<Self> {
        MtdModel::new(d.alphabet, d.lags, d.lambda0, d.lambdas, d.p0, d.pj)
    }
}

impl Serialize for MtdModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MtdModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ModelDoc::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

/// Builds a model from partially specified parameters. Omitted blocks are
/// filled with i.i.d. uniform(0,1) draws normalized to probability vectors.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    alphabet: Alphabet,
    lags: LagSet,
    lambda0: Option<f64>,
    lambdas: Option<Vec<f64>>,
    p0: Option<Vec<f64>>,
    pj: Option<Vec<Matrix>>,
    single_matrix: bool,
    indep_part: bool,
}

impl ModelBuilder {
    pub fn new(alphabet: Alphabet, lags: LagSet) -> Self {
        Self {
            alphabet,
            lags,
            lambda0: None,
            lambdas: None,
            p0: None,
            pj: None,
            single_matrix: false,
            indep_part: true,
        }
    }

    pub fn lambda0(mut self, w: f64) -> Self {
        self.lambda0 = Some(w);
        self
    }

    pub fn lambdas(mut self, w: Vec<f64>) -> Self {
        self.lambdas = Some(w);
        self
    }

    pub fn p0(mut self, p: Vec<f64>) -> Self {
        self.p0 = Some(p);
        self
    }

    pub fn pj(mut self, m: Vec<Matrix>) -> Self {
        self.pj = Some(m);
        self
    }

    pub fn single_matrix(mut self, yes: bool) -> Self {
        self.single_matrix = yes;
        self
    }

    pub fn indep_part(mut self, yes: bool) -> Self {
        self.indep_part = yes;
        self
    }

    /// Draw order for omitted blocks: weights, then `p0`, then matrices.
    pub fn build(self, rng: &mut RandomSource) -> Result<MtdModel> {
        let k = self.lags.len();
        if k == 0 {
            return Err(Error::EmptyLags);
        }
        let size = self.alphabet.len();
        if !self.indep_part && self.p0.is_some() {
            return Err(Error::Conflict("p0 given for a model without independent part".into()));
        }
        if self.indep_part && self.lambda0 == Some(0.0) && self.p0.is_some() {
            return Err(Error::Conflict("p0 given while λ₀ = 0 is requested".into()));
        }
        if let Some(w) = self.lambda0 {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidProbability(format!("λ₀ = {w}")));
            }
        }
        if let Some(ls) = &self.lambdas {
            check_len(ls.len(), k, "lambdas")?;
            if ls.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidProbability(format!("negative or non-finite weight in {ls:?}")));
            }
        }

        let (lambda0, lambdas) = if self.indep_part {
            match (self.lambda0, self.lambdas) {
                (Some(l0), Some(ls)) => (l0, ls),
                (None, Some(ls)) => {
                    let rest = 1.0 - ls.iter().sum::<f64>();
                    if rest < -INPUT_TOLERANCE {
                        return Err(Error::WeightSum { sum: 1.0 - rest });
                    }
                    (rest.max(0.0), ls)
                }
                (Some(l0), None) => {
                    let ls = uniform_simplex(k, rng).into_iter().map(|w| w * (1.0 - l0)).collect();
                    (l0, ls)
                }
                (None, None) => {
                    let w = uniform_simplex(k + 1, rng);
                    (w[0], w[1..].to_vec())
                }
            }
        } else {
            let ls = match self.lambdas {
                Some(ls) => {
                    // a supplied λ₀ is dropped and the lag weights rescaled
                    let total = self.lambda0.unwrap_or(0.0) + ls.iter().sum::<f64>();
                    if (total - 1.0).abs() > INPUT_TOLERANCE {
                        return Err(Error::WeightSum { sum: total });
                    }
                    let s: f64 = ls.iter().sum();
                    if s <= 0.0 {
                        return Err(Error::InvalidProbability("lag weights are all zero".into()));
                    }
                    ls.into_iter().map(|w| w / s).collect()
                }
                None => uniform_simplex(k, rng),
            };
            (0.0, ls)
        };

        let p0 = match self.p0 {
            Some(p) => p,
            None if self.indep_part => uniform_simplex(size, rng),
            None => vec![1.0 / size as f64; size],
        };

        let pj = match self.pj {
            Some(ms) if self.single_matrix => match ms.len() {
                1 => vec![ms[0].clone(); k],
                n if n == k => {
                    if ms.iter().any(|m| m != &ms[0]) {
                        return Err(Error::Conflict("single_matrix set but matrices differ".into()));
                    }
                    ms
                }
                n => return Err(Error::Dimension(format!("single_matrix expects 1 matrix, got {n}"))),
            },
            Some(ms) => ms,
            None if self.single_matrix => {
                let m: Matrix = (0..size).map(|_| uniform_simplex(size, rng)).collect();
                vec![m; k]
            }
            None => (0..k).map(|_| (0..size).map(|_| uniform_simplex(size, rng)).collect()).collect(),
        };

        MtdModel::new(self.alphabet, self.lags, lambda0, lambdas, p0, pj)
    }
}

/// Full transition law over every context of the model's lags.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    alphabet: Alphabet,
    codec: ContextCodec,
    rows: Vec<Vec<f64>>,
}

impl TransitionTable {
    pub fn lags(&self) -> &LagSet {
        self.codec.lags()
    }

    pub fn codec(&self) -> &ContextCodec {
        &self.codec
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, code: u64) -> &[f64] {
        &self.rows[code as usize]
    }

    /// Row for a context given oldest lag first.
    pub fn row_for(&self, context: &[usize]) -> &[f64] {
        self.row(self.codec.encode_digits(context))
    }

    /// Row label as printed in tables, e.g. `"110"`.
    pub fn label(&self, code: u64) -> String {
        self.alphabet.render(&self.codec.decode(code))
    }

    /// Oscillation of every lag computed from the table itself: the largest
    /// d_TV between rows whose contexts differ only at that lag.
    pub fn oscillations(&self) -> BTreeMap<usize, f64> {
        let lags = self.codec.lags();
        (0..lags.len())
            .map(|pos| {
                let mut best: f64 = 0.0;
                for (x, rx) in self.rows.iter().enumerate() {
                    let key = self.codec.without_digit(x as u64, pos);
                    for (y, ry) in self.rows.iter().enumerate().skip(x + 1) {
                        if self.codec.without_digit(y as u64, pos) == key {
                            best = best.max(total_variation(rx, ry));
                        }
                    }
                }
                (lags.as_slice()[pos], best)
            })
            .collect()
    }
}
