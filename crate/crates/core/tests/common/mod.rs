#![allow(dead_code)]

use std::collections::BTreeMap;

use mtd_core::{Alphabet, LagSet, Matrix, ModelBuilder, MtdModel, RandomSource, Sample};
use rand::Rng;

pub fn reference_model() -> MtdModel {
    with_matrices(vec![
        vec![vec![0.35190318, 0.6480968], vec![0.03558321, 0.9644168]],
        vec![vec![0.4278830, 0.5721170], vec![0.7670555, 0.2329445]],
        vec![vec![0.8341439, 0.1658561], vec![0.2184814, 0.7815186]],
    ])
}

/// The same model with the full-precision matrices that the 7-digit values
/// above are rounded from.
pub fn reference_model_unrounded() -> MtdModel {
    with_matrices(vec![
        vec![vec![0.3519031797394968, 0.6480968202605032], vec![0.03558321000391231, 0.9644167899960877]],
        vec![vec![0.4278829967896248, 0.5721170032103752], vec![0.7670554596436443, 0.2329445403563557]],
        vec![vec![0.8341438562617757, 0.1658561437382243], vec![0.2184814296519933, 0.7815185703480066]],
    ])
}

fn with_matrices(pj: Vec<Vec<Vec<f64>>>) -> MtdModel {
    ModelBuilder::new(Alphabet::indexed(2).unwrap(), LagSet::new(vec![1, 15, 30]).unwrap())
        .lambda0(0.01)
        .lambdas(vec![0.39, 0.30, 0.30])
        .p0(vec![0.5, 0.5])
        .pj(pj)
        .build(&mut RandomSource::from_seed(0))
        .unwrap()
}

pub fn random_model(size: usize, lags: &[usize], seed: u64) -> MtdModel {
    ModelBuilder::new(Alphabet::indexed(size).unwrap(), LagSet::new(lags.to_vec()).unwrap())
        .build(&mut RandomSource::new(seed, 0))
        .unwrap()
}

pub fn random_sample(size: usize, n: usize, seed: u64) -> Sample {
    let mut rng = RandomSource::new(seed, 99);
    let values = (0..n).map(|_| rng.random_range(0..size)).collect();
    Sample::new(Alphabet::indexed(size).unwrap(), values).unwrap()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Counts of `(X_{t-j})_{j in lags}` followed by `X_t` for `t = d..n-1`
/// (0-based), keyed by the context listed in the order of `lags`.
pub fn naive_counts(values: &[usize], size: usize, d: usize, lags: &[usize]) -> BTreeMap<Vec<usize>, Vec<u64>> {
    let mut out: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    for t in d..values.len() {
        let ctx: Vec<usize> = lags.iter().map(|&j| values[t - j]).collect();
        out.entry(ctx).or_insert_with(|| vec![0; size])[values[t]] += 1;
    }
    out
}

pub fn normalized(row: &[u64]) -> Vec<f64> {
    let total: u64 = row.iter().sum();
    row.iter().map(|&c| c as f64 / total as f64).collect()
}

/// All sequences of length `len` over `0..size`.
pub fn all_words(size: usize, len: usize) -> Vec<Vec<usize>> {
    let mut words = vec![Vec::new()];
    for _ in 0..len {
        words = words
            .into_iter()
            .flat_map(|w| {
                (0..size).map(move |a| {
                    let mut w = w.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    words
}

/// Mixture law from the parameters directly; `past[j-1]` is `X_{t-j}`.
pub fn mixture_row(model: &MtdModel, past: &[usize]) -> Vec<f64> {
    let size = model.alphabet().len();
    (0..size)
        .map(|a| {
            model.lambda0() * model.p0()[a]
                + model
                    .lags()
                    .iter()
                    .zip(model.lambdas().iter().zip(model.pj()))
                    .map(|(j, (w, m)): (usize, (&f64, &Matrix))| w * m[past[j - 1]][a])
                    .sum::<f64>()
        })
        .collect()
}
