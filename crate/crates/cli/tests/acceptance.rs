//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test -p mtd-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use mtd_cli::bench::{run_experiment, Estimator, ExperimentConfig};
use mtd_cli::metrics::ConfusionMetrics;
use mtd_core::select::{cut_select_counts, CutParams, Diagnostics};
use mtd_core::{
    bic_select, cut_select, em_fit, fs_select, fsc_select, perfect_sample, Alphabet, BicOptions, CountsTable,
    EmOptions, LagSet, ModelBuilder, MtdModel, MtdParams, RandomSource, Sample,
};
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_model() -> MtdModel {
    MtdModel::from_json(include_str!("data/model.json")).unwrap()
}

fn random_sample(size: usize, n: usize, rng: &mut RandomSource) -> Sample {
    let values = (0..n).map(|_| rng.random_range(0..size)).collect();
    Sample::new(Alphabet::indexed(size).unwrap(), values).unwrap()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

fn max_abs_diff(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Transition counts keyed by the context over `lags` (in the order given),
/// for `t = d..n−1`.
fn tally(values: &[usize], size: usize, d: usize, lags: &[usize]) -> BTreeMap<Vec<usize>, Vec<u64>> {
    let mut out: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    for t in d..values.len() {
        let ctx = lags.iter().map(|&j| values[t - j]).collect();
        out.entry(ctx).or_insert_with(|| vec![0; size])[values[t]] += 1;
    }
    out
}

fn normalized(row: &[u64]) -> Vec<f64> {
    let total: u64 = row.iter().sum();
    row.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Stationary law of the order-`order` chain over full pasts, by power
/// iteration on `|A|^order` states; returns the marginal of the present.
fn stationary_marginal(model: &MtdModel) -> Vec<f64> {
    let size = model.alphabet().len();
    let d = model.order();
    let states = size.pow(d as u32);
    // state digits: most significant is X_{t−d}, least significant is X_{t−1}
    let digit = |s: usize, lag: usize| (s / size.pow(lag as u32 - 1)) % size;
    let rows: Vec<Vec<f64>> = (0..states)
        .map(|s| {
            let ctx: Vec<usize> = model.lags().iter().rev().map(|j| digit(s, j)).collect();
            model.conditional(&ctx)
        })
        .collect();
    let mut pi = vec![1.0 / states as f64; states];
    for _ in 0..5000 {
        let mut next = vec![0.0; states];
        for (s, row) in rows.iter().enumerate() {
            for (a, p) in row.iter().enumerate() {
                next[(s * size) % states + a] += pi[s] * p;
            }
        }
        pi = next;
    }
    let mut marginal = vec![0.0; size];
    pi.iter().enumerate().for_each(|(s, p)| marginal[digit(s, 1)] += p);
    marginal
}

// ---------------------------------------------------------------------------

fn golden_values() -> Check {
    let start = Instant::now();
    let printed = [
        ("000", 0.5208503, 0.4791497),
        ("001", 0.3974855, 0.6025145),
        ("010", 0.6226020, 0.3773980),
        ("011", 0.4992372, 0.5007628),
        ("100", 0.3361516, 0.6638484),
        ("101", 0.2127868, 0.7872132),
        ("110", 0.4379033, 0.5620967),
        ("111", 0.3145385, 0.6854615),
    ];
    let deviation = |model: &MtdModel| -> Result<(f64, &str), String> {
        let table = model.transition_table().map_err(|e| e.to_string())?;
        let mut worst = (0.0, "");
        for (code, (label, p0, p1)) in printed.iter().enumerate() {
            ensure(table.label(code as u64) == *label, || format!("row {code} labelled {}", table.label(code as u64)))?;
            let dev = max_abs_diff(table.row(code as u64), &[*p0, *p1]);
            if dev > worst.0 {
                worst = (dev, *label);
            }
        }
        Ok(worst)
    };
    let model = reference_model();
    let (worst, row) = deviation(&model)?;
    let osc: Vec<f64> = model.oscillations().into_values().collect();
    let osc_err = max_abs_diff(&osc, &[0.1233648, 0.1017517, 0.1846987]);
    if worst >= 5e-8 {
        // the full-precision matrices behind the rounded ones, for comparison
        let unrounded = ModelBuilder::new(model.alphabet().clone(), model.lags().clone())
            .lambda0(0.01)
            .lambdas(vec![0.39, 0.30, 0.30])
            .p0(vec![0.5, 0.5])
            .pj(vec![
                vec![vec![0.3519031797394968, 0.6480968202605032], vec![0.03558321000391231, 0.9644167899960877]],
                vec![vec![0.4278829967896248, 0.5721170032103752], vec![0.7670554596436443, 0.2329445403563557]],
                vec![vec![0.8341438562617757, 0.1658561437382243], vec![0.2184814296519933, 0.7815185703480066]],
            ])
            .build(&mut RandomSource::from_seed(0))
            .map_err(|e| e.to_string())?;
        let (full, _) = deviation(&unrounded)?;
        return Err(format!(
            "largest P deviation {worst:.2e} at row {row} (oscillations {osc_err:.3e}); \
             full-precision matrices give {full:.1e}"
        ));
    }
    ensure(osc_err < 5e-8, || format!("oscillation deviation {osc_err:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("16 entries max dev {worst:.1e}, oscillations max dev {osc_err:.1e}"))
}

fn sampler() -> Check {
    let start = Instant::now();
    // (a) no memory: chi-square goodness of fit
    let p0 = [0.2, 0.3, 0.5];
    let iid = ModelBuilder::new(Alphabet::indexed(3).unwrap(), LagSet::new(vec![2, 7]).unwrap())
        .lambda0(1.0)
        .lambdas(vec![0.0, 0.0])
        .p0(p0.to_vec())
        .build(&mut RandomSource::from_seed(1))
        .unwrap();
    let n = 100_000;
    let s = perfect_sample(&iid, n, &mut RandomSource::new(101, 0)).unwrap();
    let mut counts = [0.0; 3];
    s.values().iter().for_each(|&v| counts[v] += 1.0);
    let stat: f64 = counts.iter().zip(p0).map(|(c, p)| (c - p * n as f64).powi(2) / (p * n as f64)).sum();
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(stat);
    ensure(p_value > 0.001, || format!("(a) chi-square p = {p_value}"))?;

    // (b) order one: marginal against the left eigenvector of P
    let m = [[0.1, 0.1, 0.8], [0.7, 0.2, 0.1], [0.2, 0.5, 0.3]];
    let order_one = ModelBuilder::new(Alphabet::indexed(3).unwrap(), LagSet::new(vec![1]).unwrap())
        .lambda0(0.15)
        .lambdas(vec![0.85])
        .p0(vec![0.6, 0.3, 0.1])
        .pj(vec![m.iter().map(|r| r.to_vec()).collect()])
        .build(&mut RandomSource::from_seed(0))
        .unwrap();
    let pi = stationary_marginal(&order_one);
    let s = perfect_sample(&order_one, 200_000, &mut RandomSource::new(102, 0)).unwrap();
    let mut freq = vec![0.0; 3];
    s.values().iter().for_each(|&v| freq[v] += 1.0 / 200_000.0);
    let err_b = max_abs_diff(&freq, &pi);
    ensure(err_b < 0.01, || format!("(b) marginal L-inf {err_b}"))?;

    // (c) reference model: conditional frequencies on well-visited contexts
    let model = reference_model();
    let s = perfect_sample(&model, 200_000, &mut RandomSource::new(103, 0)).unwrap();
    let mut err_c: f64 = 0.0;
    let mut checked = 0;
    for (ctx, row) in tally(s.values(), 2, 30, &[30, 15, 1]) {
        if row.iter().sum::<u64>() >= 1000 {
            err_c = err_c.max(max_abs_diff(&normalized(&row), &model.conditional(&ctx)));
            checked += 1;
        }
    }
    ensure(checked > 0 && err_c < 0.02, || format!("(c) {checked} contexts, L-inf {err_c}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("(a) p={p_value:.3} (b) {err_b:.4} (c) {err_c:.4} over {checked} contexts"))
}

fn fs_recovery() -> Check {
    let model = reference_model();
    let truth: BTreeSet<usize> = [1, 15, 30].into();
    let hits: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|rep| {
            let s = perfect_sample(&model, 10_000, &mut RandomSource::new(rep, 3)).unwrap();
            let three: BTreeSet<usize> = fs_select(&s, 40, 3).unwrap().selected.into_iter().collect();
            let four = fs_select(&s, 40, 4).unwrap().selected;
            let first: BTreeSet<usize> = four[..3].iter().copied().collect();
            (three == truth, first == truth)
        })
        .collect();
    let l3 = hits.iter().filter(|h| h.0).count();
    let l4 = hits.iter().filter(|h| h.1).count();
    ensure(l3 >= 95 && l4 >= 95, || format!("l=3 exact {l3}/100, l=4 first three {l4}/100"))?;
    Ok(format!("l=3 exact {l3}/100, l=4 first three {l4}/100"))
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(xs), ranks(ys));
    let mean = (xs.len() as f64 + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let var = |r: &[f64]| r.iter().map(|a| (a - mean).powi(2)).sum::<f64>();
    cov / (var(&rx) * var(&ry)).sqrt()
}

fn oracle_trend() -> Check {
    // Generator analog: Λ = {1,5}, λ₀ = 0.01, p₀ uniform, the rest drawn at
    // random. Random draws can give a target row that irrelevant lag pairs
    // reproduce by chance, in which case no selection method can match the
    // oracle. Take the first seed from 123 on whose lags are both clearly
    // relevant and whose target row stands apart from the stationary marginal.
    let generator = |seed: u64| {
        ModelBuilder::new(Alphabet::indexed(2).unwrap(), LagSet::new(vec![1, 5]).unwrap())
            .lambda0(0.01)
            .p0(vec![0.5, 0.5])
            .build(&mut RandomSource::new(seed, 0))
            .unwrap()
    };
    let model_seed = (123u64..)
        .find(|&seed| {
            let m = generator(seed);
            let gap = (m.conditional(&[0, 0])[0] - stationary_marginal(&m)[0]).abs();
            m.oscillations().values().all(|&d| d >= 0.1) && gap >= 0.05
        })
        .unwrap();

    let prefix_lengths = vec![1000, 2000, 5000, 10_000];
    let cfg = ExperimentConfig {
        model_file: None,
        lags: Some(vec![1, 5]),
        alphabet: vec!["0".into(), "1".into()],
        lambda0: Some(0.01),
        lambdas: None,
        p0: Some(vec![0.5, 0.5]),
        model_seed,
        replications: 50,
        sample_len: 10_000,
        prefix_lengths: prefix_lengths.clone(),
        fs_d: 100,
        fs_l: 2,
        naive_order: Some(5),
        oracle_size: 2,
        oracle_budget: 4950,
        target_context: None,
        target_symbol: None,
        seed: 2024,
        workers: None,
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mean = |e: Estimator, m: usize| report.cell(e, m).unwrap().mean;
    let fs: Vec<f64> = prefix_lengths.iter().map(|&m| mean(Estimator::Fs, m)).collect();
    let ms: Vec<f64> = prefix_lengths.iter().map(|&m| m as f64).collect();
    let rho = spearman(&ms, &fs);
    let oracle = mean(Estimator::Oracle, 10_000);
    let naive_worse = prefix_lengths.iter().all(|&m| mean(Estimator::Naive, m) > mean(Estimator::Fs, m));
    let summary = format!(
        "model seed {model_seed}; FS means {:?}, rho {rho:.2}, FS/Oracle at 10000 {:.3}, Naive > FS everywhere: {naive_worse}",
        fs.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>(),
        fs[3] / oracle
    );
    ensure(rho < 0.0 && fs[3] <= 1.2 * oracle && naive_worse, || summary.clone())?;
    Ok(summary)
}

/// Exhaustive penalized likelihood with its own counting and enumeration.
fn bic_oracle(values: &[usize], size: usize, d: usize, universe: &[usize], opts: &BicOptions) -> (Vec<usize>, f64) {
    let n = values.len() as f64;
    let a = size as f64;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for k in opts.minl..=opts.maxl {
        let mut subsets: Vec<Vec<usize>> = (0u32..1 << universe.len())
            .filter(|mask| mask.count_ones() as usize == k)
            .map(|mask| (0..universe.len()).filter(|i| mask >> i & 1 == 1).map(|i| universe[i]).collect())
            .collect();
        subsets.sort();
        for s in subsets {
            let ll: f64 = tally(values, size, d, &s)
                .values()
                .flat_map(|row| {
                    let total: u64 = row.iter().sum();
                    row.iter().filter(|&&c| c > 0).map(move |&c| c as f64 * (c as f64 / total as f64).ln())
                })
                .sum();
            let zeta = if opts.single_matrix { 1.0 } else { k as f64 };
            let theta = if opts.indep_part {
                k as f64 + (a - 1.0) * (1.0 + a * zeta)
            } else {
                k as f64 - 1.0 + (a - 1.0) * a * zeta
            };
            let value = -ll + theta * n.ln() * opts.xi;
            if best.as_ref().is_none_or(|(_, b)| value < *b) {
                best = Some((s, value));
            }
        }
    }
    best.unwrap()
}

fn bic_equivalence() -> Check {
    let mut rng = RandomSource::new(5, 0);
    let mut compared = 0;
    for fixture in 0..20 {
        let size = 2 + fixture % 3;
        let n = rng.random_range(60..=200);
        let d = rng.random_range(2..=4);
        let sample = if fixture % 2 == 0 {
            random_sample(size, n, &mut rng)
        } else {
            let m = ModelBuilder::new(Alphabet::indexed(size).unwrap(), LagSet::new(vec![1, d]).unwrap())
                .build(&mut RandomSource::new(fixture as u64, 1))
                .unwrap();
            perfect_sample(&m, n, &mut rng).unwrap()
        };
        let universe: Vec<usize> = (1..=d).collect();
        for (single_matrix, indep_part) in [(false, true), (true, true), (false, false), (true, false)] {
            let opts = BicOptions { single_matrix, indep_part, ..BicOptions::sizes(1, d) };
            let got = bic_select(&sample, d, None, &opts).map_err(|e| e.to_string())?;
            let Diagnostics::Bic(report) = &got.diagnostics else { return Err("missing BIC report".into()) };
            let (want, value) = bic_oracle(sample.values(), size, d, &universe, &opts);
            ensure(got.selected == want && (report.best.value - value).abs() < 1e-9, || {
                format!("fixture {fixture}: {:?} ({}) vs oracle {want:?} ({value})", got.selected, report.best.value)
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} searches agree with the exhaustive oracle"))
}

/// Retained lags by enumerating every pair of observed contexts.
fn cut_oracle(values: &[usize], size: usize, d: usize, lags: &[usize], p: &CutParams) -> Vec<usize> {
    let table: Vec<(Vec<usize>, Vec<u64>)> = tally(values, size, d, lags).into_iter().collect();
    let coef = p.mu / (p.mu - (p.mu.exp() - p.mu - 1.0));
    let s_n = |row: &[u64]| {
        let nbar = row.iter().sum::<u64>() as f64;
        let roots: f64 = row.iter().map(|&c| (coef * (c as f64 / nbar + p.alpha / nbar)).sqrt()).sum();
        (p.alpha * (1.0 + p.xi) / (2.0 * nbar)).sqrt() * roots + p.alpha * size as f64 / (6.0 * nbar)
    };
    lags.iter()
        .enumerate()
        .filter(|&(pos, _)| {
            table.iter().any(|(x, rx)| {
                table.iter().any(|(y, ry)| {
                    let compatible = x[pos] != y[pos] && (0..lags.len()).all(|i| i == pos || x[i] == y[i]);
                    compatible && tv(&normalized(rx), &normalized(ry)) > s_n(rx) + s_n(ry)
                })
            })
        })
        .map(|(_, &j)| j)
        .collect()
}

fn cut_properties() -> Check {
    let mut rng = RandomSource::new(6, 0);
    let alphas = [0.01, 0.05, 0.13, 0.5];
    let model = reference_model();
    let mut oracle_checks = 0;
    let mut shrinking = 0;
    for fixture in 0..30u64 {
        let (sample, lags, d) = if fixture % 3 == 0 {
            let n = rng.random_range(500..3000);
            (perfect_sample(&model, n, &mut rng).unwrap(), vec![1, 5, 15, 30], 30)
        } else {
            let size = rng.random_range(2..4);
            let n = rng.random_range(30..300);
            let m = ModelBuilder::new(Alphabet::indexed(size).unwrap(), LagSet::new(vec![1, 2]).unwrap())
                .lambda0(0.2)
                .build(&mut RandomSource::new(fixture, 2))
                .unwrap();
            (perfect_sample(&m, n, &mut rng).unwrap(), vec![1, 3], 3)
        };
        let size = sample.alphabet().len();
        let set = LagSet::new(lags.clone()).unwrap();
        let mut previous: Option<BTreeSet<usize>> = None;
        for alpha in alphas {
            let params = CutParams::new(alpha, 1.0, 0.5).unwrap();
            let got = cut_select(&sample, d, &set, &params).map_err(|e| e.to_string())?.selected;
            let want = cut_oracle(sample.values(), size, d, &lags, &params);
            ensure(got == want, || format!("fixture {fixture} alpha {alpha}: {got:?} vs oracle {want:?}"))?;
            oracle_checks += 1;
            let kept: BTreeSet<usize> = got.into_iter().collect();
            if let Some(prev) = &previous {
                ensure(kept.is_subset(prev), || format!("fixture {fixture}: {kept:?} not within {prev:?} at {alpha}"))?;
                shrinking += usize::from(kept.len() < prev.len());
            }
            previous = Some(kept);
        }
    }
    Ok(format!(
        "{oracle_checks} decisions match the pair oracle; retained sets nested in alpha ({shrinking} strict drops)"
    ))
}

/// Plain EM written from the update equations, for comparison.
fn em_oracle(values: &[usize], size: usize, lags: &[usize], init: &MtdParams, iterations: usize) -> (MtdParams, f64) {
    let d = *lags.iter().max().unwrap();
    let k = lags.len();
    let mix = |p: &MtdParams, t: usize| -> Vec<f64> {
        let mut parts = vec![p.lambdas[0] * p.p0[values[t]]];
        parts.extend(lags.iter().enumerate().map(|(i, &j)| p.lambdas[i + 1] * p.pj[i][values[t - j]][values[t]]));
        parts
    };
    let ll = |p: &MtdParams| (d..values.len()).map(|t| mix(p, t).iter().sum::<f64>().ln()).sum::<f64>();
    let mut p = init.clone();
    for _ in 0..iterations {
        let mut weight = vec![0.0; k + 1];
        let mut p0_mass = vec![0.0; size];
        let mut pj_mass = vec![vec![vec![0.0; size]; size]; k];
        for t in d..values.len() {
            let parts = mix(&p, t);
            let total: f64 = parts.iter().sum();
            for (r, w) in parts.iter().map(|x| x / total).enumerate() {
                weight[r] += w;
                if r == 0 {
                    p0_mass[values[t]] += w;
                } else {
                    pj_mass[r - 1][values[t - lags[r - 1]]][values[t]] += w;
                }
            }
        }
        let m = (values.len() - d) as f64;
        let mut next = p.clone();
        next.lambdas = weight.iter().map(|w| w / m).collect();
        if weight[0] > 0.0 {
            next.p0 = p0_mass.iter().map(|x| x / weight[0]).collect();
        }
        for (matrix, mass) in next.pj.iter_mut().zip(&pj_mass) {
            for (row, counts) in matrix.iter_mut().zip(mass) {
                let total: f64 = counts.iter().sum();
                if total > 0.0 {
                    *row = counts.iter().map(|x| x / total).collect();
                }
            }
        }
        p = next;
    }
    let value = ll(&p);
    (p, value)
}

fn flat(p: &MtdParams) -> Vec<f64> {
    p.lambdas.iter().chain(&p.p0).chain(p.pj.iter().flatten().flatten()).copied().collect()
}

fn em_invariants() -> Check {
    let mut rng = RandomSource::new(7, 0);
    let lag_sets = [vec![1], vec![1, 2], vec![1, 3], vec![2, 5], vec![1, 2, 4]];
    let mut stopped_early = 0;
    for fixture in 0..50u64 {
        let size = 2 + (fixture % 2) as usize;
        let lags = &lag_sets[fixture as usize % lag_sets.len()];
        let set = LagSet::new(lags.clone()).unwrap();
        let n = rng.random_range(100..500);
        let sample = if fixture % 2 == 0 {
            random_sample(size, n, &mut rng)
        } else {
            let m = ModelBuilder::new(Alphabet::indexed(size).unwrap(), set.clone())
                .lambda0(0.1)
                .build(&mut RandomSource::new(fixture, 4))
                .unwrap();
            perfect_sample(&m, n, &mut rng).unwrap()
        };
        let init_model = ModelBuilder::new(Alphabet::indexed(size).unwrap(), set.clone())
            .build(&mut RandomSource::new(fixture, 5))
            .unwrap();
        let init = MtdParams::from_model(&init_model);
        let fail = |what: &str| format!("fixture {fixture}: {what}");

        let fit = em_fit(&sample, &set, &init, &EmOptions::default()).map_err(|e| fail(&e.to_string()))?;
        ensure(fit.distlogl.iter().all(|&g| g >= -1e-8), || fail("log-likelihood decreased"))?;
        ensure(fit.iterations == fit.distlogl.len() && fit.iterations <= 100, || fail("iteration count"))?;
        if fit.iterations < 100 {
            ensure(*fit.distlogl.last().unwrap() < 0.01, || fail("stopped above threshold"))?;
            ensure(fit.distlogl[..fit.iterations - 1].iter().all(|&g| g >= 0.01), || fail("missed a stop"))?;
            stopped_early += 1;
        }
        let rows = std::iter::once(&fit.params.lambdas)
            .chain(std::iter::once(&fit.params.p0))
            .chain(fit.params.pj.iter().flatten());
        for row in rows {
            let sum: f64 = row.iter().sum();
            ensure((sum - 1.0).abs() < 1e-10 && row.iter().all(|&x| x >= 0.0), || fail("simplex violated"))?;
        }

        let t = fit.iterations;
        let fixed = EmOptions { threshold: None, max_iter: t, ..EmOptions::default() };
        let unbounded = em_fit(&sample, &set, &init, &fixed).map_err(|e| fail(&e.to_string()))?;
        ensure(unbounded.params == fit.params && unbounded.iterations == t, || fail("M=null run differs"))?;
        let capped = EmOptions { threshold: None, max_iter: 7, ..EmOptions::default() };
        let seven = em_fit(&sample, &set, &init, &capped).map_err(|e| fail(&e.to_string()))?;
        ensure(seven.iterations == 7, || fail("M=null did not run to nIter"))?;

        let (reference, ll) = em_oracle(sample.values(), size, lags, &init, t);
        let dev = max_abs_diff(&flat(&fit.params), &flat(&reference));
        ensure(dev < 1e-9, || fail(&format!("parameters differ from plain EM by {dev:e}")))?;
        ensure((fit.log_likelihood - ll).abs() < 1e-8 * ll.abs().max(1.0), || fail("log-likelihood differs"))?;
    }
    Ok(format!("50 fixtures ({stopped_early} stopped by M), all invariants and plain-EM agreement hold"))
}

fn fsc_composition() -> Check {
    let mut rng = RandomSource::new(8, 0);
    let model = reference_model();
    for fixture in 0..20u64 {
        let (sample, d, l) = if fixture % 2 == 0 {
            (perfect_sample(&model, rng.random_range(200..3000), &mut rng).unwrap(), 35, 4)
        } else {
            let size = rng.random_range(2..4);
            (random_sample(size, rng.random_range(20..400), &mut rng), rng.random_range(1..6), 1)
        };
        let l = l.min(d);
        let params = CutParams::new([0.05, 0.13, 0.5][fixture as usize % 3], 1.0, 0.5).unwrap();
        let got = fsc_select(&sample, d, l, &params).map_err(|e| e.to_string())?;
        let half = sample.len() / 2;
        let fs = fs_select(&sample.slice(0..half).unwrap(), d, l).unwrap();
        let second = sample.slice(half..sample.len()).unwrap();
        let cut = cut_select_counts(&CountsTable::new(&second, d).unwrap(), &fs.lag_set(), &params).unwrap();
        let (
            Diagnostics::Fsc { steps, decisions, split },
            Diagnostics::Fs { steps: fs_steps },
            Diagnostics::Cut { decisions: cut_decisions },
        ) = (&got.diagnostics, &fs.diagnostics, &cut.diagnostics)
        else {
            return Err("unexpected diagnostics".into());
        };
        ensure(
            got.selected == cut.selected && steps == fs_steps && decisions == cut_decisions && *split == half,
            || format!("fixture {fixture}: {:?} vs chained {:?}", got.selected, cut.selected),
        )?;
    }
    Ok("20 fixtures equal FS on the first half chained into CUT on the second".into())
}

/// Exact value of a non-negative double above 2^-100.
fn exact(x: f64) -> Ratio<i128> {
    if x == 0.0 {
        return Ratio::from_integer(0);
    }
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i32 - 1075;
    let mantissa = ((bits & ((1 << 52) - 1)) | (1 << 52)) as i128;
    if exponent >= 0 {
        Ratio::from_integer(mantissa << exponent)
    } else {
        Ratio::new(mantissa, 1i128 << -exponent)
    }
}

/// True when `x` is the double nearest to the rational `r`.
fn correctly_rounded(x: f64, r: Ratio<i128>) -> bool {
    if r == Ratio::from_integer(0) || x == 0.0 {
        return x == 0.0 && r == Ratio::from_integer(0);
    }
    let neighbours = [x.next_down(), x.next_up()];
    neighbours.iter().all(|&y| {
        let other = exact(y);
        let dist = |a: Ratio<i128>| if a < r { r - a } else { a - r };
        dist(exact(x)) <= dist(other)
    })
}

fn metrics() -> Check {
    let mut rng = RandomSource::new(9, 0);
    let mut cases: Vec<[u64; 4]> = vec![[2, 5, 2, 1], [0, 0, 0, 1], [3, 0, 0, 0], [0, 4, 0, 0]];
    cases.extend((0..500).map(|_| [0; 4].map(|_| rng.random_range(0..2000u64))));
    for [tp, tn, fp, fn_] in cases {
        let m = ConfusionMetrics::from_counts(tp, tn, fp, fn_);
        let r = |a: u64, b: u64| (b > 0).then(|| Ratio::new(a as i128, b as i128));
        let ppv = r(tp, tp + fp);
        let recall = r(tp, tp + fn_);
        // harmonic mean of precision and recall, zero when either vanishes
        let f1 = match (ppv, recall) {
            (Some(p), Some(s)) if p + s > Ratio::from_integer(0) => Some(Ratio::from_integer(2) * p * s / (p + s)),
            _ => None,
        };
        let expected = [
            (m.accuracy, r(tp + tn, tp + tn + fp + fn_)),
            (m.precision, ppv),
            (m.sensitivity, recall),
            (m.specificity, r(tn, tn + fp)),
            (m.f1, f1),
        ];
        for (i, (got, want)) in expected.into_iter().enumerate() {
            let want = want.unwrap_or(Ratio::from_integer(0));
            ensure(correctly_rounded(got, want), || format!("counts {:?}: metric {i} = {got}", [tp, tn, fp, fn_]))?;
        }
    }

    // end to end on a numeric CSV
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RandomSource::new(10, 0);
    let mut x: f64 = 20.0;
    let mut csv = String::from("date,temp\n");
    for day in 0..1500 {
        let seasonal = 6.0 * (day as f64 * std::f64::consts::TAU / 365.0).sin();
        x = 0.7 * x + 0.3 * (21.0 + seasonal) + rng.random_range(-1.5..1.5);
        csv.push_str(&format!("{day},{x:.2}\n"));
    }
    let data = dir.path().join("temp.csv");
    std::fs::write(&data, csv).unwrap();
    let symbols = dir.path().join("symbols.csv");
    let bin = env!("CARGO_BIN_EXE_mtd");
    let run = |args: &[&str]| -> Result<String, String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        ensure(out.status.success(), || {
            format!("mtd {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
        })?;
        Ok(text)
    };
    let data = data.to_str().unwrap();
    let symbols = symbols.to_str().unwrap();
    run(&["discretize", "--input", data, "--column", "temp", "--k", "2", "--output", symbols])?;
    let selected = run(&["select", "--input", symbols, "--method", "fs", "--d", "10", "--l", "2"])?;
    let lags = selected.lines().next().unwrap_or("").split_whitespace().collect::<Vec<_>>().join(",");
    let probs = run(&["probs", "--input", symbols, "--S", &lags, "--matrix-form"])?;
    ensure(probs.lines().count() == 5, || format!("probs printed {probs}"))?;
    let report = run(&[
        "evaluate", "--input", data, "--column", "temp", "--k", "2", "--method", "fs", "--d", "10", "--l", "2",
        "--json",
    ])?;
    let doc: serde_json::Value = serde_json::from_str(&report).map_err(|e| e.to_string())?;
    let accuracy = doc["metrics"]["accuracy"].as_f64().unwrap_or(-1.0);
    ensure((0.0..=1.0).contains(&accuracy), || format!("accuracy {accuracy}"))?;
    Ok(format!("504 count vectors exact; pipeline selected lags {lags}, test accuracy {accuracy:.3}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden transition table and oscillations", golden_values),
        ("perfect sampler distribution", sampler),
        ("forward stepwise recovery", fs_recovery),
        ("FS error approaches the oracle", oracle_trend),
        ("BIC matches exhaustive search", bic_equivalence),
        ("CUT pair oracle and alpha monotonicity", cut_properties),
        ("EM invariants", em_invariants),
        ("FSC composition", fsc_composition),
        ("classification metrics and pipeline", metrics),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == (i + 1).to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}, {secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {} ({name}, {secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
