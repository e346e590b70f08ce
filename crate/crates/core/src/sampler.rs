//! Perfect (stationary) simulation of MTD chains and a plain forward
//! simulator started from a fixed past.
//!
//! The perfect sampler resolves each time `t` by drawing a component
//! `L_t ∈ {0} ∪ Λ` with probabilities `(λ₀, λ_j)`. `L_t = 0` draws `X_t`
//! from `p₀`; otherwise `X_t` depends on `X_{t − L_t}`, which is resolved
//! first. The chain of dependencies ends at a `p₀` draw or at an already
//! resolved time, so every value is reused once generated. Times are
//! absolute integers; resolution may reach arbitrarily far before the
//! output window.

use crate::error::{Error, Result};
use crate::model::MtdModel;
use crate::rng::{draw_index, RandomSource};
use crate::sample::Sample;

/// Default cap on the total number of component draws per call.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerStats {
    /// Component draws performed, one per resolved time.
    pub steps: u64,
    /// Number of times resolved before the output window.
    pub prehistory: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PerfectSampler {
    pub step_cap: u64,
}

impl Default for PerfectSampler {
    fn default() -> Self {
        Self { step_cap: DEFAULT_STEP_CAP }
    }
}

/// Values at absolute times; `front[t]` for `t ≥ 0`, `back[k]` for
/// `t = −1 − k`. Both halves grow on demand.
struct Memo {
    front: Vec<Option<u32>>,
    back: Vec<Option<u32>>,
}

impl Memo {
    fn get(&self, t: i64) -> Option<u32> {
        if t >= 0 {
            self.front.get(t as usize).copied().flatten()
        } else {
            self.back.get((-1 - t) as usize).copied().flatten()
        }
    }

    fn set(&mut self, t: i64, x: u32) {
        let (vec, idx) = if t >= 0 { (&mut self.front, t as usize) } else { (&mut self.back, (-1 - t) as usize) };
        if idx >= vec.len() {
            let grow = (idx + 1).max(vec.len() * 2).max(1024);
            vec.resize(grow, None);
        }
        vec[idx] = Some(x);
    }
}

/// Component weights `(λ₀, λ_{j_1}, ..., λ_{j_k})`.
fn component_weights(model: &MtdModel) -> Vec<f64> {
    std::iter::once(model.lambda0()).chain(model.lambdas().iter().copied()).collect()
}

impl PerfectSampler {
    pub fn sample(&self, model: &MtdModel, n: usize, rng: &mut RandomSource) -> Result<Sample> {
        self.sample_with_stats(model, n, rng).map(|(s, _)| s)
    }

    pub fn sample_with_stats(
        &self,
        model: &MtdModel,
        n: usize,
        rng: &mut RandomSource,
    ) -> Result<(Sample, SamplerStats)> {
        if model.lambda0() <= 0.0 {
            return Err(Error::NoIndependentPart);
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample length must be positive".into()));
        }
        let weights = component_weights(model);
        let lags = model.lags().as_slice();
        let mut memo = Memo { front: vec![None; n], back: Vec::new() };
        let mut steps: u64 = 0;
        // pending (time, component) pairs waiting on their predecessor
        let mut chain: Vec<(i64, usize)> = Vec::new();

        for target in 0..n as i64 {
            if memo.get(target).is_some() {
                continue;
            }
            let mut t = target;
            loop {
                steps += 1;
                if steps > self.step_cap {
                    return Err(Error::StepCap(self.step_cap));
                }
                let component = draw_index(&weights, rng);
                if component == 0 {
                    memo.set(t, draw_index(model.p0(), rng) as u32);
                    break;
                }
                chain.push((t, component));
                let prev = t - lags[component - 1] as i64;
                if memo.get(prev).is_some() {
                    break;
                }
                t = prev;
            }
            while let Some((t, component)) = chain.pop() {
                let lag = lags[component - 1] as i64;
                let b = memo.get(t - lag).expect("predecessor resolved") as usize;
                memo.set(t, draw_index(&model.pj()[component - 1][b], rng) as u32);
            }
        }

        let prehistory = memo.back.iter().filter(|x| x.is_some()).count();
        let values = memo.front[..n].iter().map(|x| x.expect("all targets resolved") as usize).collect();
        let sample = Sample::new(model.alphabet().clone(), values)?;
        Ok((sample, SamplerStats { steps, prehistory }))
    }
}

/// Draws `n` symbols from the stationary law of `model` (requires `λ₀ > 0`).
pub fn perfect_sample(model: &MtdModel, n: usize, rng: &mut RandomSource) -> Result<Sample> {
    PerfectSampler::default().sample(model, n, rng)
}

/// Simulates `n` symbols forward from a fixed past (oldest first, at least
/// `max(Λ)` symbols). The output excludes the initial past and is not
/// stationary at its start.
pub fn forward_sample(model: &MtdModel, n: usize, initial_past: &[usize], rng: &mut RandomSource) -> Result<Sample> {
    let order = model.order();
    if initial_past.len() < order {
        return Err(Error::InvalidArgument(format!(
            "initial past has {} symbols, model order is {order}",
            initial_past.len()
        )));
    }
    let size = model.alphabet().len();
    if let Some(&index) = initial_past.iter().find(|&&s| s >= size) {
        return Err(Error::SymbolOutOfRange { index, size });
    }
    let weights = component_weights(model);
    let lags = model.lags().as_slice();
    let offset = initial_past.len();
    let mut values = initial_past.to_vec();
    values.reserve(n);
    for t in offset..offset + n {
        let component = draw_index(&weights, rng);
        let x = if component == 0 {
            draw_index(model.p0(), rng)
        } else {
            let b = values[t - lags[component - 1]];
            draw_index(&model.pj()[component - 1][b], rng)
        };
        values.push(x);
    }
    Sample::new(model.alphabet().clone(), values.split_off(offset))
}
