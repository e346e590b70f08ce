use std::collections::BTreeMap;
use std::io::Write;

use crate::alphabet::Alphabet;
use crate::empirics::counts::CountsTable;
use crate::error::{Error, Result};
use crate::lags::{ContextCodec, LagSet};

fn check_lags(counts: &CountsTable, lags: &LagSet) -> Result<()> {
    if let Some(max) = lags.max() {
        if max > counts.order() {
            return Err(Error::LagExceedsOrder { lag: max, d: counts.order() });
        }
    }
    Ok(())
}

fn uniform(size: usize) -> Vec<f64> {
    vec![1.0 / size as f64; size]
}

fn conditional_from(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return uniform(counts.len());
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Counts `N_n(x_S, a)` and empirical conditionals `P̂_n(a | x_S)` over the
/// contexts of a lag set that occur in the sample. Probabilities are kept
/// as integer counts together with the divisor `n − d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqTable {
    codec: ContextCodec,
    total: u64,
    contexts: Vec<u64>,
    counts: Vec<u64>,
}

impl FreqTable {
    pub fn new(counts: &CountsTable, lags: &LagSet) -> Result<Self> {
        check_lags(counts, lags)?;
        let size = counts.alphabet_size();
        let codec = ContextCodec::new(size, lags)?;
        let d = counts.order();
        let cardinality = codec
            .cardinality()
            .checked_mul(size as u64)
            .ok_or(Error::ContextOverflow { lags: lags.len() + 1, alphabet: size })?;
        let cells = counts.tally(cardinality, |w| codec.encode_at(w, d) * size as u64 + w[d] as u64);

        let mut contexts: Vec<u64> = Vec::new();
        let mut flat: Vec<u64> = Vec::new();
        for (key, c) in cells {
            let (ctx, a) = (key / size as u64, (key % size as u64) as usize);
            if contexts.last() != Some(&ctx) {
                contexts.push(ctx);
                flat.extend(std::iter::repeat_n(0, size));
            }
            let base = flat.len() - size;
            flat[base + a] = c;
        }
        Ok(Self { codec, total: counts.total(), contexts, counts: flat })
    }

    pub fn lags(&self) -> &LagSet {
        self.codec.lags()
    }

    pub fn codec(&self) -> &ContextCodec {
        &self.codec
    }

    pub fn alphabet_size(&self) -> usize {
        self.codec.base()
    }

    /// Divisor of every joint frequency, `n − d`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of observed contexts.
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Code of the `i`-th observed context.
    pub fn context(&self, i: usize) -> u64 {
        self.contexts[i]
    }

    pub fn find(&self, code: u64) -> Option<usize> {
        self.contexts.binary_search(&code).ok()
    }

    /// `N_n(x_S, a)` for every `a`.
    pub fn row_counts(&self, i: usize) -> &[u64] {
        let size = self.alphabet_size();
        &self.counts[i * size..(i + 1) * size]
    }

    /// `N̄_n(x_S)`.
    pub fn context_count(&self, i: usize) -> u64 {
        self.row_counts(i).iter().sum()
    }

    /// `P̂_n(· | x_S)` for an observed context.
    pub fn conditional(&self, i: usize) -> Vec<f64> {
        conditional_from(self.row_counts(i))
    }

    /// `P̂_n(· | x_S)` for any context code; unseen contexts give the
    /// uniform row.
    pub fn conditional_for(&self, code: u64) -> Vec<f64> {
        match self.find(code) {
            Some(i) => self.conditional(i),
            None => uniform(self.alphabet_size()),
        }
    }

    /// `π̂_n(x_S, a) = N_n(x_S, a) / (n − d)`.
    pub fn pi(&self, i: usize, a: usize) -> f64 {
        self.row_counts(i)[a] as f64 / self.total as f64
    }

    /// `π̂_n(x_S)`.
    pub fn pi_context(&self, i: usize) -> f64 {
        self.context_count(i) as f64 / self.total as f64
    }

    /// Observed contexts grouped by their symbols outside the lag at
    /// ascending position `pos`; each group holds mutually compatible
    /// contexts.
    pub fn compatible_groups(&self, pos: usize) -> Vec<Vec<usize>> {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, &code) in self.contexts.iter().enumerate() {
            groups.entry(self.codec.without_digit(code, pos)).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Every context of the lag set with its conditional row, unseen ones
    /// carrying the uniform row. Refuses more than `budget` rows.
    pub fn dense_rows(&self, budget: u64) -> Result<Vec<(u64, Vec<f64>)>> {
        let rows = self.codec.cardinality();
        if rows > budget {
            return Err(Error::RowBudget { rows: rows as u128, budget });
        }
        Ok((0..rows).map(|code| (code, self.conditional_for(code))).collect())
    }

    /// CSV with one column per lag (oldest first), then `a,Nxa,Nx,p`.
    pub fn write_csv<W: Write>(&self, alphabet: &Alphabet, mut w: W) -> Result<()> {
        let mut header: Vec<String> = self.lags().iter().rev().map(|j| format!("x{j}")).collect();
        header.extend(["a", "Nxa", "Nx", "p"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let ctx: Vec<&str> = self.codec.decode(self.contexts[i]).into_iter().map(|s| alphabet.label(s)).collect();
            let nx = self.context_count(i);
            let p = self.conditional(i);
            for (a, (&nxa, pa)) in self.row_counts(i).iter().zip(p).enumerate() {
                let mut cells = ctx.clone();
                let (nxa, nx, pa) = (nxa.to_string(), nx.to_string(), pa.to_string());
                cells.extend([alphabet.label(a), &nxa, &nx, &pa]);
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Ok(())
    }
}

/// Counts `N_{n,j}(x_S, b, a)` of a context over `S` together with symbol
/// `b` at an extra lag `j ∉ S` and `a` at the present.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    codec: ContextCodec,
    lag: usize,
    total: u64,
    contexts: Vec<u64>,
    counts: Vec<u64>,
}

impl PairTable {
    pub fn new(counts: &CountsTable, lags: &LagSet, j: usize) -> Result<Self> {
        if lags.contains(j) {
            return Err(Error::LagInSet(j));
        }
        let d = counts.order();
        if j == 0 || j > d {
            return Err(Error::LagExceedsOrder { lag: j, d });
        }
        check_lags(counts, lags)?;
        let size = counts.alphabet_size() as u64;
        let codec = ContextCodec::new(size as usize, lags)?;
        let overflow = Error::ContextOverflow { lags: lags.len() + 2, alphabet: size as usize };
        let cardinality = codec.cardinality().checked_mul(size * size).ok_or(overflow)?;
        let cells =
            counts.tally(cardinality, |w| (codec.encode_at(w, d) * size + w[d - j] as u64) * size + w[d] as u64);

        let block = (size * size) as usize;
        let mut contexts: Vec<u64> = Vec::new();
        let mut flat: Vec<u64> = Vec::new();
        for (key, c) in cells {
            let ctx = key / (size * size);
            if contexts.last() != Some(&ctx) {
                contexts.push(ctx);
                flat.extend(std::iter::repeat_n(0, block));
            }
            let base = flat.len() - block;
            flat[base + (key % (size * size)) as usize] = c;
        }
        Ok(Self { codec, lag: j, total: counts.total(), contexts, counts: flat })
    }

    pub fn lags(&self) -> &LagSet {
        self.codec.lags()
    }

    /// The extra lag `j`.
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn codec(&self) -> &ContextCodec {
        &self.codec
    }

    pub fn alphabet_size(&self) -> usize {
        self.codec.base()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn context(&self, i: usize) -> u64 {
        self.contexts[i]
    }

    pub fn find(&self, code: u64) -> Option<usize> {
        self.contexts.binary_search(&code).ok()
    }

    /// Counts `N_{n,j}(x_S, b, ·)`.
    pub fn row_counts(&self, i: usize, b: usize) -> &[u64] {
        let size = self.alphabet_size();
        let start = (i * size + b) * size;
        &self.counts[start..start + size]
    }

    pub fn count(&self, i: usize, b: usize, a: usize) -> u64 {
        self.row_counts(i, b)[a]
    }

    /// `N_{n,j}(x_S, b)` summed over the present symbol.
    pub fn count_b(&self, i: usize, b: usize) -> u64 {
        self.row_counts(i, b).iter().sum()
    }

    /// `N̄_n(x_S)`.
    pub fn context_count(&self, i: usize) -> u64 {
        let size = self.alphabet_size();
        self.counts[i * size * size..(i + 1) * size * size].iter().sum()
    }

    /// `π̂_{n,j}(x_S, b, a)`.
    pub fn pi(&self, i: usize, b: usize, a: usize) -> f64 {
        self.count(i, b, a) as f64 / self.total as f64
    }

    /// `π̂_{n,j}(x_S, b)`.
    pub fn pi_b(&self, i: usize, b: usize) -> f64 {
        self.count_b(i, b) as f64 / self.total as f64
    }

    /// `π̂_n(x_S)`.
    pub fn pi_context(&self, i: usize) -> f64 {
        self.context_count(i) as f64 / self.total as f64
    }

    /// `P̂_{n,j}(· | x_S, b)`, uniform when `(x_S, b)` is unseen.
    pub fn conditional(&self, i: usize, b: usize) -> Vec<f64> {
        conditional_from(self.row_counts(i, b))
    }
}
