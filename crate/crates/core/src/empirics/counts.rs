use std::collections::HashMap;
use std::io::Write;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::sample::Sample;

/// Occurrence counts of every length-(d+1) window `(X_{t-d}, ..., X_t)`,
/// `t = d+1..n`. Only observed windows are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    alphabet_size: usize,
    d: usize,
    n: usize,
    // distinct windows, oldest symbol first, concatenated in lexicographic order
    windows: Vec<usize>,
    counts: Vec<u64>,
}

impl CountsTable {
    pub fn new(sample: &Sample, d: usize) -> Result<Self> {
        let n = sample.len();
        if d == 0 || d >= n {
            return Err(Error::InvalidOrder { d, n });
        }
        let values = sample.values();
        let mut seen: HashMap<&[usize], u64> = HashMap::with_capacity(n - d);
        for w in values.windows(d + 1) {
            *seen.entry(w).or_insert(0) += 1;
        }
        let mut entries: Vec<(&[usize], u64)> = seen.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let mut windows = Vec::with_capacity(entries.len() * (d + 1));
        let mut counts = Vec::with_capacity(entries.len());
        for (w, c) in entries {
            windows.extend_from_slice(w);
            counts.push(c);
        }
        Ok(Self { alphabet_size: sample.alphabet().len(), d, n, windows, counts })
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Length of the sample the table was built from.
    pub fn sample_len(&self) -> usize {
        self.n
    }

    /// Number of counted windows, `n − d`.
    pub fn total(&self) -> u64 {
        (self.n - self.d) as u64
    }

    /// Number of distinct windows.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], u64)> + '_ {
        self.windows.chunks_exact(self.d + 1).zip(self.counts.iter().copied())
    }

    /// Aggregates counts under `key(window)` and returns the non-zero cells
    /// sorted by key. `cardinality` bounds the key range.
    pub(crate) fn tally<F>(&self, cardinality: u64, key: F) -> Vec<(u64, u64)>
    where
        F: Fn(&[usize]) -> u64,
    {
        const DENSE_LIMIT: u64 = 1 << 20;
        if cardinality <= DENSE_LIMIT {
            let mut cells = vec![0u64; cardinality as usize];
            for (w, c) in self.iter() {
                cells[key(w) as usize] += c;
            }
            cells.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(k, c)| (k as u64, c)).collect()
        } else {
            let mut cells: HashMap<u64, u64> = HashMap::new();
            for (w, c) in self.iter() {
                *cells.entry(key(w)).or_insert(0) += c;
            }
            let mut out: Vec<(u64, u64)> = cells.into_iter().collect();
            out.sort_unstable();
            out
        }
    }

    /// CSV with one column per position `x{d} ... x1`, then `a` and `Nxa`.
    pub fn write_csv<W: Write>(&self, alphabet: &Alphabet, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.d).rev().map(|j| format!("x{j}")).collect();
        header.push("a".into());
        header.push("Nxa".into());
        writeln!(w, "{}", header.join(","))?;
        for (win, c) in self.iter() {
            let cells: Vec<&str> = win.iter().map(|&s| alphabet.label(s)).collect();
            writeln!(w, "{},{c}", cells.join(","))?;
        }
        Ok(())
    }
}
