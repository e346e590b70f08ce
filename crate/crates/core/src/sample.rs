use std::io::Write;
use std::ops::Range;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};

/// Chronologically ordered sequence of symbol indices, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    alphabet: Alphabet,
    values: Vec<usize>,
}

impl Sample {
    pub fn new(alphabet: Alphabet, values: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sample must not be empty".into()));
        }
        let size = alphabet.len();
        if let Some(&index) = values.iter().find(|&&v| v >= size) {
            return Err(Error::SymbolOutOfRange { index, size });
        }
        Ok(Self { alphabet, values })
    }

    pub fn from_labels<S: AsRef<str>>(alphabet: Alphabet, labels: &[S]) -> Result<Self> {
        let values = labels.iter().map(|l| alphabet.index_of(l.as_ref())).collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, values)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-sample over a chronological index range.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start >= range.end {
            return Err(Error::InvalidArgument(format!("range {range:?} invalid for sample of length {}", self.len())));
        }
        Self::new(self.alphabet.clone(), self.values[range].to_vec())
    }

    /// First `m` observations.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        self.slice(0..m)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.values.iter().map(|&v| self.alphabet.label(v))
    }

    /// Single-column CSV with header `x`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x")?;
        for l in self.labels() {
            writeln!(w, "{l}")?;
        }
        Ok(())
    }
}
