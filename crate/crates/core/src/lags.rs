use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing set of positive lags. Lag `j` refers to the symbol
/// observed `j` steps before the present.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSet(Vec<usize>);

impl LagSet {
    /// Sorts the lags; rejects zero and duplicates.
    pub fn new(mut lags: Vec<usize>) -> Result<Self> {
        lags.sort_unstable();
        if lags.first() == Some(&0) {
            return Err(Error::InvalidLags("lags must be positive".into()));
        }
        if let Some(w) = lags.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidLags(format!("duplicate lag {}", w[0])));
        }
        Ok(Self(lags))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{1, ..., d}`.
    pub fn range(d: usize) -> Self {
        Self((1..=d).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = usize> + ExactSizeIterator + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.0.binary_search(&lag).is_ok()
    }

    /// Position of `lag` in ascending order.
    pub fn position(&self, lag: usize) -> Option<usize> {
        self.0.binary_search(&lag).ok()
    }

    pub fn with(&self, lag: usize) -> Result<Self> {
        let mut v = self.0.clone();
        v.push(lag);
        Self::new(v)
    }

    pub fn without(&self, lag: usize) -> Self {
        Self(self.0.iter().copied().filter(|&l| l != lag).collect())
    }

    pub fn is_subset_of(&self, other: &LagSet) -> bool {
        self.0.iter().all(|&l| other.contains(l))
    }
}

impl TryFrom<Vec<usize>> for LagSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LagSet> for Vec<usize> {
    fn from(s: LagSet) -> Self {
        s.0
    }
}

impl FromStr for LagSet {
    type Err = Error;

    /// Parses a comma separated list such as `1,15,30`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let lags = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| Error::InvalidLags(format!("cannot parse {p:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lags)
    }
}

impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Dense base-|A| encoding of contexts over a lag set. The oldest lag
/// (largest j) is the most significant digit, so codes enumerate contexts
/// in the same order as rows printed like `000, 001, ..., 111`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextCodec {
    base: u64,
    lags: LagSet,
    places: Vec<u64>,
}

impl ContextCodec {
    pub fn new(base: usize, lags: &LagSet) -> Result<Self> {
        let overflow = || Error::ContextOverflow { lags: lags.len(), alphabet: base };
        let mut places = Vec::with_capacity(lags.len());
        let mut p: u64 = 1;
        for _ in 0..lags.len() {
            places.push(p);
            p = p.checked_mul(base as u64).ok_or_else(overflow)?;
        }
        Ok(Self { base: base as u64, lags: lags.clone(), places })
    }

    pub fn lags(&self) -> &LagSet {
        &self.lags
    }

    pub fn base(&self) -> usize {
        self.base as usize
    }

    /// Number of distinct contexts, `|A|^|S|`.
    pub fn cardinality(&self) -> u64 {
        self.places.last().map_or(1, |&p| p * self.base)
    }

    /// Code of the context preceding `values[t]`. Requires `t >= max lag`.
    pub fn encode_at(&self, values: &[usize], t: usize) -> u64 {
        self.lags.iter().rev().fold(0u64, |code, lag| code * self.base + values[t - lag] as u64)
    }

    /// Code of a context given as digits, oldest lag first.
    pub fn encode_digits(&self, digits: &[usize]) -> u64 {
        debug_assert_eq!(digits.len(), self.lags.len());
        digits.iter().fold(0u64, |code, &x| code * self.base + x as u64)
    }

    /// Digits of a code, oldest lag first.
    pub fn decode(&self, code: u64) -> Vec<usize> {
        self.places.iter().rev().map(|&p| ((code / p) % self.base) as usize).collect()
    }

    /// Symbol at the lag with ascending position `pos`.
    pub fn digit(&self, code: u64, pos: usize) -> usize {
        ((code / self.places[pos]) % self.base) as usize
    }

    /// Code with the digit at ascending position `pos` cleared; two codes
    /// share this key iff they are compatible outside that lag.
    pub fn without_digit(&self, code: u64, pos: usize) -> u64 {
        code - self.digit(code, pos) as u64 * self.places[pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagset_validation() {
        assert_eq!(LagSet::new(vec![30, 1, 15]).unwrap().as_slice(), &[1, 15, 30]);
        assert!(LagSet::new(vec![0, 2]).is_err());
        assert!(LagSet::new(vec![2, 2]).is_err());
        assert_eq!("1, 15,30".parse::<LagSet>().unwrap().to_string(), "1,15,30");
    }

    #[test]
    fn oldest_lag_is_most_significant() {
        let s = LagSet::new(vec![1, 15, 30]).unwrap();
        let c = ContextCodec::new(2, &s).unwrap();
        // (x_-30, x_-15, x_-1) = (1, 1, 0) prints as "110" and is row 6
        assert_eq!(c.encode_digits(&[1, 1, 0]), 6);
        assert_eq!(c.decode(6), vec![1, 1, 0]);
        assert_eq!(c.digit(6, 0), 0);
        assert_eq!(c.digit(6, 2), 1);
        assert_eq!(c.cardinality(), 8);
        let mut values = vec![0usize; 31];
        values[0] = 1; // t - 30
        values[15] = 1; // t - 15
        assert_eq!(c.encode_at(&values, 30), 6);
    }

    #[test]
    fn codec_refuses_overflow() {
        let s = LagSet::range(70);
        assert!(ContextCodec::new(2, &s).is_err());
        assert!(ContextCodec::new(2, &LagSet::range(63)).is_ok());
    }
}
