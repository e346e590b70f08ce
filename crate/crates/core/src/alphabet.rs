use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ordered finite set of opaque symbol labels.
///
/// Symbols are addressed by their position; the order is fixed at
/// construction and never changes.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    /// Builds an alphabet keeping the given order.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateSymbol(l.clone()));
            }
        }
        if labels.len() < 2 {
            return Err(Error::AlphabetTooSmall(labels.len()));
        }
        Ok(Self { labels, index })
    }

    /// Infers an alphabet from observed labels: distinct values, sorted
    /// numerically when every label parses as a number, lexically otherwise.
    pub fn infer<'a, I>(observed: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut distinct: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for l in observed {
            if seen.insert(l) {
                distinct.push(l.to_string());
            }
        }
        let numeric: Option<Vec<f64>> = distinct.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
        match numeric {
            Some(values) if values.iter().all(|v| v.is_finite()) => {
                let mut pairs: Vec<(f64, String)> = values.into_iter().zip(distinct).collect();
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));
                Self::new(pairs.into_iter().map(|p| p.1))
            }
            _ => {
                distinct.sort();
                Self::new(distinct)
            }
        }
    }

    /// Alphabet `{0, 1, ..., size-1}`.
    pub fn indexed(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownSymbol(label.to_string()))
    }

    /// True when every label is a single character, so contexts can be
    /// printed by plain concatenation ("110").
    pub fn compact_labels(&self) -> bool {
        self.labels.iter().all(|l| l.chars().count() == 1)
    }

    /// Renders a sequence of symbol indices, oldest first.
    pub fn render(&self, symbols: &[usize]) -> String {
        let sep = if self.compact_labels() { "" } else { "," };
        symbols.iter().map(|&s| self.label(s)).collect::<Vec<_>>().join(sep)
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Alphabet").field(&self.labels).finish()
    }
}

impl Serialize for Alphabet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(serializer)
    }
}

/// Labels may be written as JSON strings or numbers; numbers keep their
/// JSON spelling.
impl<'de> Deserialize<'de> for Alphabet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct LabelsVisitor;

        impl<'de> Visitor<'de> for LabelsVisitor {
            type Value = Vec<String>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of symbol labels")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element::<serde_json::Value>()? {
                    match v {
                        serde_json::Value::String(s) => out.push(s),
                        serde_json::Value::Number(n) => out.push(n.to_string()),
                        serde_json::Value::Bool(b) => out.push(b.to_string()),
                        other => return Err(de::Error::custom(format!("invalid symbol label {other}"))),
                    }
                }
                Ok(out)
            }
        }

        let labels = deserializer.deserialize_seq(LabelsVisitor)?;
        Alphabet::new(labels).map_err(de::Error::custom)
    }
}
