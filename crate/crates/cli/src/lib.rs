//! Data ingestion, discretization, prediction metrics and the Monte Carlo
//! harness behind the `mtd` binary.

// Negated comparisons deliberately treat NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod discretize;
pub mod format;
pub mod ingest;
pub mod metrics;
pub mod predict;

/// Invalid combination of command-line arguments (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Parses a comma-separated lag list such as `1,15,30`.
pub fn parse_lags(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().map_err(|_| format!("invalid lag {p:?}")))
        .collect()
}
