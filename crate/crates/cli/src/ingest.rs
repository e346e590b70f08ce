//! Reading one-symbol-per-row series from CSV files.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use mtd_core::{Alphabet, Sample};
use serde::{Deserialize, Serialize};

const NA_TOKENS: [&str; 6] = ["", "NA", "na", "NaN", "nan", "null"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaPolicy {
    /// Any missing value is an error.
    #[default]
    Error,
    /// Missing values at the start or end are dropped; interior ones are errors.
    DropEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum HeaderMode {
    /// Header iff the first cell is `x`, or is non-numeric while every other cell is numeric.
    #[default]
    Auto,
    Yes,
    No,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Column name (with a header) or 1-based index.
    pub column: Option<String>,
    /// Input lists the newest observation first.
    pub reverse: bool,
    pub na_policy: NaPolicy,
    pub header: HeaderMode,
}

fn is_na(cell: &str) -> bool {
    NA_TOKENS.contains(&cell.trim())
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok_and(f64::is_finite)
}

/// Raw cells of the selected column, chronological, with missing values
/// removed according to the policy.
pub fn read_cells<R: Read>(reader: R, opts: &IngestOptions) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        bail!("input has no rows");
    }

    let has_header = match opts.header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => {
            let named = opts.column.as_deref().is_some_and(|c| c.parse::<usize>().is_err());
            let first = rows[0].get(0).unwrap_or("").trim();
            named
                || first == "x"
                || (!is_numeric(first)
                    && !is_na(first)
                    && rows.len() > 1
                    && rows[1..].iter().all(|r| r.get(0).is_some_and(|c| is_numeric(c) || is_na(c))))
        }
    };

    let column = match (&opts.column, has_header) {
        (None, _) => 0,
        (Some(c), _) if c.parse::<usize>().is_ok() => {
            let i: usize = c.parse()?;
            if i == 0 {
                bail!("column indices start at 1");
            }
            i - 1
        }
        (Some(c), true) => {
            rows[0].iter().position(|h| h.trim() == c).ok_or_else(|| anyhow!("column {c:?} not found in header"))?
        }
        (Some(c), false) => bail!("column {c:?} requested by name but the input has no header"),
    };

    let first_data_line = usize::from(has_header) + 1;
    let mut cells: Vec<(usize, Option<String>)> = rows[usize::from(has_header)..]
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let cell = r.get(column).map(str::trim).unwrap_or("");
            (i + first_data_line, (!is_na(cell)).then(|| cell.to_string()))
        })
        .collect();

    if opts.na_policy == NaPolicy::DropEdges {
        let start = cells.iter().position(|(_, c)| c.is_some()).unwrap_or(cells.len());
        let end = cells.iter().rposition(|(_, c)| c.is_some()).map_or(start, |e| e + 1);
        cells = cells[start..end].to_vec();
    }
    let mut out = Vec::with_capacity(cells.len());
    for (line, cell) in cells {
        match cell {
            Some(c) => out.push(c),
            None => bail!("missing value at line {line}"),
        }
    }
    if out.is_empty() {
        bail!("input has no observations");
    }
    if opts.reverse {
        out.reverse();
    }
    Ok(out)
}

/// Reads a categorical series and infers its alphabet.
pub fn ingest_series(path: &Path, opts: &IngestOptions) -> Result<Sample> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    sample_from_cells(&read_cells(file, opts)?)
}

pub fn sample_from_cells(cells: &[String]) -> Result<Sample> {
    let alphabet = Alphabet::infer(cells.iter().map(String::as_str))?;
    Ok(Sample::from_labels(alphabet, cells)?)
}

/// Reads a numeric series (for discretization).
pub fn ingest_numeric(path: &Path, opts: &IngestOptions) -> Result<Vec<f64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_cells(file, opts)?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("observation {} is not a finite number: {c:?}", i + 1))
        })
        .collect()
}
