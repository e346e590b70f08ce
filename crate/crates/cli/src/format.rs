//! Human-readable rendering. Numbers carry 7 significant digits with
//! trailing zeros trimmed; JSON output elsewhere keeps full precision.

use std::collections::BTreeMap;
use std::fmt::Write;

use mtd_core::select::{CutDecision, Diagnostics, FsStep};
use mtd_core::{Alphabet, SelectionResult};

/// `x` rounded to 7 significant digits, e.g. `0.5208503`, `12`, `1.5e-9`.
pub fn sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{x:.6e}");
    }
    let decimals = (6 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn sig7_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig7(x)).collect::<Vec<_>>().join(" ")
}

/// Whitespace-aligned table with a header row.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}

/// Row-labelled matrix of conditional probabilities, one column per symbol.
pub fn matrix(alphabet: &Alphabet, rows: &[(String, Vec<f64>)]) -> String {
    let header: Vec<String> = std::iter::once(String::new()).chain(alphabet.labels().iter().cloned()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, row)| std::iter::once(label.clone()).chain(row.iter().map(|&p| sig7(p))).collect())
        .collect();
    table(&header, &body)
}

pub fn oscillations(osc: &BTreeMap<usize, f64>) -> String {
    let rows: Vec<Vec<String>> = osc.iter().map(|(j, d)| vec![format!("-{j}"), sig7(*d)]).collect();
    table(&["lag".into(), "delta".into()], &rows)
}

fn fs_steps(out: &mut String, steps: &[FsStep]) {
    let rows: Vec<Vec<String>> =
        steps.iter().enumerate().map(|(i, s)| vec![(i + 1).to_string(), s.lag.to_string(), sig7(s.nu)]).collect();
    out.push_str(&table(&["step".into(), "lag".into(), "nu".into()], &rows));
}

fn cut_decisions(out: &mut String, decisions: &[CutDecision]) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), sig7);
    let rows: Vec<Vec<String>> = decisions
        .iter()
        .map(|d| {
            vec![
                d.lag.to_string(),
                if d.retained { "keep" } else { "cut" }.to_string(),
                opt(d.gap),
                opt(d.threshold),
                d.pairs.to_string(),
            ]
        })
        .collect();
    let header = ["lag", "decision", "dtv", "threshold", "pairs"].map(String::from);
    out.push_str(&table(&header, &rows));
}

/// Selected lags on the first line, then method diagnostics.
pub fn selection(result: &SelectionResult) -> String {
    let lags: Vec<String> = result.selected.iter().map(usize::to_string).collect();
    let mut out = format!("{}\n", lags.join(" "));
    match &result.diagnostics {
        Diagnostics::Fs { steps } => fs_steps(&mut out, steps),
        Diagnostics::Cut { decisions } => cut_decisions(&mut out, decisions),
        Diagnostics::Bic(report) => {
            let rows: Vec<Vec<String>> = report
                .by_size
                .iter()
                .map(|c| {
                    let lags: Vec<String> = c.lags.iter().map(usize::to_string).collect();
                    vec![c.lags.len().to_string(), lags.join(","), sig7(c.value)]
                })
                .collect();
            if !rows.is_empty() {
                out.push_str(&table(&["size".into(), "lags".into(), "bic".into()], &rows));
            }
            writeln!(out, "evaluated {} sets, best BIC {}", report.evaluated, sig7(report.best.value)).unwrap();
        }
        Diagnostics::Fsc { steps, decisions, split } => {
            writeln!(out, "split at {split}").unwrap();
            fs_steps(&mut out, steps);
            cut_decisions(&mut out, decisions);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(sig7(0.52085034), "0.5208503");
        assert_eq!(sig7(0.1233648), "0.1233648");
        assert_eq!(sig7(0.5), "0.5");
        assert_eq!(sig7(12.0), "12");
        assert_eq!(sig7(-1234.56789), "-1234.568");
        assert_eq!(sig7(0.000123456789), "0.0001234568");
        assert_eq!(sig7(0.0), "0");
        assert_eq!(sig7(1.5e-9), "1.500000e-9");
    }

    #[test]
    fn aligned_table() {
        let t = table(&["a".into(), "bb".into()], &[vec!["123".into(), "1".into()]]);
        assert_eq!(t, "  a  bb\n123   1\n");
    }
}
