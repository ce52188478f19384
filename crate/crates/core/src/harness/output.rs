//! CSV persistence. One header line; floats at 17 significant digits;
//! quantities a method does not produce are left empty.

use super::runner::{RunRecord, SweepRecord};
use crate::error::Result;
use std::io::Write;

/// Lossless text form of a float: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn params_field(params: &[(String, f64)]) -> String {
    params.iter().map(|(k, v)| format!("{k}={}", fmt_float(*v))).collect::<Vec<_>>().join(";")
}

pub fn write_runs<W: Write>(out: W, runs: &[RunRecord]) -> Result<()> {
    let width = runs.iter().map(|r| r.les.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["method", "model", "objective", "params", "grid", "grid2", "seed", "N"]
        .iter()
        .chain(&["stable", "neutral", "unstable", "total"])
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=width).map(|i| format!("le{i}")));
    header.extend(["diverged".to_string(), "failure".to_string()]);
    w.write_record(&header)?;
    for r in runs {
        let mut row = vec![
            r.method.name().to_string(),
            r.model.clone(),
            r.objective.clone(),
            params_field(&r.params),
            opt(r.grid),
            opt(r.grid2),
            r.seed.to_string(),
            r.steps.to_string(),
            opt(r.stable),
            opt(r.neutral),
            opt(r.unstable),
            opt(r.total),
        ];
        row.extend((0..width).map(|i| opt(r.les.get(i).copied())));
        row.push(u8::from(r.diverged).to_string());
        row.push(r.failure.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, summary: &[SweepRecord]) -> Result<()> {
    let width = summary.iter().map(|s| s.les.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["grid", "grid2", "runs", "diverged", "mean", "std"]
        .iter()
        .chain(&["stable_mean", "stable_std", "neutral_mean", "neutral_std", "unstable_mean", "unstable_std"])
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=width).map(|i| format!("le{i}_mean")));
    header.push("fd_slope".into());
    w.write_record(&header)?;
    for s in summary {
        let mut row = vec![
            opt(s.grid),
            opt(s.grid2),
            (s.values.len() + s.diverged).to_string(),
            s.diverged.to_string(),
            fmt_float(s.mean),
            fmt_float(s.std),
        ];
        match s.parts {
            Some(parts) => row.extend(parts.iter().flat_map(|(m, sd)| [fmt_float(*m), fmt_float(*sd)])),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row.extend((0..width).map(|i| opt(s.les.get(i).copied())));
        row.push(opt(s.fd_slope));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Streaming writer for `(step, x¹…xⁿ, g¹…gᵐ)` rows.
pub struct GStream<W: Write> {
    inner: csv::Writer<W>,
    row: Vec<String>,
}

impl<W: Write> GStream<W> {
    pub fn new(out: W, n: usize, m: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("g{i}")));
        inner.write_record(&header)?;
        Ok(GStream { inner, row: Vec::with_capacity(1 + n + m) })
    }

    pub fn push(&mut self, step: usize, x: &[f64], g: &[f64]) -> Result<()> {
        self.row.clear();
        self.row.push(step.to_string());
        self.row.extend(x.iter().chain(g).map(|v| fmt_float(*v)));
        self.inner.write_record(&self.row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
