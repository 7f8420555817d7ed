use std::path::Path;

use crate::diagnostics::{LyapunovPoint, Trace};
use crate::error::{Error, Result};

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..n).map(|i| format!("x_{i}")));
    h.extend((0..n).map(|i| format!("v_{i}")));
    for c in ["psi", "beta_psi", "obj", "g_z", "h_z", "E1", "E2", "int_beta_psi", "int_xdot_sq", "step_h"] {
        h.push(c.to_string());
    }
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one row per sample; the Lyapunov columns stay empty without `lyapunov`.
pub fn write_trace_csv(path: &Path, trace: &Trace, lyapunov: Option<&[LyapunovPoint]>) -> Result<()> {
    let n = trace.samples().first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(trace_header(n)).map_err(csv_err)?;
    let mut row = Vec::with_capacity(2 * n + 11);
    for (j, (s, d)) in trace.samples().iter().zip(trace.derived()).enumerate() {
        row.clear();
        row.push(fmt(s.t));
        row.extend(s.x.iter().map(|v| fmt(*v)));
        row.extend(s.v.iter().map(|v| fmt(*v)));
        row.push(fmt(d.psi));
        row.push(fmt(d.beta_psi));
        row.push(fmt(d.obj));
        match lyapunov.map(|l| l[j]) {
            Some(l) => row.extend([fmt(l.g_z), fmt(l.h_z), fmt(l.e1), fmt(l.e2)]),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        row.push(fmt(d.int_beta_psi));
        row.push(fmt(d.int_xdot_sq));
        row.push(fmt(s.step_h));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// The primary columns of a trace file.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub step_h: f64,
}

/// Reads a trace file, requiring the header for dimension `n`.
pub fn read_trace_csv(path: &Path, n: usize) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != trace_header(n) {
        let found = header.iter().filter(|h| h.starts_with("x_")).count();
        return Err(Error::Validation(format!(
            "trace header does not match dimension {n} (found {found} state columns)"
        )));
    }
    let col = |name: &str| header.iter().position(|h| h == name).expect("header checked");
    let (ct, ch) = (col("t"), col("step_h"));
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Input(format!("trace row {}: column {} is not a number", line + 1, header[k])))
        };
        let x = (0..n).map(|i| num(1 + i)).collect::<Result<Vec<_>>>()?;
        let v = (0..n).map(|i| num(1 + n + i)).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow { t: num(ct)?, x, v, step_h: num(ch)? });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("trace file: {e}"))
}
