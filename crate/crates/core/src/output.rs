//! File emission. Every file starts with a provenance header carrying the
//! crate version and the configuration hash; floats in CSV use 17
//! significant digits so that values round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::experiment::{ChiSample, SweepOutcome};
use crate::grid::MixtureState;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Header {
    pub version: String,
    pub config_sha256: String,
}

impl Header {
    pub fn new(config_sha256: impl Into<String>) -> Self {
        Self { version: VERSION.to_string(), config_sha256: config_sha256.into() }
    }

    fn csv_line(&self) -> String {
        format!("# mixrelax {} config_sha256={}\n", self.version, self.config_sha256)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Snapshot table with columns `x, rho_1..rho_n, v_1..v_n`.
pub fn snapshot_csv(header: &Header, state: &MixtureState) -> String {
    let n = state.n_species();
    let mut out = header.csv_line();
    let _ = writeln!(out, "# t={}", num(state.t));
    let cols: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=n).map(|i| format!("rho_{i}")))
        .chain((1..=n).map(|i| format!("v_{i}")))
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    let v: Vec<Vec<f64>> = (0..n).map(|i| state.velocity(i)).collect();
    for c in 0..state.grid.n_cells() {
        let row: Vec<String> = std::iter::once(state.grid.x(c))
            .chain((0..n).map(|i| state.rho[i][c]))
            .chain((0..n).map(|i| v[i][c]))
            .map(num)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Snapshot columns as `(x, rho, v)`.
pub type SnapshotColumns = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Parses a snapshot table back into its columns.
pub fn parse_snapshot_csv(text: &str) -> Result<SnapshotColumns> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| Error::Io("empty snapshot file".into()))?;
    let ncol = head.split(',').count();
    if ncol < 3 || ncol % 2 == 0 {
        return Err(Error::Io(format!("unexpected snapshot header {head:?}")));
    }
    let n = (ncol - 1) / 2;
    let (mut x, mut rho, mut v) = (vec![], vec![vec![]; n], vec![vec![]; n]);
    for line in lines {
        let vals = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != ncol {
            return Err(Error::Io(format!("row has {} columns, expected {ncol}", vals.len())));
        }
        x.push(vals[0]);
        for i in 0..n {
            rho[i].push(vals[1 + i]);
            v[i].push(vals[1 + n + i]);
        }
    }
    Ok((x, rho, v))
}

/// Diagnostics stream: a header object, then one record per line.
pub fn diagnostics_jsonl(header: &Header, records: &[DiagnosticsRecord]) -> Result<String> {
    let mut out = to_json_line(header)?;
    for r in records {
        out.push_str(&to_json_line(r)?);
    }
    Ok(out)
}

fn to_json_line<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Pretty JSON report `{ "header": ..., "report": ... }`.
pub fn report_json<T: Serialize>(header: &Header, report: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        header: &'a Header,
        report: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Wrapped { header, report }).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// χ time series with columns `t, chi, l2, weighting_gap`.
pub fn chi_csv(header: &Header, series: &[ChiSample]) -> String {
    let mut out = header.csv_line();
    out.push_str("t,chi,l2,weighting_gap\n");
    for s in series {
        let _ = writeln!(out, "{},{},{},{}", num(s.t), num(s.chi), num(s.l2), num(s.weighting_gap));
    }
    out
}

/// Rate table with columns `eps, sup_chi, slope_running`; the first row has
/// no running slope and leaves the field empty.
pub fn rate_table_csv(header: &Header, sweep: &SweepOutcome) -> String {
    let mut out = header.csv_line();
    let _ = writeln!(out, "# slope={} intercept={}", num(sweep.result.slope), num(sweep.result.intercept));
    out.push_str("eps,sup_chi,slope_running\n");
    for r in &sweep.result.rows {
        let slope = r.slope_running.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", num(r.eps), num(r.sup_chi), slope);
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// File name of snapshot `k`.
pub fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}.csv")
}
