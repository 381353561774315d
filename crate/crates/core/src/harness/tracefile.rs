//! CSV traces and JSON sidecars.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so parsing a
//! trace file returns the exact values. Absent values are empty fields.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runner::RunSet;
use crate::error::{Error, Result};

pub const HEADER: [&str; 10] = [
    "algo",
    "stage",
    "outer",
    "ifo",
    "eta",
    "mu",
    "rho",
    "grad_f_sq",
    "grad_surr_sq",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub algo: String,
    pub stage: usize,
    pub outer: usize,
    pub ifo: u64,
    pub eta: f64,
    pub mu: f64,
    pub rho: Option<f64>,
    pub grad_f_sq: f64,
    pub grad_surr_sq: Option<f64>,
    pub seed: u64,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Rows of every seed, sorted by `(seed, ifo)`; ties keep trace order.
pub fn rows(set: &RunSet) -> Vec<TraceRow> {
    let mut out: Vec<TraceRow> = set
        .runs
        .iter()
        .flat_map(|run| {
            run.trace.records.iter().map(move |r| TraceRow {
                algo: set.label.clone(),
                stage: r.stage,
                outer: r.outer,
                ifo: r.ifo,
                eta: r.eta,
                mu: r.mu,
                rho: r.rho,
                grad_f_sq: r.grad_f_sq,
                grad_surr_sq: r.grad_surr_sq,
                seed: run.seed,
            })
        })
        .collect();
    out.sort_by_key(|r| (r.seed, r.ifo));
    out
}

pub fn to_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algo.clone(),
            r.stage.to_string(),
            r.outer.to_string(),
            r.ifo.to_string(),
            fmt_f64(r.eta),
            fmt_f64(r.mu),
            fmt_opt(r.rho),
            fmt_f64(r.grad_f_sq),
            fmt_opt(r.grad_surr_sq),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().ne(HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected trace header".into(),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("bad {what}"),
        };
        let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(HEADER[i])) };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(TraceRow {
            algo: rec[0].to_string(),
            stage: rec[1].parse().map_err(|_| bad("stage"))?,
            outer: rec[2].parse().map_err(|_| bad("outer"))?,
            ifo: rec[3].parse().map_err(|_| bad("ifo"))?,
            eta: num(4)?,
            mu: num(5)?,
            rho: opt(6)?,
            grad_f_sq: num(7)?,
            grad_surr_sq: opt(8)?,
            seed: rec[9].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// Writes via a temp file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Config(format!("json: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Paths written for one run set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Writes `<dir>/<label>.csv` and `<dir>/<label>.json`.
pub fn write_run_set(set: &RunSet, dir: &Path, d: usize) -> Result<Written> {
    let csv = dir.join(format!("{}.csv", set.label));
    let json = dir.join(format!("{}.json", set.label));
    write_atomic(&csv, &to_csv(&rows(set))?)?;
    write_json(&json, &set.sidecar(d))?;
    Ok(Written { csv, json })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, ifo: u64, rho: Option<f64>) -> TraceRow {
        TraceRow {
            algo: "x".into(),
            stage: 1,
            outer: 2,
            ifo,
            eta: 0.1,
            mu: 1e-3,
            rho,
            grad_f_sq: std::f64::consts::PI * 1e-9,
            grad_surr_sq: None,
            seed,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row(0, 0, None),
            row(0, 5, Some(1.0 / 3.0)),
            row(1, 0, Some(f64::MIN_POSITIVE)),
        ];
        let bytes = to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("algo,stage,outer,ifo,eta,mu,rho,grad_f_sq,grad_surr_sq,seed\n"));
        assert!(text.contains("x,1,2,0,1.0000000000000001e-1,1.0000000000000000e-3,,"));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("t.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn header_mismatch_rejected() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
    }
}
