#![allow(dead_code)]

use std::io::Write;
use std::time::Duration;

use vropt::harness::config::DataSection;
use vropt::harness::data::{self, LoadedData};
use vropt::objective::LossKind;

/// a3a from `$VROPT_DATA_DIR` when present, the seeded synthetic set otherwise.
pub fn figure_data(loss: LossKind) -> LoadedData {
    data::load(&figure_section(loss)).expect("figure data")
}

pub fn figure_section(loss: LossKind) -> DataSection {
    DataSection {
        dataset: Some("a3a".into()),
        loss,
        ..Default::default()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// One verdict line, written past the test harness's output capture.
pub fn report(
    id: u32,
    name: &str,
    pass: bool,
    detail: &str,
    elapsed: Duration,
    limit: Duration,
) -> bool {
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    let line = format!(
        "acceptance {id:>2} {} {name}: {detail} [{:.2}s, limit {}s{}]\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}
