//! Static SVG convergence plots: `‖∇f‖²` on a log axis against effective
//! passes. Output depends only on the trace files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::tracefile::{read_csv, write_atomic};
use crate::error::{Error, Result};

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// One polyline; curves sharing a label share a colour and legend entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Roughly five round ticks covering `[0, hi]`.
fn x_ticks(hi: f64) -> Vec<f64> {
    if !(hi > 0.0) {
        return vec![0.0];
    }
    let raw = hi / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    (0..)
        .map(|k| k as f64 * step)
        .take_while(|t| *t <= hi * (1.0 + 1e-9))
        .collect()
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

pub fn render_svg(title: &str, x_label: &str, series: &[Series]) -> String {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
    };
    let x_max = pts().map(|p| p.0).fold(0.0f64, f64::max);
    let (lo, hi) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let l = p.1.log10();
        (lo.min(l), hi.max(l))
    });
    let (y_lo, mut y_hi) = if lo.is_finite() {
        (lo.floor(), hi.ceil())
    } else {
        (-1.0, 0.0)
    };
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let x_hi = if x_max > 0.0 { x_max } else { 1.0 };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + pw * x / x_hi;
    let sy = |y: f64| TOP + ph * (y_hi - y.log10()) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for t in x_ticks(x_hi) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 18.0,
            fmt_tick(t)
        );
    }
    let decades = (y_hi - y_lo) as i64;
    let every = (decades / 10 + 1).max(1);
    for k in 0..=decades {
        if k % every != 0 {
            continue;
        }
        let e = y_lo as i64 + k;
        let y = sy(10f64.powi(e as i32));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 16.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(20,{:.1}) rotate(-90)" text-anchor="middle">squared gradient norm (log scale)</text>"#,
        TOP + ph / 2.0
    );

    let mut labels: Vec<&str> = Vec::new();
    for ser in series {
        if !labels.contains(&ser.label.as_str()) {
            labels.push(&ser.label);
        }
        let colour =
            PALETTE[labels.iter().position(|l| *l == ser.label).unwrap_or(0) % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" stroke-opacity="0.8" points="{}"/>"#,
            path.join(" ")
        );
    }
    for (k, label) in labels.iter().enumerate() {
        let y = TOP + 14.0 + 20.0 * k as f64;
        let x = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 24.0,
            PALETTE[k % PALETTE.len()],
            x + 30.0,
            y + 4.0,
            esc(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn sidecar_n(csv: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(csv.with_extension("json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("n")?.as_f64().filter(|n| *n > 0.0)
}

/// One series per (trace file, seed), in file-name then seed order. The x
/// axis is effective passes when every file has a sidecar giving `n`, raw
/// IFOs otherwise.
pub fn series_from_dir(dir: &Path) -> Result<(Vec<Series>, String)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no trace files in {}",
            dir.display()
        )));
    }
    let ns: Vec<Option<f64>> = files.iter().map(|f| sidecar_n(f)).collect();
    let passes = ns.iter().all(Option::is_some);
    let mut out = Vec::new();
    for (f, n) in files.iter().zip(ns) {
        let scale = if passes { n.unwrap_or(1.0) } else { 1.0 };
        let rows = read_csv(f)?;
        let mut k = 0;
        while k < rows.len() {
            let seed = rows[k].seed;
            let end = k + rows[k..].iter().take_while(|r| r.seed == seed).count();
            out.push(Series {
                label: rows[k].algo.clone(),
                points: rows[k..end]
                    .iter()
                    .map(|r| (r.ifo as f64 / scale, r.grad_f_sq))
                    .collect(),
            });
            k = end;
        }
    }
    let x_label = if passes {
        "effective passes (IFO / n)"
    } else {
        "IFO"
    };
    Ok((out, x_label.to_string()))
}

pub fn plot_dir(dir: &Path, out: &Path, title: &str) -> Result<()> {
    let (series, x_label) = series_from_dir(dir)?;
    write_atomic(out, render_svg(title, &x_label, &series).as_bytes())
}
