//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 config or data error, 2 divergence (traces are
//! still written), 3 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{set_toml_key, ExperimentConfig};
use super::data;
use super::experiments::{self, Preset, PresetOptions};
use super::plot;
use super::runner::{run_on, RunSet, Sidecar};
use super::tracefile::{self, write_json};
use crate::dataset::load_libsvm;
use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "vropt", version, about = "SARAH/BB optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one experiment (TOML config or a JSON sidecar from an earlier run).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `experiment.output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter grid from a config's `[sweep]` section, or a figure preset.
    Sweep(SweepArgs),
    /// Render trace files in a directory as an SVG plot.
    Plot {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Convergence")]
        title: String,
    },
    /// Check a LIBSVM file and print its shape.
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Preset data: dataset name under $VROPT_DATA_DIR (synthetic fallback).
    #[arg(long)]
    dataset: Option<String>,
    /// Preset data: LIBSVM file.
    #[arg(long, conflicts_with = "dataset")]
    data: Option<PathBuf>,
    /// Preset budget in effective passes.
    #[arg(long)]
    passes: Option<f64>,
    /// Preset seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged { .. } => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Run { config, out } => {
            let cfg = load_config(&config)?;
            run_and_write(&[cfg], out.as_deref())
        }
        Cmd::Sweep(args) => sweep(args),
        Cmd::Plot { traces, out, title } => {
            plot::plot_dir(&traces, &out, &title)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Cmd::Validate { data } => {
            let d = load_libsvm(&data)?;
            d.validate()?;
            println!("n={} d={}", d.n(), d.dim());
            Ok(0)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// TOML config, or the `config` field of a JSON sidecar.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let side: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if side.version != env!("CARGO_PKG_VERSION") {
            eprintln!(
                "warning: sidecar written by version {}, running {}",
                side.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        side.config.validate()?;
        return Ok(side.config);
    }
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if table.remove("sweep").is_some() {
        return Err(Error::Config("[sweep] belongs to `vropt sweep`".into()));
    }
    let cfg: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Expands `[sweep] param = "meta.mu", values = [...]` into one config per
/// value; labels get a `_<key><value>` suffix. Without `[sweep]`, just the
/// config itself.
pub fn sweep_configs(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let Some(sweep) = table.remove("sweep") else {
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        return Ok(vec![cfg]);
    };
    let sweep = sweep
        .as_table()
        .ok_or_else(|| Error::Config("[sweep] must be a table".into()))?;
    let param = sweep
        .get("param")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("sweep.param must be a dotted key string".into()))?;
    let values = sweep
        .get("values")
        .and_then(|v| v.as_array())
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::Config("sweep.values must be a non-empty array".into()))?;
    if let Some(k) = sweep.keys().find(|k| *k != "param" && *k != "values") {
        return Err(Error::Config(format!("unknown key sweep.{k}")));
    }
    let short = param.rsplit('.').next().unwrap_or(param);
    let mut out = Vec::new();
    for v in values {
        let mut t = table.clone();
        set_toml_key(&mut t, param, v.clone())?;
        let mut cfg: ExperimentConfig = t
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let shown = match v {
            toml::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        cfg.experiment.label = Some(format!("{}_{short}{shown}", cfg.label()));
        cfg.validate()?;
        out.push(cfg);
    }
    Ok(out)
}

fn sweep(args: SweepArgs) -> Result<i32> {
    if let Some(path) = &args.config {
        let cfgs = sweep_configs(&read(path)?)?;
        return run_and_write(&cfgs, args.out.as_deref());
    }
    let preset = args.preset.expect("clap enforces config or preset");
    let mut opts = PresetOptions::default();
    if let Some(name) = args.dataset {
        opts.data.dataset = Some(name);
    }
    if let Some(p) = args.data {
        opts.data.path = Some(p);
    }
    opts.passes = args.passes;
    if let Some(s) = args.seeds {
        opts.seeds = s;
    }
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(preset.id()));
    opts.output = out.clone();
    let fr = experiments::run_preset(preset, &opts)?;
    let d = fr.data.data.dim();
    let code = write_sets(&fr.sets, &out, d)?;
    if !fr.tuning.is_empty() {
        write_json(&out.join("adagrad_grid.json"), &grid_json(&fr.tuning))?;
    }
    let svg = out.join(format!("{}.svg", preset.id()));
    plot::plot_dir(&out, &svg, preset.title())?;
    println!("wrote {}", svg.display());
    Ok(code)
}

fn grid_json(tuning: &[experiments::GridPoint]) -> serde_json::Value {
    serde_json::Value::Array(
        tuning
            .iter()
            .map(|g| serde_json::json!({"alpha": g.alpha, "eps0": g.eps0, "median_final_grad_f_sq": g.median_final}))
            .collect(),
    )
}

fn run_and_write(cfgs: &[ExperimentConfig], out: Option<&Path>) -> Result<i32> {
    let mut code = 0;
    for cfg in cfgs {
        let loaded = data::load(&cfg.data)?;
        let set = run_on(cfg, &loaded)?;
        let dir = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| cfg.experiment.output.clone());
        code = code.max(write_sets(
            std::slice::from_ref(&set),
            &dir,
            loaded.data.dim(),
        )?);
    }
    Ok(code)
}

/// Writes traces and prints one summary line per set; 2 if any seed diverged.
fn write_sets(sets: &[RunSet], dir: &Path, d: usize) -> Result<i32> {
    let mut code = 0;
    for set in sets {
        let w = tracefile::write_run_set(set, dir, d)?;
        match set.diverged() {
            Some(r) => {
                eprintln!(
                    "{}: seed {} diverged ({}); partial trace in {}",
                    set.label,
                    r.seed,
                    r.diverged.as_deref().unwrap_or(""),
                    w.csv.display()
                );
                code = 2;
            }
            None => println!(
                "{}: median final |grad f|^2 = {:.3e} over {} seeds -> {}",
                set.label,
                set.median_final().unwrap_or(f64::NAN),
                set.runs.len(),
                w.csv.display()
            ),
        }
    }
    Ok(code)
}
