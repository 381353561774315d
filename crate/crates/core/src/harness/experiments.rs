//! Figure presets: the plateau comparison over a μ grid, the convex method
//! comparison and the nonconvex method comparison. Each preset is a list
//! of ordinary experiment configs sharing data, seeds and budget.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{AdaGradSection, Algo, DataSection, ExperimentConfig};
use super::data::{self, LoadedData};
use super::runner::{run_on, RunSet};
use crate::error::{Error, Result};
use crate::meta::{MetaConfig, Subsolver};
use crate::objective::LossKind;
use crate::par::{self, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Single regularizer over a μ grid.
    Fig1,
    /// Convex panel: vanilla SARAH, single, recursive v1 and v2.
    Fig2a,
    /// Nonconvex panel: moving-anchor scheme with BB, modified BB, tuned AdaGrad.
    Fig2b,
}

impl Preset {
    pub fn id(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
        }
    }

    pub fn default_passes(self) -> f64 {
        match self {
            Preset::Fig1 => 200.0,
            Preset::Fig2a | Preset::Fig2b => 100.0,
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            Preset::Fig2b => LossKind::SigmoidSq,
            _ => LossKind::Logistic,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Preset::Fig1 => "Single regularizer: plateau vs mu",
            Preset::Fig2a => "Convex: logistic loss",
            Preset::Fig2b => "Nonconvex: sigmoid-squared loss",
        }
    }
}

pub const FIG1_MUS: [f64; 3] = [1e-3, 1e-4, 1e-5];
pub const ADAGRAD_ALPHAS: [f64; 3] = [0.01, 0.1, 1.0];
pub const ADAGRAD_EPS0S: [f64; 3] = [1e-8, 1e-6, 1e-4];

#[derive(Clone, Debug)]
pub struct PresetOptions {
    /// `loss` is overridden by the preset.
    pub data: DataSection,
    pub seeds: Vec<u64>,
    pub passes: Option<f64>,
    pub output: PathBuf,
    /// μ grid of the `fig1` preset.
    pub mus: Vec<f64>,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            data: ExperimentConfig::new(Algo::Gd).data,
            seeds: (0..5).collect(),
            passes: None,
            output: PathBuf::from("out"),
            mus: FIG1_MUS.to_vec(),
        }
    }
}

fn base(algo: Algo, label: String, preset: Preset, opts: &PresetOptions) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(algo);
    c.experiment.label = Some(label);
    c.experiment.budget_passes = Some(opts.passes.unwrap_or(preset.default_passes()));
    c.experiment.seeds = opts.seeds.clone();
    c.experiment.output = opts.output.clone();
    c.data = DataSection {
        loss: preset.loss(),
        ..opts.data.clone()
    };
    c
}

fn meta(algo: Algo, m: MetaConfig, opts: &PresetOptions, preset: Preset) -> ExperimentConfig {
    let mut c = base(algo, algo.id().to_string(), preset, opts);
    c.meta = Some(MetaConfig {
        scheme: algo.scheme().expect("meta algo"),
        ..m
    });
    c
}

/// Configs of a preset, excluding the AdaGrad grid of `fig2b`.
pub fn configs(preset: Preset, opts: &PresetOptions) -> Vec<ExperimentConfig> {
    match preset {
        Preset::Fig1 => opts
            .mus
            .iter()
            .map(|&mu| {
                let mut c = base(Algo::SingleReg, format!("single_mu{mu:e}"), preset, opts);
                c.meta = Some(MetaConfig {
                    mu: Some(mu),
                    ..MetaConfig::default()
                });
                c
            })
            .collect(),
        Preset::Fig2a => vec![
            base(
                Algo::VanillaSarah,
                Algo::VanillaSarah.id().into(),
                preset,
                opts,
            ),
            meta(Algo::SingleReg, MetaConfig::default(), opts, preset),
            meta(Algo::RrV1, MetaConfig::default(), opts, preset),
            meta(Algo::RrV2, MetaConfig::default(), opts, preset),
        ],
        Preset::Fig2b => vec![
            meta(
                Algo::Ncvx,
                MetaConfig {
                    subsolver: Subsolver::SarahBb,
                    ..MetaConfig::default()
                },
                opts,
                preset,
            ),
            base(Algo::ModifiedBb, Algo::ModifiedBb.id().into(), preset, opts),
        ],
    }
}

/// The 9-point AdaGrad (α, eps0) grid.
pub fn adagrad_grid(opts: &PresetOptions) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for alpha in ADAGRAD_ALPHAS {
        for eps0 in ADAGRAD_EPS0S {
            let mut c = base(
                Algo::Adagrad,
                format!("adagrad_a{alpha:e}_e{eps0:e}"),
                Preset::Fig2b,
                opts,
            );
            c.adagrad = Some(AdaGradSection {
                alpha,
                eps0,
                ..Default::default()
            });
            out.push(c);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct GridPoint {
    pub alpha: f64,
    pub eps0: f64,
    pub median_final: f64,
}

#[derive(Clone, Debug)]
pub struct FigureRuns {
    pub preset: Preset,
    pub data: LoadedData,
    pub sets: Vec<RunSet>,
    /// AdaGrad grid medians (`fig2b` only).
    pub tuning: Vec<GridPoint>,
}

impl FigureRuns {
    pub fn set(&self, label: &str) -> Option<&RunSet> {
        self.sets.iter().find(|s| s.label == label)
    }
}

/// Runs configs concurrently, seeds within each config too.
pub fn run_all(cfgs: &[ExperimentConfig], data: &LoadedData) -> Result<Vec<RunSet>> {
    par::map_ordered(cfgs.to_vec(), ExecMode::default(), |c| run_on(&c, data))
        .into_iter()
        .collect()
}

pub fn run_preset(preset: Preset, opts: &PresetOptions) -> Result<FigureRuns> {
    let data = data::load(&DataSection {
        loss: preset.loss(),
        ..opts.data.clone()
    })?;
    run_preset_on(preset, opts, data)
}

pub fn run_preset_on(preset: Preset, opts: &PresetOptions, data: LoadedData) -> Result<FigureRuns> {
    if data.loss != preset.loss() {
        return Err(Error::Config(format!(
            "{} needs the {:?} loss",
            preset.id(),
            preset.loss()
        )));
    }
    let mut sets = run_all(&configs(preset, opts), &data)?;
    let mut tuning = Vec::new();
    if preset == Preset::Fig2b {
        let grid = run_all(&adagrad_grid(opts), &data)?;
        let mut best: Option<(f64, RunSet)> = None;
        for set in grid {
            let a = set.resolved.adagrad.clone().unwrap_or_default();
            let med = set.median_final().unwrap_or(f64::INFINITY);
            tuning.push(GridPoint {
                alpha: a.alpha,
                eps0: a.eps0,
                median_final: med,
            });
            if best.as_ref().is_none_or(|(b, _)| med < *b) {
                best = Some((med, set));
            }
        }
        let (_, mut tuned) = best.expect("non-empty grid");
        tuned.label = "adagrad".into();
        tuned.resolved.experiment.label = Some("adagrad".into());
        sets.push(tuned);
    }
    Ok(FigureRuns {
        preset,
        data,
        sets,
        tuning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SyntheticSpec;

    #[test]
    fn preset_configs_validate() {
        let opts = PresetOptions::default();
        for p in [Preset::Fig1, Preset::Fig2a, Preset::Fig2b] {
            for c in configs(p, &opts).iter().chain(&adagrad_grid(&opts)) {
                c.validate().unwrap();
            }
        }
        assert_eq!(adagrad_grid(&opts).len(), 9);
        assert_eq!(configs(Preset::Fig1, &opts)[0].label(), "single_mu1e-3");
    }

    #[test]
    fn fig2b_picks_best_grid_point() {
        let opts = PresetOptions {
            data: DataSection {
                synthetic: Some(SyntheticSpec {
                    n: 40,
                    d: 5,
                    seed: 1,
                }),
                ..Default::default()
            },
            seeds: vec![0, 1, 2],
            passes: Some(4.0),
            ..Default::default()
        };
        let fr = run_preset(Preset::Fig2b, &opts).unwrap();
        assert_eq!(fr.tuning.len(), 9);
        let best = fr
            .tuning
            .iter()
            .map(|g| g.median_final)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(fr.set("adagrad").unwrap().median_final(), Some(best));
        assert_eq!(fr.sets.len(), 3);
    }
}
