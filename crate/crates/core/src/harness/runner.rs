//! Executes one experiment config over its seeds.

use serde::{Deserialize, Serialize};

use super::config::{
    AdaGradSection, Algo, ExperimentConfig, GdSection, ModifiedBbSection, SarahSection, SgdSection,
};
use super::data::{self, DataSource, LoadedData};
use crate::error::{Error, Result};
use crate::meta::{run_meta, StageRecord};
use crate::objective::{LossKind, Objective, SmoothnessInfo};
use crate::optimizers::{
    adagrad_run, gd_run, sarah_run, sgd_run, AdaGradBatch, AdaGradConfig, EndGradient, GdConfig,
    Interval, ModifiedBbKind, RunResult, SarahConfig, SgdConfig, StepRule, Trace,
};
use crate::par::{self, ExecMode};

/// Outcome for one seed. A diverged run keeps its partial trace.
#[derive(Clone, Debug)]
pub struct SeedTrace {
    pub seed: u64,
    pub trace: Trace,
    pub diverged: Option<String>,
    /// Meta schemes only.
    pub stages: Vec<StageRecord>,
    /// Nonconvex scheme: stage drawn as the output.
    pub selected_stage: Option<usize>,
}

impl SeedTrace {
    /// `‖∇f‖²` at the last trace point.
    pub fn final_grad_f_sq(&self) -> Option<f64> {
        self.trace.final_grad_f_sq()
    }
}

#[derive(Clone, Debug)]
pub struct RunSet {
    pub label: String,
    pub algo: Algo,
    /// Components in the dataset; the plot's pass unit.
    pub n: usize,
    pub budget: u64,
    pub smoothness: SmoothnessInfo,
    pub source: DataSource,
    /// Config with every default filled in; re-running it reproduces the traces.
    pub resolved: ExperimentConfig,
    pub runs: Vec<SeedTrace>,
}

impl RunSet {
    pub fn diverged(&self) -> Option<&SeedTrace> {
        self.runs.iter().find(|r| r.diverged.is_some())
    }

    /// Median over seeds of the final `‖∇f‖²` (upper median for even counts).
    pub fn median_final(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .runs
            .iter()
            .filter_map(SeedTrace::final_grad_f_sq)
            .collect();
        median(v)
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

/// JSON sidecar contents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub config: ExperimentConfig,
    pub n: usize,
    pub d: usize,
    pub source: DataSource,
    pub smoothness: SmoothnessInfo,
    pub budget_ifo: u64,
    pub seeds: Vec<SeedSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_grad_f_sq: Option<f64>,
    pub diverged: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageRecord>,
}

impl RunSet {
    pub fn sidecar(&self, d: usize) -> Sidecar {
        Sidecar {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.resolved.clone(),
            n: self.n,
            d,
            source: self.source.clone(),
            smoothness: self.smoothness,
            budget_ifo: self.budget,
            seeds: self
                .runs
                .iter()
                .map(|r| SeedSummary {
                    seed: r.seed,
                    final_grad_f_sq: r.final_grad_f_sq(),
                    diverged: r.diverged.clone(),
                    selected_stage: r.selected_stage,
                    stages: r.stages.clone(),
                })
                .collect(),
        }
    }
}

/// Loads the data and runs every seed.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunSet> {
    cfg.validate()?;
    let loaded = data::load(&cfg.data)?;
    run_on(cfg, &loaded)
}

/// Fills in every default that depends on the data.
pub fn resolve(cfg: &ExperimentConfig, loaded: &LoadedData) -> Result<ExperimentConfig> {
    cfg.validate()?;
    let n = loaded.data.n();
    let info = loaded.objective().smoothness();
    let mut r = cfg.clone();
    r.experiment.budget = Some(cfg.budget_ifo(n)?);
    r.experiment.budget_passes = None;
    r.experiment.label = Some(cfg.label());
    r.data = loaded.resolved_section(cfg.data.dim);
    match cfg.experiment.algo {
        Algo::VanillaSarah | Algo::BbSarah => {
            let mut s = cfg.sarah.clone().unwrap_or_default();
            s.eta.get_or_insert(0.5 / info.l);
            s.m.get_or_insert(5 * n);
            if cfg.experiment.algo == Algo::BbSarah && s.lambda_kappa.is_none() {
                if !(info.mu_sc > 0.0) {
                    return Err(Error::Config(
                        "bb_sarah on an objective without a known strong-convexity modulus needs sarah.lambda_kappa"
                            .into(),
                    ));
                }
                s.lambda_kappa = Some(info.condition_number());
            }
            r.sarah = Some(s);
        }
        Algo::SingleReg | Algo::RrV1 | Algo::RrV2 | Algo::Ncvx => r.meta = Some(cfg.meta_config()),
        Algo::ModifiedBb => {
            let mut s = cfg.modified_bb.clone().unwrap_or_default();
            let m = *s.m.get_or_insert(n);
            let lambda = *s.lambda.get_or_insert(1.0 / (m as f64).sqrt());
            s.kind.get_or_insert(match loaded.loss {
                LossKind::Logistic => ModifiedBbKind::Convex,
                LossKind::SigmoidSq => ModifiedBbKind::Nonconvex,
            });
            s.eta_init
                .get_or_insert(1.0 / (m as f64 * (info.l + lambda)));
            r.modified_bb = Some(s);
        }
        Algo::Adagrad => r.adagrad = Some(cfg.adagrad.clone().unwrap_or_default()),
        Algo::Gd => {
            let mut s = cfg.gd.clone().unwrap_or_default();
            s.eta.get_or_insert(1.0 / info.l);
            r.gd = Some(s);
        }
        Algo::Sgd => {
            let mut s = cfg.sgd.clone().unwrap_or_default();
            s.eta0.get_or_insert(1.0 / info.l);
            r.sgd = Some(s);
        }
    }
    Ok(r)
}

pub fn run_on(cfg: &ExperimentConfig, loaded: &LoadedData) -> Result<RunSet> {
    run_on_with(cfg, loaded, ExecMode::default())
}

/// As [`run_on`], with seeds run in `mode`.
pub fn run_on_with(cfg: &ExperimentConfig, loaded: &LoadedData, mode: ExecMode) -> Result<RunSet> {
    let resolved = resolve(cfg, loaded)?;
    let runs = par::map_ordered(resolved.experiment.seeds.clone(), mode, |seed| {
        run_seed(&resolved, loaded, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RunSet {
        label: resolved.label(),
        algo: resolved.experiment.algo,
        n: loaded.data.n(),
        budget: resolved.experiment.budget.unwrap_or_default(),
        smoothness: loaded.objective().smoothness(),
        source: loaded.source.clone(),
        resolved,
        runs,
    })
}

fn plain(seed: u64, r: Result<RunResult>) -> Result<SeedTrace> {
    match r {
        Ok(r) => Ok(SeedTrace {
            seed,
            trace: r.trace,
            diverged: None,
            stages: Vec::new(),
            selected_stage: None,
        }),
        Err(e) => diverged(seed, e),
    }
}

fn diverged(seed: u64, e: Error) -> Result<SeedTrace> {
    match e {
        Error::Diverged { ifo, reason, trace } => Ok(SeedTrace {
            seed,
            trace: *trace,
            diverged: Some(format!("{reason} at {ifo} IFO")),
            stages: Vec::new(),
            selected_stage: None,
        }),
        other => Err(other),
    }
}

/// One seed of a resolved config, on a fresh objective.
fn run_seed(cfg: &ExperimentConfig, loaded: &LoadedData, seed: u64) -> Result<SeedTrace> {
    let obj = loaded.objective();
    let n = obj.n();
    let info = obj.smoothness();
    let budget = cfg.experiment.budget.unwrap_or_default();
    let x0 = vec![cfg.experiment.x0; obj.dim()];
    let sarah = |eta: f64, m: usize, snapshot, step, clamp, grad_tol| SarahConfig {
        eta_init: eta,
        m,
        outer_loops: usize::MAX,
        snapshot,
        seed,
        step,
        clamp,
        grad_tol,
        ifo_budget: Some(budget),
        end_gradient: EndGradient::Probe,
    };
    match cfg.experiment.algo {
        Algo::VanillaSarah | Algo::BbSarah => {
            let s: &SarahSection = cfg.sarah.as_ref().expect("resolved");
            let (eta, m) = (s.eta.expect("resolved"), s.m.expect("resolved"));
            let (step, clamp) = match (cfg.experiment.algo, s.lambda_kappa) {
                (Algo::BbSarah, Some(lk)) => (
                    StepRule::Bb { lambda_kappa: lk },
                    (info.mu_sc > 0.0).then(|| Interval::bb(lk, info.mu_sc, info.l)),
                ),
                _ => (StepRule::Fixed, None),
            };
            plain(
                seed,
                sarah_run(
                    &obj,
                    &x0,
                    &sarah(eta, m, s.snapshot, step, clamp, s.grad_tol),
                ),
            )
        }
        Algo::ModifiedBb => {
            let s: &ModifiedBbSection = cfg.modified_bb.as_ref().expect("resolved");
            let (m, lambda) = (s.m.expect("resolved"), s.lambda.expect("resolved"));
            let step = StepRule::ModifiedBb {
                kind: s.kind.expect("resolved"),
                m,
                lambda,
            };
            plain(
                seed,
                sarah_run(
                    &obj,
                    &x0,
                    &sarah(
                        s.eta_init.expect("resolved"),
                        m,
                        s.snapshot,
                        step,
                        None,
                        None,
                    ),
                ),
            )
        }
        Algo::SingleReg | Algo::RrV1 | Algo::RrV2 | Algo::Ncvx => {
            let mut mc = cfg.meta_config();
            mc.seed = seed;
            mc.ifo_budget = Some(budget);
            match run_meta(&obj, &x0, &mc) {
                Ok(r) => Ok(SeedTrace {
                    seed,
                    trace: r.run.trace,
                    diverged: None,
                    stages: r.stages,
                    selected_stage: r.selected_stage,
                }),
                Err(e) => diverged(seed, e),
            }
        }
        Algo::Adagrad => {
            let s: &AdaGradSection = cfg.adagrad.as_ref().expect("resolved");
            let iters = match s.batch {
                AdaGradBatch::Single => budget,
                AdaGradBatch::Full => budget / n as u64,
            } as usize;
            let c = AdaGradConfig {
                alpha: s.alpha,
                eps0: s.eps0,
                iters,
                batch: s.batch,
                seed,
                end_gradient: EndGradient::Probe,
            };
            plain(seed, adagrad_run(&obj, &x0, &c))
        }
        Algo::Gd => {
            let s: &GdSection = cfg.gd.as_ref().expect("resolved");
            let c = GdConfig {
                eta: s.eta.expect("resolved"),
                iters: (budget / n as u64) as usize,
                end_gradient: EndGradient::Probe,
            };
            plain(seed, gd_run(&obj, &x0, &c))
        }
        Algo::Sgd => {
            let s: &SgdSection = cfg.sgd.as_ref().expect("resolved");
            let c = SgdConfig {
                eta0: s.eta0.expect("resolved"),
                iters: budget as usize,
                schedule: s.schedule,
                seed,
                monitor_every: None,
                end_gradient: EndGradient::Probe,
            };
            plain(seed, sgd_run(&obj, &x0, &c))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SyntheticSpec;

    fn small(algo: Algo) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(algo);
        c.experiment.budget_passes = Some(6.0);
        c.experiment.seeds = vec![3, 1];
        c.data.synthetic = Some(SyntheticSpec {
            n: 60,
            d: 6,
            seed: 2,
        });
        c
    }

    #[test]
    fn every_algo_runs_within_budget() {
        for algo in [
            Algo::VanillaSarah,
            Algo::SingleReg,
            Algo::RrV1,
            Algo::RrV2,
            Algo::ModifiedBb,
            Algo::Adagrad,
            Algo::Gd,
            Algo::Sgd,
        ] {
            let rs = run_config(&small(algo)).unwrap();
            assert_eq!(rs.runs.len(), 2);
            assert_eq!(rs.runs[0].seed, 3);
            for r in &rs.runs {
                assert!(r.diverged.is_none(), "{algo:?}");
                assert!(r.trace.ifo_is_monotone(), "{algo:?}");
                let last = r.trace.last().unwrap();
                assert!(
                    last.ifo <= rs.budget,
                    "{algo:?}: {} > {}",
                    last.ifo,
                    rs.budget
                );
                assert!(last.grad_f_sq.is_finite());
            }
        }
    }

    #[test]
    fn bb_sarah_needs_lambda_without_strong_convexity() {
        assert!(matches!(
            run_config(&small(Algo::BbSarah)),
            Err(Error::Config(_))
        ));
        let mut c = small(Algo::BbSarah);
        c.sarah = Some(SarahSection {
            lambda_kappa: Some(4.0),
            ..Default::default()
        });
        assert!(run_config(&c).is_ok());
    }

    #[test]
    fn ncvx_on_sigmoidsq() {
        let mut c = small(Algo::Ncvx);
        c.data.loss = LossKind::SigmoidSq;
        let rs = run_config(&c).unwrap();
        assert!(rs.runs.iter().all(|r| r.selected_stage.is_some()));
    }

    #[test]
    fn resolved_config_reruns_identically() {
        let rs = run_config(&small(Algo::RrV2)).unwrap();
        let again = run_config(&rs.resolved).unwrap();
        assert_eq!(again.resolved, rs.resolved);
        for (a, b) in rs.runs.iter().zip(&again.runs) {
            assert_eq!(a.trace, b.trace);
        }
    }
}
