use serde::{Deserialize, Serialize};

use super::params::{theorem_params, StageParams, StageSetting};
use super::{MetaConfig, Scheme, Subsolver};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::objective::Objective;
use crate::optimizers::{
    sarah_with, EndGradient, RunResult, SarahCall, SarahConfig, StepRule, StopReason, Trace,
    TraceRecord,
};
use crate::rng::{self, RunRng};
use crate::surrogate::{carry_over_grad, make_anchored, true_grad_from_surrogate, NextAnchor};

/// Summary of one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub s: usize,
    pub mu: f64,
    /// Stage whose output anchors this surrogate (0 = `x₀`).
    pub anchor_stage: usize,
    pub k_used: usize,
    /// `‖∇f̃_s(x̃_s)‖² / ‖∇f̃_s(x̃_{s−1})‖²`.
    pub rho: Option<f64>,
    /// `‖∇f(x̃_s)‖²`.
    pub grad_f_sq: f64,
    /// `‖∇f̃_s(x̃_s)‖²`.
    pub grad_surr_sq: f64,
    pub ifo: u64,
    pub eta_last: f64,
    pub flagged: bool,
    #[serde(skip)]
    pub x_end: Vec<f64>,
}

/// Outcome of a driver run.
#[derive(Clone, Debug)]
pub struct MetaRun {
    pub run: RunResult,
    pub stages: Vec<StageRecord>,
    pub params: StageParams,
    /// Start gradient handed to each stage (`∇f̃_s(x̃_{s−1})`), obtained
    /// without oracle calls after the first.
    pub start_grads: Vec<Vec<f64>>,
    /// Nonconvex scheme: stage whose output was returned.
    pub selected_stage: Option<usize>,
    /// Output of the last stage.
    pub last_x: Vec<f64>,
}

impl MetaRun {
    /// Lowest `‖∇f(x̃_s)‖²` over stage outputs.
    pub fn best_grad_f_sq(&self) -> Option<f64> {
        self.stages
            .iter()
            .map(|s| s.grad_f_sq)
            .min_by(f64::total_cmp)
    }
}

/// State threaded through the stages of one run.
struct Driver<'o, O: Objective + ?Sized> {
    base: &'o O,
    cfg: &'o MetaConfig,
    params: StageParams,
    rng: RunRng,
    origin: u64,
    probes: u64,
    trace: Trace,
    stages: Vec<StageRecord>,
    start_grads: Vec<Vec<f64>>,
}

struct StageOut {
    run: RunResult,
    /// `∇f̃_s(x̃_s)`.
    grad: Vec<f64>,
}

impl<'o, O: Objective + ?Sized> Driver<'o, O> {
    fn axis(&self) -> u64 {
        self.base.counter().read() - self.origin - self.probes
    }

    #[allow(clippy::too_many_arguments)]
    fn run_stage(
        &mut self,
        stage: usize,
        anchor: &[f64],
        set: StageSetting,
        x_start: &[f64],
        start_grad: Vec<f64>,
        outer_loops: usize,
        grad_tol: Option<f64>,
        eta_init: f64,
    ) -> Result<Option<StageOut>> {
        let surr = make_anchored(self.base, anchor.to_vec(), set.mu)?;
        let (step, clamp) = match self.cfg.subsolver {
            Subsolver::SarahFixed => (StepRule::Fixed, None),
            Subsolver::SarahBb => (
                StepRule::Bb {
                    lambda_kappa: set.lambda_kappa,
                },
                self.cfg.clamp_bb.then(|| set.bb_interval()),
            ),
        };
        let scfg = SarahConfig {
            eta_init,
            m: set.m,
            outer_loops,
            snapshot: self.cfg.snapshot,
            seed: self.cfg.seed,
            step,
            clamp,
            grad_tol,
            ifo_budget: self.cfg.ifo_budget,
            end_gradient: EndGradient::Work,
        };
        self.start_grads.push(start_grad.clone());
        let call = SarahCall {
            rng: &mut self.rng,
            start_grad: Some(start_grad),
            stage,
            origin: self.origin,
            probes_before: self.probes,
        };
        let run = match sarah_with(&surr, x_start, &scfg, call, |_, _, _| {}) {
            Ok(r) => r,
            Err(Error::Diverged { ifo, reason, trace }) => {
                let mut all = std::mem::take(&mut self.trace);
                all.extend(*trace);
                return Err(Error::Diverged {
                    ifo,
                    reason: format!("stage {stage}: {reason}"),
                    trace: Box::new(all),
                });
            }
            Err(e) => return Err(e),
        };
        self.probes += run.probe_ifo;
        self.trace.extend(run.trace.clone());
        if run.loops_run == 0 {
            return Ok(None);
        }
        let grad = run
            .final_grad
            .clone()
            .expect("subsolver returns its end gradient");
        Ok(Some(StageOut { run, grad }))
    }

    /// Records the stage and returns `‖∇f(x̃_s)‖²`.
    fn close_stage(
        &mut self,
        s: usize,
        anchor_stage: usize,
        mu: f64,
        out: &StageOut,
        rho: Option<f64>,
        flagged: bool,
    ) -> f64 {
        let last = self.trace.last().cloned().unwrap_or_default();
        if let Some(r) = rho {
            if let Some(rec) = self.trace.records.last_mut() {
                rec.rho = Some(r);
            }
        }
        self.stages.push(StageRecord {
            s,
            mu,
            anchor_stage,
            k_used: out.run.loops_run,
            rho,
            grad_f_sq: last.grad_f_sq,
            grad_surr_sq: norm_sq(&out.grad),
            ifo: last.ifo,
            eta_last: out.run.last_eta,
            flagged,
            x_end: out.run.x_out.clone(),
        });
        last.grad_f_sq
    }

    fn finish(
        mut self,
        x_out: Vec<f64>,
        last_x: Vec<f64>,
        final_grad: Option<Vec<f64>>,
        last_eta: f64,
        ended_on_work_grad: bool,
        selected_stage: Option<usize>,
    ) -> MetaRun {
        // the gradient at the final output serves no further stage: report it as a probe
        if ended_on_work_grad {
            if let Some(rec) = self.trace.records.last_mut() {
                if !rec.probe {
                    rec.probe = true;
                    self.probes += self.base.n() as u64;
                }
            }
        }
        let loops = self.stages.iter().map(|s| s.k_used).sum();
        let stop = match self.cfg.ifo_budget {
            Some(b) if self.axis() + self.base.n() as u64 > b => StopReason::Budget,
            _ => StopReason::Completed,
        };
        MetaRun {
            run: RunResult {
                x_out,
                trace: self.trace,
                ifo_total: self.base.counter().read() - self.origin,
                probe_ifo: self.probes,
                final_grad,
                last_eta,
                loops_run: loops,
                stop,
            },
            stages: self.stages,
            params: self.params,
            start_grads: self.start_grads,
            selected_stage,
            last_x,
        }
    }
}

fn ended_on_work_grad(r: &RunResult) -> bool {
    r.stop != StopReason::Tolerance && r.loops_run > 0 && r.trace.last().is_some_and(|t| !t.probe)
}

/// Sets up the driver: validates, computes `∇f(x₀)` (n IFO, reused as the
/// first stage's starting gradient) and records the starting point.
fn start<'o, O: Objective + ?Sized>(
    base: &'o O,
    x0: &[f64],
    cfg: &'o MetaConfig,
    scheme: Scheme,
) -> Result<(Driver<'o, O>, Vec<f64>)> {
    if cfg.scheme != scheme {
        return Err(Error::invalid(format!(
            "config scheme {:?} does not match driver {scheme:?}",
            cfg.scheme
        )));
    }
    cfg.validate()?;
    check_dim(base.dim(), x0.len())?;
    let info = base.smoothness();
    let origin = base.counter().read();
    let g0 = base.full_grad(x0)?;
    let r_hat = norm(&g0) / info.l;
    let params = theorem_params(cfg, info.l, info.sigma_bn, Some(base.n()), Some(r_hat))?;
    let mut trace = Trace::default();
    trace.push(TraceRecord {
        stage: 0,
        outer: 0,
        ifo: 0,
        eta: params.eta,
        mu: params.mu,
        grad_f_sq: norm_sq(&g0),
        grad_surr_sq: Some(norm_sq(&g0)),
        ..Default::default()
    });
    let driver = Driver {
        base,
        cfg,
        params,
        rng: rng::stream(cfg.seed, 0),
        origin,
        probes: 0,
        trace,
        stages: Vec::new(),
        start_grads: Vec::new(),
    };
    Ok((driver, g0))
}

/// One surrogate `f + (μ/2)‖x − x₀‖²`, solved until `‖∇f̃‖² ≤ ε` or the
/// outer-loop cap.
pub fn run_single_reg<O: Objective + ?Sized>(
    base: &O,
    x0: &[f64],
    cfg: &MetaConfig,
) -> Result<MetaRun> {
    let (mut d, g0) = start(base, x0, cfg, Scheme::Single)?;
    let set = d.params.setting(d.params.mu);
    let k = d.params.k_first;
    let out = d.run_stage(1, x0, set, x0, g0.clone(), k, Some(cfg.epsilon), set.eta)?;
    let Some(out) = out else {
        return Ok(d.finish(x0.to_vec(), x0.to_vec(), Some(g0), set.eta, false, None));
    };
    d.close_stage(1, 0, set.mu, &out, None, false);
    if out.run.stop == StopReason::Completed && norm_sq(&out.grad) > cfg.epsilon {
        d.trace
            .flags
            .push(format!("outer-loop cap {k} reached before ‖∇f̃‖² ≤ ε"));
    }
    let fg = true_grad_from_surrogate(&out.grad, set.mu, &out.run.x_out, x0)?;
    let work = ended_on_work_grad(&out.run);
    let eta = out.run.last_eta;
    let x = out.run.x_out;
    Ok(d.finish(x.clone(), x, Some(fg), eta, work, None))
}

/// Fixed anchor `x₀`, weights `μ_s = max(μ₁γ^{s−1}, c_μ√ε)`.
pub fn run_recursive_v1<O: Objective + ?Sized>(
    base: &O,
    x0: &[f64],
    cfg: &MetaConfig,
) -> Result<MetaRun> {
    let (mut d, g0) = start(base, x0, cfg, Scheme::RecursiveV1)?;
    let mut x = x0.to_vec();
    let mut grad = g0.clone();
    let mut mu_prev = d.params.v1_mu(1);
    let mut last: Option<(StageOut, f64)> = None;
    for s in 1..=d.params.stages {
        let mu = d.params.v1_mu(s);
        let start_grad = if s == 1 {
            grad.clone()
        } else {
            carry_over_grad(&grad, mu_prev, &x, x0, NextAnchor::Fixed { anchor: x0, mu })?
        };
        let set = d.params.setting(mu);
        let (k, tol) = if s == 1 {
            (d.params.k_first, Some(cfg.c_k * cfg.epsilon))
        } else {
            (d.params.k_const, None)
        };
        let Some(out) = d.run_stage(s, x0, set, &x, start_grad, k, tol, set.eta)? else {
            break;
        };
        let gf = d.close_stage(s, 0, mu, &out, None, false);
        x.clone_from(&out.run.x_out);
        grad.clone_from(&out.grad);
        mu_prev = mu;
        let stop = out.run.stop;
        last = Some((out, mu));
        if gf <= cfg.epsilon || stop == StopReason::Budget {
            break;
        }
    }
    Ok(match last {
        Some((out, mu)) => {
            let fg = true_grad_from_surrogate(&out.grad, mu, &out.run.x_out, x0)?;
            let work = ended_on_work_grad(&out.run);
            let eta = out.run.last_eta;
            d.finish(x.clone(), x, Some(fg), eta, work, None)
        }
        None => {
            let eta = d.params.eta;
            d.finish(x.clone(), x, Some(g0), eta, false, None)
        }
    })
}

/// Moving anchor `x̃_{s−1}`.
///
/// By default each stage runs `k_const` outer loops, measures its
/// contraction `ρ_s`, and the next weight is `μ_{s+1} = μ_s·ρ_s` (so
/// `μ_s = μ₀·Π_{τ<s} ρ_τ`). With `rho_target = ρ` each stage instead runs
/// until `‖∇f̃_s‖²` has shrunk by `ρ` and `μ_s = μ₀ρ^s`.
pub fn run_recursive_v2<O: Objective + ?Sized>(
    base: &O,
    x0: &[f64],
    cfg: &MetaConfig,
) -> Result<MetaRun> {
    let (mut d, g0) = start(base, x0, cfg, Scheme::RecursiveV2)?;
    let mut x = x0.to_vec();
    // ∇f(x̃_{s−1}) = ∇f̃_s(x̃_{s−1})
    let mut anchor_grad = g0.clone();
    let mut mu = d.params.mu;
    let mut last: Option<(StageOut, f64, Vec<f64>)> = None;
    for s in 1..=d.params.stages {
        let start_sq = norm_sq(&anchor_grad);
        if start_sq == 0.0 {
            d.trace
                .flags
                .push(format!("stage {s}: exact stationary point reached"));
            break;
        }
        let set = d.params.setting(mu);
        let (k, tol) = match cfg.rho_target {
            Some(r) => (d.params.k_first, Some(r * start_sq)),
            None => (d.params.k_const, None),
        };
        let anchor = x.clone();
        let Some(mut out) =
            d.run_stage(s, &anchor, set, &x, anchor_grad.clone(), k, tol, set.eta)?
        else {
            break;
        };
        let mut rho = norm_sq(&out.grad) / start_sq;
        let mut flagged = false;
        if let Some(target) = cfg.rho_target {
            if rho > target {
                flagged = true;
                d.trace.flags.push(format!(
                    "stage {s}: contraction {rho:.3e} missed target {target:.3e}"
                ));
            }
        } else if rho >= 1.0 && out.run.stop != StopReason::Budget {
            d.trace.flags.push(format!(
                "stage {s}: rho = {rho:.3e} ≥ 1, retrying with {} outer loops",
                2 * k
            ));
            d.start_grads.pop();
            match d.run_stage(
                s,
                &anchor,
                set,
                &x,
                anchor_grad.clone(),
                2 * k,
                tol,
                set.eta,
            )? {
                Some(retry) => {
                    out = retry;
                    rho = norm_sq(&out.grad) / start_sq;
                }
                None => break,
            }
            if rho >= 1.0 {
                flagged = true;
                d.trace.flags.push(format!(
                    "stage {s}: rho = {rho:.3e} ≥ 1 after retry, μ frozen"
                ));
            }
        }
        let gf = d.close_stage(s, s - 1, mu, &out, Some(rho), flagged);
        x.clone_from(&out.run.x_out);
        anchor_grad = carry_over_grad(&out.grad, mu, &x, &anchor, NextAnchor::AtPoint)?;
        let stop = out.run.stop;
        last = Some((out, mu, anchor));
        match cfg.rho_target {
            Some(target) => mu *= target,
            None if !flagged => mu *= rho,
            None => {}
        }
        if gf <= cfg.epsilon || stop == StopReason::Budget {
            break;
        }
    }
    Ok(match last {
        Some((out, _, _)) => {
            let work = ended_on_work_grad(&out.run);
            let eta = out.run.last_eta;
            d.finish(x.clone(), x, Some(anchor_grad), eta, work, None)
        }
        None => {
            let eta = d.params.eta;
            d.finish(x.clone(), x, Some(g0), eta, false, None)
        }
    })
}

/// Moving anchor with fixed weight `σ + θ`; returns the output of a stage
/// drawn uniformly from those completed.
pub fn run_nonconvex<O: Objective + ?Sized>(
    base: &O,
    x0: &[f64],
    cfg: &MetaConfig,
) -> Result<MetaRun> {
    let (mut d, g0) = start(base, x0, cfg, Scheme::Nonconvex)?;
    let mu = d.params.mu;
    let set = d.params.setting(mu);
    let mut x = x0.to_vec();
    let mut anchor_grad = g0.clone();
    let mut eta = set.eta;
    let mut work = false;
    for s in 1..=d.params.stages {
        let anchor = x.clone();
        let k = d.params.k_const;
        let Some(out) = d.run_stage(s, &anchor, set, &x, anchor_grad.clone(), k, None, eta)? else {
            break;
        };
        let gf = d.close_stage(s, s - 1, mu, &out, None, false);
        x.clone_from(&out.run.x_out);
        anchor_grad = carry_over_grad(&out.grad, mu, &x, &anchor, NextAnchor::AtPoint)?;
        if cfg.subsolver == Subsolver::SarahBb {
            eta = out.run.last_eta;
        }
        work = ended_on_work_grad(&out.run);
        if gf <= cfg.epsilon || out.run.stop == StopReason::Budget {
            break;
        }
    }
    let done = d.stages.len();
    if done == 0 {
        return Ok(d.finish(x0.to_vec(), x0.to_vec(), Some(g0), eta, false, None));
    }
    let k = select_stage(cfg.seed, done);
    let x_out = d.stages[k - 1].x_end.clone();
    let fg = (k == done).then(|| anchor_grad.clone());
    Ok(d.finish(x_out, x, fg, eta, work, Some(k)))
}

/// Uniform draw from `1..=stages`, on its own stream so that it does not
/// disturb the subsolver's samples.
pub(crate) fn select_stage(seed: u64, stages: usize) -> usize {
    let mut r = rng::stream(seed, 0x0057_A6E5);
    1 + rng::index(&mut r, stages)
}

/// Dispatches on `cfg.scheme`.
pub fn run_meta<O: Objective + ?Sized>(base: &O, x0: &[f64], cfg: &MetaConfig) -> Result<MetaRun> {
    match cfg.scheme {
        Scheme::Single => run_single_reg(base, x0, cfg),
        Scheme::RecursiveV1 => run_recursive_v1(base, x0, cfg),
        Scheme::RecursiveV2 => run_recursive_v2(base, x0, cfg),
        Scheme::Nonconvex => run_nonconvex(base, x0, cfg),
    }
}
