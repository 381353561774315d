//! SARAH with fixed, BB, or modified-BB outer-loop step sizes.
//!
//! Each outer loop `s`:
//! ```text
//! v₀ = ∇f(x₀),  x₁ = x₀ − η v₀
//! for k = 1..m−1:  i ~ U[n];  v_k = ∇f_i(x_k) − ∇f_i(x_{k−1}) + v_{k−1};  x_{k+1} = x_k − η v_k
//! x̃ = x_j with j drawn per the snapshot rule
//! ```
//! costing `n + 2(m−1)` IFOs.

use serde::{Deserialize, Serialize};

use super::step_size::{Interval, StepRule, StepSizeController};
use super::trace::{RunResult, StopReason, Trace, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, norm_sq};
use crate::objective::Objective;
use crate::rng::{self, RunRng};

/// Which inner iterate becomes the next snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotRule {
    /// Uniform over `x_0, …, x_{m−1}`.
    #[default]
    Uniform0ToMMinus1,
    /// Uniform over `x_0, …, x_m`.
    Uniform0ToM,
    /// Always `x_m`.
    LastIterate,
}

impl SnapshotRule {
    /// Draws the snapshot index in `0..=m`.
    pub fn draw(self, rng: &mut RunRng, m: usize) -> usize {
        match self {
            SnapshotRule::Uniform0ToMMinus1 => rng::index(rng, m),
            SnapshotRule::Uniform0ToM => rng::index(rng, m + 1),
            SnapshotRule::LastIterate => m,
        }
    }
}

/// What to do with the gradient at the returned point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndGradient {
    /// Not computed.
    Skip,
    /// Computed for reporting only: flagged, kept off the IFO axis.
    #[default]
    Probe,
    /// Computed because the caller will use it (e.g. the next stage's
    /// starting gradient): counted as algorithmic work. Falls back to
    /// `Probe` when it would not fit in the IFO budget.
    Work,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarahConfig {
    pub eta_init: f64,
    /// Inner loop length.
    pub m: usize,
    /// Maximum number of outer loops.
    pub outer_loops: usize,
    #[serde(default)]
    pub snapshot: SnapshotRule,
    #[serde(default)]
    pub seed: u64,
    pub step: StepRule,
    #[serde(default)]
    pub clamp: Option<Interval>,
    /// Stop at an outer-loop start once `‖∇(objective)(x̃)‖² ≤ grad_tol`.
    #[serde(default)]
    pub grad_tol: Option<f64>,
    /// Do not start an outer loop that would push algorithmic IFOs past this.
    #[serde(default)]
    pub ifo_budget: Option<u64>,
    #[serde(default)]
    pub end_gradient: EndGradient,
}

impl SarahConfig {
    pub fn fixed(eta: f64, m: usize, outer_loops: usize, seed: u64) -> Self {
        SarahConfig {
            eta_init: eta,
            m,
            outer_loops,
            snapshot: SnapshotRule::default(),
            seed,
            step: StepRule::Fixed,
            clamp: None,
            grad_tol: None,
            ifo_budget: None,
            end_gradient: EndGradient::Probe,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_init > 0.0 && self.eta_init.is_finite()) {
            return Err(Error::invalid("eta_init must be positive"));
        }
        if self.m == 0 {
            return Err(Error::invalid("inner loop length m must be ≥ 1"));
        }
        if self.outer_loops == 0 {
            return Err(Error::invalid("outer loop count must be ≥ 1"));
        }
        match self.step {
            StepRule::Bb { lambda_kappa } if !(lambda_kappa > 0.0) => {
                Err(Error::invalid("lambda_kappa must be positive"))
            }
            StepRule::ModifiedBb { m, lambda, .. } if m == 0 || !(lambda > 0.0) => {
                Err(Error::invalid("modified BB needs m ≥ 1 and λ > 0"))
            }
            _ => Ok(()),
        }
    }

    /// IFO cost of one outer loop (without a carried-in gradient).
    pub fn loop_cost(&self, n: usize) -> u64 {
        (n + 2 * (self.m - 1)) as u64
    }
}

/// Per-call context used when SARAH runs as a subsolver.
pub struct SarahCall<'r> {
    pub rng: &'r mut RunRng,
    /// Known full gradient of the objective at `x0`; saves `n` IFOs.
    pub start_grad: Option<Vec<f64>>,
    /// Stage label copied into the trace.
    pub stage: usize,
    /// Counter value that the trace's `ifo` axis is measured from.
    pub origin: u64,
    /// Probe IFOs already spent since `origin`.
    pub probes_before: u64,
}

/// Runs SARAH from `x0`.
pub fn sarah_run<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &SarahConfig,
) -> Result<RunResult> {
    sarah_run_observed(obj, x0, cfg, |_, _, _| {})
}

/// As [`sarah_run`], calling `observe(s, k, x_k)` for every inner iterate
/// `k = 0..=m` of outer loop `s`.
pub fn sarah_run_observed<O, F>(
    obj: &O,
    x0: &[f64],
    cfg: &SarahConfig,
    observe: F,
) -> Result<RunResult>
where
    O: Objective + ?Sized,
    F: FnMut(usize, usize, &[f64]),
{
    let mut rng = rng::stream(cfg.seed, 0);
    let origin = obj.counter().read();
    let call = SarahCall {
        rng: &mut rng,
        start_grad: None,
        stage: 0,
        origin,
        probes_before: 0,
    };
    sarah_with(obj, x0, cfg, call, observe)
}

/// SARAH with an explicit RNG and optional warm gradient.
pub fn sarah_with<O, F>(
    obj: &O,
    x0: &[f64],
    cfg: &SarahConfig,
    call: SarahCall<'_>,
    mut observe: F,
) -> Result<RunResult>
where
    O: Objective + ?Sized,
    F: FnMut(usize, usize, &[f64]),
{
    cfg.validate()?;
    check_dim(obj.dim(), x0.len())?;
    if let Some(g) = &call.start_grad {
        check_dim(obj.dim(), g.len())?;
    }
    let SarahCall {
        rng,
        mut start_grad,
        stage,
        origin,
        probes_before,
    } = call;

    let n = obj.n();
    let d = obj.dim();
    let counter = obj.counter();
    let run_start = counter.read();
    let mu = obj.anchor_term().map_or(0.0, |(mu, _)| mu);
    let mut probe_ifo = 0u64;
    let axis = |probe_ifo: u64| counter.read() - origin - probes_before - probe_ifo;

    let mut trace = Trace::default();
    let mut ctrl = StepSizeController::new(cfg.step.clone(), cfg.eta_init, cfg.clamp);
    let mut x_tilde = x0.to_vec();
    let mut final_grad: Option<Vec<f64>> = None;
    let mut stop = StopReason::Completed;
    let mut loops_run = 0;

    let mut x_prev = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut v = vec![0.0; d];

    let diverged = |trace: &Trace, ifo: u64, reason: &str| Error::Diverged {
        ifo,
        reason: reason.to_string(),
        trace: Box::new(trace.clone()),
    };

    for s in 1..=cfg.outer_loops {
        let carried = start_grad.is_some();
        if let Some(budget) = cfg.ifo_budget {
            let cost = if carried {
                cfg.loop_cost(n) - n as u64
            } else {
                cfg.loop_cost(n)
            };
            if axis(probe_ifo) + cost > budget {
                trace.flags.push(format!(
                    "stage {stage}: IFO budget reached before outer loop {s}"
                ));
                stop = StopReason::Budget;
                break;
            }
        }

        let v0 = match start_grad.take() {
            Some(g) => g,
            None => obj.full_grad(&x_tilde)?,
        };
        if !all_finite(&v0) {
            return Err(diverged(
                &trace,
                axis(probe_ifo),
                "non-finite full gradient",
            ));
        }
        let surr_sq = norm_sq(&v0);
        let (grad_f_sq, grad_surr_sq) = match obj.anchor_term() {
            Some(_) => (
                norm_sq(&obj.base_grad_from_full(&x_tilde, &v0)),
                Some(surr_sq),
            ),
            None => (surr_sq, None),
        };

        if cfg.grad_tol.is_some_and(|tol| surr_sq <= tol) {
            if !carried {
                trace.push(TraceRecord {
                    stage,
                    outer: s,
                    ifo: axis(probe_ifo),
                    eta: ctrl.current(),
                    mu,
                    rho: None,
                    grad_f_sq,
                    grad_surr_sq,
                    ..Default::default()
                });
            }
            final_grad = Some(v0);
            stop = StopReason::Tolerance;
            break;
        }
        loops_run += 1;

        let choice = ctrl.next(&x_tilde, &v0);
        let eta = choice.eta;
        if !carried {
            trace.push(TraceRecord {
                stage,
                outer: s,
                ifo: axis(probe_ifo),
                eta,
                mu,
                rho: None,
                grad_f_sq,
                grad_surr_sq,
                clamped: choice.clamped,
                degenerate_step: choice.degenerate,
                probe: false,
            });
        } else if choice.clamped || choice.degenerate {
            trace.flags.push(format!(
                "stage {stage} loop {s}: step clamped={} degenerate={}",
                choice.clamped, choice.degenerate
            ));
        }

        // inner loop
        let pick = cfg.snapshot.draw(rng, cfg.m);
        x_prev.copy_from_slice(&x_tilde);
        v.copy_from_slice(&v0);
        for j in 0..d {
            x[j] = x_prev[j] - eta * v[j];
        }
        observe(s, 0, &x_prev);
        observe(s, 1, &x);
        let mut snapshot_taken = false;
        if pick == 0 {
            snapshot_taken = true;
        } else if pick == 1 {
            x_tilde.copy_from_slice(&x);
            snapshot_taken = true;
        }
        for k in 1..cfg.m {
            let i = rng::index(rng, n);
            obj.add_component_grad_diff(i, &x, &x_prev, &mut v);
            std::mem::swap(&mut x_prev, &mut x);
            for j in 0..d {
                x[j] = x_prev[j] - eta * v[j];
            }
            observe(s, k + 1, &x);
            if pick == k + 1 {
                x_tilde.copy_from_slice(&x);
                snapshot_taken = true;
            }
        }
        debug_assert!(snapshot_taken);
        if !all_finite(&x_tilde) || !all_finite(&x) {
            return Err(diverged(&trace, axis(probe_ifo), "non-finite iterate"));
        }
    }

    // nothing ran after a carried-in gradient: it is still the one at x_out
    if final_grad.is_none() {
        final_grad = start_grad.take();
    }
    if final_grad.is_none() && cfg.end_gradient != EndGradient::Skip {
        let ifo_before = axis(probe_ifo);
        let fits = cfg.ifo_budget.is_none_or(|b| ifo_before + n as u64 <= b);
        let probe = cfg.end_gradient == EndGradient::Probe || !fits;
        if cfg.end_gradient == EndGradient::Work && !fits {
            stop = StopReason::Budget;
        }
        let g = obj.full_grad(&x_tilde)?;
        if probe {
            probe_ifo += n as u64;
        }
        if !all_finite(&g) {
            return Err(diverged(&trace, ifo_before, "non-finite full gradient"));
        }
        let surr_sq = norm_sq(&g);
        let (grad_f_sq, grad_surr_sq) = match obj.anchor_term() {
            Some(_) => (
                norm_sq(&obj.base_grad_from_full(&x_tilde, &g)),
                Some(surr_sq),
            ),
            None => (surr_sq, None),
        };
        trace.push(TraceRecord {
            stage,
            outer: loops_run,
            ifo: ifo_before,
            eta: ctrl.current(),
            mu,
            rho: None,
            grad_f_sq,
            grad_surr_sq,
            probe,
            ..Default::default()
        });
        final_grad = Some(g);
    }

    Ok(RunResult {
        x_out: x_tilde,
        trace,
        ifo_total: counter.read() - run_start,
        probe_ifo,
        final_grad,
        last_eta: ctrl.current(),
        loops_run,
        stop,
    })
}
