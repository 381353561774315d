//! Reference methods: gradient descent, SGD and diagonal AdaGrad.

use serde::{Deserialize, Serialize};

use super::sarah::EndGradient;
use super::trace::{RunResult, StopReason, Trace, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, norm_sq};
use crate::objective::Objective;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub eta: f64,
    pub iters: usize,
    #[serde(default)]
    pub end_gradient: EndGradient,
}

/// SGD step schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdSchedule {
    /// `η_k = η₀ / (1 + k/n)`.
    #[default]
    InverseEpoch,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub eta0: f64,
    pub iters: usize,
    #[serde(default)]
    pub schedule: SgdSchedule,
    #[serde(default)]
    pub seed: u64,
    /// Probe `‖∇f‖²` every this many steps (default `n`); 0 disables.
    #[serde(default)]
    pub monitor_every: Option<usize>,
    #[serde(default)]
    pub end_gradient: EndGradient,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaGradBatch {
    /// One sampled component gradient per step.
    #[default]
    Single,
    /// The full gradient every step.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaGradConfig {
    pub alpha: f64,
    pub eps0: f64,
    pub iters: usize,
    #[serde(default)]
    pub batch: AdaGradBatch,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub end_gradient: EndGradient,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive")))
    }
}

fn diverged(trace: &Trace, ifo: u64) -> Error {
    Error::Diverged {
        ifo,
        reason: "non-finite iterate".into(),
        trace: Box::new(trace.clone()),
    }
}

/// Bookkeeping shared by the loops below.
struct Recorder<'o, O: Objective + ?Sized> {
    obj: &'o O,
    start: u64,
    probe_ifo: u64,
    trace: Trace,
}

impl<'o, O: Objective + ?Sized> Recorder<'o, O> {
    fn new(obj: &'o O) -> Self {
        Recorder {
            obj,
            start: obj.counter().read(),
            probe_ifo: 0,
            trace: Trace::default(),
        }
    }

    fn axis(&self) -> u64 {
        self.obj.counter().read() - self.start - self.probe_ifo
    }

    fn record(&mut self, outer: usize, ifo: u64, eta: f64, grad_sq: f64, probe: bool) {
        self.trace.push(TraceRecord {
            outer,
            ifo,
            eta,
            grad_f_sq: grad_sq,
            probe,
            ..Default::default()
        });
    }

    /// Full gradient for reporting only.
    fn probe(&mut self, outer: usize, x: &[f64], eta: f64) -> Result<Vec<f64>> {
        let ifo = self.axis();
        let g = self.obj.full_grad(x)?;
        self.probe_ifo += self.obj.n() as u64;
        if !all_finite(&g) {
            return Err(diverged(&self.trace, ifo));
        }
        self.record(outer, ifo, eta, norm_sq(&g), true);
        Ok(g)
    }

    fn finish(
        self,
        x: Vec<f64>,
        final_grad: Option<Vec<f64>>,
        last_eta: f64,
        iters: usize,
    ) -> RunResult {
        RunResult {
            loops_run: iters,
            stop: StopReason::Completed,
            ifo_total: self.obj.counter().read() - self.start,
            probe_ifo: self.probe_ifo,
            x_out: x,
            trace: self.trace,
            final_grad,
            last_eta,
        }
    }
}

/// `x_{k+1} = x_k − η ∇f(x_k)`; `n` IFOs per step, one record per step.
pub fn gd_run<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &GdConfig) -> Result<RunResult> {
    gd_run_observed(obj, x0, cfg, |_, _| {})
}

/// As [`gd_run`], calling `observe(k, x_k)` for `k = 0..=iters`.
pub fn gd_run_observed<O, F>(
    obj: &O,
    x0: &[f64],
    cfg: &GdConfig,
    mut observe: F,
) -> Result<RunResult>
where
    O: Objective + ?Sized,
    F: FnMut(usize, &[f64]),
{
    positive("eta", cfg.eta)?;
    check_dim(obj.dim(), x0.len())?;
    let mut rec = Recorder::new(obj);
    let mut x = x0.to_vec();
    observe(0, &x);
    for k in 0..cfg.iters {
        let ifo = rec.axis();
        let g = obj.full_grad(&x)?;
        if !all_finite(&g) {
            return Err(diverged(&rec.trace, ifo));
        }
        rec.record(k + 1, ifo, cfg.eta, norm_sq(&g), false);
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= cfg.eta * gj;
        }
        if !all_finite(&x) {
            return Err(diverged(&rec.trace, rec.axis()));
        }
        observe(k + 1, &x);
    }
    let g = end_gradient(&mut rec, cfg.end_gradient, cfg.iters, &x, cfg.eta)?;
    Ok(rec.finish(x, g, cfg.eta, cfg.iters))
}

fn end_gradient<O: Objective + ?Sized>(
    rec: &mut Recorder<'_, O>,
    mode: EndGradient,
    outer: usize,
    x: &[f64],
    eta: f64,
) -> Result<Option<Vec<f64>>> {
    match mode {
        EndGradient::Skip => Ok(None),
        EndGradient::Probe => rec.probe(outer, x, eta).map(Some),
        EndGradient::Work => {
            let ifo = rec.axis();
            let g = rec.obj.full_grad(x)?;
            rec.record(outer, ifo, eta, norm_sq(&g), false);
            Ok(Some(g))
        }
    }
}

/// `x_{k+1} = x_k − η_k ∇f_{i_k}(x_k)`; one IFO per step.
pub fn sgd_run<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &SgdConfig) -> Result<RunResult> {
    positive("eta0", cfg.eta0)?;
    check_dim(obj.dim(), x0.len())?;
    let n = obj.n();
    let every = cfg.monitor_every.unwrap_or(n);
    let mut rng = rng::stream(cfg.seed, 0);
    let mut rec = Recorder::new(obj);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    let eta_at = |k: usize| match cfg.schedule {
        SgdSchedule::InverseEpoch => cfg.eta0 / (1.0 + k as f64 / n as f64),
        SgdSchedule::Constant => cfg.eta0,
    };
    for k in 0..cfg.iters {
        let eta = eta_at(k);
        if every > 0 && k % every == 0 {
            rec.probe(k, &x, eta)?;
        }
        let i = rng::index(&mut rng, n);
        g.iter_mut().for_each(|v| *v = 0.0);
        obj.accumulate_component_grad(i, &x, 1.0, &mut g);
        obj.counter().add(1);
        for (xj, gj) in x.iter_mut().zip(&g) {
            *xj -= eta * gj;
        }
        if !all_finite(&x) {
            return Err(diverged(&rec.trace, rec.axis()));
        }
    }
    let eta = eta_at(cfg.iters);
    let fg = end_gradient(&mut rec, cfg.end_gradient, cfg.iters, &x, eta)?;
    Ok(rec.finish(x, fg, eta, cfg.iters))
}

/// Diagonal AdaGrad: `G += g⊙g`, `x −= α g / √(G + eps0)`.
///
/// With [`AdaGradBatch::Full`] every step is a free trace point; with
/// [`AdaGradBatch::Single`] `‖∇f‖²` is probed every `n` steps.
pub fn adagrad_run<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &AdaGradConfig,
) -> Result<RunResult> {
    positive("alpha", cfg.alpha)?;
    if !(cfg.eps0 >= 0.0) {
        return Err(Error::invalid("eps0 must be non-negative"));
    }
    check_dim(obj.dim(), x0.len())?;
    let n = obj.n();
    let d = x0.len();
    let mut rng = rng::stream(cfg.seed, 0);
    let mut rec = Recorder::new(obj);
    let mut x = x0.to_vec();
    let mut acc = vec![0.0; d];
    let mut g = vec![0.0; d];
    for k in 0..cfg.iters {
        match cfg.batch {
            AdaGradBatch::Full => {
                let ifo = rec.axis();
                g = obj.full_grad(&x)?;
                if !all_finite(&g) {
                    return Err(diverged(&rec.trace, ifo));
                }
                rec.record(k + 1, ifo, cfg.alpha, norm_sq(&g), false);
            }
            AdaGradBatch::Single => {
                if k % n == 0 {
                    rec.probe(k, &x, cfg.alpha)?;
                }
                let i = rng::index(&mut rng, n);
                g.iter_mut().for_each(|v| *v = 0.0);
                obj.accumulate_component_grad(i, &x, 1.0, &mut g);
                obj.counter().add(1);
            }
        }
        adagrad_step(&mut x, &mut acc, &g, cfg.alpha, cfg.eps0);
        if !all_finite(&x) {
            return Err(diverged(&rec.trace, rec.axis()));
        }
    }
    let fg = end_gradient(&mut rec, cfg.end_gradient, cfg.iters, &x, cfg.alpha)?;
    Ok(rec.finish(x, fg, cfg.alpha, cfg.iters))
}

/// One AdaGrad update in place.
pub fn adagrad_step(x: &mut [f64], acc: &mut [f64], g: &[f64], alpha: f64, eps0: f64) {
    for j in 0..x.len() {
        acc[j] += g[j] * g[j];
        let denom = (acc[j] + eps0).sqrt();
        if denom > 0.0 {
            x[j] -= alpha * g[j] / denom;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ridge_quadratic_objective;
    use crate::objective::RidgeQuadratic;

    fn half_square() -> RidgeQuadratic {
        RidgeQuadratic::with_centers(vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn gd_unit_quadratic_one_step() {
        let f = half_square();
        let cfg = GdConfig {
            eta: 1.0,
            iters: 1,
            end_gradient: EndGradient::Skip,
        };
        let r = gd_run(&f, &[5.0], &cfg).unwrap();
        assert_eq!(r.x_out, vec![0.0]);
    }

    #[test]
    fn cost_models() {
        let f = ridge_quadratic_objective(12, 3, 0.5, 2.0, 1).unwrap();
        let gd = GdConfig {
            eta: 0.1,
            iters: 7,
            end_gradient: EndGradient::Skip,
        };
        assert_eq!(gd_run(&f, &[0.0; 3], &gd).unwrap().ifo_total, 7 * 12);
        let sgd = SgdConfig {
            eta0: 0.1,
            iters: 30,
            schedule: SgdSchedule::InverseEpoch,
            seed: 3,
            monitor_every: Some(0),
            end_gradient: EndGradient::Skip,
        };
        assert_eq!(sgd_run(&f, &[0.0; 3], &sgd).unwrap().ifo_total, 30);
        let ada = AdaGradConfig {
            alpha: 0.5,
            eps0: 1e-8,
            iters: 9,
            batch: AdaGradBatch::Full,
            seed: 0,
            end_gradient: EndGradient::Probe,
        };
        let r = adagrad_run(&f, &[0.0; 3], &ada).unwrap();
        assert_eq!(r.ifo_total - r.probe_ifo, 9 * 12);
        assert_eq!(r.probe_ifo, 12);
        assert!(r.trace.ifo_is_monotone());
    }

    #[test]
    fn adagrad_constant_gradient_closed_form() {
        let (mut x, mut acc) = (vec![0.0], vec![0.0]);
        let mut expect = 0.0;
        for k in 1..=6 {
            adagrad_step(&mut x, &mut acc, &[1.0], 1.0, 0.0);
            expect -= 1.0 / (k as f64).sqrt();
            assert!((x[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_probes_stay_off_the_axis() {
        let f = ridge_quadratic_objective(10, 2, 0.5, 1.0, 2).unwrap();
        let cfg = SgdConfig {
            eta0: 0.2,
            iters: 35,
            schedule: SgdSchedule::Constant,
            seed: 1,
            monitor_every: None,
            end_gradient: EndGradient::Probe,
        };
        let r = sgd_run(&f, &[1.0, -1.0], &cfg).unwrap();
        let ifos: Vec<u64> = r.trace.records.iter().map(|t| t.ifo).collect();
        assert_eq!(ifos, vec![0, 10, 20, 30, 35]);
        assert_eq!(r.probe_ifo, 50);
        assert_eq!(r.ifo_total, 85);
    }

    #[test]
    fn full_adagrad_reaches_tolerance_on_ridge() {
        let f = ridge_quadratic_objective(64, 16, 0.1, 1.0, 5).unwrap();
        let n = f.n();
        let cfg = AdaGradConfig {
            alpha: 1.0,
            eps0: 1e-8,
            iters: 5000,
            batch: AdaGradBatch::Full,
            seed: 0,
            end_gradient: EndGradient::Probe,
        };
        let r = adagrad_run(&f, &[0.0; 16], &cfg).unwrap();
        let last = r.trace.last().unwrap();
        assert!(last.grad_f_sq <= 1e-4, "{}", last.grad_f_sq);
        assert!(r.ifo_total - r.probe_ifo <= 5000 * n as u64);
    }
}
