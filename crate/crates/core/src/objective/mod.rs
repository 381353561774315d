//! Finite-sum objectives `f(x) = (1/n) Σ f_i(x)` with exact IFO accounting.
//!
//! Implementors provide an uncounted per-component kernel; every public
//! gradient method goes through the counted wrappers below, which charge
//! one IFO per component gradient.

mod loss;
mod quadratic;

use std::sync::atomic::{AtomicU64, Ordering};

pub use loss::{
    logistic_objective, sigmoidsq_objective, smoothness_bound, LinearLoss, LossKind,
    SIGMOIDSQ_CURVATURE,
};
pub use quadratic::{ridge_quadratic_objective, RidgeQuadratic};

use crate::error::{check_dim, Result};
use crate::par::{self, ExecMode};

/// Incremental first-order oracle counter. Only ever increases, except via
/// [`IfoCounter::reset`].
#[derive(Debug, Default)]
pub struct IfoCounter(AtomicU64);

impl IfoCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }

    pub(crate) fn add(&self, k: u64) {
        self.0.fetch_add(k, Ordering::Relaxed);
    }
}

/// Smoothness constants of an objective.
///
/// `l` bounds the Lipschitz constant of every `∇f_i`; `mu_sc` is the
/// strong-convexity modulus (0 when unknown or merely convex); `sigma_bn`
/// is the bounded-nonconvexity modulus (0 for convex objectives).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothnessInfo {
    pub l: f64,
    pub mu_sc: f64,
    pub sigma_bn: f64,
}

impl SmoothnessInfo {
    pub fn condition_number(&self) -> f64 {
        self.l / self.mu_sc
    }
}

pub trait Objective: Send + Sync {
    /// Number of components.
    fn n(&self) -> usize;

    fn dim(&self) -> usize;

    fn counter(&self) -> &IfoCounter;

    fn smoothness(&self) -> SmoothnessInfo;

    /// `f_i(x)`; no oracle charge.
    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// `out += scale · ∇f_i(x)` without touching the counter. Callers
    /// guarantee `i < n` and matching dimensions.
    fn accumulate_component_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]);

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let total = par::chunked_sum(self.n(), ExecMode::default(), |i| {
            self.component_value(i, x)
        });
        Ok(total / self.n() as f64)
    }

    /// `∇f_i(x)`; one IFO.
    fn component_grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if i >= self.n() {
            return Err(crate::Error::invalid(format!(
                "component {i} out of range 0..{}",
                self.n()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.accumulate_component_grad(i, x, 1.0, &mut out);
        self.counter().add(1);
        Ok(out)
    }

    /// `acc += ∇f_i(x_new) − ∇f_i(x_old)`; two IFOs. This is the SARAH
    /// estimator update. Dimensions are the caller's responsibility.
    fn add_component_grad_diff(&self, i: usize, x_new: &[f64], x_old: &[f64], acc: &mut [f64]) {
        self.accumulate_component_grad(i, x_new, 1.0, acc);
        self.accumulate_component_grad(i, x_old, -1.0, acc);
        self.counter().add(2);
    }

    /// `∇f(x)`; n IFOs.
    fn full_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.full_grad_with(x, ExecMode::default())
    }

    fn full_grad_with(&self, x: &[f64], mode: ExecMode) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let n = self.n();
        let mut g = par::chunked_vec_sum(n, self.dim(), mode, |range, acc| {
            for i in range {
                self.accumulate_component_grad(i, x, 1.0, acc);
            }
        });
        let inv = n as f64;
        for gi in &mut g {
            *gi /= inv;
        }
        self.counter().add(n as u64);
        Ok(g)
    }

    /// Gradient of the unregularized objective recovered from a full
    /// gradient of `self` at `x`; free. Plain objectives return `grad`.
    fn base_grad_from_full(&self, _x: &[f64], grad: &[f64]) -> Vec<f64> {
        grad.to_vec()
    }

    /// `(mu, anchor)` when `self` carries a quadratic anchor term.
    fn anchor_term(&self) -> Option<(f64, &[f64])> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn counter(&self) -> &IfoCounter {
        (**self).counter()
    }
    fn smoothness(&self) -> SmoothnessInfo {
        (**self).smoothness()
    }
    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        (**self).component_value(i, x)
    }
    fn accumulate_component_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        (**self).accumulate_component_grad(i, x, scale, out)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (**self).value(x)
    }
    fn add_component_grad_diff(&self, i: usize, x_new: &[f64], x_old: &[f64], acc: &mut [f64]) {
        (**self).add_component_grad_diff(i, x_new, x_old, acc)
    }
    fn full_grad_with(&self, x: &[f64], mode: ExecMode) -> Result<Vec<f64>> {
        (**self).full_grad_with(x, mode)
    }
    fn base_grad_from_full(&self, x: &[f64], grad: &[f64]) -> Vec<f64> {
        (**self).base_grad_from_full(x, grad)
    }
    fn anchor_term(&self) -> Option<(f64, &[f64])> {
        (**self).anchor_term()
    }
}
