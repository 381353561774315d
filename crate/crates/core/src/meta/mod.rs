//! Regularized-surrogate drivers: single regularizer, recursive regularizers
//! (fixed anchor with decaying weight, moving anchor with measured
//! contraction), and the moving-anchor scheme for bounded-nonconvex losses.

mod drivers;
mod params;

pub use drivers::{
    run_meta, run_nonconvex, run_recursive_v1, run_recursive_v2, run_single_reg, MetaRun,
    StageRecord,
};
pub use params::{stage_eta, stage_m, theorem_params, LambdaKappaRule, StageParams, StageSetting};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::SnapshotRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Single,
    RecursiveV1,
    RecursiveV2,
    Nonconvex,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsolver {
    #[default]
    SarahFixed,
    SarahBb,
}

/// Driver configuration. Unset options resolve through [`theorem_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    pub scheme: Scheme,
    pub subsolver: Subsolver,
    /// Target for `‖∇f‖²`.
    pub epsilon: f64,
    /// Regularizer weight: μ for `single`, μ₁ for `recursive_v1`.
    pub mu: Option<f64>,
    /// Starting weight μ₀ for `recursive_v2` (default `c0`).
    pub mu0: Option<f64>,
    /// Decay of the `recursive_v1` schedule.
    pub gamma: f64,
    /// `recursive_v1`: start at μ₁ = c_μ√ε instead of the practical μ₁.
    pub v1_theory_mu1: bool,
    /// Strong-convexity shift of the nonconvex surrogates (default σ).
    pub theta: Option<f64>,
    /// Bounded-nonconvexity modulus (default from the objective).
    pub sigma: Option<f64>,
    /// Distance proxy for the single-regularizer weight (default `‖∇f(x₀)‖/L`).
    pub r_hat: Option<f64>,
    /// Maximum number of stages.
    pub stages: usize,
    /// Outer-loop cap of the first (or only) stage.
    pub k_first: usize,
    /// Outer loops per later stage.
    pub k_const: usize,
    /// Inner-loop cap (default `5n`).
    pub m_cap: Option<usize>,
    /// Fixed inner-loop length overriding the recipe.
    pub m: Option<usize>,
    pub c_mu: f64,
    pub c_m: f64,
    pub c0: f64,
    /// First-stage tolerance factor of `recursive_v1` (`‖∇f̃₁‖² ≤ c_K ε`).
    pub c_k: f64,
    /// Step-size factor: `η = eta_scale / L̃`.
    pub eta_scale: f64,
    pub lambda_kappa: LambdaKappaRule,
    /// Clamp BB steps into their provable interval.
    pub clamp_bb: bool,
    pub snapshot: SnapshotRule,
    /// `recursive_v2`: run each stage until this contraction instead of a
    /// fixed number of outer loops.
    pub rho_target: Option<f64>,
    pub ifo_budget: Option<u64>,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            scheme: Scheme::Single,
            subsolver: Subsolver::SarahFixed,
            epsilon: 1e-8,
            mu: None,
            mu0: None,
            gamma: 0.1,
            v1_theory_mu1: false,
            theta: None,
            sigma: None,
            r_hat: None,
            stages: 10_000,
            k_first: 10_000,
            k_const: 2,
            m_cap: None,
            m: None,
            c_mu: 1.0,
            c_m: 2.0,
            c0: 1.0,
            c_k: 1.0,
            eta_scale: 0.5,
            lambda_kappa: LambdaKappaRule::Kappa,
            clamp_bb: true,
            snapshot: SnapshotRule::default(),
            rho_target: None,
            ifo_budget: None,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn new(scheme: Scheme) -> Self {
        MetaConfig {
            scheme,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos("epsilon", self.epsilon)?;
        pos("c_mu", self.c_mu)?;
        pos("c_m", self.c_m)?;
        pos("c0", self.c0)?;
        pos("c_k", self.c_k)?;
        pos("eta_scale", self.eta_scale)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1]"));
        }
        for (name, v) in [
            ("mu", self.mu),
            ("mu0", self.mu0),
            ("theta", self.theta),
            ("r_hat", self.r_hat),
        ] {
            if let Some(v) = v {
                pos(name, v)?;
            }
        }
        if self.sigma.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::invalid("sigma must be non-negative"));
        }
        if let Some(r) = self.rho_target {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid("rho_target must lie in (0, 1)"));
            }
        }
        if self.stages == 0 || self.k_first == 0 || self.k_const == 0 {
            return Err(Error::invalid("stage and loop caps must be ≥ 1"));
        }
        if self.m_cap == Some(0) || self.m == Some(0) {
            return Err(Error::invalid("inner loop length must be ≥ 1"));
        }
        if self.ifo_budget == Some(0) {
            return Err(Error::invalid("budget must be positive"));
        }
        match self.scheme {
            Scheme::Nonconvex if self.mu.is_some() || self.mu0.is_some() => Err(Error::invalid(
                "nonconvex scheme fixes μ = σ + θ; set theta or sigma instead of mu",
            )),
            Scheme::Single | Scheme::RecursiveV1 if self.mu0.is_some() => {
                Err(Error::invalid("mu0 only applies to recursive_v2"))
            }
            Scheme::RecursiveV2 if self.mu.is_some() => {
                Err(Error::invalid("recursive_v2 takes mu0, not mu"))
            }
            Scheme::RecursiveV1 if self.v1_theory_mu1 && self.mu.is_some() => {
                Err(Error::invalid("v1_theory_mu1 and an explicit mu conflict"))
            }
            Scheme::Single | Scheme::RecursiveV1 | Scheme::RecursiveV2 if self.theta.is_some() => {
                Err(Error::invalid("theta only applies to the nonconvex scheme"))
            }
            _ => Ok(()),
        }
    }
}
