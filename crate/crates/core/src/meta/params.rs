use serde::{Deserialize, Serialize};

use super::{MetaConfig, Scheme};
use crate::error::{Error, Result};
use crate::optimizers::Interval;

/// Practical first weight of the decaying schedule.
const V1_PRACTICAL_MU1: f64 = 1e-3;

/// How the BB scaling λ_κ follows the surrogate's condition number κ̃.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum LambdaKappaRule {
    #[default]
    Kappa,
    KappaSquared,
    Fixed(f64),
}

/// Resolved stage parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub scheme: Scheme,
    /// Smoothness of the unregularized objective.
    pub l: f64,
    /// Bounded-nonconvexity modulus used (0 for convex schemes).
    pub sigma: f64,
    /// Weight of the first stage.
    pub mu: f64,
    /// Lower limit of the decaying schedule.
    pub mu_floor: Option<f64>,
    pub gamma: f64,
    pub theta: Option<f64>,
    /// Distance proxy the single-regularizer weight came from.
    pub r_hat: Option<f64>,
    pub eta: f64,
    pub m: usize,
    pub m_cap: Option<usize>,
    pub k_first: usize,
    pub k_const: usize,
    pub stages: usize,
    pub c_m: f64,
    pub eta_scale: f64,
    pub m_override: Option<usize>,
    pub lambda_kappa: LambdaKappaRule,
}

/// Per-stage quantities for a given weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSetting {
    pub mu: f64,
    /// Strong-convexity modulus of the surrogate.
    pub mu_eff: f64,
    /// Smoothness of the surrogate.
    pub l_eff: f64,
    pub eta: f64,
    pub m: usize,
    pub lambda_kappa: f64,
}

impl StageSetting {
    pub fn bb_interval(&self) -> Interval {
        Interval::bb(self.lambda_kappa, self.mu_eff, self.l_eff)
    }
}

/// `⌈c_m·L̃/μ̃⌉`, at least 1 and at most `cap`.
pub fn stage_m(c_m: f64, l_eff: f64, mu_eff: f64, cap: Option<usize>) -> usize {
    // absorb rounding in the ratio so that exact integers stay put
    let raw = (c_m * l_eff / mu_eff * (1.0 - 1e-12)).ceil().max(1.0);
    let capped = cap.map_or(raw, |c| raw.min(c as f64));
    if capped >= usize::MAX as f64 {
        usize::MAX
    } else {
        capped as usize
    }
}

/// `eta_scale / L̃`.
pub fn stage_eta(eta_scale: f64, l_eff: f64) -> f64 {
    eta_scale / l_eff
}

impl StageParams {
    pub fn setting(&self, mu: f64) -> StageSetting {
        let l_eff = self.l + mu;
        let mu_eff = if self.scheme == Scheme::Nonconvex {
            mu - self.sigma
        } else {
            mu
        };
        let kappa = l_eff / mu_eff;
        StageSetting {
            mu,
            mu_eff,
            l_eff,
            eta: stage_eta(self.eta_scale, l_eff),
            m: self
                .m_override
                .unwrap_or_else(|| stage_m(self.c_m, l_eff, mu_eff, self.m_cap)),
            lambda_kappa: match self.lambda_kappa {
                LambdaKappaRule::Kappa => kappa,
                LambdaKappaRule::KappaSquared => kappa * kappa,
                LambdaKappaRule::Fixed(v) => v,
            },
        }
    }

    /// Weight of stage `s ≥ 1` under the decaying schedule.
    pub fn v1_mu(&self, s: usize) -> f64 {
        let floor = self.mu_floor.unwrap_or(0.0);
        let exp = i32::try_from(s.saturating_sub(1)).unwrap_or(i32::MAX);
        (self.mu * self.gamma.powi(exp)).max(floor)
    }
}

/// Resolves the stage recipe from the objective's constants.
///
/// `n` sets the default inner-loop cap `5n`; `r_hat` is the computed
/// distance proxy, used by the single scheme unless overridden.
pub fn theorem_params(
    cfg: &MetaConfig,
    l: f64,
    sigma: f64,
    n: Option<usize>,
    r_hat: Option<f64>,
) -> Result<StageParams> {
    cfg.validate()?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("L must be positive"));
    }
    let sqrt_eps = cfg.epsilon.sqrt();
    let m_cap = cfg.m_cap.or(n.map(|n| 5 * n));
    let mut r_used = None;
    let mut theta = None;
    let mut sigma_used = 0.0;
    let mut mu_floor = None;
    let mu = match cfg.scheme {
        Scheme::Single => match cfg.mu {
            Some(mu) => mu,
            None => {
                let r = cfg.r_hat.or(r_hat).ok_or_else(|| {
                    Error::invalid("single scheme needs mu or a distance proxy r_hat")
                })?;
                if !(r > 0.0) {
                    return Err(Error::invalid(
                        "r_hat must be positive (x0 already stationary?)",
                    ));
                }
                r_used = Some(r);
                cfg.c_mu * sqrt_eps / r
            }
        },
        Scheme::RecursiveV1 => {
            let floor = cfg.c_mu * sqrt_eps;
            mu_floor = Some(floor);
            let mu1 = if cfg.v1_theory_mu1 {
                floor
            } else {
                cfg.mu.unwrap_or(V1_PRACTICAL_MU1)
            };
            mu1.max(floor)
        }
        // with a target contraction ρ the first stage already carries it: μ₁ = μ₀ρ
        Scheme::RecursiveV2 => cfg.mu0.unwrap_or(cfg.c0) * cfg.rho_target.unwrap_or(1.0),
        Scheme::Nonconvex => {
            let s = cfg.sigma.unwrap_or(sigma);
            if !(s >= 0.0) {
                return Err(Error::invalid("sigma must be non-negative"));
            }
            let t = cfg.theta.unwrap_or(s);
            if !(t > 0.0) {
                return Err(Error::invalid(
                    "theta must be positive (set it when sigma is 0)",
                ));
            }
            sigma_used = s;
            theta = Some(t);
            s + t
        }
    };
    let mut p = StageParams {
        scheme: cfg.scheme,
        l,
        sigma: sigma_used,
        mu,
        mu_floor,
        gamma: cfg.gamma,
        theta,
        r_hat: r_used,
        eta: 0.0,
        m: 0,
        m_cap,
        k_first: cfg.k_first,
        k_const: cfg.k_const,
        stages: if cfg.scheme == Scheme::Single {
            1
        } else {
            cfg.stages
        },
        c_m: cfg.c_m,
        eta_scale: cfg.eta_scale,
        m_override: cfg.m,
        lambda_kappa: cfg.lambda_kappa,
    };
    let first = p.setting(mu);
    p.eta = first.eta;
    p.m = first.m;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_recipe() {
        let cfg = MetaConfig {
            epsilon: 1e-4,
            ..MetaConfig::new(Scheme::Single)
        };
        let p = theorem_params(&cfg, 1.0, 0.0, None, Some(1.0)).unwrap();
        assert!((p.mu - 1e-2).abs() < 1e-15);
        assert!((p.eta - 0.5 / 1.01).abs() < 1e-15);
        assert_eq!(p.m, 202);
    }

    #[test]
    fn nonconvex_recipe() {
        let cfg = MetaConfig {
            theta: Some(1.0),
            ..MetaConfig::new(Scheme::Nonconvex)
        };
        let p = theorem_params(&cfg, 1.0, 1.0, None, None).unwrap();
        assert!((p.eta - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.m, 6);
        assert_eq!(p.theta, Some(1.0));
        assert_eq!(p.setting(p.mu).mu_eff, 1.0);
    }

    #[test]
    fn theta_defaults_to_sigma() {
        let p = theorem_params(
            &MetaConfig::new(Scheme::Nonconvex),
            2.0,
            0.5,
            Some(10),
            None,
        )
        .unwrap();
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.m, 12);
    }

    #[test]
    fn v1_schedule_floors() {
        let cfg = MetaConfig {
            epsilon: 1e-10,
            ..MetaConfig::new(Scheme::RecursiveV1)
        };
        let p = theorem_params(&cfg, 1.0, 0.0, Some(100), None).unwrap();
        assert_eq!(p.mu, 1e-3);
        let mus: Vec<f64> = (1..=6).map(|s| p.v1_mu(s)).collect();
        assert!(mus.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*mus.last().unwrap(), 1e-5);
        assert_eq!(p.m, 500);
    }

    #[test]
    fn inconsistent_overrides_rejected() {
        let bad = [
            MetaConfig {
                mu: Some(1.0),
                ..MetaConfig::new(Scheme::Nonconvex)
            },
            MetaConfig {
                theta: Some(1.0),
                ..MetaConfig::new(Scheme::Single)
            },
            MetaConfig {
                mu: Some(1.0),
                ..MetaConfig::new(Scheme::RecursiveV2)
            },
            MetaConfig {
                gamma: 1.5,
                ..MetaConfig::new(Scheme::RecursiveV1)
            },
            MetaConfig {
                epsilon: 0.0,
                ..MetaConfig::new(Scheme::Single)
            },
        ];
        for cfg in bad {
            assert!(
                theorem_params(&cfg, 1.0, 0.0, None, Some(1.0)).is_err(),
                "{cfg:?}"
            );
        }
        assert!(theorem_params(&MetaConfig::new(Scheme::Single), 1.0, 0.0, None, None).is_err());
        assert!(theorem_params(&MetaConfig::new(Scheme::Nonconvex), 1.0, 0.0, None, None).is_err());
    }
}
