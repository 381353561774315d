//! Outer-loop step-size policies for SARAH.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` for step sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// `[1/(λ_κ L), 1/(λ_κ μ)]`, where BB steps land on a μ-strongly
    /// convex, L-smooth function.
    pub fn bb(lambda_kappa: f64, mu: f64, l: f64) -> Self {
        Interval::new(1.0 / (lambda_kappa * l), 1.0 / (lambda_kappa * mu))
    }

    /// `[1/(m(L+λ)), 1/(mλ)]` for the modified BB step.
    pub fn modified_bb(m: usize, lambda: f64, l: f64) -> Self {
        let m = m as f64;
        Interval::new(1.0 / (m * (l + lambda)), 1.0 / (m * lambda))
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Same test with a relative slack for rounding.
    pub fn contains_rel(&self, v: f64, rel: f64) -> bool {
        v >= self.lo * (1.0 - rel) && v <= self.hi * (1.0 + rel)
    }

    fn clamp(&self, v: f64) -> (f64, bool) {
        if v < self.lo {
            (self.lo, true)
        } else if v > self.hi {
            (self.hi, true)
        } else {
            (v, false)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModifiedBbKind {
    /// Denominator `⟨Δx, Δg⟩ + λ‖Δx‖²`.
    Convex,
    /// Denominator `|⟨Δx, Δg⟩| + λ‖Δx‖²`.
    Nonconvex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StepRule {
    /// The initial step in every outer loop.
    Fixed,
    /// `η = (1/λ_κ)·‖Δx‖²/⟨Δx, Δg⟩` over consecutive snapshots.
    Bb { lambda_kappa: f64 },
    /// `η = (1/m)·‖Δx‖²/(⟨Δx, Δg⟩ (or its magnitude) + λ‖Δx‖²)`.
    ModifiedBb {
        kind: ModifiedBbKind,
        m: usize,
        lambda: f64,
    },
}

/// BB step before any clamping; `None` in the degenerate cases
/// `‖Δx‖² ≤ 1e−30` or `⟨Δx, Δg⟩ ≤ 1e−30·‖Δx‖²`.
pub fn bb_eta_raw(
    x_prev: &[f64],
    x_prev2: &[f64],
    g_prev: &[f64],
    g_prev2: &[f64],
    lambda_kappa: f64,
) -> Option<f64> {
    let (sxx, sxg) = secant(x_prev, x_prev2, g_prev, g_prev2);
    if sxx <= 1e-30 || sxg <= 1e-30 * sxx {
        return None;
    }
    Some(sxx / sxg / lambda_kappa)
}

/// Result of a BB evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BbStep {
    Step { eta: f64, raw: f64, clamped: bool },
    Degenerate,
}

/// BB step, clamped into `clamp` when given.
pub fn bb_eta(
    x_prev: &[f64],
    x_prev2: &[f64],
    g_prev: &[f64],
    g_prev2: &[f64],
    lambda_kappa: f64,
    clamp: Option<Interval>,
) -> BbStep {
    match bb_eta_raw(x_prev, x_prev2, g_prev, g_prev2, lambda_kappa) {
        None => BbStep::Degenerate,
        Some(raw) => {
            let (eta, clamped) = clamp.map_or((raw, false), |c| c.clamp(raw));
            BbStep::Step { eta, raw, clamped }
        }
    }
}

/// Modified BB step; `None` when `Δx = 0` (or, for the convex form, when
/// the denominator is not positive).
pub fn modified_bb_eta(
    kind: ModifiedBbKind,
    x_prev: &[f64],
    x_prev2: &[f64],
    g_prev: &[f64],
    g_prev2: &[f64],
    m: usize,
    lambda: f64,
) -> Option<f64> {
    let (sxx, sxg) = secant(x_prev, x_prev2, g_prev, g_prev2);
    if sxx <= 1e-30 {
        return None;
    }
    let curvature = match kind {
        ModifiedBbKind::Convex => sxg,
        ModifiedBbKind::Nonconvex => sxg.abs(),
    };
    let denom = curvature + lambda * sxx;
    if denom <= 1e-30 * sxx {
        return None;
    }
    Some(sxx / denom / m as f64)
}

/// `(‖Δx‖², ⟨Δx, Δg⟩)`
fn secant(x_prev: &[f64], x_prev2: &[f64], g_prev: &[f64], g_prev2: &[f64]) -> (f64, f64) {
    let mut sxx = 0.0;
    let mut sxg = 0.0;
    for j in 0..x_prev.len() {
        let dx = x_prev[j] - x_prev2[j];
        let dg = g_prev[j] - g_prev2[j];
        sxx += dx * dx;
        sxg += dx * dg;
    }
    (sxx, sxg)
}

/// Chosen step for one outer loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepChoice {
    pub eta: f64,
    /// Formula output before clamping, when the formula was evaluated.
    pub raw: Option<f64>,
    pub clamped: bool,
    pub degenerate: bool,
}

/// Stateful policy: remembers one previous `(snapshot, full gradient)`
/// pair, O(d) memory.
#[derive(Clone, Debug)]
pub struct StepSizeController {
    rule: StepRule,
    clamp: Option<Interval>,
    eta: f64,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl StepSizeController {
    pub fn new(rule: StepRule, eta_init: f64, clamp: Option<Interval>) -> Self {
        StepSizeController {
            rule,
            clamp,
            eta: eta_init,
            prev: None,
        }
    }

    pub fn rule(&self) -> &StepRule {
        &self.rule
    }

    pub fn current(&self) -> f64 {
        self.eta
    }

    /// Step for the outer loop starting at snapshot `x` with full gradient
    /// `g`. The first call returns the initial step.
    pub fn next(&mut self, x: &[f64], g: &[f64]) -> StepChoice {
        let mut choice = StepChoice {
            eta: self.eta,
            raw: None,
            clamped: false,
            degenerate: false,
        };
        if let Some((xp, gp)) = &self.prev {
            match &self.rule {
                StepRule::Fixed => {}
                StepRule::Bb { lambda_kappa } => {
                    match bb_eta(x, xp, g, gp, *lambda_kappa, self.clamp) {
                        BbStep::Step { eta, raw, clamped } => {
                            choice.eta = eta;
                            choice.raw = Some(raw);
                            choice.clamped = clamped;
                        }
                        BbStep::Degenerate => choice.degenerate = true,
                    }
                }
                StepRule::ModifiedBb { kind, m, lambda } => {
                    match modified_bb_eta(*kind, x, xp, g, gp, *m, *lambda) {
                        Some(raw) => {
                            let (eta, clamped) = self.clamp.map_or((raw, false), |c| c.clamp(raw));
                            choice.eta = eta;
                            choice.raw = Some(raw);
                            choice.clamped = clamped;
                        }
                        None => choice.degenerate = true,
                    }
                }
            }
        }
        if !matches!(self.rule, StepRule::Fixed) {
            match &mut self.prev {
                Some((xp, gp)) => {
                    xp.copy_from_slice(x);
                    gp.copy_from_slice(g);
                }
                None => self.prev = Some((x.to_vec(), g.to_vec())),
            }
        }
        self.eta = choice.eta;
        choice
    }
}
