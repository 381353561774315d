//! Objectives with an anchored quadratic: `f̃(x) = f(x) + (μ/2)‖x − anchor‖²`.
//!
//! The quadratic is added inside every component, so `f̃_i` carries it too,
//! but the oracle charge stays one IFO per component gradient: only base
//! gradients are counted.

use crate::error::{check_dim, Error, Result};
use crate::objective::{IfoCounter, Objective, SmoothnessInfo};
use crate::par::ExecMode;

#[derive(Debug)]
pub struct AnchoredSurrogate<'a, O: Objective + ?Sized> {
    base: &'a O,
    anchor: Vec<f64>,
    mu: f64,
}

/// Wraps `base` with weight `mu ≥ 0` around `anchor`. `mu = 0` passes the
/// base through unchanged.
pub fn make_anchored<O: Objective + ?Sized>(
    base: &O,
    anchor: Vec<f64>,
    mu: f64,
) -> Result<AnchoredSurrogate<'_, O>> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!(
            "mu must be finite and ≥ 0, got {mu}"
        )));
    }
    check_dim(base.dim(), anchor.len())?;
    Ok(AnchoredSurrogate { base, anchor, mu })
}

impl<'a, O: Objective + ?Sized> AnchoredSurrogate<'a, O> {
    pub fn base(&self) -> &'a O {
        self.base
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `(L + μ, mu_sc + μ)`. For a σ-bounded nonconvex base this still
    /// reports `mu_sc + μ`; use [`AnchoredSurrogate::effective_strong_convexity`]
    /// for the modulus that actually holds.
    fn derived_info(&self) -> SmoothnessInfo {
        let b = self.base.smoothness();
        SmoothnessInfo {
            l: b.l + self.mu,
            mu_sc: b.mu_sc + self.mu,
            sigma_bn: (b.sigma_bn - self.mu).max(0.0),
        }
    }

    /// Guaranteed strong-convexity modulus: `mu_sc + μ` for convex bases,
    /// `μ − σ` for σ-bounded nonconvex ones (θ when `μ = σ + θ`).
    pub fn effective_strong_convexity(&self) -> f64 {
        let b = self.base.smoothness();
        if b.sigma_bn > 0.0 {
            self.mu - b.sigma_bn
        } else {
            b.mu_sc + self.mu
        }
    }

    /// `(strong convexity, smoothness)` of the surrogate.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        (
            self.effective_strong_convexity(),
            self.base.smoothness().l + self.mu,
        )
    }
}

impl<O: Objective + ?Sized> Objective for AnchoredSurrogate<'_, O> {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn counter(&self) -> &IfoCounter {
        self.base.counter()
    }

    fn smoothness(&self) -> SmoothnessInfo {
        let mut info = self.derived_info();
        info.mu_sc = self.effective_strong_convexity().max(0.0);
        info
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.base.component_value(i, x) + self.quad(x)
    }

    fn accumulate_component_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        self.base.accumulate_component_grad(i, x, scale, out);
        if self.mu != 0.0 {
            let s = scale * self.mu;
            for ((o, xi), ai) in out.iter_mut().zip(x).zip(&self.anchor) {
                *o += s * (xi - ai);
            }
        }
    }

    fn add_component_grad_diff(&self, i: usize, x_new: &[f64], x_old: &[f64], acc: &mut [f64]) {
        self.base.add_component_grad_diff(i, x_new, x_old, acc);
        if self.mu != 0.0 {
            for ((a, xn), xo) in acc.iter_mut().zip(x_new).zip(x_old) {
                *a += self.mu * (xn - xo);
            }
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.base.value(x)? + self.quad(x))
    }

    fn full_grad_with(&self, x: &[f64], mode: ExecMode) -> Result<Vec<f64>> {
        let mut g = self.base.full_grad_with(x, mode)?;
        add_anchor_term(&mut g, self.mu, x, &self.anchor);
        Ok(g)
    }

    fn base_grad_from_full(&self, x: &[f64], grad: &[f64]) -> Vec<f64> {
        let g = self.base.base_grad_from_full(x, grad);
        true_grad_from_surrogate(&g, self.mu, x, &self.anchor).expect("dimensions checked")
    }

    fn anchor_term(&self) -> Option<(f64, &[f64])> {
        Some((self.mu, &self.anchor))
    }
}

impl<O: Objective + ?Sized> AnchoredSurrogate<'_, O> {
    fn quad(&self, x: &[f64]) -> f64 {
        if self.mu == 0.0 {
            return 0.0;
        }
        let d2 = x
            .iter()
            .zip(&self.anchor)
            .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b));
        0.5 * self.mu * d2
    }
}

/// `g += mu·(x − anchor)`, leaving entries with `x_j = anchor_j` untouched so
/// the gradient at the anchor is bitwise the base gradient.
fn add_anchor_term(g: &mut [f64], mu: f64, x: &[f64], anchor: &[f64]) {
    if mu == 0.0 {
        return;
    }
    for ((gi, xi), ai) in g.iter_mut().zip(x).zip(anchor) {
        let d = xi - ai;
        if d != 0.0 {
            *gi += mu * d;
        }
    }
}

fn sub_anchor_term(g: &mut [f64], mu: f64, x: &[f64], anchor: &[f64]) {
    if mu == 0.0 {
        return;
    }
    for ((gi, xi), ai) in g.iter_mut().zip(x).zip(anchor) {
        let d = xi - ai;
        if d != 0.0 {
            *gi -= mu * d;
        }
    }
}

/// `∇f(x) = ∇f̃(x) − μ(x − anchor)`; costs no IFO.
pub fn true_grad_from_surrogate(
    surrogate_grad: &[f64],
    mu: f64,
    x: &[f64],
    anchor: &[f64],
) -> Result<Vec<f64>> {
    check_dim(surrogate_grad.len(), x.len())?;
    check_dim(surrogate_grad.len(), anchor.len())?;
    let mut g = surrogate_grad.to_vec();
    sub_anchor_term(&mut g, mu, x, anchor);
    Ok(g)
}

/// Where the next surrogate is anchored.
#[derive(Clone, Copy, Debug)]
pub enum NextAnchor<'a> {
    /// The new anchor is the point the gradient is taken at (moving-anchor
    /// schemes). Its quadratic vanishes there.
    AtPoint,
    /// Fixed anchor with a new weight (the decreasing-μ scheme around `x₀`).
    Fixed { anchor: &'a [f64], mu: f64 },
}

/// Full gradient of the next surrogate at `x_s`, from the previous
/// surrogate's full gradient at the same point. Costs no IFO.
///
/// With [`NextAnchor::AtPoint`] this is `∇f̃_s(x_s) − μ_s(x_s − anchor_s)`,
/// which is also `∇f(x_s)`. With [`NextAnchor::Fixed`] it is
/// `∇f̃_s(x_s) − μ_s(x_s − anchor_s) + μ_{s+1}(x_s − anchor_{s+1})`; when the
/// anchor is unchanged this reduces to `∇f̃_s(x_s) + (μ_{s+1} − μ_s)(x_s − x₀)`.
pub fn carry_over_grad(
    prev_surrogate_grad: &[f64],
    mu_prev: f64,
    x_s: &[f64],
    anchor_prev: &[f64],
    next: NextAnchor<'_>,
) -> Result<Vec<f64>> {
    check_dim(prev_surrogate_grad.len(), x_s.len())?;
    check_dim(prev_surrogate_grad.len(), anchor_prev.len())?;
    match next {
        NextAnchor::AtPoint => {
            true_grad_from_surrogate(prev_surrogate_grad, mu_prev, x_s, anchor_prev)
        }
        NextAnchor::Fixed { anchor, mu } => {
            check_dim(prev_surrogate_grad.len(), anchor.len())?;
            let mut g = prev_surrogate_grad.to_vec();
            if anchor == anchor_prev {
                add_anchor_term(&mut g, mu - mu_prev, x_s, anchor);
            } else {
                sub_anchor_term(&mut g, mu_prev, x_s, anchor_prev);
                add_anchor_term(&mut g, mu, x_s, anchor);
            }
            Ok(g)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::RidgeQuadratic;

    fn unit() -> RidgeQuadratic {
        RidgeQuadratic::with_centers(vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn one_dimensional_hand_example() {
        let f = unit();
        let s = make_anchored(&f, vec![0.0], 1.0).unwrap();
        assert_eq!(s.value(&[3.0]).unwrap(), 9.0);
        assert_eq!(s.full_grad(&[3.0]).unwrap(), vec![6.0]);
        assert_eq!(s.component_grad(0, &[3.0]).unwrap(), vec![6.0]);
        assert_eq!(
            true_grad_from_surrogate(&[6.0], 1.0, &[3.0], &[0.0]).unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn zero_mu_passes_through() {
        let f = crate::objective::ridge_quadratic_objective(5, 3, 0.2, 1.0, 9).unwrap();
        let s = make_anchored(&f, vec![1.0, -2.0, 0.5], 0.0).unwrap();
        let x = [0.3, 0.1, -0.7];
        assert_eq!(
            s.value(&x).unwrap().to_bits(),
            f.value(&x).unwrap().to_bits()
        );
        assert_eq!(s.full_grad(&x).unwrap(), f.full_grad(&x).unwrap());
        assert_eq!(
            s.component_grad(2, &x).unwrap(),
            f.component_grad(2, &x).unwrap()
        );
    }

    #[test]
    fn identities_at_anchor() {
        let g = vec![1.5, -2.0];
        let x = vec![0.25, 4.0];
        assert_eq!(true_grad_from_surrogate(&g, 3.0, &x, &x).unwrap(), g);
        assert_eq!(
            carry_over_grad(&g, 3.0, &x, &x, NextAnchor::AtPoint).unwrap(),
            g
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = unit();
        assert!(make_anchored(&f, vec![0.0], -1.0).is_err());
        assert!(make_anchored(&f, vec![0.0, 1.0], 1.0).is_err());
        assert!(true_grad_from_surrogate(&[1.0], 1.0, &[1.0, 2.0], &[0.0]).is_err());
        assert!(carry_over_grad(&[1.0], 1.0, &[1.0], &[0.0, 0.0], NextAnchor::AtPoint).is_err());
    }

    #[test]
    fn fixed_anchor_weight_change() {
        // f = x²/2, anchor 0: ∇f̃_μ(x) = (1 + μ)x
        let g_prev = vec![(1.0 + 0.5) * 2.0];
        let g = carry_over_grad(
            &g_prev,
            0.5,
            &[2.0],
            &[0.0],
            NextAnchor::Fixed {
                anchor: &[0.0],
                mu: 0.125,
            },
        )
        .unwrap();
        assert_eq!(g, vec![(1.0 + 0.125) * 2.0]);
    }

    #[test]
    fn wrapping_costs_nothing_extra() {
        let f = crate::objective::ridge_quadratic_objective(8, 2, 0.5, 1.0, 1).unwrap();
        let s = make_anchored(&f, vec![0.0, 0.0], 2.0).unwrap();
        s.full_grad(&[1.0, 1.0]).unwrap();
        s.component_grad(0, &[1.0, 1.0]).unwrap();
        let mut acc = vec![0.0; 2];
        s.add_component_grad_diff(1, &[1.0, 0.0], &[0.0, 1.0], &mut acc);
        assert_eq!(f.counter().read(), 8 + 1 + 2);
    }
}
