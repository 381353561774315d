use std::sync::Arc;

use super::{IfoCounter, Objective, SmoothnessInfo};
use crate::dataset::Dataset;

/// `max_z |d²/dz² (1 − σ(z))²|`, from a dense grid search over
/// `z ∈ [−20, 20]` with step 1e−4 (see `scripts/sigmoidsq_curvature.py`
/// and the `curvature_constant_matches_grid` test). The maximum sits at
/// `z ≈ 0.4657`.
pub const SIGMOIDSQ_CURVATURE: f64 = 0.154_058_57;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `ln(1 + exp(−b⟨a, x⟩))`
    Logistic,
    /// `(1 − σ(b⟨a, x⟩))²`, nonconvex.
    SigmoidSq,
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` = `max(t, 0) + ln(1 + e^{−|t|})`
#[inline]
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl LossKind {
    /// Loss at margin `z = b⟨a, x⟩`.
    #[inline]
    pub fn loss(self, z: f64) -> f64 {
        match self {
            LossKind::Logistic => softplus(-z),
            LossKind::SigmoidSq => {
                let s = sigmoid(-z);
                s * s
            }
        }
    }

    /// Derivative of [`LossKind::loss`] in `z`.
    #[inline]
    pub fn dloss(self, z: f64) -> f64 {
        match self {
            LossKind::Logistic => -sigmoid(-z),
            LossKind::SigmoidSq => {
                let s = sigmoid(-z);
                -2.0 * sigmoid(z) * s * s
            }
        }
    }
}

/// Margin-based loss over a shared dataset: `f_i(x) = loss(b_i⟨a_i, x⟩)`.
#[derive(Debug)]
pub struct LinearLoss {
    data: Arc<Dataset>,
    kind: LossKind,
    info: SmoothnessInfo,
    counter: IfoCounter,
}

impl LinearLoss {
    pub fn new(data: impl Into<Arc<Dataset>>, kind: LossKind) -> Self {
        let data = data.into();
        let info = smoothness_bound(&data, kind);
        LinearLoss {
            data,
            kind,
            info,
            counter: IfoCounter::new(),
        }
    }

    /// Replaces the bounded-nonconvexity modulus (defaults to `L`).
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.info.sigma_bn = sigma;
        self
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    #[inline]
    fn margin(&self, i: usize, x: &[f64]) -> f64 {
        self.data.label(i) * self.data.row(i).dot_unchecked(x)
    }
}

pub fn logistic_objective(data: impl Into<Arc<Dataset>>) -> LinearLoss {
    LinearLoss::new(data, LossKind::Logistic)
}

pub fn sigmoidsq_objective(data: impl Into<Arc<Dataset>>) -> LinearLoss {
    LinearLoss::new(data, LossKind::SigmoidSq)
}

/// Logistic: `L = max‖a_i‖²/4`, convex. Sigmoid-squared: `L = c_g·max‖a_i‖²`
/// with `c_g` = [`SIGMOIDSQ_CURVATURE`], and `σ = L`.
pub fn smoothness_bound(data: &Dataset, kind: LossKind) -> SmoothnessInfo {
    let r2 = data.max_row_norm_sq();
    match kind {
        LossKind::Logistic => SmoothnessInfo {
            l: r2 / 4.0,
            mu_sc: 0.0,
            sigma_bn: 0.0,
        },
        LossKind::SigmoidSq => {
            let l = SIGMOIDSQ_CURVATURE * r2;
            SmoothnessInfo {
                l,
                mu_sc: 0.0,
                sigma_bn: l,
            }
        }
    }
}

impl Objective for LinearLoss {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn counter(&self) -> &IfoCounter {
        &self.counter
    }

    fn smoothness(&self) -> SmoothnessInfo {
        self.info
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.kind.loss(self.margin(i, x))
    }

    #[inline]
    fn accumulate_component_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let b = self.data.label(i);
        let coef = scale * b * self.kind.dloss(self.margin(i, x));
        self.data.row(i).axpy_into(coef, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_libsvm_str, SparseRow};

    fn single(a: f64, b: f64) -> Dataset {
        Dataset::new(vec![SparseRow::from_pairs(&[(0, a)]).unwrap()], vec![b], 1).unwrap()
    }

    #[test]
    fn logistic_at_origin() {
        let ds = parse_libsvm_str("+1 1:0.5 3:1.0\n-1 2:2.0").unwrap();
        let f = logistic_objective(ds.clone());
        let x = vec![0.0; 3];
        assert!((f.value(&x).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        for i in 0..ds.n() {
            let g = f.component_grad(i, &x).unwrap();
            let want: Vec<f64> = ds
                .row(i)
                .to_dense(3)
                .iter()
                .map(|a| -0.5 * ds.label(i) * a)
                .collect();
            assert_eq!(g, want);
        }
    }

    #[test]
    fn logistic_far_margin() {
        // ln(1 + e^{-10}) = 4.539889921686465e-5 (mpmath, 30 digits)
        let f = logistic_objective(single(1.0, 1.0));
        let v = f.value(&[10.0]).unwrap();
        assert!((v - 4.539_889_921_686_465e-5).abs() < 1e-18);
        // stable at large |margin|
        assert!(f.value(&[1e3]).unwrap().is_finite());
        assert!((f.value(&[-1e3]).unwrap() - 1e3).abs() < 1e-9);
        assert!(f.full_grad(&[-1e3]).unwrap()[0].is_finite());
    }

    #[test]
    fn sigmoidsq_values() {
        let ds = parse_libsvm_str("+1 1:0.5 3:1.0\n-1 2:2.0").unwrap();
        let f = sigmoidsq_objective(ds);
        assert_eq!(f.value(&[0.0; 3]).unwrap(), 0.25);
        let f = sigmoidsq_objective(single(1.0, 1.0));
        assert!(f.value(&[40.0]).unwrap() <= 1e-17);
    }

    #[test]
    fn smoothness_single_row() {
        let info = smoothness_bound(&single(2.0, 1.0), LossKind::Logistic);
        assert_eq!(info.l, 1.0);
        assert_eq!(info.mu_sc, 0.0);
        assert_eq!(info.sigma_bn, 0.0);
        let info = smoothness_bound(&single(2.0, 1.0), LossKind::SigmoidSq);
        assert_eq!(info.l, 4.0 * SIGMOIDSQ_CURVATURE);
        assert_eq!(info.sigma_bn, info.l);
    }

    /// Independent oracle: second central differences of `g(z) = (1−σ(z))²`
    /// evaluated from its definition, on the same grid the constant came from.
    #[test]
    fn curvature_constant_matches_grid() {
        let g = |z: f64| {
            let s = 1.0 / (1.0 + (-z).exp());
            (1.0 - s) * (1.0 - s)
        };
        let h = 1e-4;
        let steps = (40.0 / h) as i64;
        let mut best = 0.0f64;
        for k in 1..steps {
            let z = -20.0 + k as f64 * h;
            let d2 = (g(z + h) - 2.0 * g(z) + g(z - h)) / (h * h);
            best = best.max(d2.abs());
        }
        assert!((best - SIGMOIDSQ_CURVATURE).abs() < 1e-6, "grid max {best}");
    }
}
