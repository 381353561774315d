use rand_distr::{Distribution, StandardNormal};

use super::{IfoCounter, Objective, SmoothnessInfo};
use crate::error::{Error, Result};
use crate::rng;

/// `f_i(x) = ½ (x − c_i)ᵀ D (x − c_i)` with a shared diagonal `D`.
///
/// `f` is `min D`-strongly convex, every `∇f_i` is `max D`-Lipschitz, and
/// the minimizer is the mean of the centers.
#[derive(Debug)]
pub struct RidgeQuadratic {
    diag: Vec<f64>,
    centers: Vec<f64>,
    n: usize,
    info: SmoothnessInfo,
    counter: IfoCounter,
}

impl RidgeQuadratic {
    /// `centers` is row-major `n × d`.
    pub fn with_centers(diag: Vec<f64>, centers: Vec<f64>) -> Result<Self> {
        let d = diag.len();
        if d == 0 || centers.is_empty() || !centers.len().is_multiple_of(d) {
            return Err(Error::invalid("centers must be a non-empty n × d matrix"));
        }
        if diag.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "diagonal entries must be positive and finite",
            ));
        }
        let l = diag.iter().copied().fold(f64::MIN, f64::max);
        let mu = diag.iter().copied().fold(f64::MAX, f64::min);
        Ok(RidgeQuadratic {
            n: centers.len() / d,
            diag,
            centers,
            info: SmoothnessInfo {
                l,
                mu_sc: mu,
                sigma_bn: 0.0,
            },
            counter: IfoCounter::new(),
        })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    fn center(&self, i: usize) -> &[f64] {
        let d = self.diag.len();
        &self.centers[i * d..(i + 1) * d]
    }

    /// Analytic minimizer: the mean of the centers.
    pub fn minimizer(&self) -> Vec<f64> {
        let d = self.diag.len();
        let mut m = vec![0.0; d];
        for i in 0..self.n {
            for (mj, cj) in m.iter_mut().zip(self.center(i)) {
                *mj += cj;
            }
        }
        for mj in &mut m {
            *mj /= self.n as f64;
        }
        m
    }
}

/// Seeded instance with `D` spread linearly over `[mu_sc, l]` (both
/// endpoints present) and standard-normal centers. With `d = 1` the range
/// must be a single point.
pub fn ridge_quadratic_objective(
    n: usize,
    d: usize,
    mu_sc: f64,
    l: f64,
    seed: u64,
) -> Result<RidgeQuadratic> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be at least 1"));
    }
    if !(mu_sc > 0.0 && mu_sc <= l && l.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < mu_sc ≤ L, got {mu_sc}, {l}"
        )));
    }
    if d == 1 && mu_sc != l {
        return Err(Error::invalid(
            "d = 1 cannot hold both mu_sc and L on the diagonal",
        ));
    }
    let diag: Vec<f64> = if d == 1 {
        vec![l]
    } else {
        (0..d)
            .map(|j| {
                if j == d - 1 {
                    l
                } else {
                    mu_sc + (l - mu_sc) * j as f64 / (d - 1) as f64
                }
            })
            .collect()
    };
    let mut rng = rng::stream(seed, 0xC0FFEE);
    let centers: Vec<f64> = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    RidgeQuadratic::with_centers(diag, centers)
}

impl Objective for RidgeQuadratic {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn counter(&self) -> &IfoCounter {
        &self.counter
    }

    fn smoothness(&self) -> SmoothnessInfo {
        self.info
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let c = self.center(i);
        0.5 * self
            .diag
            .iter()
            .zip(x.iter().zip(c))
            .fold(0.0, |acc, (dj, (xj, cj))| acc + dj * (xj - cj) * (xj - cj))
    }

    fn accumulate_component_grad(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let c = self.center(i);
        for j in 0..out.len() {
            out[j] += scale * self.diag[j] * (x[j] - c[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn identity_quadratic() {
        let f = RidgeQuadratic::with_centers(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(f.value(&[3.0]).unwrap(), 4.5);
        assert_eq!(f.full_grad(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(f.minimizer(), vec![0.0]);
        let g = ridge_quadratic_objective(1, 1, 1.0, 1.0, 0).unwrap();
        assert_eq!(g.diag(), &[1.0]);
    }

    #[test]
    fn minimizer_is_stationary() {
        for seed in 0..5 {
            let f = ridge_quadratic_objective(37, 6, 0.1, 2.0, seed).unwrap();
            let g = f.full_grad(&f.minimizer()).unwrap();
            assert!(norm(&g) <= 1e-12, "{}", norm(&g));
        }
    }

    #[test]
    fn diagonal_spans_range() {
        let f = ridge_quadratic_objective(4, 3, 0.1, 2.0, 1).unwrap();
        assert_eq!(f.diag()[0], 0.1);
        assert_eq!(f.diag()[2], 2.0);
        assert_eq!(f.smoothness().mu_sc, 0.1);
        assert_eq!(f.smoothness().l, 2.0);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(ridge_quadratic_objective(0, 2, 0.1, 1.0, 0).is_err());
        assert!(ridge_quadratic_objective(2, 2, 0.0, 1.0, 0).is_err());
        assert!(ridge_quadratic_objective(2, 2, 2.0, 1.0, 0).is_err());
        assert!(ridge_quadratic_objective(2, 1, 0.5, 1.0, 0).is_err());
    }
}
