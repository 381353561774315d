//! Property tests for the invariants of each module.

mod common;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{norm, rel_diff};
use vropt::dataset::{parse_libsvm_str, sparse_dot, synthetic_categorical, Dataset, SparseRow};
use vropt::harness::tracefile::{parse_csv, to_csv, TraceRow};
use vropt::objective::{
    logistic_objective, ridge_quadratic_objective, sigmoidsq_objective, LinearLoss, LossKind,
    Objective,
};
use vropt::optimizers::{sarah_run, EndGradient, SarahConfig, SnapshotRule};
use vropt::rng;
use vropt::surrogate::make_anchored;

fn vec_strategy(d: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, d)
}

fn row_strategy(max_dim: usize) -> impl Strategy<Value = SparseRow> {
    prop::collection::btree_map(0..max_dim, -5.0f64..5.0, 0..6).prop_map(|m| {
        let (i, v): (Vec<usize>, Vec<f64>) = m.into_iter().unzip();
        SparseRow::new(i, v).unwrap()
    })
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..20, 1usize..12).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(row_strategy(d), n),
            prop::collection::vec(prop::bool::ANY, n),
        )
            .prop_map(move |(rows, signs)| {
                // the parser requires both classes present
                let labels = signs
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| if i == 0 || (i > 1 && s) { 1.0 } else { -1.0 })
                    .collect();
                Dataset::new(rows, labels, d).unwrap()
            })
    })
}

fn fd_grad<O: Objective>(f: &O, x: &[f64]) -> Vec<f64> {
    let h = 1e-6 * (1.0 + norm(x));
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let up = f.value(&xp).unwrap();
            xp[j] = x[j] - h;
            let down = f.value(&xp).unwrap();
            xp[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn fd_error<O: Objective>(f: &O, x: &[f64]) -> f64 {
    let g = f.full_grad(x).unwrap();
    let d: Vec<f64> = g.iter().zip(fd_grad(f, x)).map(|(a, b)| a - b).collect();
    norm(&d) / (1.0 + norm(&g))
}

fn small(seed: u64) -> Result<Dataset, TestCaseError> {
    synthetic_categorical(40, 6, seed).map_err(|_| TestCaseError::reject("one class"))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn libsvm_round_trip(data in dataset_strategy()) {
        let text = data.to_libsvm();
        let back = parse_libsvm_str(&text).unwrap();
        // the file format cannot carry trailing empty features
        let back = back.with_dim(data.dim()).unwrap();
        prop_assert_eq!(&back, &data);
        prop_assert!(back.validate().is_ok());
    }

    #[test]
    fn sparse_dot_equals_dense_dot(row in row_strategy(10), x in vec_strategy(10, 3.0)) {
        let dense = row.to_dense(10);
        let want = dense.iter().zip(&x).fold(0.0, |a, (p, q)| a + p * q);
        prop_assert_eq!(sparse_dot(&row, &x, 10).unwrap(), want);
    }

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..1000, x in vec_strategy(6, 2.0)) {
        let data = small(seed)?;
        for kind in [LossKind::Logistic, LossKind::SigmoidSq] {
            let f = LinearLoss::new(data.clone(), kind);
            prop_assert!(fd_error(&f, &x) <= 1e-5, "{:?}", kind);
        }
        let q = ridge_quadratic_objective(8, 6, 0.1, 2.0, seed).unwrap();
        prop_assert!(fd_error(&q, &x) <= 1e-5);
    }

    #[test]
    fn convex_monotonicity(seed in 0u64..1000, x in vec_strategy(6, 3.0), y in vec_strategy(6, 3.0)) {
        let f = logistic_objective(small(seed)?);
        let q = ridge_quadratic_objective(4, 6, 0.1, 2.0, seed).unwrap();
        let dxy = diff(&x, &y);
        let d2 = dot(&dxy, &dxy);
        let gf = diff(&f.full_grad(&x).unwrap(), &f.full_grad(&y).unwrap());
        prop_assert!(dot(&gf, &dxy) >= -1e-12 * d2.sqrt() * norm(&gf));
        // quadratic: Rayleigh quotient within [mu_sc, L]
        let gq = diff(&q.full_grad(&x).unwrap(), &q.full_grad(&y).unwrap());
        if d2 > 1e-12 {
            let r = dot(&gq, &dxy) / d2;
            prop_assert!((0.1 - 1e-12..=2.0 + 1e-12).contains(&r), "{}", r);
        }
    }

    #[test]
    fn sigmoidsq_is_sigma_bounded(seed in 0u64..1000, x in vec_strategy(6, 3.0), y in vec_strategy(6, 3.0)) {
        let f = sigmoidsq_objective(small(seed)?);
        let sigma = f.smoothness().sigma_bn;
        let d = diff(&y, &x);
        let lhs = f.value(&y).unwrap() - f.value(&x).unwrap();
        let rhs = dot(&f.full_grad(&x).unwrap(), &d) - 0.5 * sigma * dot(&d, &d);
        prop_assert!(lhs >= rhs - 1e-12, "{} < {}", lhs, rhs);
    }

    #[test]
    fn components_are_l_smooth(seed in 0u64..1000, i in 0usize..40, x in vec_strategy(6, 3.0), y in vec_strategy(6, 3.0)) {
        let data = small(seed)?;
        for kind in [LossKind::Logistic, LossKind::SigmoidSq] {
            let f = LinearLoss::new(data.clone(), kind);
            let l = f.smoothness().l;
            let g = diff(&f.component_grad(i, &x).unwrap(), &f.component_grad(i, &y).unwrap());
            prop_assert!(norm(&g) <= l * norm(&diff(&x, &y)) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn surrogates_are_strongly_convex(
        seed in 0u64..1000,
        mu in 1e-3f64..10.0,
        x in vec_strategy(6, 3.0),
        y in vec_strategy(6, 3.0),
        anchor in vec_strategy(6, 3.0),
    ) {
        let data = small(seed)?;
        let convex = logistic_objective(data.clone());
        let ncvx = sigmoidsq_objective(data);
        let sigma = ncvx.smoothness().sigma_bn;
        let dxy = diff(&x, &y);
        let d2 = dot(&dxy, &dxy);
        let check = |s: &dyn Objective, modulus: f64| {
            let g = diff(&s.full_grad(&x).unwrap(), &s.full_grad(&y).unwrap());
            let ip = dot(&g, &dxy);
            ip >= modulus * d2 * (1.0 - 1e-10) && norm(&g) >= modulus * d2.sqrt() * (1.0 - 1e-10)
        };
        let a = make_anchored(&convex, anchor.clone(), mu).unwrap();
        prop_assert!(check(&a, a.effective_strong_convexity()));
        let theta = mu;
        let b = make_anchored(&ncvx, anchor, sigma + theta).unwrap();
        prop_assert!((b.effective_strong_convexity() - theta).abs() <= 1e-12 * theta.max(1.0));
        prop_assert!(check(&b, theta));
    }

    #[test]
    fn surrogate_gradient_at_anchor_is_base_gradient(seed in 0u64..1000, anchor in vec_strategy(6, 3.0), mu in 0.0f64..10.0) {
        let f = logistic_objective(small(seed)?);
        let s = make_anchored(&f, anchor.clone(), mu).unwrap();
        let before = f.counter().read();
        let gs = s.full_grad(&anchor).unwrap();
        prop_assert_eq!(f.counter().read() - before, 40);
        prop_assert_eq!(gs, f.full_grad(&anchor).unwrap());
    }

    #[test]
    fn sarah_cost_is_closed_form(n in 1usize..60, m in 1usize..80, s in 1usize..6, seed in 0u64..100) {
        let f = logistic_objective(synthetic_categorical(n, 4, seed).map_err(|_| TestCaseError::reject("one class"))?);
        let mut cfg = SarahConfig::fixed(0.5 / f.smoothness().l, m, s, seed);
        cfg.end_gradient = EndGradient::Skip;
        let r = sarah_run(&f, &[0.0; 4], &cfg).unwrap();
        prop_assert_eq!(r.ifo_total, (s * (n + 2 * (m - 1))) as u64);
        prop_assert_eq!(f.counter().read(), r.ifo_total);
        prop_assert!(r.trace.ifo_is_monotone());
    }

    #[test]
    fn sarah_is_deterministic(seed in 0u64..1000) {
        let data = synthetic_categorical(30, 5, 1).unwrap();
        let run = || sarah_run(&logistic_objective(data.clone()), &[0.0; 5], &SarahConfig::fixed(0.4, 20, 3, seed)).unwrap().trace;
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn trace_csv_round_trip(
        rows in prop::collection::vec(
            (0usize..5, 0usize..50, 0u64..1_000_000, any::<f64>(), prop::option::of(any::<f64>()), 0u64..10),
            0..20,
        )
    ) {
        let rows: Vec<TraceRow> = rows
            .into_iter()
            .filter(|r| r.3.is_finite() && r.4.is_none_or(f64::is_finite))
            .map(|(stage, outer, ifo, v, o, seed)| TraceRow {
                algo: "p".into(),
                stage,
                outer,
                ifo,
                eta: v.abs(),
                mu: v * 0.5,
                rho: o,
                grad_f_sq: v * v,
                grad_surr_sq: o.map(f64::abs),
                seed,
            })
            .filter(|r| r.grad_f_sq.is_finite())
            .collect();
        let text = String::from_utf8(to_csv(&rows).unwrap()).unwrap();
        prop_assert_eq!(parse_csv(&text).unwrap(), rows);
    }
}

/// Over many draws at a fixed pair of points, the mean of
/// `∇f_i(x_k) − ∇f_i(x_{k−1})` matches the full-gradient difference.
#[test]
fn estimator_is_conditionally_unbiased() {
    let f = logistic_objective(synthetic_categorical(200, 8, 21).unwrap());
    let xk = vec![0.3; 8];
    let xk1 = vec![-0.2; 8];
    let want = diff(&f.full_grad(&xk).unwrap(), &f.full_grad(&xk1).unwrap());
    let draws = 10_000;
    let mut r = rng::stream(3, 77);
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|_| {
            let i = rng::index(&mut r, f.n());
            diff(
                &f.component_grad(i, &xk).unwrap(),
                &f.component_grad(i, &xk1).unwrap(),
            )
        })
        .collect();
    for j in 0..8 {
        let mean = samples.iter().map(|s| s[j]).sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!(
            (mean - want[j]).abs() <= 3.0 * se,
            "coord {j}: {mean} vs {} (se {se})",
            want[j]
        );
    }
}

fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let chi2 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let crit = ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    (chi2, crit)
}

#[test]
fn snapshot_draws_are_uniform() {
    for (rule, m, cells) in [
        (SnapshotRule::Uniform0ToMMinus1, 12, 12),
        (SnapshotRule::Uniform0ToM, 12, 13),
    ] {
        let mut counts = vec![0u64; cells];
        let mut r = rng::stream(5, 1);
        for _ in 0..10_000 {
            counts[rule.draw(&mut r, m)] += 1;
        }
        let (chi2, crit) = chi_square_uniform(&counts);
        assert!(chi2 < crit, "{rule:?}: chi2 {chi2} ≥ {crit}");
    }
    assert_eq!(SnapshotRule::LastIterate.draw(&mut rng::stream(0, 0), 7), 7);
}

#[test]
fn fd_helper_sanity() {
    let q = ridge_quadratic_objective(3, 2, 1.0, 1.0, 0).unwrap();
    let x = [0.5, -0.5];
    assert!(rel_diff(&fd_grad(&q, &x), &q.full_grad(&x).unwrap()) < 1e-8);
}
