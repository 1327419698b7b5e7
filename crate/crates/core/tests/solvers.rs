mod common;

use coherit::sqrt_lasso::universal_lambda0;
use coherit::{
    find_projection, fit_scaled_lasso, solve_dual_penalized, DualOutcome, DualSettings, GramView, PathSettings,
    RegressionSample, RngStream, ScaledLassoConfig,
};
use common::{box_qp_optimum, linear_sample, mat_vec, sample_covariance, scaled_lasso_kkt};
use proptest::prelude::*;

fn sparse_beta(p: usize, k: usize, seed: u64) -> Vec<f64> {
    let z = RngStream::new(seed, 9).standard_normals(p);
    (0..p).map(|j| if j % (p / k).max(1) == 0 && j / (p / k).max(1) < k { 1.0 + z[j].abs() } else { 0.0 }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaled_lasso_meets_kkt_and_sigma_identity(n in 20usize..80, p in 5usize..40, seed in 0u64..10_000) {
        let beta = sparse_beta(p, 3, seed);
        let s = linear_sample(n, &beta, 0.3, 0.7, seed);
        let lambda0 = universal_lambda0(p, 0.5);
        let fit = fit_scaled_lasso(&s, lambda0, &ScaledLassoConfig::default()).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(!fit.degenerate);
        let kkt = scaled_lasso_kkt(&s, &fit.beta_hat, fit.sigma_hat, lambda0);
        prop_assert!(kkt <= 1e-6, "kkt {kkt}");
        let rms = common::residual_rms(&s, &fit.beta_hat);
        prop_assert!((fit.sigma_hat - rms).abs() <= 1e-6 * rms);
    }

    #[test]
    fn projection_is_feasible_and_near_exact_optimum(n in 20usize..60, p in 2usize..7, seed in 0u64..10_000, j in 0usize..7) {
        let s = linear_sample(n, &vec![0.0; p], 0.4, 1.0, seed);
        let sigma = sample_covariance(s.design());
        let mut g = RngStream::new(seed, 5).standard_normals(p);
        if j < p {
            g = vec![0.0; p];
            g[j] = 1.0;
        }
        let gnorm = common::dot(&g, &g).sqrt();
        let start = gnorm * (2.01 * (p.max(2) as f64).ln() / n as f64).sqrt();
        let gram = GramView::new(&s);
        let d = find_projection(&gram, &g, start, &PathSettings::default()).unwrap();
        let su = mat_vec(&sigma, &d.u_hat);
        let gap = su.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= d.lambda_accepted + 1e-6, "gap {gap} > λ {}", d.lambda_accepted);
        let exact = box_qp_optimum(&sigma, &g, d.lambda_accepted);
        let quad = common::dot(&d.u_hat, &su);
        prop_assert!((quad - exact).abs() <= 0.05 * exact.max(1e-12), "quad {quad} vs exact {exact}");
        prop_assert!((d.quad_value - quad).abs() <= 1e-9 * quad.max(1.0));
    }

    #[test]
    fn dual_solution_is_stationary(n in 15usize..50, p in 2usize..25, seed in 0u64..10_000, lam_scale in 0.05f64..1.0) {
        let s = linear_sample(n, &vec![0.0; p], 0.5, 1.0, seed);
        let sigma = sample_covariance(s.design());
        let g = RngStream::new(seed, 6).standard_normals(p);
        let lam = lam_scale * g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let out = solve_dual_penalized(&GramView::new(&s), &g, lam, &vec![0.0; p], &DualSettings::default()).unwrap();
        if let DualOutcome::Solved(v) = out {
            // gradient Σv/2 + g against the ℓ₁ subdifferential
            let sv = mat_vec(&sigma, &v);
            for j in 0..p {
                let grad = sv[j] / 2.0 + g[j];
                let viol = if v[j] > 0.0 {
                    (grad + lam).abs()
                } else if v[j] < 0.0 {
                    (grad - lam).abs()
                } else {
                    (grad.abs() - lam).max(0.0)
                };
                prop_assert!(viol <= 1e-6, "coordinate {j}: {viol}");
            }
        }
    }
}

#[test]
fn projection_recovers_inverse_direction_when_lambda_is_small() {
    let p = 4;
    let s = linear_sample(400, &vec![0.0; p], 0.3, 1.0, 3);
    let sigma = sample_covariance(s.design());
    let g = vec![1.0, -0.5, 0.0, 0.25];
    let want = common::solve(&sigma, &g).unwrap();
    let settings = PathSettings {
        max_steps: 40,
        ..PathSettings::default()
    };
    let d = find_projection(&GramView::new(&s), &g, 0.05, &settings).unwrap();
    assert!(d.lambda_accepted < 1e-4);
    for (a, b) in d.u_hat.iter().zip(&want) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn zero_response_gives_degenerate_fit() {
    let s = linear_sample(30, &[0.0; 5], 0.0, 1.0, 1);
    let zero = RegressionSample::new(s.design().clone(), vec![0.0; 30]).unwrap();
    let fit = fit_scaled_lasso(&zero, 1.0, &ScaledLassoConfig::default()).unwrap();
    assert!(fit.degenerate);
    assert_eq!(fit.sigma_hat, 0.0);
    assert!(fit.beta_hat.iter().all(|b| *b == 0.0));
}
