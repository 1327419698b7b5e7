//! Scaled (square-root) Lasso: joint estimation of a sparse coefficient
//! vector and the noise level,
//!
//! ```text
//! min_{β, σ>0}  ‖y − Xβ‖²/(2nσ) + σ/2 + (λ₀/√n) Σⱼ (‖X·j‖/√n) |βⱼ|
//! ```
//!
//! solved by alternating the closed-form σ step with a weighted Lasso
//! β step (cyclic coordinate descent).

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, mat_vec, norm2, soft_threshold};
use crate::sample::{standardize_columns, RegressionSample};

/// Inner coordinate-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSettings {
    /// KKT tolerance on the gradient `Xⱼᵀr/n`.
    pub tol: f64,
    /// Budget of coordinate sweeps (full or active-set).
    pub max_sweeps: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledLassoConfig {
    pub inner: LassoSettings,
    /// Relative change in σ that ends the alternation.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// σ below `floor_ratio · sd(y)` marks the fit degenerate.
    pub floor_ratio: f64,
}

impl Default for ScaledLassoConfig {
    fn default() -> Self {
        Self {
            inner: LassoSettings::default(),
            outer_tol: 1e-6,
            max_outer: 100,
            floor_ratio: 1e-10,
        }
    }
}

/// `λ₀ = b·√(2.01·log p)`. For `p = 1` the logarithm is taken at 2 so the
/// penalty stays positive.
pub fn universal_lambda0(p: usize, b: f64) -> f64 {
    b * (2.01 * (p.max(2) as f64).ln()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLassoFit {
    /// Coefficients on the original column scale.
    pub beta_hat: Vec<f64>,
    pub sigma_hat: f64,
    pub lambda0: f64,
    /// Number of σ/β alternations.
    pub iterations: usize,
    /// Max KKT violation at `(beta_hat, sigma_hat)`, measured on the
    /// standardized problem with the response scaled to unit RMS.
    pub kkt_residual: f64,
    /// Zero response, or σ collapsed below the floor.
    pub degenerate: bool,
    /// False when `max_outer` ran out before σ settled.
    pub converged: bool,
    /// Joint objective after every alternation (original scale).
    pub objective_trace: Vec<f64>,
}

/// Max KKT violation of the weighted Lasso at `beta` with residual `r`.
fn lasso_kkt(sample: &RegressionSample, penalties: &[f64], beta: &[f64], r: &[f64]) -> f64 {
    let n = sample.n() as f64;
    let mut worst: f64 = 0.0;
    for j in 0..sample.p() {
        let g = dot(sample.column(j), r) / n;
        let v = if beta[j] > 0.0 {
            (g - penalties[j]).abs()
        } else if beta[j] < 0.0 {
            (g + penalties[j]).abs()
        } else {
            (g.abs() - penalties[j]).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

fn residual(sample: &RegressionSample, beta: &[f64]) -> Vec<f64> {
    let xb = mat_vec(sample.design(), beta);
    sample.response().iter().zip(&xb).map(|(y, f)| y - f).collect()
}

fn cd_solve(
    sample: &RegressionSample,
    penalties: &[f64],
    beta_init: &[f64],
    settings: LassoSettings,
) -> Result<Vec<f64>> {
    let (n, p) = (sample.n(), sample.p());
    if penalties.len() != p || beta_init.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "penalties ({}) and beta_init ({}) must have length p = {p}",
            penalties.len(),
            beta_init.len()
        )));
    }
    if penalties.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("penalties must be finite and >= 0".into()));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let nf = n as f64;
    let curvature: Vec<f64> = sample.col_norms().iter().map(|c| c * c / nf).collect();
    let mut beta = beta_init.to_vec();
    let mut r = residual(sample, &beta);

    // one coordinate update; returns |Δβⱼ|·√dⱼ, the change in fitted-value scale
    let update = |j: usize, beta: &mut [f64], r: &mut [f64]| -> f64 {
        let d = curvature[j];
        if d == 0.0 {
            return 0.0;
        }
        let col = sample.column(j);
        let z = dot(col, r) / nf + d * beta[j];
        let new = soft_threshold(z, penalties[j]) / d;
        let delta = new - beta[j];
        if delta != 0.0 {
            axpy(-delta, col, r);
            beta[j] = new;
        }
        delta.abs() * d.sqrt()
    };

    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    while sweeps < settings.max_sweeps {
        for j in 0..p {
            update(j, &mut beta, &mut r);
        }
        sweeps += 1;
        kkt = lasso_kkt(sample, penalties, &beta, &r);
        if kkt <= settings.tol {
            return Ok(beta);
        }
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        while sweeps < settings.max_sweeps {
            let mut biggest: f64 = 0.0;
            for &j in &active {
                biggest = biggest.max(update(j, &mut beta, &mut r));
            }
            sweeps += 1;
            if biggest <= 0.1 * settings.tol {
                break;
            }
        }
    }
    Err(Error::NoConvergence {
        sweeps,
        residual: kkt,
    })
}

/// Weighted Lasso `min ‖y − Xβ‖²/(2n) + Σⱼ penaltiesⱼ·|βⱼ|` by cyclic
/// coordinate descent in ascending index order, warm-started at
/// `beta_init`. The returned point satisfies the KKT conditions to `tol`.
pub fn lasso_weighted_cd(
    sample: &RegressionSample,
    penalties: &[f64],
    beta_init: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    cd_solve(sample, penalties, beta_init, LassoSettings { tol, max_sweeps })
}

/// Joint scaled-Lasso objective at `(beta, sigma)` on the original scale.
pub fn scaled_lasso_objective(sample: &RegressionSample, beta: &[f64], sigma: f64, lambda0: f64) -> f64 {
    let n = sample.n() as f64;
    let r = residual(sample, beta);
    let rss = dot(&r, &r);
    let penalty: f64 = beta
        .iter()
        .zip(sample.col_norms())
        .map(|(b, c)| b.abs() * c / n.sqrt())
        .sum();
    rss / (2.0 * n * sigma) + sigma / 2.0 + lambda0 / n.sqrt() * penalty
}

pub fn fit_scaled_lasso(sample: &RegressionSample, lambda0: f64, config: &ScaledLassoConfig) -> Result<ScaledLassoFit> {
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda0 must be positive, got {lambda0}")));
    }
    let (n, p) = (sample.n(), sample.p());
    let nf = n as f64;
    let root_n = nf.sqrt();
    let (std, scales) = standardize_columns(sample)?;

    let y = sample.response();
    let rms = norm2(y) / root_n;
    if rms == 0.0 {
        return Ok(ScaledLassoFit {
            beta_hat: vec![0.0; p],
            sigma_hat: 0.0,
            lambda0,
            iterations: 0,
            kkt_residual: 0.0,
            degenerate: true,
            converged: true,
            objective_trace: Vec::new(),
        });
    }
    let mean = y.iter().sum::<f64>() / nf;
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf).sqrt();

    // work with unit-RMS response so tolerances are scale free
    let ys: Vec<f64> = y.iter().map(|v| v / rms).collect();
    let work = std.with_response(ys)?;
    let floor = config.floor_ratio * if sd > 0.0 { sd / rms } else { 1.0 };

    let mut sigma = if sd > 0.0 { sd / rms } else { 1.0 };
    let mut b = vec![0.0; p];
    let mut iterations = 0;
    let mut converged = false;
    let mut degenerate = false;
    let mut trace = Vec::new();
    let to_original = |b: &[f64]| -> Vec<f64> {
        b.iter().zip(&scales).map(|(v, s)| v / s * rms).collect()
    };

    while iterations < config.max_outer {
        let pen = vec![sigma * lambda0 / root_n; p];
        b = cd_solve(&work, &pen, &b, config.inner)?;
        iterations += 1;
        let r = residual(&work, &b);
        let sigma_new = norm2(&r) / root_n;
        trace.push(scaled_lasso_objective(
            sample,
            &to_original(&b),
            sigma_new.max(floor) * rms,
            lambda0,
        ));
        if sigma_new < floor {
            sigma = sigma_new;
            degenerate = true;
            converged = true;
            break;
        }
        let change = (sigma_new - sigma).abs() / sigma.max(floor);
        sigma = sigma_new;
        if change < config.outer_tol {
            converged = true;
            break;
        }
    }

    let r = residual(&work, &b);
    let pen = vec![sigma * lambda0 / root_n; p];
    let kkt_residual = lasso_kkt(&work, &pen, &b, &r);

    Ok(ScaledLassoFit {
        beta_hat: to_original(&b),
        sigma_hat: sigma * rms,
        lambda0,
        iterations,
        kkt_residual,
        degenerate,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky;
    use crate::linalg::cholesky_solve;
    use crate::rng::RngStream;
    use crate::sample::sample_gaussian_ar1;
    use ndarray::Array2;

    fn gaussian_sample(n: usize, p: usize, beta: &[f64], sigma: f64, seed: u64) -> RegressionSample {
        let x = sample_gaussian_ar1(n, p, 0.0, &RngStream::new(seed, 0)).unwrap();
        let noise = RngStream::new(seed, 1).standard_normals(n);
        let xb = mat_vec(&x, beta);
        let y = xb.iter().zip(&noise).map(|(f, e)| f + sigma * e).collect();
        RegressionSample::new(x, y).unwrap()
    }

    fn weighted_objective(s: &RegressionSample, pen: &[f64], beta: &[f64]) -> f64 {
        let r = residual(s, beta);
        dot(&r, &r) / (2.0 * s.n() as f64) + beta.iter().zip(pen).map(|(b, w)| w * b.abs()).sum::<f64>()
    }

    /// Projected gradient on the split `β = β⁺ − β⁻`, `β± ≥ 0`; independent
    /// of coordinate descent.
    fn projected_gradient_reference(s: &RegressionSample, pen: &[f64], iters: usize) -> Vec<f64> {
        let (n, p) = (s.n() as f64, s.p());
        let x = s.design();
        let gram = x.t().dot(x) / n;
        let xty: Vec<f64> = (0..p).map(|j| dot(s.column(j), s.response()) / n).collect();
        // step 1/L with L bounded by the Gram Frobenius norm, doubled for the split
        let lip = 2.0 * gram.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step = 1.0 / lip;
        let mut plus = vec![0.0; p];
        let mut minus = vec![0.0; p];
        for _ in 0..iters {
            let beta: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| a - b).collect();
            let gb = gram.dot(&ndarray::Array1::from(beta));
            for j in 0..p {
                let g = gb[j] - xty[j];
                plus[j] = (plus[j] - step * (g + pen[j])).max(0.0);
                minus[j] = (minus[j] - step * (-g + pen[j])).max(0.0);
            }
        }
        plus.iter().zip(&minus).map(|(a, b)| a - b).collect()
    }

    #[test]
    fn unpenalized_limit_is_least_squares() {
        let s = gaussian_sample(50, 5, &[1.0, -2.0, 0.0, 0.5, 3.0], 0.5, 21);
        let beta = lasso_weighted_cd(&s, &[0.0; 5], &[0.0; 5], 1e-12, 100_000).unwrap();
        let gram = s.design().t().dot(s.design());
        let xty: Vec<f64> = (0..5).map(|j| dot(s.column(j), s.response())).collect();
        let ols = cholesky_solve(&cholesky(&gram).unwrap(), &xty);
        for (a, b) in beta.iter().zip(&ols) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn orthonormal_design_closed_form() {
        // columns orthogonal with XᵀX/n = I (n = 4)
        let x = ndarray::array![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
            [-1.0, -1.0, 1.0]
        ];
        let y = vec![3.0, 1.0, -0.5, 0.2];
        let s = RegressionSample::new(x, y).unwrap();
        let pen = [0.3, 0.1, 2.0];
        let beta = lasso_weighted_cd(&s, &pen, &[0.0; 3], 1e-12, 1000).unwrap();
        for j in 0..3 {
            let z = dot(s.column(j), s.response()) / 4.0;
            assert!((beta[j] - soft_threshold(z, pen[j])).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_projected_gradient_reference() {
        let s = gaussian_sample(30, 8, &[1.5, 0.0, -1.0, 0.0, 0.0, 0.7, 0.0, 0.0], 1.0, 5);
        let pen = [0.1; 8];
        let beta = lasso_weighted_cd(&s, &pen, &[0.0; 8], 1e-10, 10_000).unwrap();
        let reference = projected_gradient_reference(&s, &pen, 200_000);
        let f_cd = weighted_objective(&s, &pen, &beta);
        let f_ref = weighted_objective(&s, &pen, &reference);
        assert!((f_cd - f_ref).abs() < 1e-7, "{f_cd} vs {f_ref}");
        assert!(f_cd <= f_ref + 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = gaussian_sample(10, 3, &[0.0; 3], 1.0, 1);
        assert!(lasso_weighted_cd(&s, &[-0.1, 0.0, 0.0], &[0.0; 3], 1e-7, 10).is_err());
        assert!(lasso_weighted_cd(&s, &[0.1; 2], &[0.0; 3], 1e-7, 10).is_err());
        assert!(lasso_weighted_cd(&s, &[0.1; 3], &[0.0; 3], 0.0, 10).is_err());
        assert!(matches!(
            lasso_weighted_cd(&s, &[0.0; 3], &[0.0; 3], 1e-300, 1),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn zero_response_is_degenerate() {
        let s = gaussian_sample(20, 4, &[0.0; 4], 0.0, 3);
        let fit = fit_scaled_lasso(&s, 1.0, &ScaledLassoConfig::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.sigma_hat, 0.0);
        assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn default_lambda0() {
        let l = universal_lambda0(600, 0.5);
        assert!((l - 0.5 * (2.01 * 600f64.ln()).sqrt()).abs() < 1e-15);
        assert!(universal_lambda0(1, 0.5) > 0.0);
    }

    #[test]
    fn rejects_nonpositive_lambda0() {
        let s = gaussian_sample(20, 4, &[1.0, 0.0, 0.0, 0.0], 1.0, 3);
        assert!(fit_scaled_lasso(&s, 0.0, &ScaledLassoConfig::default()).is_err());
    }

    #[test]
    fn fixed_point_and_certificate() {
        let mut beta = vec![0.0; 40];
        beta[3] = 2.0;
        beta[17] = -1.0;
        let s = gaussian_sample(80, 40, &beta, 1.0, 8);
        let l0 = universal_lambda0(40, 0.5);
        let fit = fit_scaled_lasso(&s, l0, &ScaledLassoConfig::default()).unwrap();
        assert!(fit.converged && !fit.degenerate);
        assert!(fit.kkt_residual <= 1e-6);
        let r = residual(&s, &fit.beta_hat);
        let sigma = norm2(&r) / (80f64).sqrt();
        assert!((sigma - fit.sigma_hat).abs() <= 1e-6 * fit.sigma_hat);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs());
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut beta = vec![0.0; 15];
        beta[0] = 1.0;
        beta[4] = 0.5;
        let s = gaussian_sample(60, 15, &beta, 1.0, 13);
        let c = 7.5;
        let scaled = s.with_response(s.response().iter().map(|v| v * c).collect()).unwrap();
        let cfg = ScaledLassoConfig::default();
        let l0 = universal_lambda0(15, 0.5);
        let a = fit_scaled_lasso(&s, l0, &cfg).unwrap();
        let b = fit_scaled_lasso(&scaled, l0, &cfg).unwrap();
        assert!((b.sigma_hat - c * a.sigma_hat).abs() <= 1e-8 * b.sigma_hat);
        for (u, v) in a.beta_hat.iter().zip(&b.beta_hat) {
            assert!((v - c * u).abs() <= 1e-8 * (c * u).abs().max(1e-8));
        }
    }

    #[test]
    fn low_dimensional_consistency() {
        let l0 = universal_lambda0(10, 0.5);
        for seed in 0..20 {
            let mut beta = vec![0.0; 10];
            beta[0] = 3.0;
            let s = gaussian_sample(400, 10, &beta, 1.0, 1000 + seed);
            let fit = fit_scaled_lasso(&s, l0, &ScaledLassoConfig::default()).unwrap();
            assert!((fit.sigma_hat - 1.0).abs() < 0.15, "sigma {}", fit.sigma_hat);
            assert!((fit.beta_hat[0] - 3.0).abs() < 0.2, "beta {}", fit.beta_hat[0]);
        }
    }

    #[test]
    fn column_scale_does_not_change_fit_in_original_units() {
        let mut beta = vec![0.0; 6];
        beta[1] = 1.0;
        let s = gaussian_sample(50, 6, &beta, 0.5, 2);
        let mut x2: Array2<f64> = s.design().clone();
        x2.column_mut(1).mapv_inplace(|v| v * 4.0);
        let s2 = RegressionSample::new(x2, s.response().to_vec()).unwrap();
        let cfg = ScaledLassoConfig::default();
        let a = fit_scaled_lasso(&s, 1.0, &cfg).unwrap();
        let b = fit_scaled_lasso(&s2, 1.0, &cfg).unwrap();
        assert!((a.beta_hat[1] - 4.0 * b.beta_hat[1]).abs() < 1e-6);
        assert!((a.sigma_hat - b.sigma_hat).abs() < 1e-6);
    }
}
