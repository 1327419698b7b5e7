//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use coherit::{sample_gaussian_ar1, RegressionSample, RngStream};
use ndarray::Array2;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `XᵀX/n`, formed directly.
pub fn sample_covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    x.t().dot(x) / n
}

pub fn mat_vec(a: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    a.rows().into_iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Solve `A x = b` by Gauss-Jordan with partial pivoting. `None` if `A` is
/// numerically singular.
pub fn solve(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs()))?;
        if m[[piv, c]].abs() < 1e-13 {
            return None;
        }
        if piv != c {
            for j in 0..k {
                m.swap([c, j], [piv, j]);
            }
            rhs.swap(c, piv);
        }
        for i in 0..k {
            if i != c {
                let f = m[[i, c]] / m[[c, c]];
                if f != 0.0 {
                    for j in c..k {
                        m[[i, j]] -= f * m[[c, j]];
                    }
                    rhs[i] -= f * rhs[c];
                }
            }
        }
    }
    Some((0..k).map(|i| rhs[i] / m[[i, i]]).collect())
}

pub fn inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let k = a.nrows();
    let mut inv = Array2::zeros((k, k));
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let col = solve(a, &e)?;
        for i in 0..k {
            inv[[i, j]] = col[i];
        }
    }
    Some(inv)
}

/// Exact optimum of `min uᵀΣu s.t. ‖Σu − g‖∞ ≤ λ` for positive definite `Σ`
/// and small `p`, by enumerating which box faces are active.
///
/// With `w = Σu` the problem is `min wᵀΣ⁻¹w` over the box `|w − g| ≤ λ`; the
/// minimizer pins some coordinates to a face and is the unconstrained
/// minimizer in the rest, so trying all `3ᵖ` face patterns finds it.
pub fn box_qp_optimum(sigma: &Array2<f64>, g: &[f64], lam: f64) -> f64 {
    let p = g.len();
    assert!(p <= 10, "enumeration is exponential in p");
    let h = inverse(sigma).expect("positive definite");
    let mut best = f64::INFINITY;
    let total = 3usize.pow(p as u32);
    for code in 0..total {
        let mut c = code;
        let mut w = vec![0.0; p];
        let mut free = Vec::new();
        for j in 0..p {
            match c % 3 {
                0 => free.push(j),
                1 => w[j] = g[j] + lam,
                _ => w[j] = g[j] - lam,
            }
            c /= 3;
        }
        if !free.is_empty() {
            // w_U = −H_UU⁻¹ H_UF w_F
            let k = free.len();
            let mut huu = Array2::zeros((k, k));
            let mut rhs = vec![0.0; k];
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    huu[[a, b]] = h[[i, j]];
                }
                rhs[a] = -(0..p).filter(|j| !free.contains(j)).map(|j| h[[i, j]] * w[j]).sum::<f64>();
            }
            let Some(wu) = solve(&huu, &rhs) else { continue };
            let mut ok = true;
            for (a, &i) in free.iter().enumerate() {
                w[i] = wu[a];
                ok &= (w[i] - g[i]).abs() <= lam * (1.0 + 1e-12);
            }
            if !ok {
                continue;
            }
        }
        let hw = mat_vec(&h, &w);
        best = best.min(dot(&w, &hw));
    }
    best
}

/// Largest KKT violation of the scaled Lasso at `(β̂, σ̂)`, in the units of
/// the problem with unit-norm-per-√n columns and unit-RMS response.
pub fn scaled_lasso_kkt(sample: &RegressionSample, beta: &[f64], sigma: f64, lambda0: f64) -> f64 {
    let (n, p) = (sample.n(), sample.p());
    let nf = n as f64;
    let y = sample.response();
    let rms = (dot(y, y) / nf).sqrt();
    let x = sample.design();
    let fitted: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[[i, j]] * beta[j]).sum()).collect();
    let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let pen = sigma / rms * lambda0 / nf.sqrt();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        let col: Vec<f64> = x.column(j).to_vec();
        let scale = (dot(&col, &col) / nf).sqrt();
        let grad = dot(&col, &r) / nf / (scale * rms);
        let b = beta[j];
        let v = if b > 0.0 {
            (grad - pen).abs()
        } else if b < 0.0 {
            (grad + pen).abs()
        } else {
            (grad.abs() - pen).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

pub fn residual_rms(sample: &RegressionSample, beta: &[f64]) -> f64 {
    let x = sample.design();
    let n = sample.n();
    let rss: f64 = (0..n)
        .map(|i| {
            let f: f64 = (0..sample.p()).map(|j| x[[i, j]] * beta[j]).sum();
            (sample.response()[i] - f).powi(2)
        })
        .sum();
    (rss / n as f64).sqrt()
}

/// `y = Xβ + σε` on an AR(1) Gaussian design.
pub fn linear_sample(n: usize, beta: &[f64], rho: f64, sigma: f64, seed: u64) -> RegressionSample {
    let rng = RngStream::new(seed, 0);
    let x = sample_gaussian_ar1(n, beta.len(), rho, &rng.derive(1)).unwrap();
    let eps = rng.derive(2).standard_normals(n);
    let y: Vec<f64> = (0..n).map(|i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + sigma * eps[i]).collect();
    RegressionSample::new(x, y).unwrap()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
