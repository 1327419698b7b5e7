//! Dense f64 kernels and the sample-covariance view `Σ̂ = XᵀX/n`.

use std::sync::Arc;

use ndarray::{Array2, ShapeBuilder};

use crate::error::{Error, Result};
use crate::sample::RegressionSample;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        unsafe { axpy_avx2(alpha, x, y) };
        return;
    }
    axpy_scalar(alpha, x, y);
}

#[inline(always)]
fn axpy_scalar(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

// Wider vectors only; FMA stays off so every lane rounds exactly as the
// scalar loop does.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn axpy_avx2(alpha: f64, x: &[f64], y: &mut [f64]) {
    axpy_scalar(alpha, x, y);
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Copy of `m` in column-major layout so that columns are contiguous slices.
pub fn to_column_major(m: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(m.dim().f());
    out.assign(m);
    out
}

/// Contiguous column `j` of a column-major matrix.
#[inline]
pub fn column(m: &Array2<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    let data = m
        .as_slice_memory_order()
        .expect("column-major matrix must be contiguous");
    &data[j * n..(j + 1) * n]
}

/// `X v` for a column-major design.
pub fn mat_vec(x: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj != 0.0 {
            axpy(vj, column(x, j), &mut out);
        }
    }
    out
}

/// `Xᵀ r` for a column-major design.
pub fn mat_t_vec(x: &Array2<f64>, r: &[f64]) -> Vec<f64> {
    (0..x.ncols()).map(|j| dot(column(x, j), r)).collect()
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `A x = b` given the lower Cholesky factor of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// `Σ̂ = XᵀX/n` for one design.
///
/// Below `dense_limit` columns the full `p x p` matrix is formed once and
/// shared; above it every product goes through the design (`Xᵀ(Xv)/n`).
#[derive(Debug, Clone)]
pub struct GramView {
    design: Arc<Array2<f64>>,
    dense: Option<Arc<Array2<f64>>>,
}

impl GramView {
    pub const DEFAULT_DENSE_LIMIT: usize = 4096;

    pub fn new(sample: &RegressionSample) -> Self {
        Self::with_dense_limit(sample, Self::DEFAULT_DENSE_LIMIT)
    }

    pub fn with_dense_limit(sample: &RegressionSample, dense_limit: usize) -> Self {
        Self::from_design(sample.design_arc(), dense_limit)
    }

    pub fn from_design(design: Arc<Array2<f64>>, dense_limit: usize) -> Self {
        let dense = if design.ncols() <= dense_limit {
            let n = design.nrows() as f64;
            let mut g = design.t().dot(design.as_ref());
            g.mapv_inplace(|x| x / n);
            // exact symmetry, so row j and column j agree bit for bit
            let p = g.nrows();
            for i in 0..p {
                for j in 0..i {
                    let v = g[[i, j]];
                    g[[j, i]] = v;
                }
            }
            Some(Arc::new(g))
        } else {
            None
        };
        Self { design, dense }
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    pub fn dense(&self) -> Option<&Array2<f64>> {
        self.dense.as_deref()
    }

    pub fn diag(&self, j: usize) -> f64 {
        match &self.dense {
            Some(g) => g[[j, j]],
            None => {
                let c = column(&self.design, j);
                dot(c, c) / self.n() as f64
            }
        }
    }

    /// Row `j` of `Σ̂`.
    pub fn row(&self, j: usize) -> Vec<f64> {
        match &self.dense {
            Some(g) => g.row(j).to_vec(),
            None => {
                let n = self.n() as f64;
                let mut r = mat_t_vec(&self.design, column(&self.design, j));
                r.iter_mut().for_each(|x| *x /= n);
                r
            }
        }
    }

    /// `Σ̂ v`
    pub fn gram_vec(&self, v: &[f64]) -> Vec<f64> {
        match &self.dense {
            Some(g) => {
                let mut out = vec![0.0; v.len()];
                for (j, &vj) in v.iter().enumerate() {
                    if vj != 0.0 {
                        // symmetric: column j == row j
                        axpy(vj, g.row(j).as_slice().expect("standard layout"), &mut out);
                    }
                }
                out
            }
            None => {
                let n = self.n() as f64;
                let xv = mat_vec(&self.design, v);
                let mut out = mat_t_vec(&self.design, &xv);
                out.iter_mut().for_each(|x| *x /= n);
                out
            }
        }
    }

    /// `vᵀ Σ̂ v = ‖Xv‖² / n`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let xv = mat_vec(&self.design, v);
        dot(&xv, &xv) / self.n() as f64
    }
}
