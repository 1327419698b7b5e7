//! Regression samples `(X, y)` and the Gaussian design generators.

use std::sync::Arc;

use ndarray::{Array2, ShapeBuilder};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{column, norm2, to_column_major};
use crate::rng::RngStream;

/// One dataset: an `n x p` design and a length-`n` response.
///
/// The design is stored column-major behind an `Arc` so that several
/// responses (and the matching `GramView`) can share it without copying.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    design: Arc<Array2<f64>>,
    response: Vec<f64>,
    col_norms: Arc<Vec<f64>>,
}

impl RegressionSample {
    pub fn new(design: Array2<f64>, response: Vec<f64>) -> Result<Self> {
        let design = if design.t().is_standard_layout() {
            design
        } else {
            to_column_major(&design)
        };
        Self::from_shared(Arc::new(design), response)
    }

    /// Build around an already column-major design.
    pub fn from_shared(design: Arc<Array2<f64>>, response: Vec<f64>) -> Result<Self> {
        let (n, p) = design.dim();
        if n < 2 || p < 1 {
            return Err(Error::DimensionMismatch(format!(
                "need n >= 2 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        if !design.t().is_standard_layout() {
            return Err(Error::InvalidParameter(
                "shared design must be column-major".into(),
            ));
        }
        if response.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has length {} but design has {n} rows",
                response.len()
            )));
        }
        if design.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("design"));
        }
        if response.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        let col_norms = (0..p).map(|j| norm2(column(&design, j))).collect();
        Ok(Self {
            design,
            response,
            col_norms: Arc::new(col_norms),
        })
    }

    /// Same design, different response.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        if response.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has length {} but design has {} rows",
                response.len(),
                self.n()
            )));
        }
        if response.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        Ok(Self {
            design: Arc::clone(&self.design),
            response,
            col_norms: Arc::clone(&self.col_norms),
        })
    }

    /// Rows `rows` of design and response, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let p = self.p();
        let mut x = Array2::zeros((rows.len(), p).f());
        for j in 0..p {
            let src = column(&self.design, j);
            for (i, &r) in rows.iter().enumerate() {
                x[[i, j]] = src[r];
            }
        }
        let y = rows.iter().map(|&r| self.response[r]).collect();
        Self::from_shared(Arc::new(x), y)
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

    pub fn design_arc(&self) -> Arc<Array2<f64>> {
        Arc::clone(&self.design)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        column(&self.design, j)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }
}

/// Rescale every column to Euclidean norm `√n`.
///
/// Returns the rescaled sample and `scales[j] = ‖X·j‖/√n`; a coefficient
/// fitted on the rescaled design is divided by `scales[j]` to get back to
/// the original column scale.
pub fn standardize_columns(sample: &RegressionSample) -> Result<(RegressionSample, Vec<f64>)> {
    let (n, p) = (sample.n(), sample.p());
    let root_n = (n as f64).sqrt();
    let mut scales = Vec::with_capacity(p);
    for (j, &norm) in sample.col_norms().iter().enumerate() {
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        scales.push(norm / root_n);
    }
    let mut x = Array2::zeros((n, p).f());
    for j in 0..p {
        let s = scales[j];
        for (dst, src) in x.column_mut(j).iter_mut().zip(sample.column(j)) {
            *dst = src / s;
        }
    }
    let out = RegressionSample::from_shared(Arc::new(x), sample.response().to_vec())?;
    Ok((out, scales))
}

/// `n x p` design with i.i.d. `N(0, Σ)` rows, `Σij = rho^|i-j|`.
///
/// Each row comes from the stationary AR(1) recursion, which is exact for
/// this covariance and costs O(p) per row.
pub fn sample_gaussian_ar1(n: usize, p: usize, rho: f64, rng: &RngStream) -> Result<Array2<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    if n == 0 || p == 0 {
        return Err(Error::DimensionMismatch(format!(
            "need n >= 1 and p >= 1, got n = {n}, p = {p}"
        )));
    }
    let innovation = (1.0 - rho * rho).sqrt();
    let mut gen = rng.generator();
    let mut x = Array2::zeros((n, p).f());
    for i in 0..n {
        let mut prev: f64 = StandardNormal.sample(&mut gen);
        x[[i, 0]] = prev;
        for j in 1..p {
            let z: f64 = StandardNormal.sample(&mut gen);
            prev = rho * prev + innovation * z;
            x[[i, j]] = prev;
        }
    }
    Ok(x)
}

/// `n x p` design with i.i.d. `N(0, L Lᵀ)` rows for a user-supplied lower
/// Cholesky factor `L`.
pub fn sample_gaussian_cholesky(n: usize, factor: &Array2<f64>, rng: &RngStream) -> Result<Array2<f64>> {
    let p = factor.nrows();
    if factor.ncols() != p {
        return Err(Error::DimensionMismatch("Cholesky factor must be square".into()));
    }
    let mut gen = rng.generator();
    let mut x = Array2::zeros((n, p).f());
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut gen));
        for a in 0..p {
            let mut s = 0.0;
            for b in 0..=a {
                s += factor[[a, b]] * z[b];
            }
            x[[i, a]] = s;
        }
    }
    Ok(x)
}
