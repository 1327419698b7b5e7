use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::sample::RegressionSample;

/// Marginal regression t-statistics, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TStats {
    pub t: Vec<f64>,
    /// Columns with a zero residual; their `t` is a signed infinity.
    pub perfect_fit: Vec<bool>,
}

/// Regress `y` on each column alone, without intercept: `b = xᵀy/‖x‖²`,
/// `s² = ‖y − b·x‖²/(n − 1)`, `t = b·‖x‖/s`.
///
/// A residual below `1e-12·‖y‖` counts as a perfect fit. A zero response
/// gives `t = 0` everywhere.
pub fn marginal_t_stats(sample: &RegressionSample) -> Result<TStats> {
    let n = sample.n();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("t-statistics need n >= 3, got {n}")));
    }
    let y = sample.response();
    let yy = dot(y, y);
    let mut t = Vec::with_capacity(sample.p());
    let mut perfect_fit = Vec::with_capacity(sample.p());
    for j in 0..sample.p() {
        let x = sample.column(j);
        let xx = dot(x, x);
        if xx == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        if yy == 0.0 {
            t.push(0.0);
            perfect_fit.push(false);
            continue;
        }
        let b = dot(x, y) / xx;
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - b * xi).powi(2)).sum();
        if rss <= 1e-24 * yy {
            t.push(f64::INFINITY.copysign(b));
            perfect_fit.push(true);
        } else {
            let s = (rss / (n - 1) as f64).sqrt();
            t.push(b * xx.sqrt() / s);
            perfect_fit.push(false);
        }
    }
    Ok(TStats { t, perfect_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::Array2;

    #[test]
    fn perfect_fit_is_signed_infinity() {
        let x = ndarray::array![[1.0, 0.5], [2.0, -1.0], [3.0, 0.2], [-1.0, 0.9]];
        let y = vec![-2.0, -4.0, -6.0, 2.0];
        let ts = marginal_t_stats(&RegressionSample::new(x, y).unwrap()).unwrap();
        assert_eq!(ts.t[0], f64::NEG_INFINITY);
        assert_eq!(ts.perfect_fit, vec![true, false]);
        assert!(ts.t[1].is_finite());
    }

    #[test]
    fn matches_hand_computation() {
        let x = ndarray::array![[1.0], [0.0], [2.0]];
        let y = vec![1.0, 1.0, 1.0];
        // b = 3/5, rss = 0.16 + 1 + 0.04 = 1.2, s = sqrt(0.6), t = 0.6·√5/√0.6
        let ts = marginal_t_stats(&RegressionSample::new(x, y).unwrap()).unwrap();
        let expect = 0.6 * 5f64.sqrt() / 0.6f64.sqrt();
        assert!((ts.t[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn null_trait_has_unit_spread() {
        let (n, p) = (1000, 200);
        let z = RngStream::new(3, 0).standard_normals(n * p + n);
        let x = Array2::from_shape_vec((n, p), z[..n * p].to_vec()).unwrap();
        let ts = marginal_t_stats(&RegressionSample::new(x, z[n * p..].to_vec()).unwrap()).unwrap();
        let mean = ts.t.iter().sum::<f64>() / p as f64;
        let var = ts.t.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (p - 1) as f64;
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.15, "sd {}", var.sqrt());
    }

    #[test]
    fn rejects_zero_column_and_tiny_n() {
        let x = ndarray::array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let s = RegressionSample::new(x, vec![1.0, 2.0, 0.0]).unwrap();
        assert_eq!(marginal_t_stats(&s), Err(Error::ZeroColumn(1)));
        let s = RegressionSample::new(ndarray::array![[1.0], [2.0]], vec![1.0, 2.0]).unwrap();
        assert!(marginal_t_stats(&s).is_err());
    }
}
