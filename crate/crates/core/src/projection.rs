//! Projection directions
//!
//! ```text
//! û = argmin uᵀΣ̂u   subject to   ‖Σ̂u − g‖∞ ≤ λ
//! ```
//!
//! computed through the penalized dual `min vᵀΣ̂v/4 + gᵀv + λ‖v‖₁`. Its
//! stationarity condition is `‖Σ̂v/2 + g‖∞ ≤ λ`, so `û = −v̂/2` is primal
//! feasible. The smallest workable λ is found by walking a geometric path
//! downward until the dual stops being solvable (below the feasibility
//! threshold of the primal the dual is unbounded and coordinate descent
//! drifts off).

use crate::error::{Error, Result};
use crate::linalg::{column, dot, norm1, norm2, norm_inf, soft_threshold, GramView};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSettings {
    /// KKT tolerance relative to `‖g‖∞`.
    pub tol: f64,
    /// Coordinate-update budget per solve, as a multiple of `p`.
    pub updates_per_coordinate: usize,
    /// Divergence cap: the solve is abandoned once
    /// `‖v‖₁ > divergence_cap·(1 + ‖g‖₂)/λ`.
    pub divergence_cap: f64,
}

impl Default for DualSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            updates_per_coordinate: 10 * 50,
            divergence_cap: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unsolvable {
    /// ‖v‖₁ passed the divergence cap.
    Diverged,
    /// KKT residual still above tolerance when the budget ran out.
    Budget,
    /// A zero-variance coordinate with `|gⱼ| > λ`: the dual is unbounded.
    Unbounded,

}

#[derive(Debug, Clone, PartialEq)]
pub enum DualOutcome {
    Solved(Vec<f64>),
    Unsolvable(Unsolvable),
}

/// Σ̂v bookkeeping, either against the materialized Gram or through `Xv`.
enum State<'a> {
    Dense {
        gram: &'a ndarray::Array2<f64>,
        sv: Vec<f64>,
    },
    Lazy {
        design: &'a ndarray::Array2<f64>,
        xv: Vec<f64>,
        n: f64,
    },
}

impl<'a> State<'a> {
    fn new(view: &'a GramView, v: &[f64]) -> Self {
        match view.dense() {
            Some(gram) => State::Dense {
                gram,
                sv: view.gram_vec(v),
            },
            None => State::Lazy {
                design: view.design(),
                xv: crate::linalg::mat_vec(view.design(), v),
                n: view.n() as f64,
            },
        }
    }

    #[inline]
    fn sv(&self, j: usize) -> f64 {
        match self {
            State::Dense { sv, .. } => sv[j],
            State::Lazy { design, xv, n } => dot(column(design, j), xv) / n,
        }
    }

    #[inline]
    fn apply(&mut self, j: usize, delta: f64) {
        match self {
            State::Dense { gram, sv } => {
                let row = gram.row(j);
                let row = row.as_slice().expect("standard layout");
                crate::linalg::axpy(delta, row, sv);
            }
            State::Lazy { design, xv, .. } => crate::linalg::axpy(delta, column(design, j), xv),
        }
    }
}

#[inline]
fn violation(grad: f64, vj: f64, lam: f64) -> f64 {
    if vj > 0.0 {
        (grad + lam).abs()
    } else if vj < 0.0 {
        (grad - lam).abs()
    } else {
        (grad.abs() - lam).max(0.0)
    }
}

/// Minimize `vᵀΣ̂v/4 + gᵀv + lam·‖v‖₁` by cyclic coordinate descent from
/// `v_init`. `Unsolvable` is an expected outcome: it means `lam` sits below
/// the feasibility threshold of the primal constraint.
pub fn solve_dual_penalized(
    gram: &GramView,
    g: &[f64],
    lam: f64,
    v_init: &[f64],
    settings: &DualSettings,
) -> Result<DualOutcome> {
    let p = gram.p();
    if g.len() != p || v_init.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "target ({}) and v_init ({}) must have length p = {p}",
            g.len(),
            v_init.len()
        )));
    }
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lam}")));
    }
    let g_inf = norm_inf(g);
    if g_inf == 0.0 {
        return Ok(DualOutcome::Solved(vec![0.0; p]));
    }
    let tol = settings.tol * g_inf;
    let cap = settings.divergence_cap * (1.0 + norm2(g)) / lam;
    let budget = settings.updates_per_coordinate.saturating_mul(p);
    let half_diag: Vec<f64> = (0..p).map(|j| gram.diag(j) / 2.0).collect();
    for j in 0..p {
        if half_diag[j] == 0.0 && g[j].abs() > lam {
            return Ok(DualOutcome::Unsolvable(Unsolvable::Unbounded));
        }
    }

    let mut v = v_init.to_vec();
    let mut state = State::new(gram, &v);
    let mut l1 = norm1(&v);

    let coordinate = |j: usize, v: &mut [f64], state: &mut State, l1: &mut f64| {
        let a = half_diag[j];
        if a == 0.0 {
            return;
        }
        let c = state.sv(j) / 2.0 - a * v[j] + g[j];
        let new = -soft_threshold(c, lam) / a;
        let delta = new - v[j];
        if delta != 0.0 {
            *l1 += new.abs() - v[j].abs();
            v[j] = new;
            state.apply(j, delta);
        }
    };

    let mut updates = 0usize;
    loop {
        for j in 0..p {
            coordinate(j, &mut v, &mut state, &mut l1);
        }
        updates += p;
        if !(l1 <= cap) {
            return Ok(DualOutcome::Unsolvable(Unsolvable::Diverged));
        }
        let kkt = (0..p)
            .map(|j| violation(state.sv(j) / 2.0 + g[j], v[j], lam))
            .fold(0.0, f64::max);
        if kkt <= tol {
            return Ok(DualOutcome::Solved(v));
        }
        if updates >= budget {
            return Ok(DualOutcome::Unsolvable(Unsolvable::Budget));
        }
        let active: Vec<usize> = (0..p).filter(|&j| v[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        if let State::Dense { gram: full, sv } = &mut state {
            // Passes over the active set only touch the active block of Σ̂,
            // so keep Σ̂v on that block and refresh the rest afterwards.
            let m = active.len();
            let mut block = vec![0.0; m * m];
            for (ia, &j) in active.iter().enumerate() {
                let row = full.row(j);
                for (ib, &k) in active.iter().enumerate() {
                    block[ia * m + ib] = row[k];
                }
            }
            let mut sv_a: Vec<f64> = active.iter().map(|&j| sv[j]).collect();
            let outcome = loop {
                for (ia, &j) in active.iter().enumerate() {
                    let a = half_diag[j];
                    let c = sv_a[ia] / 2.0 - a * v[j] + g[j];
                    let new = -soft_threshold(c, lam) / a;
                    let delta = new - v[j];
                    if delta != 0.0 {
                        l1 += new.abs() - v[j].abs();
                        v[j] = new;
                        crate::linalg::axpy(delta, &block[ia * m..(ia + 1) * m], &mut sv_a);
                    }
                }
                updates += m;
                if !(l1 <= cap) {
                    break Some(Unsolvable::Diverged);
                }
                let kkt_active = active
                    .iter()
                    .zip(&sv_a)
                    .map(|(&j, s)| violation(s / 2.0 + g[j], v[j], lam))
                    .fold(0.0, f64::max);
                if kkt_active <= 0.5 * tol || updates >= budget {
                    break None;
                }
            };
            if let Some(why) = outcome {
                return Ok(DualOutcome::Unsolvable(why));
            }
            *sv = gram.gram_vec(&v);
            continue;
        }
        loop {
            for &j in &active {
                coordinate(j, &mut v, &mut state, &mut l1);
            }
            updates += active.len();
            if !(l1 <= cap) {
                return Ok(DualOutcome::Unsolvable(Unsolvable::Diverged));
            }
            let kkt_active = active
                .iter()
                .map(|&j| violation(state.sv(j) / 2.0 + g[j], v[j], lam))
                .fold(0.0, f64::max);
            if kkt_active <= 0.5 * tol || updates >= budget {
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    /// At least the starting λ was solved.
    Solved,
    /// `g = 0`; the direction is zero.
    ZeroTarget,
    /// Even the starting λ was unsolvable; the direction is zero.
    StartUnsolvable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionDirection {
    pub u_hat: Vec<f64>,
    pub lambda_accepted: f64,
    /// Number of accepted λ reductions.
    pub dual_steps: usize,
    /// `‖Σ̂û − g‖∞`
    pub feasibility_gap: f64,
    /// `ûᵀΣ̂û`
    pub quad_value: f64,
    pub status: PathStatus,
}

impl ProjectionDirection {
    fn zero(g: &[f64], lambda: f64, status: PathStatus) -> Self {
        Self {
            u_hat: vec![0.0; g.len()],
            lambda_accepted: lambda,
            dual_steps: 0,
            feasibility_gap: norm_inf(g),
            quad_value: 0.0,
            status,
        }
    }
}

/// λ-path settings for [`find_projection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    pub shrink: f64,
    pub max_steps: usize,
    pub dual: DualSettings,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self {
            shrink: 1.5,
            max_steps: 10,
            dual: DualSettings::default(),
        }
    }
}

/// Walk `λ⁰ = lambda_start, λᵗ = λᵗ⁻¹/shrink`, warm-starting every dual
/// solve, and keep the last solvable point.
pub fn find_projection(
    gram: &GramView,
    g: &[f64],
    lambda_start: f64,
    settings: &PathSettings,
) -> Result<ProjectionDirection> {
    if !(lambda_start > 0.0) {
        return Err(Error::InvalidParameter("lambda_start must be positive".into()));
    }
    if !(settings.shrink > 1.0) {
        return Err(Error::InvalidParameter("shrink must exceed 1".into()));
    }
    let p = gram.p();
    if g.len() != p {
        return Err(Error::DimensionMismatch(format!("target has length {} but p = {p}", g.len())));
    }
    if norm_inf(g) == 0.0 {
        return Ok(ProjectionDirection::zero(g, lambda_start, PathStatus::ZeroTarget));
    }

    let mut v = match solve_dual_penalized(gram, g, lambda_start, &vec![0.0; p], &settings.dual)? {
        DualOutcome::Solved(v) => v,
        DualOutcome::Unsolvable(_) => {
            return Ok(ProjectionDirection::zero(g, lambda_start, PathStatus::StartUnsolvable))
        }
    };
    let mut accepted = lambda_start;
    let mut steps = 0;
    while steps < settings.max_steps {
        let next = accepted / settings.shrink;
        match solve_dual_penalized(gram, g, next, &v, &settings.dual)? {
            DualOutcome::Solved(w) => {
                v = w;
                accepted = next;
                steps += 1;
            }
            DualOutcome::Unsolvable(_) => break,
        }
    }

    let u_hat: Vec<f64> = v.iter().map(|x| -x / 2.0).collect();
    let su = gram.gram_vec(&u_hat);
    let feasibility_gap = su.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let quad_value = dot(&u_hat, &su);
    Ok(ProjectionDirection {
        u_hat,
        lambda_accepted: accepted,
        dual_steps: steps,
        feasibility_gap,
        quad_value,
        status: PathStatus::Solved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sample::RegressionSample;
    use ndarray::Array2;

    fn identity_gram(p: usize) -> GramView {
        // rows ±1 Hadamard-like pattern: XᵀX/n = I for n = 4, p ≤ 3
        let x = ndarray::array![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
            [-1.0, -1.0, 1.0]
        ];
        let x = x.slice(ndarray::s![.., ..p]).to_owned();
        GramView::new(&RegressionSample::new(x, vec![0.0; 4]).unwrap())
    }

    fn random_gram(n: usize, p: usize, seed: u64) -> GramView {
        let z = RngStream::new(seed, 0).standard_normals(n * p);
        let x = Array2::from_shape_vec((n, p), z).unwrap();
        GramView::new(&RegressionSample::new(x, vec![0.0; n]).unwrap())
    }

    #[test]
    fn zero_target_gives_zero() {
        let gram = random_gram(20, 5, 1);
        let out = solve_dual_penalized(&gram, &[0.0; 5], 0.3, &[0.0; 5], &DualSettings::default()).unwrap();
        assert_eq!(out, DualOutcome::Solved(vec![0.0; 5]));
        let dir = find_projection(&gram, &[0.0; 5], 0.3, &PathSettings::default()).unwrap();
        assert_eq!(dir.u_hat, vec![0.0; 5]);
        assert_eq!(dir.dual_steps, 0);
        assert_eq!(dir.status, PathStatus::ZeroTarget);
    }

    #[test]
    fn identity_gram_closed_form() {
        let gram = identity_gram(3);
        let g = [0.9, -0.2, -1.4];
        let lam = 0.5;
        let out = solve_dual_penalized(&gram, &g, lam, &[0.0; 3], &DualSettings::default()).unwrap();
        let DualOutcome::Solved(v) = out else { panic!("unsolved") };
        for j in 0..3 {
            assert!((v[j] + 2.0 * soft_threshold(g[j], lam)).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_gram_path_is_feasible_and_tightens() {
        let gram = identity_gram(3);
        let g = [1.0, 0.0, 0.0];
        let settings = PathSettings::default();
        let mut last_quad = -1.0;
        for steps in 0..=6 {
            let s = PathSettings { max_steps: steps, ..settings };
            let dir = find_projection(&gram, &g, 2.0, &s).unwrap();
            assert_eq!(dir.dual_steps, steps);
            let lam = dir.lambda_accepted;
            assert!((lam - 2.0 / 1.5f64.powi(steps as i32)).abs() < 1e-12);
            let gap = (dir.u_hat[0] - 1.0).abs().max(dir.u_hat[1].abs()).max(dir.u_hat[2].abs());
            assert!(gap <= lam + 1e-12);
            // û = (1 − λ)₊ e₁
            assert!((dir.u_hat[0] - (1.0 - lam).max(0.0)).abs() < 1e-12);
            assert!(dir.quad_value >= last_quad - 1e-8);
            last_quad = dir.quad_value;
        }
    }

    #[test]
    fn stored_diagnostics_match_recomputation() {
        let gram = random_gram(40, 6, 4);
        let g = [0.3, -1.0, 0.2, 0.0, 0.5, 0.1];
        let dir = find_projection(&gram, &g, 0.4, &PathSettings::default()).unwrap();
        let su = gram.gram_vec(&dir.u_hat);
        let gap = su.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!((gap - dir.feasibility_gap).abs() < 1e-10);
        assert!((gram.quad_form(&dir.u_hat) - dir.quad_value).abs() < 1e-10);
        assert!(dir.dual_steps <= 10);
        assert!(dir.feasibility_gap <= dir.lambda_accepted + 1e-6);
    }

    #[test]
    fn high_dimensional_path_stops_at_infeasibility() {
        // p > n: Σ̂ is singular and small λ cannot be reached
        let gram = random_gram(20, 60, 9);
        let mut g = vec![0.0; 60];
        g[0] = 1.0;
        let dir = find_projection(&gram, &g, 0.5, &PathSettings::default()).unwrap();
        assert_eq!(dir.status, PathStatus::Solved);
        assert!(dir.dual_steps < 10, "steps {}", dir.dual_steps);
        assert!(dir.feasibility_gap <= dir.lambda_accepted * (1.0 + 1e-6));
        let next = dir.lambda_accepted / 1.5;
        let out = solve_dual_penalized(&gram, &g, next, &vec![0.0; 60], &DualSettings::default()).unwrap();
        assert!(matches!(out, DualOutcome::Unsolvable(_)));
    }

    #[test]
    fn lazy_and_dense_backends_agree() {
        let z = RngStream::new(12, 0).standard_normals(30 * 8);
        let x = Array2::from_shape_vec((30, 8), z).unwrap();
        let s = RegressionSample::new(x, vec![0.0; 30]).unwrap();
        let dense = GramView::new(&s);
        let lazy = GramView::with_dense_limit(&s, 0);
        let g = [1.0, 0.5, 0.0, -0.3, 0.0, 0.0, 0.2, 0.0];
        let a = find_projection(&dense, &g, 0.3, &PathSettings::default()).unwrap();
        let b = find_projection(&lazy, &g, 0.3, &PathSettings::default()).unwrap();
        assert_eq!(a.dual_steps, b.dual_steps);
        for (u, v) in a.u_hat.iter().zip(&b.u_hat) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let gram = random_gram(10, 3, 2);
        assert!(solve_dual_penalized(&gram, &[1.0; 3], 0.0, &[0.0; 3], &DualSettings::default()).is_err());
        assert!(solve_dual_penalized(&gram, &[1.0; 2], 0.1, &[0.0; 3], &DualSettings::default()).is_err());
        let bad = PathSettings { shrink: 1.0, ..PathSettings::default() };
        assert!(find_projection(&gram, &[1.0; 3], 0.1, &bad).is_err());
    }
}
