//! Functional de-biased estimators of `⟨β, γ⟩`, `‖β‖²`, `‖γ‖²` and the
//! normalized inner product, plus the plug-in baselines they are compared
//! against (scaled Lasso, de-biased Lasso, thresholded de-biased Lasso).
//!
//! Every correction has the same shape: for a target vector `g`, find a
//! projection direction `û` with `‖Σ̂û − g‖∞ ≤ ‖g‖₂·λ` and small `ûᵀΣ̂û`,
//! then `ûᵀXᵀ(y − Xβ̂)/n` estimates `⟨g, β − β̂⟩`.

use std::fmt;

use log::warn;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, GramView};
use crate::projection::{find_projection, PathSettings, PathStatus, ProjectionDirection};
use crate::rng::RngStream;
use crate::sample::RegressionSample;
use crate::sqrt_lasso::{fit_scaled_lasso, universal_lambda0, ScaledLassoConfig, ScaledLassoFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    PluginLasso,
    Debiased,
    Thresholded,
    FdeSplit,
    FdeNoSplit,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PluginLasso,
        Method::Debiased,
        Method::Thresholded,
        Method::FdeSplit,
        Method::FdeNoSplit,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::PluginLasso => "plugin_lasso",
            Method::Debiased => "debiased",
            Method::Thresholded => "thresholded",
            Method::FdeSplit => "fde_split",
            Method::FdeNoSplit => "fde_nosplit",
        }
    }

    /// Row label used in the plain-text tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::PluginLasso => "Lasso",
            Method::Debiased => "De-biased",
            Method::Thresholded => "Thresholded",
            Method::FdeSplit => "FDE-S",
            Method::FdeNoSplit => "FDE-NS",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdeConfig {
    /// λ₀ multiplier: `λ₀ = b·√(2.01·log p)`.
    pub b: f64,
    pub lasso: ScaledLassoConfig,
    /// Overrides the projection level `√(2.01·log p / n)`.
    pub lambda: Option<f64>,
    pub path: PathSettings,
    /// Seed for the random halving used by the split variant.
    pub split_seed: u64,
}

impl Default for FdeConfig {
    fn default() -> Self {
        Self {
            b: 0.5,
            lasso: ScaledLassoConfig::default(),
            lambda: None,
            path: PathSettings::default(),
            split_seed: 0,
        }
    }
}

impl FdeConfig {
    pub fn lambda0(&self, p: usize) -> f64 {
        universal_lambda0(p, self.b)
    }

    /// Starting level of the projection λ-path for a unit-norm target.
    pub fn projection_lambda(&self, p: usize, n: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| (2.01 * (p.max(2) as f64).ln() / n as f64).sqrt())
    }
}

/// One projection step, kept for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRecord {
    pub label: &'static str,
    pub feasibility_gap: f64,
    pub lambda_accepted: f64,
    pub dual_steps: usize,
    pub correction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub corrections: Vec<CorrectionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoheritabilityEstimate {
    pub inner: f64,
    pub quad_beta: f64,
    pub quad_gamma: f64,
    pub ratio: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// `sign(I)·min{|I|/√(Q₁Q₂)·1{Q₁Q₂ > 0}, 1}`
pub fn normalized_ratio(inner: f64, quad_a: f64, quad_b: f64) -> f64 {
    let prod = quad_a * quad_b;
    if !(prod > 0.0) || inner == 0.0 {
        return 0.0;
    }
    let magnitude = (inner.abs() / prod.sqrt()).min(1.0);
    magnitude.copysign(inner)
}

/// A sample together with its Gram view and the coefficient vector whose
/// residual the corrections are built from.
#[derive(Debug, Clone, Copy)]
pub struct FitView<'a> {
    pub sample: &'a RegressionSample,
    pub gram: &'a GramView,
    pub fit: &'a ScaledLassoFit,
}

impl<'a> FitView<'a> {
    pub fn new(sample: &'a RegressionSample, gram: &'a GramView, fit: &'a ScaledLassoFit) -> Self {
        Self { sample, gram, fit }
    }

    /// `Xᵀ(y − Xβ̂)/n`
    pub fn residual_score(&self) -> Vec<f64> {
        residual_score(self.sample, &self.fit.beta_hat)
    }
}

pub fn residual_score(sample: &RegressionSample, beta: &[f64]) -> Vec<f64> {
    let n = sample.n() as f64;
    let xb = mat_vec(sample.design(), beta);
    let r: Vec<f64> = sample.response().iter().zip(&xb).map(|(y, f)| y - f).collect();
    (0..sample.p()).map(|j| dot(sample.column(j), &r) / n).collect()
}

pub fn fit_sample(sample: &RegressionSample, config: &FdeConfig) -> Result<ScaledLassoFit> {
    fit_scaled_lasso(sample, config.lambda0(sample.p()), &config.lasso)
}

/// Projection for target `g` on `gram` with the constraint level scaled by
/// `‖g‖₂`, and the resulting correction `ûᵀ score`.
fn correction(
    gram: &GramView,
    score: &[f64],
    target: &[f64],
    config: &FdeConfig,
    label: &'static str,
) -> Result<(f64, CorrectionRecord)> {
    let scale = crate::linalg::norm2(target);
    let dir = if scale == 0.0 {
        None
    } else {
        let start = scale * config.projection_lambda(gram.p(), gram.n());
        Some(find_projection(gram, target, start, &config.path)?)
    };
    let (value, record) = match dir {
        Some(d) => {
            let value = dot(&d.u_hat, score);
            (
                value,
                CorrectionRecord {
                    label,
                    feasibility_gap: d.feasibility_gap,
                    lambda_accepted: d.lambda_accepted,
                    dual_steps: d.dual_steps,
                    correction: value,
                },
            )
        }
        None => (
            0.0,
            CorrectionRecord {
                label,
                feasibility_gap: 0.0,
                lambda_accepted: 0.0,
                dual_steps: 0,
                correction: 0.0,
            },
        ),
    };
    Ok((value, record))
}

fn check_same_p(a: &RegressionSample, b: &RegressionSample) -> Result<()> {
    if a.p() != b.p() {
        return Err(Error::DimensionMismatch(format!(
            "samples have p = {} and p = {}",
            a.p(),
            b.p()
        )));
    }
    Ok(())
}

/// `Î = ⟨β̂, γ̂⟩ + û₁ᵀXᵀ(y − Xβ̂)/n₁ + û₂ᵀZᵀ(w − Zγ̂)/n₂`, with û₁ targeting
/// γ̂ on Σ̂ and û₂ targeting β̂ on Γ̂.
///
/// The two corrections are summed before being added to the plug-in so the
/// result is bitwise symmetric under swapping the samples.
pub fn inner_fde(x: FitView, z: FitView, config: &FdeConfig) -> Result<(f64, Diagnostics)> {
    check_same_p(x.sample, z.sample)?;
    let beta = &x.fit.beta_hat;
    let gamma = &z.fit.beta_hat;
    let (c1, r1) = correction(x.gram, &x.residual_score(), gamma, config, "u1")?;
    let (c2, r2) = correction(z.gram, &z.residual_score(), beta, config, "u2")?;
    let inner = dot(beta, gamma) + (c1 + c2);
    Ok((
        inner,
        Diagnostics {
            corrections: vec![r1, r2],
        },
    ))
}

/// `Q̂ = (‖β̂‖² + 2·ûᵀXᵀ(y − Xβ̂)/m)₊` with û targeting β̂ on the view's
/// Gram. For the split variant pass the second half's sample and Gram with
/// the fit from the first half.
pub fn quadratic_fde(view: FitView, config: &FdeConfig, label: &'static str) -> Result<(f64, CorrectionRecord)> {
    let beta = &view.fit.beta_hat;
    let (c, record) = correction(view.gram, &view.residual_score(), beta, config, label)?;
    Ok(((dot(beta, beta) + 2.0 * c).max(0.0), record))
}

/// Seeded halving of `0..n`: the first `⌈n/2⌉` rows of a random
/// permutation feed the initial fit, the rest the correction.
pub fn split_rows(n: usize, rng: &RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng.generator());
    let second = idx.split_off(n.div_ceil(2));
    (idx, second)
}

/// A sample cut into an initial-fit half and a correction half.
#[derive(Debug, Clone)]
pub struct SplitSample {
    pub rows: (Vec<usize>, Vec<usize>),
    pub fit_half: RegressionSample,
    pub correction_half: RegressionSample,
    pub correction_gram: GramView,
}

impl SplitSample {
    pub fn new(sample: &RegressionSample, rng: &RngStream) -> Result<Self> {
        if sample.n() < 4 {
            return Err(Error::InvalidParameter(format!(
                "sample splitting needs n >= 4, got {}",
                sample.n()
            )));
        }
        let rows = split_rows(sample.n(), rng);
        let fit_half = sample.select_rows(&rows.0)?;
        let correction_half = sample.select_rows(&rows.1)?;
        let correction_gram = GramView::new(&correction_half);
        Ok(Self {
            rows,
            fit_half,
            correction_half,
            correction_gram,
        })
    }

    /// Same halving and Gram, new response on the full sample.
    pub fn with_response(&self, response: &[f64]) -> Result<Self> {
        let pick = |ix: &[usize]| ix.iter().map(|&i| response[i]).collect::<Vec<_>>();
        Ok(Self {
            rows: self.rows.clone(),
            fit_half: self.fit_half.with_response(pick(&self.rows.0))?,
            correction_half: self.correction_half.with_response(pick(&self.rows.1))?,
            correction_gram: self.correction_gram.clone(),
        })
    }

    pub fn quadratic(&self, config: &FdeConfig, label: &'static str) -> Result<(f64, CorrectionRecord)> {
        let fit = fit_sample(&self.fit_half, config)?;
        quadratic_fde(FitView::new(&self.correction_half, &self.correction_gram, &fit), config, label)
    }
}

const SPLIT_TAG_X: u64 = 0x0053_504c_4954_5f58;
const SPLIT_TAG_Z: u64 = 0x0053_504c_4954_5f5a;

pub fn split_stream(config: &FdeConfig, second: bool) -> RngStream {
    RngStream::new(config.split_seed, 0).derive(if second { SPLIT_TAG_Z } else { SPLIT_TAG_X })
}

pub fn estimate_inner_fde(sample_x: &RegressionSample, sample_z: &RegressionSample, config: &FdeConfig) -> Result<f64> {
    check_same_p(sample_x, sample_z)?;
    let (gx, gz) = (GramView::new(sample_x), GramView::new(sample_z));
    let (fx, fz) = (fit_sample(sample_x, config)?, fit_sample(sample_z, config)?);
    inner_fde(FitView::new(sample_x, &gx, &fx), FitView::new(sample_z, &gz, &fz), config).map(|r| r.0)
}

pub fn estimate_quadratic_fde(sample: &RegressionSample, split: bool, config: &FdeConfig) -> Result<f64> {
    if split {
        SplitSample::new(sample, &split_stream(config, false))?
            .quadratic(config, "u3")
            .map(|r| r.0)
    } else {
        let gram = GramView::new(sample);
        let fit = fit_sample(sample, config)?;
        quadratic_fde(FitView::new(sample, &gram, &fit), config, "u3").map(|r| r.0)
    }
}

/// All four FDE quantities for one pair of samples. Without splitting one
/// scaled-Lasso fit per sample feeds all four projections; with splitting
/// the inner product still uses the full samples and only the quadratic
/// functionals are built from halves.
pub fn estimate_ratio_fde(
    sample_x: &RegressionSample,
    sample_z: &RegressionSample,
    split: bool,
    config: &FdeConfig,
) -> Result<CoheritabilityEstimate> {
    check_same_p(sample_x, sample_z)?;
    let (gx, gz) = (GramView::new(sample_x), GramView::new(sample_z));
    let (fx, fz) = (fit_sample(sample_x, config)?, fit_sample(sample_z, config)?);
    let vx = FitView::new(sample_x, &gx, &fx);
    let vz = FitView::new(sample_z, &gz, &fz);
    if split {
        let sx = SplitSample::new(sample_x, &split_stream(config, false))?;
        let sz = SplitSample::new(sample_z, &split_stream(config, true))?;
        fde_estimate(vx, vz, Some((&sx, &sz)), config)
    } else {
        fde_estimate(vx, vz, None, config)
    }
}

/// FDE estimate from prepared views; `split` supplies the halves for the
/// split variant of the quadratic functionals.
pub fn fde_estimate(
    x: FitView,
    z: FitView,
    split: Option<(&SplitSample, &SplitSample)>,
    config: &FdeConfig,
) -> Result<CoheritabilityEstimate> {
    let (inner, mut diagnostics) = inner_fde(x, z, config)?;
    let ((qb, rb), (qg, rg), method) = match split {
        None => (
            quadratic_fde(x, config, "u3")?,
            quadratic_fde(z, config, "u4")?,
            Method::FdeNoSplit,
        ),
        Some((sx, sz)) => (
            sx.quadratic(config, "u3")?,
            sz.quadratic(config, "u4")?,
            Method::FdeSplit,
        ),
    };
    diagnostics.corrections.push(rb);
    diagnostics.corrections.push(rg);
    Ok(CoheritabilityEstimate {
        inner,
        quad_beta: qb,
        quad_gamma: qg,
        ratio: normalized_ratio(inner, qb, qg),
        method,
        diagnostics,
    })
}

/// Plug-in functionals of two coefficient vectors.
pub fn plugin_from_vectors(beta: &[f64], gamma: &[f64], method: Method) -> CoheritabilityEstimate {
    let inner = dot(beta, gamma);
    let qb = dot(beta, beta);
    let qg = dot(gamma, gamma);
    CoheritabilityEstimate {
        inner,
        quad_beta: qb,
        quad_gamma: qg,
        ratio: normalized_ratio(inner, qb, qg),
        method,
        diagnostics: Diagnostics::default(),
    }
}

pub fn plugin_estimates(fit_x: &ScaledLassoFit, fit_z: &ScaledLassoFit) -> CoheritabilityEstimate {
    plugin_from_vectors(&fit_x.beta_hat, &fit_z.beta_hat, Method::PluginLasso)
}

/// Per-coordinate projection directions `mⱼ` (targets `eⱼ`) for one design.
/// They depend on the design only, so one set serves every response.
#[derive(Debug, Clone)]
pub struct NodewiseDirections {
    /// `mⱼ` for every coordinate.
    pub directions: Vec<Vec<f64>>,
    /// `mⱼᵀΣ̂mⱼ`
    pub quad_values: Vec<f64>,
    /// Coordinates that fell back to `eⱼ/Σ̂ⱼⱼ`.
    pub fallbacks: Vec<usize>,
}

impl NodewiseDirections {
    pub fn compute(gram: &GramView, config: &FdeConfig) -> Result<Self> {
        let p = gram.p();
        let start = config.projection_lambda(p, gram.n());
        let mut directions = Vec::with_capacity(p);
        let mut quad_values = Vec::with_capacity(p);
        let mut fallbacks = Vec::new();
        let mut target = vec![0.0; p];
        for j in 0..p {
            target[j] = 1.0;
            let dir: ProjectionDirection = find_projection(gram, &target, start, &config.path)?;
            target[j] = 0.0;
            if dir.status == PathStatus::Solved {
                quad_values.push(dir.quad_value);
                directions.push(dir.u_hat);
            } else {
                warn!("nodewise projection for coordinate {j} unsolvable; using e_j / diag");
                let d = gram.diag(j);
                let mut m = vec![0.0; p];
                if d > 0.0 {
                    m[j] = 1.0 / d;
                }
                quad_values.push(if d > 0.0 { 1.0 / d } else { 0.0 });
                directions.push(m);
                fallbacks.push(j);
            }
        }
        Ok(Self {
            directions,
            quad_values,
            fallbacks,
        })
    }

    /// `β̃ⱼ = β̂ⱼ + mⱼᵀXᵀ(y − Xβ̂)/n`
    pub fn debias(&self, view: FitView) -> Vec<f64> {
        let score = view.residual_score();
        view.fit
            .beta_hat
            .iter()
            .zip(&self.directions)
            .map(|(b, m)| b + dot(m, &score))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Debiased {
    pub beta_tilde: Vec<f64>,
    pub quad_values: Vec<f64>,
    pub fallbacks: Vec<usize>,
}

pub fn debias_coefficients(sample: &RegressionSample, fit: &ScaledLassoFit, config: &FdeConfig) -> Result<Debiased> {
    if fit.beta_hat.len() != sample.p() {
        return Err(Error::DimensionMismatch("fit and sample disagree on p".into()));
    }
    let gram = GramView::new(sample);
    let nodewise = NodewiseDirections::compute(&gram, config)?;
    let beta_tilde = nodewise.debias(FitView::new(sample, &gram, fit));
    Ok(Debiased {
        beta_tilde,
        quad_values: nodewise.quad_values,
        fallbacks: nodewise.fallbacks,
    })
}

/// Hard threshold at `τⱼ = σ̂·√(mⱼᵀΣ̂mⱼ)·√(2.01·log p / n)`.
pub fn threshold_coefficients(beta_tilde: &[f64], sigma_hat: f64, quad_values: &[f64], n: usize, p: usize) -> Vec<f64> {
    let level = (2.01 * (p.max(2) as f64).ln() / n as f64).sqrt();
    beta_tilde
        .iter()
        .zip(quad_values)
        .map(|(&b, &q)| {
            let tau = sigma_hat * q.max(0.0).sqrt() * level;
            if b.abs() > tau {
                b
            } else {
                0.0
            }
        })
        .collect()
}
