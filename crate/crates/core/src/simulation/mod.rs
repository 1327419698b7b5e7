//! Monte-Carlo harness: synthetic two-sample (or one-sample) experiments
//! with AR(1) designs, replicated estimation across methods, and MSE
//! reports.
//!
//! Replication `r` draws its designs and noise from streams keyed by
//! `(master_seed, r)`, so a setting gives the same numbers whether it is run
//! alone or inside a preset, and whatever the worker count.

mod presets;
mod report;
mod tstats;

use std::cell::OnceCell;
use std::fmt;

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{
    fit_sample, inner_fde, normalized_ratio, plugin_from_vectors, quadratic_fde, threshold_coefficients, FdeConfig,
    FitView, Method, NodewiseDirections, SplitSample,
};
use crate::linalg::{dot, mat_vec, GramView};
use crate::rng::RngStream;
use crate::sample::{sample_gaussian_ar1, RegressionSample};
use crate::sqrt_lasso::ScaledLassoFit;

pub use presets::{preset, PRESET_NAMES};
pub use report::{fmt_real, read_summary_csv, ExperimentReport, MethodRecord, SettingReport, SummaryRow, Target};
pub use tstats::{marginal_t_stats, TStats};

const SUPPORT_STREAM: u64 = u64::MAX;
const TAG_X: u64 = 1;
const TAG_Z: u64 = 2;
const TAG_EPS: u64 = 3;
const TAG_DELTA: u64 = 4;
const TAG_SPLIT_X: u64 = 5;
const TAG_SPLIT_Z: u64 = 6;

/// Share of failed replications above which a setting is aborted.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// `(1 + i/s)·τ/2` on the i-th support index.
    Ramp,
    Constant,
}

impl Pattern {
    pub fn tag(self) -> &'static str {
        match self {
            Pattern::Ramp => "ramp",
            Pattern::Constant => "constant",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ramp" => Some(Pattern::Ramp),
            "constant" => Some(Pattern::Constant),
            _ => None,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Two samples with targets `I, Q(β), Q(γ), R`, or one sample with
/// target `Q(β)` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    Pair,
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Column label in reports.
    pub label: String,
    pub design: Design,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub reps: usize,
    /// Overlap size `|S1 ∩ S2|`.
    pub s: usize,
    pub s1: usize,
    pub s2: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub rho: f64,
    pub pattern_beta: Pattern,
    pub pattern_gamma: Pattern,
    pub b: f64,
    /// Also run the sample-splitting FDE variant.
    pub split: bool,
    pub master_seed: u64,
    pub methods: Vec<Method>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.reps == 0 {
            return bad("reps must be ≥ 1".into());
        }
        if self.p == 0 {
            return bad("p must be ≥ 1".into());
        }
        let min_n = if self.split { 4 } else { 2 };
        if self.n1 < min_n || (self.design == Design::Pair && self.n2 < min_n) {
            return bad(format!("sample sizes must be ≥ {min_n}"));
        }
        if self.s > self.s1.min(self.s2) {
            return bad(format!("overlap s = {} exceeds min(s1, s2)", self.s));
        }
        if self.s1 + self.s2 - self.s > self.p {
            return Err(Error::InfeasibleSupports {
                needed: self.s1 + self.s2 - self.s,
                p: self.p,
            });
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidRho(self.rho));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return bad(format!("b must be positive, got {}", self.b));
        }
        if !self.tau1.is_finite() || !self.tau2.is_finite() {
            return Err(Error::NonFinite("signal strength"));
        }
        if self.active_methods().is_empty() {
            return bad("no methods selected".into());
        }
        Ok(())
    }

    /// Requested methods, minus the split variant when `split` is off.
    pub fn active_methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = self
            .methods
            .iter()
            .copied()
            .filter(|&m| self.split || m != Method::FdeSplit)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn fde_config(&self) -> FdeConfig {
        FdeConfig {
            b: self.b,
            ..FdeConfig::default()
        }
    }

    /// Designs are shared across settings with the same key.
    fn design_key(&self) -> (Design, usize, usize, usize, u64, u64) {
        let n2 = if self.design == Design::Pair { self.n2 } else { 0 };
        (self.design, self.p, self.n1, n2, self.rho.to_bits(), self.master_seed)
    }
}

/// Overlap first, then the exclusive parts; both sets sorted.
pub fn gen_supports(p: usize, s: usize, s1: usize, s2: usize, rng: &RngStream) -> Result<(Vec<usize>, Vec<usize>)> {
    if s > s1.min(s2) {
        return Err(Error::InvalidParameter(format!("overlap s = {s} exceeds min(s1, s2)")));
    }
    let needed = s1 + s2 - s;
    if needed > p {
        return Err(Error::InfeasibleSupports { needed, p });
    }
    let drawn = index::sample(&mut rng.generator(), p, needed).into_vec();
    let (overlap, rest) = drawn.split_at(s);
    let (only1, only2) = rest.split_at(s1 - s);
    let mut a: Vec<usize> = overlap.iter().chain(only1).copied().collect();
    let mut b: Vec<usize> = overlap.iter().chain(only2).copied().collect();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

pub fn gen_coefficients(p: usize, support: &[usize], pattern: Pattern, tau: f64) -> Vec<f64> {
    let mut out = vec![0.0; p];
    let k = support.len() as f64;
    for (i, &j) in support.iter().enumerate() {
        out[j] = match pattern {
            Pattern::Ramp => (1.0 + (i + 1) as f64 / k) * tau / 2.0,
            Pattern::Constant => tau,
        };
    }
    out
}

/// Target values; the pair-only entries are NaN for one-sample settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub inner: f64,
    pub quad_beta: f64,
    pub quad_gamma: f64,
    pub ratio: f64,
}

impl Estimates {
    pub fn single(quad_beta: f64) -> Self {
        Self {
            inner: f64::NAN,
            quad_beta,
            quad_gamma: f64::NAN,
            ratio: f64::NAN,
        }
    }

    pub fn get(&self, target: Target) -> f64 {
        match target {
            Target::Inner => self.inner,
            Target::QuadBeta => self.quad_beta,
            Target::QuadGamma => self.quad_gamma,
            Target::Ratio => self.ratio,
        }
    }
}

impl From<&crate::functionals::CoheritabilityEstimate> for Estimates {
    fn from(e: &crate::functionals::CoheritabilityEstimate) -> Self {
        Self {
            inner: e.inner,
            quad_beta: e.quad_beta,
            quad_gamma: e.quad_gamma,
            ratio: e.ratio,
        }
    }
}

pub fn truth_of(beta: &[f64], gamma: Option<&[f64]>) -> Estimates {
    let qb = dot(beta, beta);
    match gamma {
        None => Estimates::single(qb),
        Some(g) => {
            let inner = dot(beta, g);
            let qg = dot(g, g);
            let ratio = if qb * qg > 0.0 { inner / (qb.sqrt() * qg.sqrt()) } else { 0.0 };
            Estimates {
                inner,
                quad_beta: qb,
                quad_gamma: qg,
                ratio,
            }
        }
    }
}

/// A setting with its Step-1 draw: supports, coefficients, truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub config: ExperimentConfig,
    pub support_beta: Vec<usize>,
    pub support_gamma: Vec<usize>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub truth: Estimates,
}

impl Setting {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let (s, s2) = match c.design {
            Design::Pair => (c.s, c.s2),
            Design::Single => (0, 0),
        };
        let dims_tag = [c.p, s, c.s1, s2]
            .iter()
            .fold(0u64, |h, &v| h.wrapping_mul(1_000_003).wrapping_add(v as u64));
        let rng = RngStream::new(c.master_seed, SUPPORT_STREAM).derive(dims_tag);
        let (support_beta, support_gamma) = gen_supports(c.p, s, c.s1, s2, &rng)?;
        let beta = gen_coefficients(c.p, &support_beta, c.pattern_beta, c.tau1);
        let gamma = gen_coefficients(c.p, &support_gamma, c.pattern_gamma, c.tau2);
        let truth = match c.design {
            Design::Pair => truth_of(&beta, Some(&gamma)),
            Design::Single => truth_of(&beta, None),
        };
        Ok(Self {
            config,
            support_beta,
            support_gamma,
            beta,
            gamma,
            truth,
        })
    }
}

/// One sample's replication data: design, Gram, noise and lazily built
/// split halves and nodewise directions.
pub struct SideData {
    pub design: RegressionSample,
    pub gram: GramView,
    pub noise: Vec<f64>,
    split_rng: RngStream,
    split: OnceCell<Result<SplitSample>>,
    nodewise: OnceCell<Result<NodewiseDirections>>,
}

impl SideData {
    fn new(n: usize, p: usize, rho: f64, base: &RngStream, design_tag: u64, noise_tag: u64, split_tag: u64) -> Result<Self> {
        let x = sample_gaussian_ar1(n, p, rho, &base.derive(design_tag))?;
        let design = RegressionSample::new(x, vec![0.0; n])?;
        let gram = GramView::new(&design);
        Ok(Self {
            design,
            gram,
            noise: base.derive(noise_tag).standard_normals(n),
            split_rng: base.derive(split_tag),
            split: OnceCell::new(),
            nodewise: OnceCell::new(),
        })
    }

    /// `X·coef + noise` as a sample sharing this design.
    pub fn sample_for(&self, coef: &[f64]) -> Result<RegressionSample> {
        let signal = mat_vec(self.design.design(), coef);
        self.design
            .with_response(signal.iter().zip(&self.noise).map(|(a, e)| a + e).collect())
    }

    pub fn split(&self) -> Result<&SplitSample> {
        self.split
            .get_or_init(|| SplitSample::new(&self.design, &self.split_rng))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn nodewise(&self, config: &FdeConfig) -> Result<&NodewiseDirections> {
        self.nodewise
            .get_or_init(|| NodewiseDirections::compute(&self.gram, config))
            .as_ref()
            .map_err(Clone::clone)
    }
}

pub struct ReplicationData {
    pub index: usize,
    pub x: SideData,
    pub z: Option<SideData>,
}

impl ReplicationData {
    fn new(config: &ExperimentConfig, index: usize) -> Result<Self> {
        let base = RngStream::new(config.master_seed, index as u64);
        let x = SideData::new(config.n1, config.p, config.rho, &base, TAG_X, TAG_EPS, TAG_SPLIT_X)?;
        let z = match config.design {
            Design::Pair => Some(SideData::new(config.n2, config.p, config.rho, &base, TAG_Z, TAG_DELTA, TAG_SPLIT_Z)?),
            Design::Single => None,
        };
        Ok(Self { index, x, z })
    }
}

/// Per-replication estimation step. The standard pipeline is
/// [`StandardEstimator`]; tests inject their own.
pub trait Estimator: Sync {
    fn estimate(&self, setting: &Setting, data: &ReplicationData) -> Result<Vec<(Method, Estimates)>>;
}

/// Scaled-Lasso plug-in, de-biased, thresholded and both FDE variants.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardEstimator;

struct Side<'a> {
    data: &'a SideData,
    sample: RegressionSample,
    fit: ScaledLassoFit,
}

impl<'a> Side<'a> {
    fn new(data: &'a SideData, coef: &[f64], config: &FdeConfig) -> Result<Self> {
        let sample = data.sample_for(coef)?;
        let fit = checked_fit(&sample, config)?;
        Ok(Self { data, sample, fit })
    }

    fn view(&self) -> FitView<'_> {
        FitView::new(&self.sample, &self.data.gram, &self.fit)
    }

    fn split_quadratic(&self, config: &FdeConfig, label: &'static str) -> Result<f64> {
        let split = self.data.split()?.with_response(self.sample.response())?;
        let fit = checked_fit(&split.fit_half, config)?;
        quadratic_fde(FitView::new(&split.correction_half, &split.correction_gram, &fit), config, label).map(|r| r.0)
    }

    fn debiased(&self, config: &FdeConfig) -> Result<(Vec<f64>, Vec<f64>)> {
        let nodewise = self.data.nodewise(config)?;
        let tilde = nodewise.debias(self.view());
        let bar = threshold_coefficients(
            &tilde,
            self.fit.sigma_hat,
            &nodewise.quad_values,
            self.sample.n(),
            self.sample.p(),
        );
        Ok((tilde, bar))
    }
}

fn checked_fit(sample: &RegressionSample, config: &FdeConfig) -> Result<ScaledLassoFit> {
    let fit = fit_sample(sample, config)?;
    if !fit.converged {
        return Err(Error::NoConvergence {
            sweeps: fit.iterations,
            residual: fit.kkt_residual,
        });
    }
    Ok(fit)
}

impl Estimator for StandardEstimator {
    fn estimate(&self, setting: &Setting, data: &ReplicationData) -> Result<Vec<(Method, Estimates)>> {
        let config = setting.config.fde_config();
        let methods = setting.config.active_methods();
        let x = Side::new(&data.x, &setting.beta, &config)?;
        let z = match &data.z {
            Some(zd) => Some(Side::new(zd, &setting.gamma, &config)?),
            None => None,
        };
        let needs_nodewise = methods.iter().any(|m| matches!(m, Method::Debiased | Method::Thresholded));
        let deb_x = if needs_nodewise { Some(x.debiased(&config)?) } else { None };
        let deb_z = match (&z, needs_nodewise) {
            (Some(z), true) => Some(z.debiased(&config)?),
            _ => None,
        };
        let inner = match (&z, methods.iter().any(|m| matches!(m, Method::FdeNoSplit | Method::FdeSplit))) {
            (Some(z), true) => Some(inner_fde(x.view(), z.view(), &config)?.0),
            _ => None,
        };

        let mut out = Vec::with_capacity(methods.len());
        for method in methods {
            let pick = |deb: &Option<(Vec<f64>, Vec<f64>)>| -> Vec<f64> {
                let (tilde, bar) = deb.as_ref().expect("nodewise computed");
                if method == Method::Debiased { tilde.clone() } else { bar.clone() }
            };
            let est = match method {
                Method::PluginLasso => pair_or_single(&x.fit.beta_hat, z.as_ref().map(|z| z.fit.beta_hat.as_slice()), method),
                Method::Debiased | Method::Thresholded => {
                    let b = pick(&deb_x);
                    let g = deb_z.as_ref().map(|_| pick(&deb_z));
                    pair_or_single(&b, g.as_deref(), method)
                }
                Method::FdeNoSplit | Method::FdeSplit => {
                    let (qb, qg) = if method == Method::FdeNoSplit {
                        (
                            quadratic_fde(x.view(), &config, "u3")?.0,
                            z.as_ref().map(|z| quadratic_fde(z.view(), &config, "u4").map(|r| r.0)).transpose()?,
                        )
                    } else {
                        (
                            x.split_quadratic(&config, "u3")?,
                            z.as_ref().map(|z| z.split_quadratic(&config, "u4")).transpose()?,
                        )
                    };
                    match (inner, qg) {
                        (Some(i), Some(qg)) => Estimates {
                            inner: i,
                            quad_beta: qb,
                            quad_gamma: qg,
                            ratio: normalized_ratio(i, qb, qg),
                        },
                        _ => Estimates::single(qb),
                    }
                }
            };
            out.push((method, est));
        }
        Ok(out)
    }
}

fn pair_or_single(beta: &[f64], gamma: Option<&[f64]>, method: Method) -> Estimates {
    match gamma {
        Some(g) => Estimates::from(&plugin_from_vectors(beta, g, method)),
        None => Estimates::single(dot(beta, beta)),
    }
}

pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentReport> {
    run_batch(vec![config], &StandardEstimator)
}

/// Run several settings. Replications run in parallel on the current rayon
/// pool; settings with the same design parameters share each replication's
/// designs, noise and cached projections.
pub fn run_batch(configs: Vec<ExperimentConfig>, estimator: &dyn Estimator) -> Result<ExperimentReport> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("no settings to run".into()));
    }
    let settings: Vec<Setting> = configs.into_iter().map(Setting::new).collect::<Result<_>>()?;
    let reps = settings.iter().map(|s| s.config.reps).max().unwrap_or(0);

    let per_rep: Vec<Vec<Option<Result<Vec<(Method, Estimates)>>>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut bundles: Vec<((Design, usize, usize, usize, u64, u64), Result<ReplicationData>)> = Vec::new();
            settings
                .iter()
                .map(|setting| {
                    if r >= setting.config.reps {
                        return None;
                    }
                    let key = setting.config.design_key();
                    let pos = match bundles.iter().position(|(k, _)| *k == key) {
                        Some(pos) => pos,
                        None => {
                            bundles.push((key, ReplicationData::new(&setting.config, r)));
                            bundles.len() - 1
                        }
                    };
                    Some(match &bundles[pos].1 {
                        Ok(data) => estimator.estimate(setting, data),
                        Err(e) => Err(e.clone()),
                    })
                })
                .collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(settings.len());
    for (k, setting) in settings.into_iter().enumerate() {
        let mut report = SettingReport::new(setting);
        for (r, results) in per_rep.iter().enumerate() {
            match &results[k] {
                None => {}
                Some(Ok(values)) => report.push(r, values),
                Some(Err(e)) => {
                    log::warn!("setting {} replication {r} failed: {e}", report.setting.config.label);
                    report.failed.push(r);
                }
            }
        }
        let reps = report.setting.config.reps;
        if report.failed.len() as f64 > MAX_FAILURE_RATE * reps as f64 {
            return Err(Error::TooManyFailures {
                setting: report.setting.config.label.clone(),
                failed: report.failed.len(),
                reps,
            });
        }
        reports.push(report);
    }
    Ok(ExperimentReport::new(reports))
}
