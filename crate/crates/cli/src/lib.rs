//! Command-line front end: simulation presets, co-heritability estimates
//! from CSV data, and marginal t-statistics.

pub mod config;
pub mod data;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use coherit::functionals::{
    fit_sample, inner_fde, normalized_ratio, quadratic_fde, split_stream, FdeConfig, FitView, SplitSample,
};
use coherit::linalg::GramView;
use coherit::simulation::{fmt_real, marginal_t_stats, run_batch, StandardEstimator, Target};
use coherit::{RegressionSample, ScaledLassoFit};

use config::{parse_bool, ConfigFile, SimulationFlags};
use data::{create, read_table, write_rows, Table};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "coherit", version, about = "Co-heritability estimation in sparse high-dimensional regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation preset or a custom setting and report MSEs.
    Simulate(SimulateArgs),
    /// Estimate inner products, quadratic functionals and ratios from data.
    Estimate(EstimateArgs),
    /// Marginal t-statistic of every marker.
    Tstats(TstatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key = value file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "COHERIT_THREADS")]
    pub threads: Option<usize>,
    /// Scaled-Lasso penalty multiplier.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use sample splitting for the quadratic functionals.
    #[arg(long, overrides_with = "no_split")]
    pub split: bool,
    #[arg(long = "no-split", overrides_with = "split")]
    pub no_split: bool,
}

impl CommonArgs {
    fn split_flag(&self) -> Option<bool> {
        if self.split {
            Some(true)
        } else if self.no_split {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// One of exp1, exp2, q1a, q1b, q2-I, q2-II, tuning.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Summary CSV path; the text table and raw estimates are written next
    /// to it with `.txt` and `.raw.csv` extensions.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Design CSV of the first sample (rows = samples, columns = markers).
    #[arg(long)]
    pub x: PathBuf,
    /// Trait CSV of the first sample.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Design CSV of the second sample (defaults to --x).
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Trait CSV of the second sample.
    #[arg(long)]
    pub w: Option<PathBuf>,
    /// Multi-trait CSV sharing the --x design; every pair is estimated.
    #[arg(long)]
    pub traits: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep traits on their original scale.
    #[arg(long = "no-normalize")]
    pub no_normalize: bool,
    /// Subtract the trait mean before scaling.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TstatsArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, &mut std::io::stdout()),
        Command::Estimate(a) => cmd_estimate(&a, &mut std::io::stdout()),
        Command::Tstats(a) => cmd_tstats(&a),
    }
}

fn load_config(path: &Option<PathBuf>) -> CliResult<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn thread_pool(flag: Option<usize>, file: &ConfigFile) -> CliResult<(rayon::ThreadPool, usize)> {
    let threads = match flag {
        Some(t) => t,
        None => file
            .parsed::<usize>("threads")?
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    };
    if threads == 0 {
        return Err(CliError::Config("key 'threads': must be ≥ 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    Ok((pool, threads))
}

fn check_output(path: &Path) -> CliResult<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(CliError::Config(format!("output directory {} does not exist", parent.display())));
    }
    Ok(())
}

fn check_input(path: &Path) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::Config(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{ext}"))
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let file = load_config(&args.common.config)?;
    let flags = SimulationFlags {
        preset: args.preset.clone(),
        reps: args.reps,
        seed: args.common.seed,
        b: args.common.b,
        split: args.common.split_flag(),
    };
    let (name, settings) = config::resolve_settings(&flags, &file)?;
    if let Some(out) = &args.out {
        check_output(out)?;
    }
    let (pool, threads) = thread_pool(args.common.threads, &file)?;

    let mut header = vec![("command".to_string(), "simulate".to_string()), ("preset".into(), name)];
    if let Some(p) = &args.common.config {
        header.push(("config".into(), p.display().to_string()));
    }
    header.extend(config::settings_header(&settings));
    header.push(("threads".into(), threads.to_string()));

    log::info!("running {} setting(s) on {threads} thread(s)", settings.len());
    let mut report = pool.install(|| run_batch(settings, &StandardEstimator))?;
    report.header = header;

    for s in &report.settings {
        let targets = s.targets();
        let main = if targets.contains(&Target::Inner) { Target::Inner } else { Target::QuadBeta };
        let cells: Vec<String> = s
            .records
            .iter()
            .map(|r| format!("{}={:.4}", r.method.label(), r.mse(main, s.setting.truth.get(main))))
            .collect();
        writeln!(
            stdout,
            "{}: truth {}={:.4}, reps used {}, failed {}, MSE {}",
            s.setting.config.label,
            main,
            s.setting.truth.get(main),
            s.records.first().map_or(0, |r| r.estimates.len()),
            s.failed.len(),
            cells.join(" ")
        )?;
    }
    match &args.out {
        Some(out) => {
            report.write_csv(create(out)?)?;
            report.write_text(create(&with_extension(out, "txt"))?)?;
            report.write_raw_csv(create(&with_extension(out, "raw.csv"))?)?;
        }
        None => report.write_text(&mut *stdout)?,
    }
    Ok(())
}

/// Estimation options after flags and config file are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub fde: FdeConfig,
    pub split: bool,
    pub normalize: bool,
    pub center: bool,
}

const ESTIMATE_KEYS: [&str; 6] = ["b", "seed", "split", "threads", "normalize", "center"];

fn estimate_options(args: &EstimateArgs, file: &ConfigFile) -> CliResult<EstimateOptions> {
    file.check_keys(&ESTIMATE_KEYS)?;
    let mut fde = FdeConfig::default();
    if let Some(b) = args.common.b.or(file.parsed("b")?) {
        if !(b > 0.0) {
            return Err(CliError::Config(format!("key 'b': must be positive, got {b}")));
        }
        fde.b = b;
    }
    if let Some(seed) = args.common.seed.or(file.parsed("seed")?) {
        fde.split_seed = seed;
    }
    let file_bool = |k: &str| file.get(k).map(|v| parse_bool(k, v)).transpose();
    let split = match args.common.split_flag() {
        Some(s) => s,
        None => file_bool("split")?.unwrap_or(false),
    };
    let normalize = if args.no_normalize { false } else { file_bool("normalize")?.unwrap_or(true) };
    let center = args.center || file_bool("center")?.unwrap_or(false);
    Ok(EstimateOptions {
        fde,
        split,
        normalize,
        center,
    })
}

/// Center (optionally) and scale a trait to unit sample variance.
pub fn normalize_trait(y: &[f64], center: bool) -> Option<Vec<f64>> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let sd = var.sqrt();
    let shift = if center { mean } else { 0.0 };
    Some(y.iter().map(|v| (v - shift) / sd).collect())
}

fn prepare_trait(name: &str, y: Vec<f64>, opts: &EstimateOptions) -> CliResult<Vec<f64>> {
    if !opts.normalize {
        return Ok(y);
    }
    normalize_trait(&y, opts.center).ok_or_else(|| CliError::Data(format!("trait '{name}' has zero variance")))
}

fn single_trait(path: &Path) -> CliResult<(String, Vec<f64>)> {
    let t = read_table(path)?;
    if t.names.len() != 1 {
        return Err(CliError::Config(format!(
            "{} must have exactly one trait column, found {}",
            path.display(),
            t.names.len()
        )));
    }
    Ok((t.names[0].clone(), t.column(0)))
}

fn aligned(design: &Table, trait_rows: usize, what: &Path) -> CliResult<()> {
    if design.n_rows() != trait_rows {
        return Err(CliError::Data(format!(
            "{} has {trait_rows} data rows but the design has {}",
            what.display(),
            design.n_rows()
        )));
    }
    Ok(())
}

/// Per-trait fit shared by every pair it takes part in.
struct Prepared {
    sample: RegressionSample,
    fit: ScaledLassoFit,
}

/// Estimates for a set of traits on shared or separate designs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    pub names: Vec<String>,
    /// `Q̂` of each trait.
    pub quad: Vec<f64>,
    /// `Î` for `i < j`, row-major upper triangle.
    pub inner: Vec<Vec<f64>>,
}

impl PairwiseTable {
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let inner = if a == b { self.quad[a] } else { self.inner[a][b] };
        normalized_ratio(inner, self.quad[a], self.quad[b])
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if a == b {
            self.quad[a]
        } else {
            self.inner[a][b]
        }
    }
}

fn quadratic(p: &Prepared, gram: &GramView, opts: &EstimateOptions) -> CliResult<f64> {
    Ok(if opts.split {
        SplitSample::new(&p.sample, &split_stream(&opts.fde, false))?
            .quadratic(&opts.fde, "u3")?
            .0
    } else {
        quadratic_fde(FitView::new(&p.sample, gram, &p.fit), &opts.fde, "u3")?.0
    })
}

/// All pairwise estimates for traits sharing one design.
pub fn pairwise_fde(design: &RegressionSample, traits: &[Vec<f64>], names: &[String], opts: &EstimateOptions) -> CliResult<PairwiseTable> {
    let gram = GramView::new(design);
    let prepared: Vec<Prepared> = traits
        .par_iter()
        .map(|y| {
            let sample = design.with_response(y.clone())?;
            let fit = fit_sample(&sample, &opts.fde)?;
            Ok(Prepared { sample, fit })
        })
        .collect::<coherit::Result<_>>()?;
    let quad: Vec<f64> = prepared
        .par_iter()
        .map(|p| quadratic(p, &gram, opts))
        .collect::<CliResult<_>>()?;
    let k = traits.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = FitView::new(&prepared[i].sample, &gram, &prepared[i].fit);
            let b = FitView::new(&prepared[j].sample, &gram, &prepared[j].fit);
            Ok(inner_fde(a, b, &opts.fde)?.0)
        })
        .collect::<CliResult<_>>()?;
    let mut inner = vec![vec![f64::NAN; k]; k];
    for (&(i, j), v) in pairs.iter().zip(values) {
        inner[i][j] = v;
    }
    Ok(PairwiseTable {
        names: names.to_vec(),
        quad,
        inner,
    })
}

/// Estimates for one trait pair, possibly on two designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub inner: f64,
    pub quad_beta: f64,
    pub quad_gamma: f64,
    pub ratio: f64,
}

pub fn pair_fde(x: &RegressionSample, z: &RegressionSample, opts: &EstimateOptions) -> CliResult<PairEstimate> {
    let e = coherit::estimate_ratio_fde(x, z, opts.split, &opts.fde)?;
    Ok(PairEstimate {
        inner: e.inner,
        quad_beta: e.quad_beta,
        quad_gamma: e.quad_gamma,
        ratio: e.ratio,
    })
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let file = load_config(&args.common.config)?;
    let opts = estimate_options(args, &file)?;
    check_input(&args.x)?;
    for p in [&args.y, &args.z, &args.w, &args.traits].into_iter().flatten() {
        check_input(p)?;
    }
    if let Some(out) = &args.out {
        check_output(out)?;
    }
    let (pool, _) = thread_pool(args.common.threads, &file)?;

    let design_x = read_table(&args.x)?;
    log::info!("design {}: {} rows, {} markers", args.x.display(), design_x.n_rows(), design_x.names.len());
    match (&args.traits, &args.y, &args.w) {
        (Some(traits_path), None, None) => {
            if args.z.is_some() {
                return Err(CliError::Config("--traits uses the --x design only; drop --z".into()));
            }
            let traits = read_table(traits_path)?;
            aligned(&design_x, traits.n_rows(), traits_path)?;
            let ys: Vec<Vec<f64>> = (0..traits.names.len())
                .map(|j| prepare_trait(&traits.names[j], traits.column(j), &opts))
                .collect::<CliResult<_>>()?;
            let sample = RegressionSample::new(design_x.to_array(), vec![0.0; design_x.n_rows()])?;
            let table = pool.install(|| pairwise_fde(&sample, &ys, &traits.names, &opts))?;
            let (header, rows) = pairwise_rows(&table);
            write_rows(&mut *stdout, &header, &rows)?;
            if let Some(out) = &args.out {
                write_rows(create(out)?, &header, &rows)?;
            }
        }
        (None, Some(y_path), Some(w_path)) => {
            let design_z = match &args.z {
                Some(z) => {
                    let t = read_table(z)?;
                    if t.names != design_x.names {
                        return Err(CliError::Config(format!(
                            "marker headers of {} and {} do not match",
                            args.x.display(),
                            z.display()
                        )));
                    }
                    t
                }
                None => design_x.clone(),
            };
            let (y_name, y) = single_trait(y_path)?;
            let (w_name, w) = single_trait(w_path)?;
            aligned(&design_x, y.len(), y_path)?;
            aligned(&design_z, w.len(), w_path)?;
            let x = RegressionSample::new(design_x.to_array(), prepare_trait(&y_name, y, &opts)?)?;
            let z = RegressionSample::new(design_z.to_array(), prepare_trait(&w_name, w, &opts)?)?;
            let est = pool.install(|| pair_fde(&x, &z, &opts))?;
            let header: Vec<String> = ["quantity", "value"].iter().map(|s| s.to_string()).collect();
            let rows: Vec<Vec<String>> = [
                ("inner", est.inner),
                ("quad_beta", est.quad_beta),
                ("quad_gamma", est.quad_gamma),
                ("ratio", est.ratio),
            ]
            .iter()
            .map(|(k, v)| vec![k.to_string(), fmt_real(*v)])
            .collect();
            write_rows(&mut *stdout, &header, &rows)?;
            if let Some(out) = &args.out {
                write_rows(create(out)?, &header, &rows)?;
            }
        }
        _ => {
            return Err(CliError::Config(
                "estimate needs either --y and --w (one pair) or --traits (all pairs)".into(),
            ))
        }
    }
    Ok(())
}

/// Two rows per trait: the quadratic functional on the diagonal with inner
/// products to its right, then the normalized row.
pub fn pairwise_rows(table: &PairwiseTable) -> (Vec<String>, Vec<Vec<String>>) {
    let k = table.names.len();
    let mut header = vec!["trait".to_string(), "row".to_string()];
    header.extend(table.names.iter().cloned());
    let mut rows = Vec::with_capacity(2 * k);
    for i in 0..k {
        let mut top = vec![table.names[i].clone(), "quad_inner".into()];
        let mut bottom = vec![table.names[i].clone(), "ratio".into()];
        for j in 0..k {
            if j < i {
                top.push(String::new());
                bottom.push(String::new());
            } else {
                top.push(fmt_real(table.inner(i, j)));
                bottom.push(fmt_real(table.ratio(i, j)));
            }
        }
        rows.push(top);
        rows.push(bottom);
    }
    (header, rows)
}

pub fn cmd_tstats(args: &TstatsArgs) -> CliResult<()> {
    check_input(&args.x)?;
    check_input(&args.y)?;
    check_output(&args.out)?;
    let design = read_table(&args.x)?;
    let (_, y) = single_trait(&args.y)?;
    aligned(&design, y.len(), &args.y)?;
    let sample = RegressionSample::new(design.to_array(), y)?;
    let ts = marginal_t_stats(&sample)?;
    let rows: Vec<Vec<String>> = design
        .names
        .iter()
        .zip(&ts.t)
        .map(|(m, t)| vec![m.clone(), fmt_real(*t)])
        .collect();
    write_rows(create(&args.out)?, &["marker".to_string(), "t".to_string()], &rows)
}
