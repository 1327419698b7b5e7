use std::fmt;
use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::functionals::Method;

use super::{Design, Estimates, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Inner,
    QuadBeta,
    QuadGamma,
    Ratio,
}

impl Target {
    pub const PAIR: [Target; 4] = [Target::Inner, Target::QuadBeta, Target::QuadGamma, Target::Ratio];

    pub fn tag(self) -> &'static str {
        match self {
            Target::Inner => "I",
            Target::QuadBeta => "Q_beta",
            Target::QuadGamma => "Q_gamma",
            Target::Ratio => "R",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::PAIR.into_iter().find(|t| t.tag() == tag)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Raw estimates of one method, in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub method: Method,
    pub replications: Vec<usize>,
    pub estimates: Vec<Estimates>,
}

impl MethodRecord {
    pub fn mse(&self, target: Target, truth: f64) -> f64 {
        if self.estimates.is_empty() {
            return f64::NAN;
        }
        let sum: f64 = self.estimates.iter().map(|e| (e.get(target) - truth).powi(2)).sum();
        sum / self.estimates.len() as f64
    }

    pub fn values(&self, target: Target) -> Vec<f64> {
        self.estimates.iter().map(|e| e.get(target)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingReport {
    pub setting: Setting,
    pub records: Vec<MethodRecord>,
    /// Replications excluded after an estimation failure.
    pub failed: Vec<usize>,
}

impl SettingReport {
    pub(super) fn new(setting: Setting) -> Self {
        let records = setting
            .config
            .active_methods()
            .into_iter()
            .map(|method| MethodRecord {
                method,
                replications: Vec::new(),
                estimates: Vec::new(),
            })
            .collect();
        Self {
            setting,
            records,
            failed: Vec::new(),
        }
    }

    pub(super) fn push(&mut self, replication: usize, values: &[(Method, Estimates)]) {
        for (method, est) in values {
            if let Some(rec) = self.records.iter_mut().find(|r| r.method == *method) {
                rec.replications.push(replication);
                rec.estimates.push(*est);
            }
        }
    }

    pub fn targets(&self) -> &'static [Target] {
        match self.setting.config.design {
            Design::Pair => &Target::PAIR,
            Design::Single => &[Target::QuadBeta],
        }
    }

    pub fn record(&self, method: Method) -> Option<&MethodRecord> {
        self.records.iter().find(|r| r.method == method)
    }

    pub fn mse(&self, target: Target, method: Method) -> Option<f64> {
        self.record(method).map(|r| r.mse(target, self.setting.truth.get(target)))
    }
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub setting: String,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub s: usize,
    pub s1: usize,
    pub s2: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub b: f64,
    pub target: Target,
    pub method: Method,
    pub truth: f64,
    pub mse: f64,
    pub reps_used: usize,
    pub reps_failed: usize,
}

const SUMMARY_HEADER: [&str; 16] = [
    "setting",
    "p",
    "n1",
    "n2",
    "s",
    "s1",
    "s2",
    "tau1",
    "tau2",
    "b",
    "target",
    "method",
    "truth",
    "mse",
    "reps_used",
    "reps_failed",
];

/// 17 significant digits; `inf`/`-inf`/`NaN` for non-finite values.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    /// Effective configuration echoed at the top of every output.
    pub header: Vec<(String, String)>,
    pub settings: Vec<SettingReport>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv: {e}"))
}

fn io_err(e: io::Error) -> Error {
    Error::InvalidParameter(format!("io: {e}"))
}

impl ExperimentReport {
    pub fn new(settings: Vec<SettingReport>) -> Self {
        Self {
            header: Vec::new(),
            settings,
        }
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for rep in &self.settings {
            let c = &rep.setting.config;
            for &target in rep.targets() {
                for rec in &rep.records {
                    let truth = rep.setting.truth.get(target);
                    rows.push(SummaryRow {
                        setting: c.label.clone(),
                        p: c.p,
                        n1: c.n1,
                        n2: if c.design == Design::Pair { c.n2 } else { 0 },
                        s: c.s,
                        s1: c.s1,
                        s2: c.s2,
                        tau1: c.tau1,
                        tau2: c.tau2,
                        b: c.b,
                        target,
                        method: rec.method,
                        truth,
                        mse: rec.mse(target, truth),
                        reps_used: rec.estimates.len(),
                        reps_failed: rep.failed.len(),
                    });
                }
            }
        }
        rows
    }

    fn write_header(&self, w: &mut dyn Write) -> Result<()> {
        for (k, v) in &self.header {
            writeln!(w, "# {k} = {v}").map_err(io_err)?;
        }
        Ok(())
    }

    /// One row per setting × target × method.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        self.write_header(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUMMARY_HEADER).map_err(csv_err)?;
        for r in self.summary_rows() {
            out.write_record([
                r.setting,
                r.p.to_string(),
                r.n1.to_string(),
                r.n2.to_string(),
                r.s.to_string(),
                r.s1.to_string(),
                r.s2.to_string(),
                fmt_real(r.tau1),
                fmt_real(r.tau2),
                fmt_real(r.b),
                r.target.tag().into(),
                r.method.tag().into(),
                fmt_real(r.truth),
                fmt_real(r.mse),
                r.reps_used.to_string(),
                r.reps_failed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(io_err)
    }

    /// Replication-level estimates for auditing.
    pub fn write_raw_csv(&self, mut w: impl Write) -> Result<()> {
        self.write_header(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["setting", "replication", "method", "inner", "quad_beta", "quad_gamma", "ratio"])
            .map_err(csv_err)?;
        for rep in &self.settings {
            for rec in &rep.records {
                for (r, e) in rec.replications.iter().zip(&rec.estimates) {
                    out.write_record([
                        rep.setting.config.label.clone(),
                        r.to_string(),
                        rec.method.tag().into(),
                        fmt_real(e.inner),
                        fmt_real(e.quad_beta),
                        fmt_real(e.quad_gamma),
                        fmt_real(e.ratio),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        out.flush().map_err(io_err)
    }

    /// Aligned table: one block per target, settings as columns.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        self.write_header(&mut w)?;
        let mut targets: Vec<Target> = self.settings.iter().flat_map(|s| s.targets().iter().copied()).collect();
        targets.sort_unstable();
        targets.dedup();
        let methods: Vec<Method> = {
            let mut m: Vec<Method> = self.settings.iter().flat_map(|s| s.records.iter().map(|r| r.method)).collect();
            m.sort_unstable();
            m.dedup();
            m
        };
        let width = self
            .settings
            .iter()
            .map(|s| s.setting.config.label.chars().count())
            .max()
            .unwrap_or(0)
            .max(10)
            + 2;
        let put = |w: &mut dyn Write, s: &str| write!(w, "{s:>width$}").map_err(io_err);
        for target in targets {
            let cols: Vec<&SettingReport> = self.settings.iter().filter(|s| s.targets().contains(&target)).collect();
            writeln!(w).map_err(io_err)?;
            write!(w, "{:<14}", format!("[{target}]")).map_err(io_err)?;
            for c in &cols {
                put(&mut w, &c.setting.config.label)?;
            }
            writeln!(w).map_err(io_err)?;
            write!(w, "{:<14}", "Truth").map_err(io_err)?;
            for c in &cols {
                put(&mut w, &format!("{:.4}", c.setting.truth.get(target)))?;
            }
            writeln!(w).map_err(io_err)?;
            for &m in &methods {
                write!(w, "{:<14}", m.label()).map_err(io_err)?;
                for c in &cols {
                    let cell = c.mse(target, m).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                    put(&mut w, &cell)?;
                }
                writeln!(w).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::InvalidParameter(format!("line {line}, column {}: cannot parse {raw:?}", SUMMARY_HEADER[i]))
    })
}

/// Parse a summary CSV written by [`ExperimentReport::write_csv`]; returns
/// the echoed header and the rows.
pub fn read_summary_csv(mut r: impl Read) -> Result<(Vec<(String, String)>, Vec<SummaryRow>)> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(io_err)?;
    let header = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let target: String = parse_field(&rec, 10, line)?;
        let method: String = parse_field(&rec, 11, line)?;
        rows.push(SummaryRow {
            setting: parse_field(&rec, 0, line)?,
            p: parse_field(&rec, 1, line)?,
            n1: parse_field(&rec, 2, line)?,
            n2: parse_field(&rec, 3, line)?,
            s: parse_field(&rec, 4, line)?,
            s1: parse_field(&rec, 5, line)?,
            s2: parse_field(&rec, 6, line)?,
            tau1: parse_field(&rec, 7, line)?,
            tau2: parse_field(&rec, 8, line)?,
            b: parse_field(&rec, 9, line)?,
            target: Target::from_tag(&target)
                .ok_or_else(|| Error::InvalidParameter(format!("line {line}: unknown target {target:?}")))?,
            method: Method::from_tag(&method)
                .ok_or_else(|| Error::InvalidParameter(format!("line {line}: unknown method {method:?}")))?,
            truth: parse_field(&rec, 12, line)?,
            mse: parse_field(&rec, 13, line)?,
            reps_used: parse_field(&rec, 14, line)?,
            reps_failed: parse_field(&rec, 15, line)?,
        });
    }
    Ok((header, rows))
}
