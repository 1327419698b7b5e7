//! Flat `key = value` configuration files and simulation-setting overrides.

use std::path::Path;

use coherit::functionals::Method;
use coherit::simulation::{preset, Design, ExperimentConfig, Pattern};

use crate::error::{CliError, CliResult};

/// Ordered key/value pairs; a repeated key keeps its last value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            entries.retain(|(key, _)| *key != k);
            entries.push((k, v));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Reject keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(CliError::Config(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }
}

pub fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("invalid value {raw:?} for key '{key}'")))
}

pub fn parse_bool(key: &str, raw: &str) -> CliResult<bool> {
    match raw {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("invalid value {raw:?} for key '{key}' (expected true/false)"))),
    }
}

pub const SIMULATION_KEYS: [&str; 20] = [
    "preset",
    "threads",
    "reps",
    "seed",
    "b",
    "split",
    "label",
    "design",
    "p",
    "n1",
    "n2",
    "s",
    "s1",
    "s2",
    "tau1",
    "tau2",
    "rho",
    "pattern_beta",
    "pattern_gamma",
    "methods",
];

/// Keys that must be present when no preset is named.
const CUSTOM_REQUIRED: [&str; 4] = ["p", "n1", "s1", "tau1"];

fn custom_base() -> ExperimentConfig {
    ExperimentConfig {
        label: "custom".into(),
        design: Design::Pair,
        p: 0,
        n1: 0,
        n2: 0,
        reps: 300,
        s: 0,
        s1: 0,
        s2: 0,
        tau1: 0.0,
        tau2: 0.0,
        rho: 0.8,
        pattern_beta: Pattern::Ramp,
        pattern_gamma: Pattern::Constant,
        b: 0.5,
        split: true,
        master_seed: 1,
        methods: Method::ALL.to_vec(),
    }
}

fn apply_key(c: &mut ExperimentConfig, key: &str, raw: &str) -> CliResult<()> {
    match key {
        "label" => c.label = raw.to_string(),
        "design" => {
            c.design = match raw {
                "pair" => Design::Pair,
                "single" => Design::Single,
                _ => return Err(CliError::Config(format!("invalid value {raw:?} for key 'design' (pair or single)"))),
            }
        }
        "p" => c.p = parse_value(key, raw)?,
        "n1" => c.n1 = parse_value(key, raw)?,
        "n2" => c.n2 = parse_value(key, raw)?,
        "s" => c.s = parse_value(key, raw)?,
        "s1" => c.s1 = parse_value(key, raw)?,
        "s2" => c.s2 = parse_value(key, raw)?,
        "tau1" => c.tau1 = parse_value(key, raw)?,
        "tau2" => c.tau2 = parse_value(key, raw)?,
        "rho" => c.rho = parse_value(key, raw)?,
        "reps" => c.reps = parse_value(key, raw)?,
        "seed" => c.master_seed = parse_value(key, raw)?,
        "b" => c.b = parse_value(key, raw)?,
        "split" => c.split = parse_bool(key, raw)?,
        "pattern_beta" | "pattern_gamma" => {
            let pat = Pattern::from_tag(raw)
                .ok_or_else(|| CliError::Config(format!("invalid value {raw:?} for key '{key}' (ramp or constant)")))?;
            if key == "pattern_beta" {
                c.pattern_beta = pat;
            } else {
                c.pattern_gamma = pat;
            }
        }
        "methods" => {
            c.methods = raw
                .split(',')
                .map(|m| {
                    Method::from_tag(m.trim())
                        .ok_or_else(|| CliError::Config(format!("invalid method {:?} for key 'methods'", m.trim())))
                })
                .collect::<CliResult<_>>()?
        }
        _ => {}
    }
    Ok(())
}

/// Command-line overrides for `simulate`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationFlags {
    pub preset: Option<String>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub b: Option<f64>,
    pub split: Option<bool>,
}

/// Settings from preset defaults, then the config file, then the flags.
pub fn resolve_settings(flags: &SimulationFlags, file: &ConfigFile) -> CliResult<(String, Vec<ExperimentConfig>)> {
    file.check_keys(&SIMULATION_KEYS)?;
    let name = flags.preset.clone().or_else(|| file.get("preset").map(str::to_string));
    let mut settings = match &name {
        Some(n) => preset(n).map_err(|_| {
            CliError::Config(format!(
                "unknown value {n:?} for key 'preset' (expected one of {})",
                coherit::simulation::PRESET_NAMES.join(", ")
            ))
        })?,
        None => {
            if let Some(k) = CUSTOM_REQUIRED.iter().find(|k| file.get(k).is_none()) {
                return Err(CliError::Config(format!("no preset given and key '{k}' is missing")));
            }
            vec![custom_base()]
        }
    };
    for c in &mut settings {
        for (k, v) in &file.entries {
            apply_key(c, k, v)?;
        }
        if let Some(r) = flags.reps {
            c.reps = r;
        }
        if let Some(s) = flags.seed {
            c.master_seed = s;
        }
        if let Some(b) = flags.b {
            c.b = b;
        }
        if let Some(s) = flags.split {
            c.split = s;
        }
        if c.reps == 0 {
            return Err(CliError::Config("key 'reps': reps must be ≥ 1".into()));
        }
        c.validate()
            .map_err(|e| CliError::Config(format!("setting {}: {e}", c.label)))?;
    }
    Ok((name.unwrap_or_else(|| "custom".into()), settings))
}

/// Effective values shared by all settings; per-setting values are
/// reported on every CSV row.
pub fn settings_header(settings: &[ExperimentConfig]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut common = |key: &str, f: &dyn Fn(&ExperimentConfig) -> String| {
        let first = f(&settings[0]);
        let value = if settings.iter().all(|c| f(c) == first) { first } else { "per setting".into() };
        out.push((key.to_string(), value));
    };
    common("design", &|c| format!("{:?}", c.design).to_lowercase());
    common("p", &|c| c.p.to_string());
    common("n1", &|c| c.n1.to_string());
    common("n2", &|c| c.n2.to_string());
    common("rho", &|c| c.rho.to_string());
    common("pattern_beta", &|c| c.pattern_beta.to_string());
    common("pattern_gamma", &|c| c.pattern_gamma.to_string());
    common("reps", &|c| c.reps.to_string());
    common("seed", &|c| c.master_seed.to_string());
    common("b", &|c| c.b.to_string());
    common("split", &|c| c.split.to_string());
    common("methods", &|c| {
        c.active_methods().iter().map(|m| m.tag()).collect::<Vec<_>>().join(",")
    });
    out
}
