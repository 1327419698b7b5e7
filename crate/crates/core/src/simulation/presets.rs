use crate::error::{Error, Result};
use crate::functionals::Method;

use super::{Design, ExperimentConfig, Pattern};

pub const PRESET_NAMES: [&str; 7] = ["exp1", "exp2", "q1a", "q1b", "q2-I", "q2-II", "tuning"];

const DEFAULT_REPS: usize = 300;
const DEFAULT_SEED: u64 = 1;

const EXP1_TAUS: [(f64, f64); 8] = [
    (1.8, 0.4),
    (2.2, 0.3),
    (2.6, 0.2),
    (3.0, 0.1),
    (0.1, 1.6),
    (0.2, 1.4),
    (0.3, 1.2),
    (0.4, 1.0),
];
const SPARSITY: [usize; 8] = [40, 50, 60, 70, 80, 90, 100, 110];

fn base(label: String) -> ExperimentConfig {
    ExperimentConfig {
        label,
        design: Design::Pair,
        p: 600,
        n1: 400,
        n2: 400,
        reps: DEFAULT_REPS,
        s: 15,
        s1: 30,
        s2: 25,
        tau1: 0.0,
        tau2: 0.0,
        rho: 0.8,
        pattern_beta: Pattern::Ramp,
        pattern_gamma: Pattern::Constant,
        b: 0.5,
        split: true,
        master_seed: DEFAULT_SEED,
        methods: Method::ALL.to_vec(),
    }
}

fn exp1(tau1: f64, tau2: f64) -> ExperimentConfig {
    ExperimentConfig {
        tau1,
        tau2,
        ..base(format!("({tau1}, {tau2})"))
    }
}

fn single(label: String, p: usize, s: usize, pattern: Pattern, tau: f64) -> ExperimentConfig {
    ExperimentConfig {
        design: Design::Single,
        p,
        n2: 0,
        s: 0,
        s1: s,
        s2: 0,
        tau1: tau,
        pattern_beta: pattern,
        ..base(label)
    }
}

/// Settings of a named preset with the standard defaults (300 replications,
/// seed 1, b = 0.5).
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let settings = match name {
        "exp1" => EXP1_TAUS.iter().map(|&(a, b)| exp1(a, b)).collect(),
        "exp2" => SPARSITY
            .iter()
            .map(|&s1| ExperimentConfig {
                p: 800,
                s: 20,
                s1,
                s2: s1,
                tau1: 0.2,
                tau2: 0.1,
                ..base(format!("s1={s1}"))
            })
            .collect(),
        "q1a" => [0.1, 0.2, 0.3, 0.4, 1.8, 2.2, 2.6, 3.0]
            .iter()
            .map(|&t| single(format!("tau={t}"), 600, 30, Pattern::Ramp, t))
            .collect(),
        "q1b" => [0.1, 0.2, 0.3, 0.4, 1.0, 1.2, 1.4, 1.6]
            .iter()
            .map(|&t| single(format!("tau={t}"), 600, 25, Pattern::Constant, t))
            .collect(),
        "q2-I" => SPARSITY
            .iter()
            .map(|&s| single(format!("s={s}"), 800, s, Pattern::Ramp, 0.2))
            .collect(),
        "q2-II" => SPARSITY
            .iter()
            .map(|&s| single(format!("s={s}"), 800, s, Pattern::Constant, 0.1))
            .collect(),
        "tuning" => [(3.0, 0.1), (1.8, 0.4)]
            .iter()
            .flat_map(|&(t1, t2)| {
                [0.25, 0.5, 0.75, 1.0].into_iter().map(move |b| ExperimentConfig {
                    b,
                    label: format!("({t1}, {t2}) b={b}"),
                    ..exp1(t1, t2)
                })
            })
            .collect(),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESET_NAMES {
            let settings = preset(name).unwrap();
            assert_eq!(settings.len(), 8, "{name}");
            for s in &settings {
                s.validate().unwrap();
            }
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn exp1_matches_published_layout() {
        let s = preset("exp1").unwrap();
        assert_eq!((s[3].tau1, s[3].tau2), (3.0, 0.1));
        assert_eq!((s[0].p, s[0].n1, s[0].n2, s[0].s, s[0].s1, s[0].s2), (600, 400, 400, 15, 30, 25));
        assert_eq!(s[3].label, "(3, 0.1)");
    }
}
