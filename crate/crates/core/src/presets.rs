//! Ready-made operator spec documents.
//!
//! Parameters are expressions in `t` only, so time-dependent coefficients
//! such as `a1 = 2 + sin(t)` can be passed as overrides. Constraints are
//! checked at 100 times spread over the preset's time interval.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::parse;
use crate::operator::{LyapunovSpec, SpecDocument};

const T_LO: f64 = -10.0;
const T_HI: f64 = 10.0;
const TIME_SAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum PresetError {
    #[error("unknown preset `{0}` (known: heat, ou, example41, block2d, wang-counterexample)")]
    Unknown(String),
    #[error("preset `{preset}` has no parameter `{name}`")]
    UnknownParameter { preset: String, name: String },
    #[error("parameter `{name}`: {message}")]
    BadValue { name: String, message: String },
    #[error("{preset} {message}")]
    Constraint { preset: String, message: String },
}

/// Catalog entry.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Parameter names and default values.
    pub params: &'static [(&'static str, &'static str)],
    /// Expected outcomes of the structural checks at the defaults.
    pub expected: &'static str,
}

pub const CATALOG: &[Preset] = &[
    Preset {
        name: "heat",
        summary: "d=1, q=1, b=0",
        params: &[],
        expected: "ellipticity pass, algebraic pass, c0 = 0, lyapunov pass (gamma 2)",
    },
    Preset {
        name: "ou",
        summary: "d=1, q=1, b=-x (Ornstein-Uhlenbeck)",
        params: &[],
        expected: "ellipticity pass, algebraic pass, c0 = -1, lyapunov pass (gamma 2)",
    },
    Preset {
        name: "example41",
        summary: "d=3, Q = diag(a) + psi*(|x|^2 I - x x^T) on the (x1,x2) block, b = -gamma x |x|^(2 beta); \
                  needs gamma > max(abar, psi, 2 psi^2/abar) with abar = min a_i",
        params: &[
            ("a1", "1"),
            ("a2", "1"),
            ("a3", "1"),
            ("psi", "1"),
            ("gamma", "3"),
            ("beta", "1"),
        ],
        expected: "ellipticity pass (extremal min a_i), algebraic pass, c0 with eta = abar is 0, lyapunov pass",
    },
    Preset {
        name: "block2d",
        summary: "d=2 block: Q = diag(a1,a2) + psi*(|x|^2 I - x x^T), b = -gamma x |x|^(2 beta)",
        params: &[
            ("a1", "1"),
            ("a2", "1"),
            ("psi", "1"),
            ("gamma", "3"),
            ("beta", "1"),
        ],
        expected: "ellipticity pass, algebraic pass, c0 with eta = abar is 0, lyapunov pass",
    },
    Preset {
        name: "wang-counterexample",
        summary: "d=2, Q = (1 + x1^2) I, b = -kappa x; only the algebraic condition fails",
        params: &[("kappa", "4")],
        expected: "ellipticity pass, algebraic FAIL (residual 6 at x=(1,0)), lyapunov pass",
    },
];

pub fn list() -> &'static [Preset] {
    CATALOG
}

pub fn find(name: &str) -> Result<&'static Preset, PresetError> {
    CATALOG
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| PresetError::Unknown(name.to_string()))
}

/// Rendered spec document of a preset at its defaults, with a header.
pub fn show(name: &str) -> Result<String, PresetError> {
    let p = find(name)?;
    let doc = instantiate(name, &BTreeMap::new())?;
    let mut s = format!("# {}: {}\n# expected: {}\n", p.name, p.summary, p.expected);
    s.push_str(&doc.render());
    Ok(s)
}

/// Builds the spec document of a preset with parameter overrides
/// (`name -> expression in t`).
pub fn instantiate(name: &str, overrides: &BTreeMap<String, String>) -> Result<SpecDocument, PresetError> {
    let preset = find(name)?;
    let mut values: Vec<(String, String)> = preset
        .params
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    for (k, v) in overrides {
        let slot = values.iter_mut().find(|(name, _)| name == k).ok_or_else(|| {
            PresetError::UnknownParameter {
                preset: name.to_string(),
                name: k.clone(),
            }
        })?;
        slot.1 = v.trim().to_string();
    }
    let exprs = values
        .iter()
        .map(|(k, v)| {
            parse(v, 0)
                .map(|e| (k.clone(), e))
                .map_err(|e| PresetError::BadValue {
                    name: k.clone(),
                    message: format!("{e} (parameters may only depend on t)"),
                })
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let times = sample_times();
    let sampled = |key: &str| -> Result<Vec<f64>, PresetError> {
        let e = &exprs[key];
        times
            .iter()
            .map(|&t| {
                e.eval(t, &[]).map_err(|err| PresetError::BadValue {
                    name: key.to_string(),
                    message: format!("at t={t}: {err}"),
                })
            })
            .collect()
    };

    let mut doc = SpecDocument {
        dimension: 1,
        t_lo: T_LO,
        t_hi: T_HI,
        params: values.clone(),
        diffusion: Vec::new(),
        drift: Vec::new(),
        eta: None,
        lyapunov: None,
    };
    match name {
        "heat" | "ou" => {
            doc.diffusion.push(((0, 0), "1".into()));
            doc.drift.push((0, if name == "ou" { "-x1" } else { "0" }.into()));
            doc.eta = Some("1".into());
            doc.lyapunov = Some(LyapunovSpec {
                phi: "1+norm2(x)".into(),
                gamma: 2.0,
            });
        }
        "example41" | "block2d" => {
            let d = if name == "example41" { 3 } else { 2 };
            let a: Vec<Vec<f64>> = (1..=d).map(|i| sampled(&format!("a{i}"))).collect::<Result<_, _>>()?;
            let psi = sampled("psi")?;
            let gamma = sampled("gamma")?;
            let beta = exprs["beta"].as_const().ok_or_else(|| PresetError::BadValue {
                name: "beta".into(),
                message: "must be a constant".into(),
            })?;
            if !(beta >= 1.0) {
                return Err(constraint(name, format!("requires beta >= 1 (got {beta})")));
            }
            let mut lyap_gamma: f64 = 0.0;
            for (k, &t) in times.iter().enumerate() {
                let ak: Vec<f64> = a.iter().map(|v| v[k]).collect();
                let (p, g) = (psi[k], gamma[k]);
                if let Some(i) = ak.iter().position(|v| !(*v > 0.0)) {
                    return Err(constraint(name, format!("requires a{} > 0 (got {} at t={t})", i + 1, ak[i])));
                }
                if !(p > 0.0) {
                    return Err(constraint(name, format!("requires psi > 0 (got {p} at t={t})")));
                }
                let abar = ak.iter().copied().fold(f64::INFINITY, f64::min);
                let bound = abar.max(p).max(2.0 * p * p / abar);
                if !(g > bound) {
                    return Err(constraint(name, format!("requires gamma > {bound} (got {g} at t={t})")));
                }
                // A(1+|x|^2) = 2(sum a + psi s - gamma s^(beta+1)) with s = |x|^2.
                let s_star = (p / (g * (beta + 1.0))).powf(1.0 / beta);
                let bump = p * s_star * beta / (beta + 1.0);
                lyap_gamma = lyap_gamma.max(2.0 * (ak.iter().sum::<f64>() + bump));
            }
            doc.dimension = d;
            doc.diffusion = vec![
                ((0, 0), "a1+psi*x2^2".into()),
                ((0, 1), "-psi*x1*x2".into()),
                ((1, 1), "a2+psi*x1^2".into()),
            ];
            if d == 3 {
                doc.diffusion.extend([((0, 2), "0".into()), ((1, 2), "0".into()), ((2, 2), "a3".into())]);
            }
            let radial = if beta == 1.0 {
                "norm2(x)".to_string()
            } else {
                "norm2(x)^beta".to_string()
            };
            doc.drift = (0..d)
                .map(|i| (i, format!("-gamma*x{}*{radial}", i + 1)))
                .collect();
            doc.eta = Some(if d == 3 { "min(a1,min(a2,a3))" } else { "min(a1,a2)" }.into());
            doc.lyapunov = Some(LyapunovSpec {
                phi: "1+norm2(x)".into(),
                gamma: lyap_gamma,
            });
        }
        "wang-counterexample" => {
            let kappa = sampled("kappa")?;
            if let Some(k) = kappa.iter().find(|k| !(**k > 0.0)) {
                return Err(constraint(name, format!("requires kappa > 0 (got {k})")));
            }
            doc.dimension = 2;
            doc.diffusion = vec![
                ((0, 0), "1+x1^2".into()),
                ((0, 1), "0".into()),
                ((1, 1), "1+x1^2".into()),
            ];
            doc.drift = vec![(0, "-kappa*x1".into()), (1, "-kappa*x2".into())];
            doc.eta = Some("1".into());
            // A(1+|x|^2) = 4(1+x1^2) - 2 kappa |x|^2 <= 4 once kappa >= 2.
            let worst_k = kappa.iter().copied().fold(f64::INFINITY, f64::min);
            doc.lyapunov = Some(LyapunovSpec {
                phi: "1+norm2(x)".into(),
                gamma: if worst_k >= 2.0 { 4.0 } else { 4.0 + (4.0 - 2.0 * worst_k) },
            });
        }
        _ => unreachable!("catalog names are matched above"),
    }
    Ok(doc)
}

fn constraint(preset: &str, message: String) -> PresetError {
    PresetError::Constraint {
        preset: preset.to_string(),
        message,
    }
}

fn sample_times() -> Vec<f64> {
    (1..=TIME_SAMPLES)
        .map(|k| T_LO + (T_HI - T_LO) * k as f64 / TIME_SAMPLES as f64)
        .collect()
}

/// Parses `name=value` override pairs.
pub fn parse_overrides<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, String>, PresetError> {
    pairs
        .into_iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| PresetError::BadValue {
                    name: p.to_string(),
                    message: "expected name=value".into(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{check_algebraic, check_ellipticity, estimate_c0, SampleRegion};
    use crate::operator::{EtaMode, OperatorFamily};

    fn build(name: &str, overrides: &[(&str, &str)]) -> OperatorFamily {
        let o = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        OperatorFamily::build(&instantiate(name, &o).unwrap()).unwrap()
    }

    fn region(d: usize) -> SampleRegion {
        SampleRegion::cube(d, 2.0, (1.0, 2.0)).unwrap().with_random(200, 42)
    }

    #[test]
    fn every_preset_builds_and_renders() {
        for p in list() {
            let doc = instantiate(p.name, &BTreeMap::new()).unwrap();
            OperatorFamily::build(&doc).unwrap();
            assert!(show(p.name).unwrap().contains("[diffusion]"));
        }
    }

    #[test]
    fn example41_gamma_constraint_is_named() {
        let mut o = BTreeMap::new();
        o.insert("gamma".to_string(), "1.5".to_string());
        let err = instantiate("example41", &o).unwrap_err();
        assert!(err.to_string().contains("requires gamma > 2"), "{err}");
        o.insert("gamma".to_string(), "2.5".to_string());
        assert!(instantiate("example41", &o).is_ok());
    }

    #[test]
    fn unknown_names_are_errors() {
        assert_eq!(instantiate("nope", &BTreeMap::new()).unwrap_err(), PresetError::Unknown("nope".into()));
        let mut o = BTreeMap::new();
        o.insert("zeta".to_string(), "1".to_string());
        assert!(matches!(instantiate("heat", &o), Err(PresetError::UnknownParameter { .. })));
        o.clear();
        o.insert("psi".to_string(), "x1".to_string());
        assert!(matches!(instantiate("example41", &o), Err(PresetError::BadValue { .. })));
    }

    #[test]
    fn documented_outcomes_hold() {
        let ex = build("example41", &[]);
        assert!(check_algebraic(&ex, &region(3), 1e-10).unwrap().pass);
        let c0 = estimate_c0(&ex, &region(3), EtaMode::UserExpression).unwrap();
        assert!(c0.extremal_value.abs() < 1e-9, "{}", c0.extremal_value);
        assert!((check_ellipticity(&ex, &region(3)).unwrap().extremal_value - 1.0).abs() < 1e-12);

        let block = build("block2d", &[]);
        assert!(check_algebraic(&block, &region(2), 1e-10).unwrap().pass);
        let c0 = estimate_c0(&block, &region(2), EtaMode::UserExpression).unwrap();
        assert!(c0.extremal_value.abs() < 1e-9);

        let wang = build("wang-counterexample", &[]);
        assert!(!check_algebraic(&wang, &region(2), 1e-10).unwrap().pass);
        assert!(check_ellipticity(&wang, &region(2)).unwrap().pass);

        let ou = build("ou", &[]);
        assert_eq!(estimate_c0(&ou, &region(1), EtaMode::LambdaMin).unwrap().extremal_value, -1.0);
        let heat = build("heat", &[]);
        assert_eq!(estimate_c0(&heat, &region(1), EtaMode::LambdaMin).unwrap().extremal_value, 0.0);
    }

    #[test]
    fn lyapunov_constants_hold_on_samples() {
        use crate::conditions::check_lyapunov;
        for p in list() {
            let op = build(p.name, &[]);
            let l = op.lyapunov().unwrap().clone();
            let r = check_lyapunov(&op, &l.phi, l.gamma, &region(op.dimension())).unwrap();
            assert!(r.pass, "{}: {} > {}", p.name, r.extremal_value, l.gamma);
        }
    }

    #[test]
    fn time_varying_and_higher_beta() {
        let ex = build("example41", &[("a1", "2+sin(t)"), ("beta", "2"), ("gamma", "4")]);
        assert!(check_algebraic(&ex, &region(3), 1e-10).unwrap().pass);
        let r = check_ellipticity(&ex, &region(3)).unwrap();
        assert!(r.pass && (r.extremal_value - 1.0).abs() < 1e-12);
    }
}
