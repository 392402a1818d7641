use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{DampingTerm, DelayFn, History, ModelError, SecondOrderDDE, StateTerm};
use crate::expr::ScalarFn;

pub type BuiltinParams = BTreeMap<String, f64>;

struct Spec {
    name: &'static str,
    defaults: &'static [(&'static str, f64)],
}

const SPECS: &[Spec] = &[
    // x'' + sin(t) x'(t - tau_g) + cos(t) x(t - tau_h) = 0
    Spec {
        name: "example1",
        defaults: &[("tau_g", 0.0), ("tau_h", 0.0), ("x0", 1.0), ("v0", 0.0)],
    },
    // x'' + a x' + A sin(omega x(t - tau)) = 0, x* = k pi / omega
    Spec {
        name: "sunflower",
        defaults: &[
            ("a", 1.0),
            ("A", 2.0),
            ("omega", 1.0),
            ("tau", PI),
            ("k", 1.0),
            ("x0", 6.0),
            ("v0", 1.0),
        ],
    },
    // x'' + a x' + b x(t - tau_h) = d0 |x(t - tau_g)|^(m+1) / (1 + |x(t - tau_g)|^n)
    Spec {
        name: "rational_feedback",
        defaults: &[
            ("a", 2.0),
            ("b", 1.0),
            ("d0", 0.5),
            ("m", 1.0),
            ("n", 4.0),
            ("tau_h", 1.0),
            ("tau_g", 1.0),
            ("x0", 1.0),
            ("v0", 0.0),
        ],
    },
    // x'' + a x' + b x(t - tau) = c x(t - tau) / (1 + x(t - tau)^n)
    Spec {
        name: "saturating_feedback",
        defaults: &[
            ("a", 2.0),
            ("b", 1.0),
            ("c", 0.8),
            ("n", 8.0),
            ("tau", 10.0),
            ("x0", 1.0),
            ("v0", 0.0),
        ],
    },
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SPECS.iter().map(|s| s.name)
}

/// Resolves `params` against the model's defaults, rejecting unknown keys.
fn resolve(spec: &Spec, params: &BuiltinParams) -> Result<BTreeMap<&'static str, f64>, ModelError> {
    let mut out: BTreeMap<&'static str, f64> = spec.defaults.iter().copied().collect();
    for (key, value) in params {
        let Some((name, _)) = spec.defaults.iter().find(|(k, _)| k == key) else {
            let known: Vec<_> = spec.defaults.iter().map(|(k, _)| *k).collect();
            return Err(ModelError::InvalidParameter(format!(
                "`{key}` is not a parameter of {} (expected one of {})",
                spec.name,
                known.join(", ")
            )));
        };
        if !value.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "`{key}` must be finite"
            )));
        }
        out.insert(name, *value);
    }
    Ok(out)
}

fn integer(p: &BTreeMap<&str, f64>, key: &str) -> Result<u32, ModelError> {
    let v = p[key];
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(ModelError::InvalidParameter(format!(
            "`{key}` must be a nonnegative integer, got {v}"
        )));
    }
    Ok(v as u32)
}

fn constant_history(p: &BTreeMap<&str, f64>) -> History {
    History::constant(p["x0"], p["v0"])
}

/// One of the built-in example systems with its default initial history
/// (constant `x0` before `t = 0`, `psi = 0`, initial velocity `v0`).
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<(SecondOrderDDE, History), ModelError> {
    let spec = SPECS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ModelError::UnknownBuiltin(name.to_string()))?;
    let p = resolve(spec, params)?;
    let sys = match name {
        "example1" => SecondOrderDDE::new(
            vec![DampingTerm::linear(
                ScalarFn::parse("sin(t)").expect("literal"),
                DelayFn::constant(p["tau_g"])?,
            )],
            vec![StateTerm::linear(
                ScalarFn::parse("cos(t)").expect("literal"),
                DelayFn::constant(p["tau_h"])?,
            )],
            0.0,
        )?,
        "sunflower" => {
            let omega = p["omega"];
            if omega <= 0.0 {
                return Err(ModelError::InvalidParameter("omega must be > 0".into()));
            }
            let k = p["k"];
            if k.fract() != 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "`k` must be an integer, got {k}"
                )));
            }
            SecondOrderDDE::new(
                vec![DampingTerm::linear(
                    ScalarFn::constant(p["a"]),
                    DelayFn::none(),
                )],
                vec![StateTerm::sine(p["A"], omega, DelayFn::constant(p["tau"])?)?],
                k * PI / omega,
            )?
        }
        "rational_feedback" => {
            let (m, n) = (integer(&p, "m")?, integer(&p, "n")?);
            SecondOrderDDE::new(
                vec![DampingTerm::linear(
                    ScalarFn::constant(p["a"]),
                    DelayFn::none(),
                )],
                vec![
                    StateTerm::linear(ScalarFn::constant(p["b"]), DelayFn::constant(p["tau_h"])?),
                    StateTerm::rational(
                        ScalarFn::constant(-p["d0"]),
                        m,
                        n,
                        DelayFn::constant(p["tau_g"])?,
                    )?,
                ],
                0.0,
            )?
        }
        "saturating_feedback" => {
            let n = integer(&p, "n")?;
            let delay = DelayFn::constant(p["tau"])?;
            SecondOrderDDE::new(
                vec![DampingTerm::linear(
                    ScalarFn::constant(p["a"]),
                    DelayFn::none(),
                )],
                vec![
                    StateTerm::linear(ScalarFn::constant(p["b"]), delay.clone()),
                    StateTerm::saturating(-p["c"], n, delay)?,
                ],
                0.0,
            )?
        }
        _ => unreachable!("spec table and match arms disagree"),
    };
    Ok((sys, constant_history(&p)))
}
