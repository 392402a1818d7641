//! JSON model configuration.
//!
//! ```json
//! {
//!   "damping_terms": [
//!     {"kind": "linear", "params": {"a": "sin(t)"},
//!      "delay": {"kind": "constant_lag", "params": {"tau": 1.0}}}
//!   ],
//!   "state_terms": [
//!     {"kind": "sine", "params": {"A": 2, "omega": 1},
//!      "delay": {"kind": "expression", "params": {"g": "t - 3", "lag_bound": 3}}}
//!   ],
//!   "equilibrium": 3.141592653589793,
//!   "history": {"phi": "6", "psi": 0, "t0": 0, "v0": 1}
//! }
//! ```
//!
//! Term kinds and their `params`:
//!
//! | list            | kind         | params                          |
//! |-----------------|--------------|---------------------------------|
//! | `damping_terms` | `linear`     | `a` (expression)                |
//! | `state_terms`   | `linear`     | `b` (expression)                |
//! | `state_terms`   | `sine`       | `A`, `omega` (numbers)          |
//! | `state_terms`   | `rational`   | `d` (expression), `m`, `n`      |
//! | `state_terms`   | `saturating` | `c` (number), `n`               |
//!
//! Every term may carry an optional `envelope` expression that overrides the
//! derived bound on `|f(t, u) / u|`; it is taken on trust. Unknown keys are
//! rejected at every level.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    DampingKind, DampingTerm, DelayFn, History, ModelError, SecondOrderDDE, StateKind, StateTerm,
};
use crate::expr::ScalarFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub delay: DelayFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<ScalarFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryConfig {
    pub phi: ScalarFn,
    pub psi: ScalarFn,
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub damping_terms: Vec<TermConfig>,
    #[serde(default)]
    pub state_terms: Vec<TermConfig>,
    pub equilibrium: f64,
    pub history: HistoryConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearDampingParams {
    a: ScalarFn,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearStateParams {
    b: ScalarFn,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SineParams {
    #[serde(rename = "A")]
    amplitude: f64,
    omega: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalParams {
    d: ScalarFn,
    m: u32,
    n: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SaturatingParams {
    c: f64,
    n: u32,
}

fn params<T: DeserializeOwned>(kind: &str, map: &Map<String, Value>) -> Result<T, ModelError> {
    serde_json::from_value(Value::Object(map.clone()))
        .map_err(|e| ModelError::Config(format!("params of `{kind}` term: {e}")))
}

fn to_params<T: Serialize>(kind: &T) -> Map<String, Value> {
    // kinds serialize as {"kind": .., "params": {..}}
    match serde_json::to_value(kind).expect("term kinds serialize") {
        Value::Object(mut obj) => match obj.remove("params") {
            Some(Value::Object(p)) => p,
            _ => Map::new(),
        },
        _ => Map::new(),
    }
}

impl TermConfig {
    fn to_damping(&self) -> Result<DampingTerm, ModelError> {
        let mut term = match self.kind.as_str() {
            "linear" => {
                let p: LinearDampingParams = params(&self.kind, &self.params)?;
                DampingTerm::linear(p.a, self.delay.clone())
            }
            other => {
                return Err(ModelError::Config(format!(
                    "unknown damping term kind `{other}` (expected `linear`)"
                )))
            }
        };
        if let Some(env) = &self.envelope {
            term.envelope = env.clone();
        }
        Ok(term)
    }

    fn to_state(&self) -> Result<StateTerm, ModelError> {
        let delay = self.delay.clone();
        let mut term = match self.kind.as_str() {
            "linear" => {
                let p: LinearStateParams = params(&self.kind, &self.params)?;
                StateTerm::linear(p.b, delay)
            }
            "sine" => {
                let p: SineParams = params(&self.kind, &self.params)?;
                StateTerm::sine(p.amplitude, p.omega, delay)?
            }
            "rational" => {
                let p: RationalParams = params(&self.kind, &self.params)?;
                StateTerm::rational(p.d, p.m, p.n, delay)?
            }
            "saturating" => {
                let p: SaturatingParams = params(&self.kind, &self.params)?;
                StateTerm::saturating(p.c, p.n, delay)?
            }
            other => {
                return Err(ModelError::Config(format!(
                    "unknown state term kind `{other}` \
                     (expected linear, sine, rational or saturating)"
                )))
            }
        };
        if let Some(env) = &self.envelope {
            term.envelope = env.clone();
        }
        Ok(term)
    }

    fn from_damping(term: &DampingTerm) -> TermConfig {
        let kind = match term.kind {
            DampingKind::Linear { .. } => "linear",
        };
        TermConfig {
            kind: kind.to_string(),
            params: to_params(&term.kind),
            delay: term.delay.clone(),
            envelope: Some(term.envelope.clone()),
        }
    }

    fn from_state(term: &StateTerm) -> TermConfig {
        let kind = match term.kind {
            StateKind::Linear { .. } => "linear",
            StateKind::Sine { .. } => "sine",
            StateKind::Rational { .. } => "rational",
            StateKind::Saturating { .. } => "saturating",
        };
        TermConfig {
            kind: kind.to_string(),
            params: to_params(&term.kind),
            delay: term.delay.clone(),
            envelope: Some(term.envelope.clone()),
        }
    }
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<SystemConfig, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<(SecondOrderDDE, History), ModelError> {
        let damping = self
            .damping_terms
            .iter()
            .map(TermConfig::to_damping)
            .collect::<Result<Vec<_>, _>>()?;
        let state = self
            .state_terms
            .iter()
            .map(TermConfig::to_state)
            .collect::<Result<Vec<_>, _>>()?;
        let sys = SecondOrderDDE::new(damping, state, self.equilibrium)?;
        let h = &self.history;
        if !h.t0.is_finite() {
            return Err(ModelError::Config("history.t0 must be finite".into()));
        }
        let hist = History {
            phi: h.phi.clone(),
            psi: h.psi.clone(),
            t0: h.t0,
            v0: h.v0,
        };
        Ok((sys, hist))
    }

    pub fn from_system(sys: &SecondOrderDDE, hist: &History) -> SystemConfig {
        SystemConfig {
            damping_terms: sys.damping_terms.iter().map(TermConfig::from_damping).collect(),
            state_terms: sys.state_terms.iter().map(TermConfig::from_state).collect(),
            equilibrium: sys.equilibrium,
            history: HistoryConfig {
                phi: hist.phi.clone(),
                psi: hist.psi.clone(),
                t0: hist.t0,
                v0: hist.v0,
            },
        }
    }
}
