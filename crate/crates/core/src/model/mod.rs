//! Second-order delay equations of the form
//!
//! ```text
//! x''(t) + Σ f_k(t, x'(g_k(t))) + Σ s_k(t, x(h_k(t))) = u(t)
//! ```
//!
//! together with their initial history, the three supported control laws,
//! and the envelope bounds `alpha`, `beta` used by the stability criteria.

mod builtin;
mod config;

pub use builtin::{builtin, builtin_names, BuiltinParams};
pub use config::{HistoryConfig, SystemConfig, TermConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::rational_envelope_mu;
use crate::expr::{EvalError, Expr, Func, ScalarFn};

/// Tolerance on term values at the declared equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("delay violates g(t) <= t: g({t}) = {value}")]
    DelayInFuture { t: f64, value: f64 },
    #[error("lag t - g(t) = {lag} at t = {t} exceeds declared bound {bound}")]
    LagBoundExceeded { t: f64, lag: f64, bound: f64 },
    #[error("equilibrium x* = {xstar} is not a fixed point: residual {residual:e} at t = {t}")]
    NotAnEquilibrium { xstar: f64, t: f64, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),
    #[error("envelope of {0} is unbounded")]
    UnboundedEnvelope(String),
    #[error("invalid model config: {0}")]
    Config(String),
}

/// Delay argument `g(t)` of a delayed term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayFn {
    /// `g(t) = t - tau`.
    ConstantLag { tau: f64 },
    /// Arbitrary `g(t)`, optionally with a declared bound on `t - g(t)`.
    Expression {
        g: ScalarFn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lag_bound: Option<f64>,
    },
}

impl DelayFn {
    pub fn none() -> DelayFn {
        DelayFn::ConstantLag { tau: 0.0 }
    }

    pub fn constant(tau: f64) -> Result<DelayFn, ModelError> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "constant lag must be finite and >= 0, got {tau}"
            )));
        }
        Ok(DelayFn::ConstantLag { tau })
    }

    pub fn expression(g: ScalarFn, lag_bound: Option<f64>) -> DelayFn {
        DelayFn::Expression { g, lag_bound }
    }

    /// Known upper bound on `t - g(t)`, if any.
    pub fn lag_bound(&self) -> Option<f64> {
        match self {
            DelayFn::ConstantLag { tau } => Some(*tau),
            DelayFn::Expression { lag_bound, .. } => *lag_bound,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            DelayFn::ConstantLag { tau } => DelayFn::constant(*tau).map(|_| ()),
            DelayFn::Expression { lag_bound, .. } => match lag_bound {
                Some(b) if !(b.is_finite() && *b >= 0.0) => Err(ModelError::InvalidParameter(
                    format!("lag_bound must be finite and >= 0, got {b}"),
                )),
                _ => Ok(()),
            },
        }
    }

    /// Evaluates `g(t)`, enforcing `g(t) <= t` and the declared lag bound.
    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        match self {
            DelayFn::ConstantLag { tau } => Ok(t - tau),
            DelayFn::Expression { g, lag_bound } => {
                let value = g.eval(t)?;
                if value > t {
                    return Err(ModelError::DelayInFuture { t, value });
                }
                if let Some(bound) = lag_bound {
                    let lag = t - value;
                    if lag > *bound {
                        return Err(ModelError::LagBoundExceeded {
                            t,
                            lag,
                            bound: *bound,
                        });
                    }
                }
                Ok(value)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DampingKind {
    /// `f(t, v) = a(t) v`.
    Linear { a: ScalarFn },
}

/// A delayed-velocity term `f_k(t, x'(g_k(t)))` with its envelope
/// `a_k(t) >= |f_k(t, v) / v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingTerm {
    pub kind: DampingKind,
    pub delay: DelayFn,
    pub envelope: ScalarFn,
}

impl DampingTerm {
    pub fn linear(a: ScalarFn, delay: DelayFn) -> DampingTerm {
        let envelope = abs_of(&a);
        DampingTerm {
            kind: DampingKind::Linear { a },
            delay,
            envelope,
        }
    }

    pub fn value(&self, t: f64, v: f64) -> Result<f64, EvalError> {
        match &self.kind {
            DampingKind::Linear { a } => Ok(a.eval(t)? * v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum StateKind {
    /// `b(t) u`
    Linear { b: ScalarFn },
    /// `A sin(omega u)`
    Sine {
        #[serde(rename = "A")]
        amplitude: f64,
        omega: f64,
    },
    /// `d(t) |u|^(m+1) / (1 + |u|^n)`
    Rational { d: ScalarFn, m: u32, n: u32 },
    /// `c u / (1 + u^n)`
    Saturating { c: f64, n: u32 },
}

/// A delayed-position term `s_k(t, x(h_k(t)))` with its envelope
/// `b_k(t) >= sup |s_k(t, u) / u|`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTerm {
    pub kind: StateKind,
    pub delay: DelayFn,
    pub envelope: ScalarFn,
}

impl StateTerm {
    pub fn linear(b: ScalarFn, delay: DelayFn) -> StateTerm {
        let envelope = abs_of(&b);
        StateTerm {
            kind: StateKind::Linear { b },
            delay,
            envelope,
        }
    }

    /// `A sin(omega u)`, envelope `|A| |omega|`.
    pub fn sine(amplitude: f64, omega: f64, delay: DelayFn) -> Result<StateTerm, ModelError> {
        if !(amplitude.is_finite() && omega.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "sine term needs finite A and omega".into(),
            ));
        }
        Ok(StateTerm {
            kind: StateKind::Sine { amplitude, omega },
            delay,
            envelope: ScalarFn::constant(amplitude.abs() * omega.abs()),
        })
    }

    /// `d(t) |u|^(m+1) / (1 + |u|^n)`, envelope `|d(t)| mu(m, n)`.
    pub fn rational(d: ScalarFn, m: u32, n: u32, delay: DelayFn) -> Result<StateTerm, ModelError> {
        if n <= m {
            return Err(ModelError::InvalidParameter(format!(
                "rational term needs n > m, got m = {m}, n = {n}"
            )));
        }
        let mu = rational_envelope_mu(m, n);
        let envelope = ScalarFn::from_ast(Expr::bin(
            crate::expr::BinOp::Mul,
            Expr::call(Func::Abs, d.ast().clone()),
            Expr::Num(mu),
        ));
        Ok(StateTerm {
            kind: StateKind::Rational { d, m, n },
            delay,
            envelope,
        })
    }

    /// `c u / (1 + u^n)`. Even `n` gives the envelope `|c|` (`|c|/2` for
    /// `n = 0`); odd `n` falls back to [`saturating_grid_envelope`].
    pub fn saturating(c: f64, n: u32, delay: DelayFn) -> Result<StateTerm, ModelError> {
        if !c.is_finite() {
            return Err(ModelError::InvalidParameter(
                "saturating term needs finite c".into(),
            ));
        }
        let factor = if n == 0 {
            0.5
        } else if n.is_multiple_of(2) {
            1.0
        } else {
            saturating_grid_envelope(n)?
        };
        Ok(StateTerm {
            kind: StateKind::Saturating { c, n },
            delay,
            envelope: ScalarFn::constant(c.abs() * factor),
        })
    }

    pub fn value(&self, t: f64, u: f64) -> Result<f64, EvalError> {
        Ok(match &self.kind {
            StateKind::Linear { b } => b.eval(t)? * u,
            StateKind::Sine { amplitude, omega } => amplitude * (omega * u).sin(),
            StateKind::Rational { d, m, n } => {
                let a = u.abs();
                d.eval(t)? * a.powi(*m as i32 + 1) / (1.0 + a.powi(*n as i32))
            }
            StateKind::Saturating { c, n } => c * u / (1.0 + u.powi(*n as i32)),
        })
    }
}

/// Grid maximum of `|1 / (1 + u^n)|` for odd `n`.
///
/// The grid has step `1e-3` on `[-10, 10]` and step `1` on the rest of
/// `[-1e6, 1e6]`. It contains `u = -1`, where the ratio has a pole for odd
/// `n`, so this reports [`ModelError::UnboundedEnvelope`] whenever the pole
/// is reached.
pub fn saturating_grid_envelope(n: u32) -> Result<f64, ModelError> {
    let ratio = |u: f64| (1.0 / (1.0 + u.powi(n as i32))).abs();
    let fine = (-10_000..=10_000).map(|k| k as f64 / 1000.0);
    let coarse = (11..=1_000_000).flat_map(|k| [k as f64, -(k as f64)]);
    let mut best = 0.0f64;
    for u in fine.chain(coarse) {
        let r = ratio(u);
        if !r.is_finite() {
            return Err(ModelError::UnboundedEnvelope(format!(
                "u / (1 + u^{n}) near u = {u}"
            )));
        }
        best = best.max(r);
    }
    Ok(best)
}

fn abs_of(f: &ScalarFn) -> ScalarFn {
    ScalarFn::from_ast(Expr::call(Func::Abs, f.ast().clone()))
}

/// The uncontrolled equation plus the equilibrium it is meant to stabilize.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderDDE {
    damping_terms: Vec<DampingTerm>,
    state_terms: Vec<StateTerm>,
    equilibrium: f64,
}

impl SecondOrderDDE {
    /// Builds the system and checks that `x = x*, x' = 0` makes every term
    /// vanish (to [`EQUILIBRIUM_TOL`]) at a fixed sample of times.
    pub fn new(
        damping_terms: Vec<DampingTerm>,
        state_terms: Vec<StateTerm>,
        equilibrium: f64,
    ) -> Result<SecondOrderDDE, ModelError> {
        if !equilibrium.is_finite() {
            return Err(ModelError::InvalidParameter(
                "equilibrium must be finite".into(),
            ));
        }
        for d in damping_terms.iter().map(|t| &t.delay) {
            d.validate()?;
        }
        for d in state_terms.iter().map(|t| &t.delay) {
            d.validate()?;
        }
        let sys = SecondOrderDDE {
            damping_terms,
            state_terms,
            equilibrium,
        };
        for k in 0..32 {
            let t = 0.25 + 0.731 * k as f64;
            let residual = sys.equilibrium_residual(t)?;
            if residual.abs() >= EQUILIBRIUM_TOL {
                return Err(ModelError::NotAnEquilibrium {
                    xstar: equilibrium,
                    t,
                    residual,
                });
            }
        }
        Ok(sys)
    }

    pub fn empty() -> SecondOrderDDE {
        SecondOrderDDE {
            damping_terms: Vec::new(),
            state_terms: Vec::new(),
            equilibrium: 0.0,
        }
    }

    pub fn damping_terms(&self) -> &[DampingTerm] {
        &self.damping_terms
    }

    pub fn state_terms(&self) -> &[StateTerm] {
        &self.state_terms
    }

    pub fn equilibrium(&self) -> f64 {
        self.equilibrium
    }

    /// Sum of all terms at the constant solution `x = x*`, `x' = 0`.
    pub fn equilibrium_residual(&self, t: f64) -> Result<f64, EvalError> {
        let mut sum = 0.0;
        for term in &self.damping_terms {
            sum += term.value(t, 0.0)?;
        }
        for term in &self.state_terms {
            sum += term.value(t, self.equilibrium)?;
        }
        Ok(sum)
    }

    /// Largest declared lag over all terms, `None` if some term has no bound.
    pub fn max_lag(&self) -> Option<f64> {
        let mut lags = self
            .damping_terms
            .iter()
            .map(|t| &t.delay)
            .chain(self.state_terms.iter().map(|t| &t.delay))
            .map(DelayFn::lag_bound);
        lags.try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
    }
}

/// Feedback `u(t)` added to the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields,
    try_from = "ControllerRepr"
)]
pub enum Controller {
    None,
    /// `u = -delta lambda x'(t) - lambda^2 (x(t) - x*)`
    Damping { delta: f64, lambda: f64, xstar: f64 },
    /// `u = -b [x(t) - x(h(t))]`
    DelayedProportional { b: f64, h: DelayFn },
    /// `u = -K (x(t) - x*)`
    ProportionalState {
        #[serde(rename = "K")]
        gain: f64,
        xstar: f64,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
enum ControllerRepr {
    None,
    Damping {
        delta: f64,
        lambda: f64,
        #[serde(default)]
        xstar: f64,
    },
    DelayedProportional {
        b: f64,
        h: DelayFn,
    },
    ProportionalState {
        #[serde(rename = "K")]
        gain: f64,
        #[serde(default)]
        xstar: f64,
    },
}

impl TryFrom<ControllerRepr> for Controller {
    type Error = ModelError;

    fn try_from(r: ControllerRepr) -> Result<Self, Self::Error> {
        match r {
            ControllerRepr::None => Ok(Controller::None),
            ControllerRepr::Damping {
                delta,
                lambda,
                xstar,
            } => Controller::damping(delta, lambda, xstar),
            ControllerRepr::DelayedProportional { b, h } => Controller::delayed_proportional(b, h),
            ControllerRepr::ProportionalState { gain, xstar } => {
                Controller::proportional_state(gain, xstar)
            }
        }
    }
}

impl Controller {
    pub fn damping(delta: f64, lambda: f64, xstar: f64) -> Result<Controller, ModelError> {
        if !(delta > 0.0 && delta < 2.0) {
            return Err(ModelError::InvalidParameter(format!(
                "damping control needs delta in (0, 2), got {delta}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "damping control needs lambda > 0, got {lambda}"
            )));
        }
        if !xstar.is_finite() {
            return Err(ModelError::InvalidParameter("xstar must be finite".into()));
        }
        Ok(Controller::Damping {
            delta,
            lambda,
            xstar,
        })
    }

    pub fn delayed_proportional(b: f64, h: DelayFn) -> Result<Controller, ModelError> {
        if !b.is_finite() {
            return Err(ModelError::InvalidParameter("b must be finite".into()));
        }
        h.validate()?;
        Ok(Controller::DelayedProportional { b, h })
    }

    pub fn proportional_state(gain: f64, xstar: f64) -> Result<Controller, ModelError> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "proportional control needs K > 0, got {gain}"
            )));
        }
        if !xstar.is_finite() {
            return Err(ModelError::InvalidParameter("xstar must be finite".into()));
        }
        Ok(Controller::ProportionalState { gain, xstar })
    }

    /// Delay used by the control law, if it reads the past.
    pub fn delay(&self) -> Option<&DelayFn> {
        match self {
            Controller::DelayedProportional { h, .. } => Some(h),
            _ => None,
        }
    }
}

/// Initial data: `x = phi(t)`, `x' = psi(t)` for `t < t0`. The state at
/// `t0` is `(phi(t0), v0)` where `v0` defaults to `psi(t0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub phi: ScalarFn,
    pub psi: ScalarFn,
    pub t0: f64,
    pub v0: Option<f64>,
}

impl History {
    pub fn constant(x0: f64, v0: f64) -> History {
        History {
            phi: ScalarFn::constant(x0),
            psi: ScalarFn::constant(0.0),
            t0: 0.0,
            v0: Some(v0),
        }
    }

    pub fn x(&self, t: f64) -> Result<f64, EvalError> {
        self.phi.eval(t)
    }

    pub fn v(&self, t: f64) -> Result<f64, EvalError> {
        self.psi.eval(t)
    }

    pub fn initial_state(&self) -> Result<(f64, f64), EvalError> {
        let x0 = self.phi.eval(self.t0)?;
        let v0 = match self.v0 {
            Some(v) => v,
            None => self.psi.eval(self.t0)?,
        };
        Ok((x0, v0))
    }
}

/// Sampled estimate of the envelope limits `alpha`, `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: (f64, f64),
    pub samples: usize,
}

/// `alpha = max Σ a_k(t)`, `beta = max Σ b_k(t)` over `samples` equally
/// spaced points of `[t_lo, t_hi]`.
///
/// This is the supremum over the window, which equals the limit superior
/// for constant or periodic coefficients once the window covers a period
/// and over-estimates it otherwise.
pub fn envelope_bounds(
    sys: &SecondOrderDDE,
    t_lo: f64,
    t_hi: f64,
    samples: usize,
) -> Result<BoundsEstimate, ModelError> {
    if !(t_lo >= 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "horizon needs 0 <= t_lo < t_hi, got [{t_lo}, {t_hi}]"
        )));
    }
    if samples < 2 {
        return Err(ModelError::InvalidParameter(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let step = (t_hi - t_lo) / (samples - 1) as f64;
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    for i in 0..samples {
        let t = if i + 1 == samples {
            t_hi
        } else {
            t_lo + i as f64 * step
        };
        let mut a = 0.0;
        for term in &sys.damping_terms {
            a += term.envelope.eval(t)?.abs();
        }
        let mut b = 0.0;
        for term in &sys.state_terms {
            b += term.envelope.eval(t)?.abs();
        }
        alpha = alpha.max(a);
        beta = beta.max(b);
    }
    Ok(BoundsEstimate {
        alpha,
        beta,
        horizon: (t_lo, t_hi),
        samples,
    })
}
