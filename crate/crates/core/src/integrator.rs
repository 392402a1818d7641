//! Method-of-steps integration of the controlled equation.
//!
//! The equation is rewritten as the first-order system `x' = v`,
//! `v' = u - Σ f_k - Σ s_k` and advanced with fixed-step classic RK4.
//! Delayed values come from the initial history for `s < t0` and from
//! cubic Hermite interpolation between accepted nodes otherwise: position
//! uses the node `(x, v)` pairs, velocity uses the node `(v, acc)` pairs.
//! A lag shorter than the step makes a stage read inside the step being
//! computed; such lookups extrapolate the last accepted step and are counted.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{Controller, History, ModelError, SecondOrderDDE};

/// `|x|` or `|v|` above this stops integration and marks divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
pub const DEFAULT_DT: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size must be finite and > 0, got {0}")]
    BadStep(f64),
    #[error("t_end = {t_end} must exceed t0 = {t0}")]
    BadHorizon { t0: f64, t_end: f64 },
    #[error("t = {t} is outside the trajectory range [.., {last}]")]
    OutOfRange { t: f64, last: f64 },
    #[error("trajectory nodes must be equally spaced from t0 with step dt")]
    BadNodes,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<EvalError> for IntegrateError {
    fn from(e: EvalError) -> Self {
        IntegrateError::Model(ModelError::Eval(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Node {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    /// Right-hand side for `v` at this node.
    pub acc: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    nodes: Vec<Node>,
    history: History,
    diverged_at: Option<f64>,
    extrapolated_lookups: u64,
    total_lookups: u64,
}

/// Lookup context: accepted nodes plus the stage currently being evaluated.
struct Dense<'a> {
    t0: f64,
    dt: f64,
    nodes: &'a [Node],
    history: &'a History,
}

#[derive(Default)]
struct LookupStats {
    extrapolated: u64,
    total: u64,
}

fn hermite(a: &Node, b: &Node, s: f64) -> (f64, f64) {
    let h = b.t - a.t;
    let th = (s - a.t) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h10 = th3 - 2.0 * th2 + th;
    let h11 = th3 - th2;
    // written as a + (b - a) h01 + ... so constants are reproduced exactly
    let x = a.x + (b.x - a.x) * h01 + h * (h10 * a.v + h11 * b.v);
    let v = a.v + (b.v - a.v) * h01 + h * (h10 * a.acc + h11 * b.acc);
    (x, v)
}

impl Dense<'_> {
    fn last(&self) -> &Node {
        self.nodes.last().expect("at least the initial node")
    }

    /// `(x(s), v(s))` for `s` up to the last accepted node.
    fn interpolate(&self, s: f64) -> Result<(f64, f64), EvalError> {
        if s < self.t0 {
            return Ok((self.history.x(s)?, self.history.v(s)?));
        }
        let n = self.nodes.len();
        let idx = ((s - self.t0) / self.dt).floor() as usize;
        if idx + 1 >= n {
            let last = self.last();
            if s == last.t || n == 1 {
                return Ok((last.x, last.v));
            }
            return Ok(hermite(&self.nodes[n - 2], last, s));
        }
        let a = &self.nodes[idx];
        if s == a.t {
            return Ok((a.x, a.v));
        }
        Ok(hermite(a, &self.nodes[idx + 1], s))
    }

    /// Lookup during a stage at `(t, x, v)`; `s <= t` always.
    fn lookup(
        &self,
        s: f64,
        t: f64,
        x: f64,
        v: f64,
        stats: &mut LookupStats,
    ) -> Result<(f64, f64), EvalError> {
        debug_assert!(s <= t, "delayed lookup at {s} after stage time {t}");
        stats.total += 1;
        if t - s <= 1e-12 * (1.0 + t.abs()) {
            return Ok((x, v));
        }
        let last = self.last();
        if s <= last.t {
            return self.interpolate(s);
        }
        stats.extrapolated += 1;
        let n = self.nodes.len();
        if n >= 2 {
            Ok(hermite(&self.nodes[n - 2], last, s))
        } else {
            let h = s - last.t;
            Ok((last.x + h * last.v + 0.5 * h * h * last.acc, last.v + h * last.acc))
        }
    }
}

fn rhs(
    sys: &SecondOrderDDE,
    ctrl: &Controller,
    dense: &Dense<'_>,
    t: f64,
    x: f64,
    v: f64,
    stats: &mut LookupStats,
) -> Result<f64, IntegrateError> {
    let mut acc = match ctrl {
        Controller::None => 0.0,
        Controller::Damping {
            delta,
            lambda,
            xstar,
        } => -delta * lambda * v - lambda * lambda * (x - xstar),
        Controller::DelayedProportional { b, h } => {
            let s = h.eval(t)?;
            let (xd, _) = dense.lookup(s, t, x, v, stats)?;
            -b * (x - xd)
        }
        Controller::ProportionalState { gain, xstar } => -gain * (x - xstar),
    };
    for term in sys.damping_terms() {
        let s = term.delay.eval(t)?;
        let (_, vd) = dense.lookup(s, t, x, v, stats)?;
        acc -= term.value(t, vd)?;
    }
    for term in sys.state_terms() {
        let s = term.delay.eval(t)?;
        let (xd, _) = dense.lookup(s, t, x, v, stats)?;
        acc -= term.value(t, xd)?;
    }
    Ok(acc)
}

fn runaway(x: f64, v: f64, acc: f64) -> bool {
    !(x.abs() <= DIVERGENCE_LIMIT && v.abs() <= DIVERGENCE_LIMIT && acc.is_finite())
}

/// Integrates from `hist.t0` to `t_end` with step `dt`.
///
/// The number of steps is `ceil((t_end - t0) / dt)` (less a rounding
/// guard), so the last node may sit slightly past `t_end`. Divergence is not
/// an error: the returned trajectory stops early and reports
/// [`Trajectory::diverged_at`].
pub fn integrate(
    sys: &SecondOrderDDE,
    ctrl: &Controller,
    hist: &History,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, IntegrateError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IntegrateError::BadStep(dt));
    }
    let t0 = hist.t0;
    if !(t_end > t0 && t_end.is_finite()) {
        return Err(IntegrateError::BadHorizon { t0, t_end });
    }
    let steps = ((t_end - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut stats = LookupStats::default();
    let (x0, v0) = hist.initial_state()?;

    // acc at t0 only sees the history and the initial state itself
    nodes.push(Node {
        t: t0,
        x: x0,
        v: v0,
        acc: 0.0,
    });
    let acc0 = {
        let dense = Dense {
            t0,
            dt,
            nodes: &nodes,
            history: hist,
        };
        rhs(sys, ctrl, &dense, t0, x0, v0, &mut stats)?
    };
    nodes[0].acc = acc0;
    let mut diverged_at = runaway(x0, v0, acc0).then_some(t0);

    if diverged_at.is_none() {
        for i in 0..steps {
            let cur = *nodes.last().expect("nonempty");
            let t_next = t0 + (i + 1) as f64 * dt;
            let h = t_next - cur.t;
            let dense = Dense {
                t0,
                dt,
                nodes: &nodes,
                history: hist,
            };
            let mut f = |t: f64, x: f64, v: f64| rhs(sys, ctrl, &dense, t, x, v, &mut stats);

            let (k1x, k1v) = (cur.v, cur.acc);
            let tm = cur.t + 0.5 * h;
            let (x2, v2) = (cur.x + 0.5 * h * k1x, cur.v + 0.5 * h * k1v);
            let (k2x, k2v) = (v2, f(tm, x2, v2)?);
            let (x3, v3) = (cur.x + 0.5 * h * k2x, cur.v + 0.5 * h * k2v);
            let (k3x, k3v) = (v3, f(tm, x3, v3)?);
            let (x4, v4) = (cur.x + h * k3x, cur.v + h * k3v);
            let (k4x, k4v) = (v4, f(t_next, x4, v4)?);

            let x = cur.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            let v = cur.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if runaway(x, v, 0.0) {
                diverged_at = Some(t_next);
                break;
            }
            let acc = f(t_next, x, v)?;
            if runaway(x, v, acc) {
                diverged_at = Some(t_next);
                break;
            }
            nodes.push(Node {
                t: t_next,
                x,
                v,
                acc,
            });
        }
    }

    Ok(Trajectory {
        t0,
        dt,
        nodes,
        history: hist.clone(),
        diverged_at,
        extrapolated_lookups: stats.extrapolated,
        total_lookups: stats.total,
    })
}

impl Trajectory {
    /// Wraps precomputed nodes; they must sit at `t0 + i dt`.
    pub fn from_nodes(
        t0: f64,
        dt: f64,
        nodes: Vec<Node>,
        history: History,
    ) -> Result<Trajectory, IntegrateError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(IntegrateError::BadStep(dt));
        }
        let spaced = nodes
            .iter()
            .enumerate()
            .all(|(i, n)| (n.t - (t0 + i as f64 * dt)).abs() <= 1e-9 * (1.0 + n.t.abs()));
        if nodes.is_empty() || !spaced {
            return Err(IntegrateError::BadNodes);
        }
        Ok(Trajectory {
            t0,
            dt,
            nodes,
            history,
            diverged_at: None,
            extrapolated_lookups: 0,
            total_lookups: 0,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn last_time(&self) -> f64 {
        self.nodes.last().map(|n| n.t).unwrap_or(self.t0)
    }

    /// Time at which integration stopped because the state blew up.
    pub fn diverged_at(&self) -> Option<f64> {
        self.diverged_at
    }

    /// Delayed lookups that fell inside the step being computed.
    pub fn extrapolated_lookups(&self) -> u64 {
        self.extrapolated_lookups
    }

    pub fn total_lookups(&self) -> u64 {
        self.total_lookups
    }

    pub fn used_extrapolation(&self) -> bool {
        self.extrapolated_lookups > 0
    }

    /// `(x(t), v(t))`: node values at node times, Hermite in between, the
    /// history for `t < t0`.
    pub fn sample(&self, t: f64) -> Result<(f64, f64), IntegrateError> {
        let last = self.last_time();
        if !(t <= last) {
            return Err(IntegrateError::OutOfRange { t, last });
        }
        let dense = Dense {
            t0: self.t0,
            dt: self.dt,
            nodes: &self.nodes,
            history: &self.history,
        };
        Ok(dense.interpolate(t)?)
    }

    /// CSV with header `t,x,v`, 17 significant digits, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.nodes.len() + 8);
        out.push_str("t,x,v\n");
        for n in &self.nodes {
            out.push_str(&format_g17(n.t));
            out.push(',');
            out.push_str(&format_g17(n.x));
            out.push(',');
            out.push_str(&format_g17(n.v));
            out.push('\n');
        }
        out
    }
}

/// C `printf("%.17g")` formatting.
pub fn format_g17(value: f64) -> String {
    const P: i32 = 17;
    if value == 0.0 {
        return if value.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".into()
        } else if value > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, value)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFn;
    use crate::model::{builtin, BuiltinParams, DampingTerm, DelayFn, StateTerm};
    use std::f64::consts::{PI, SQRT_2};

    fn oscillator() -> SecondOrderDDE {
        SecondOrderDDE::new(
            vec![DampingTerm::linear(ScalarFn::constant(2.0), DelayFn::none())],
            vec![StateTerm::linear(ScalarFn::constant(1.0), DelayFn::none())],
            0.0,
        )
        .unwrap()
    }

    fn max_err(dt: f64) -> f64 {
        let traj = integrate(&oscillator(), &Controller::None, &History::constant(1.0, 0.0), 5.0, dt)
            .unwrap();
        traj.nodes()
            .iter()
            .map(|n| (n.x - (1.0 + n.t) * (-n.t).exp()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn critically_damped_oscillator() {
        let traj = integrate(&oscillator(), &Controller::None, &History::constant(1.0, 0.0), 1.0, 0.01)
            .unwrap();
        let last = traj.nodes().last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        assert!((last.x - 2.0 / std::f64::consts::E).abs() < 1e-8);
        assert!(!traj.used_extrapolation() || traj.extrapolated_lookups() == 0);
    }

    #[test]
    fn fourth_order_convergence() {
        let r = max_err(0.02) / max_err(0.01);
        assert!((12.0..=20.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn constants_solve_difference_equation() {
        // x'' + x(t) - x(t - 1) = -3 x', the derivative feedback written as
        // an undelayed damping term
        let sys = SecondOrderDDE::new(
            vec![DampingTerm::linear(ScalarFn::constant(3.0), DelayFn::none())],
            vec![
                StateTerm::linear(ScalarFn::constant(1.0), DelayFn::none()),
                StateTerm::linear(ScalarFn::constant(-1.0), DelayFn::constant(1.0).unwrap()),
            ],
            5.0,
        )
        .unwrap();
        let hist = History::constant(5.0, 0.0);
        let traj = integrate(&sys, &Controller::None, &hist, 50.0, 0.01).unwrap();
        assert!(traj.nodes().iter().all(|n| (n.x - 5.0).abs() < 1e-9));
    }

    #[test]
    fn sample_behaviour() {
        let traj = integrate(&oscillator(), &Controller::None, &History::constant(1.0, 0.0), 1.0, 0.1)
            .unwrap();
        let n = traj.nodes()[3];
        assert_eq!(traj.sample(n.t).unwrap(), (n.x, n.v));
        assert!(traj.sample(5.0).is_err());
        let hist = History {
            phi: ScalarFn::parse("sin(t)").unwrap(),
            psi: ScalarFn::parse("cos(t)").unwrap(),
            t0: 0.0,
            v0: None,
        };
        let traj = integrate(&oscillator(), &Controller::None, &hist, 1.0, 0.1).unwrap();
        assert_eq!(traj.sample(-1.0).unwrap().0, (-1.0f64).sin());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        // x = t^3, v = 3t^2, acc = 6t: the x-interpolant is exact, the
        // v-interpolant (a cubic through a quadratic) as well
        let dt = 0.25;
        let nodes: Vec<Node> = (0..9)
            .map(|i| {
                let t = i as f64 * dt;
                Node {
                    t,
                    x: t.powi(3),
                    v: 3.0 * t * t,
                    acc: 6.0 * t,
                }
            })
            .collect();
        let traj = Trajectory::from_nodes(0.0, dt, nodes, History::constant(0.0, 0.0)).unwrap();
        for k in 0..200 {
            let t = k as f64 * 0.01;
            let (x, v) = traj.sample(t).unwrap();
            assert!((x - t.powi(3)).abs() < 1e-13, "t={t}");
            assert!((v - 3.0 * t * t).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn zero_lag_uses_stage_state() {
        // example1 with identity delays is an ODE: no extrapolation needed
        let (sys, hist) = builtin("example1", &BuiltinParams::new()).unwrap();
        let traj = integrate(&sys, &Controller::None, &hist, 2.0, 0.01).unwrap();
        assert_eq!(traj.extrapolated_lookups(), 0);
    }

    #[test]
    fn sub_step_lag_is_reported() {
        let sys = SecondOrderDDE::new(
            vec![],
            vec![StateTerm::linear(ScalarFn::constant(1.0), DelayFn::constant(0.003).unwrap())],
            0.0,
        )
        .unwrap();
        let traj = integrate(&sys, &Controller::None, &History::constant(1.0, 0.0), 1.0, 0.01).unwrap();
        assert!(traj.used_extrapolation());
        // close to the undelayed oscillator x = cos(t)
        let last = traj.nodes().last().unwrap();
        assert!((last.x - 1f64.cos()).abs() < 1e-2);
    }

    #[test]
    fn future_delay_is_an_error() {
        let sys = SecondOrderDDE::new(
            vec![],
            vec![StateTerm::linear(
                ScalarFn::constant(1.0),
                DelayFn::expression(ScalarFn::parse("t + 0.5").unwrap(), None),
            )],
            0.0,
        )
        .unwrap();
        let err = integrate(&sys, &Controller::None, &History::constant(0.0, 0.0), 1.0, 0.1)
            .unwrap_err();
        assert!(matches!(
            err,
            IntegrateError::Model(ModelError::DelayInFuture { .. })
        ));
    }

    #[test]
    fn divergence_is_flagged() {
        // x'' = x grows like e^t
        let sys = SecondOrderDDE::new(
            vec![],
            vec![StateTerm::linear(ScalarFn::constant(-1.0), DelayFn::none())],
            0.0,
        )
        .unwrap();
        let traj = integrate(&sys, &Controller::None, &History::constant(1.0, 0.0), 100.0, 0.01)
            .unwrap();
        let t = traj.diverged_at().expect("diverges");
        assert!(t > 25.0 && t < 30.0, "{t}");
        assert!(traj.nodes().iter().all(|n| n.x.abs() <= DIVERGENCE_LIMIT));
    }

    #[test]
    fn bad_arguments() {
        let sys = oscillator();
        let hist = History::constant(1.0, 0.0);
        assert!(integrate(&sys, &Controller::None, &hist, 1.0, 0.0).is_err());
        assert!(integrate(&sys, &Controller::None, &hist, 0.0, 0.1).is_err());
    }

    #[test]
    fn deterministic() {
        let (sys, hist) = builtin("sunflower", &BuiltinParams::new()).unwrap();
        let ctrl = Controller::damping(SQRT_2, 4.0, PI).unwrap();
        let a = integrate(&sys, &ctrl, &hist, 10.0, 0.01).unwrap();
        let b = integrate(&sys, &ctrl, &hist, 10.0, 0.01).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(PI), "3.1415926535897931");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(-2.5e20), "-2.5e+20");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(0.005), "0.0050000000000000001");
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = integrate(&oscillator(), &Controller::None, &History::constant(1.0, 0.0), 0.02, 0.01)
            .unwrap();
        let csv = traj.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,v");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,1,0");
        assert!(!csv.contains('\r'));
    }
}
