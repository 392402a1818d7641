//! Convergence statistics for trajectories. All statistics use node values
//! only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Trajectory;

/// Minimum coefficient of determination for reporting a decay rate.
pub const MIN_FIT_QUALITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least 3 envelope peaks in the window, found {0}")]
    InsufficientData(usize),
    #[error("window [{lo}, {hi}] is empty or outside the trajectory")]
    BadWindow { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub settled: bool,
    pub settling_time: Option<f64>,
    pub max_deviation_tail: f64,
    pub decay_rate: Option<f64>,
    pub fit_quality: f64,
}

/// Smallest node time after which every node stays within `tol` of `xstar`;
/// `None` if the final node is outside the band.
pub fn settling_time(traj: &Trajectory, xstar: f64, tol: f64) -> Option<f64> {
    let nodes = traj.nodes();
    let mut first_inside = None;
    for n in nodes.iter().rev() {
        if (n.x - xstar).abs() <= tol {
            first_inside = Some(n.t);
        } else {
            break;
        }
    }
    first_inside
}

/// `max |x(t) - x*|` over nodes with `t >= from_t`.
pub fn max_deviation(traj: &Trajectory, xstar: f64, from_t: f64) -> f64 {
    traj.nodes()
        .iter()
        .filter(|n| n.t >= from_t)
        .map(|n| (n.x - xstar).abs())
        .fold(0.0, f64::max)
}

/// Indices of strict local maxima of `d`; a plateau counts once, at its
/// leftmost point, if it is followed by a strictly lower value.
fn peaks(d: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < d.len() {
        if d[i] > d[i - 1] {
            let mut j = i + 1;
            while j < d.len() && d[j] == d[i] {
                j += 1;
            }
            if j < d.len() && d[j] < d[i] {
                out.push(i);
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Exponential decay rate of `|x - x*|` on `[t_lo, t_hi]`: least-squares fit
/// of `log(peak)` against `t` over the envelope peaks. Returns
/// `(sigma, r_squared)` with `sigma = -slope`.
pub fn decay_rate(
    traj: &Trajectory,
    xstar: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<(f64, f64), MetricsError> {
    if !(t_lo < t_hi) || t_hi < traj.t0() || t_lo > traj.last_time() {
        return Err(MetricsError::BadWindow { lo: t_lo, hi: t_hi });
    }
    let window: Vec<_> = traj
        .nodes()
        .iter()
        .filter(|n| n.t >= t_lo && n.t <= t_hi)
        .collect();
    let dev: Vec<f64> = window.iter().map(|n| (n.x - xstar).abs()).collect();
    let pts: Vec<(f64, f64)> = peaks(&dev)
        .into_iter()
        .filter(|&i| dev[i] > 0.0)
        .map(|i| (window[i].t, dev[i].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(MetricsError::InsufficientData(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let r2 = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Ok((-slope, r2))
}

/// Settling band `tol`, tail statistic from `tail_from`, and a decay fit over
/// `[decay_window.0, decay_window.1]` reported only when it reaches
/// [`MIN_FIT_QUALITY`].
pub fn convergence_report(
    traj: &Trajectory,
    xstar: f64,
    tol: f64,
    tail_from: f64,
    decay_window: (f64, f64),
) -> ConvergenceReport {
    let settling = if traj.diverged_at().is_some() {
        None
    } else {
        settling_time(traj, xstar, tol)
    };
    let (decay, fit) = match decay_rate(traj, xstar, decay_window.0, decay_window.1) {
        Ok((sigma, r2)) if r2 >= MIN_FIT_QUALITY => (Some(sigma), r2),
        Ok((_, r2)) => (None, r2),
        Err(_) => (None, 0.0),
    };
    ConvergenceReport {
        settled: settling.is_some(),
        settling_time: settling,
        max_deviation_tail: max_deviation(traj, xstar, tail_from),
        decay_rate: decay,
        fit_quality: fit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Node;
    use crate::model::History;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        let nodes = (0..=n)
            .map(|i| {
                let t = i as f64 * dt;
                Node {
                    t,
                    x: f(t),
                    v: 0.0,
                    acc: 0.0,
                }
            })
            .collect();
        Trajectory::from_nodes(0.0, dt, nodes, History::constant(f(0.0), 0.0)).unwrap()
    }

    #[test]
    fn constant_trajectory() {
        let traj = synthetic(|_| 2.0, 10.0, 0.1);
        assert_eq!(settling_time(&traj, 2.0, 1e-6), Some(0.0));
        assert_eq!(max_deviation(&traj, 2.0, 0.0), 0.0);
        assert_eq!(
            decay_rate(&traj, 2.0, 0.0, 10.0),
            Err(MetricsError::InsufficientData(0))
        );
    }

    #[test]
    fn damped_cosine_rate() {
        let traj = synthetic(|t| 1.0 + (-2.0 * t).exp() * (10.0 * t).cos(), 6.0, 0.001);
        let (sigma, r2) = decay_rate(&traj, 1.0, 0.0, 6.0).unwrap();
        assert!((sigma - 2.0).abs() < 0.04, "{sigma}");
        assert!(r2 > 0.999, "{r2}");
    }

    #[test]
    fn sine_amplitude() {
        let traj = synthetic(|t| 3.0 + t.sin(), 20.0, 0.001);
        assert!((max_deviation(&traj, 3.0, 5.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn settling_requires_final_node_inside() {
        let traj = synthetic(|t| t, 1.0, 0.1);
        assert_eq!(settling_time(&traj, 0.0, 0.5), None);
        let traj = synthetic(|t| (-t).exp(), 10.0, 0.5);
        let t = settling_time(&traj, 0.0, 0.01).unwrap();
        assert_eq!(t, 5.0);
    }

    #[test]
    fn plateau_peak_is_leftmost() {
        assert_eq!(peaks(&[0.0, 1.0, 1.0, 1.0, 0.5, 2.0, 0.0]), vec![1, 5]);
        assert_eq!(peaks(&[0.0, 1.0, 1.0]), Vec::<usize>::new());
        assert_eq!(peaks(&[3.0, 2.0, 1.0]), Vec::<usize>::new());
    }

    #[test]
    fn bad_window() {
        let traj = synthetic(|t| t, 1.0, 0.1);
        assert!(decay_rate(&traj, 0.0, 2.0, 1.0).is_err());
        assert!(decay_rate(&traj, 0.0, 5.0, 6.0).is_err());
    }

    #[test]
    fn report_invariants() {
        let traj = synthetic(|t| (-0.5 * t).exp() * (3.0 * t).cos(), 40.0, 0.01);
        let r = convergence_report(&traj, 0.0, 1e-3, 20.0, (0.0, 40.0));
        assert!(r.settled);
        assert_eq!(r.settled, r.settling_time.is_some());
        assert!(r.decay_rate.is_some() && r.fit_quality >= MIN_FIT_QUALITY);
        assert!((r.decay_rate.unwrap() - 0.5).abs() < 0.01);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["settled", "settling_time", "decay_rate", "fit_quality"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn settling_monotone_in_tol(rate in 0.1f64..2.0, w in 1.0f64..8.0,
                                    tol in 1e-4f64..0.5, extra in 0.0f64..0.5) {
            let traj = synthetic(|t| (-rate * t).exp() * (w * t).cos(), 30.0, 0.01);
            let small = settling_time(&traj, 0.0, tol);
            let large = settling_time(&traj, 0.0, tol + extra);
            if let Some(s) = small {
                prop_assert!(large.unwrap() <= s);
            }
        }

        #[test]
        fn decay_recovers_exponent(rate in 0.2f64..3.0, w in 8.0f64..20.0) {
            let t_end = 20.0 / rate;
            let dt = (t_end / 20_000.0).min(0.002);
            let traj = synthetic(|t| (-rate * t).exp() * (w * t).cos(), t_end, dt);
            let (sigma, _) = decay_rate(&traj, 0.0, 0.0, t_end).unwrap();
            prop_assert!((sigma - rate).abs() < 0.02 * rate, "sigma={} rate={}", sigma, rate);
        }

        #[test]
        fn tail_max_nonincreasing_after_last_peak(rate in 0.1f64..1.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let traj = synthetic(|t| (-rate * t).exp(), 30.0, 0.01);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(max_deviation(&traj, 0.0, hi) <= max_deviation(&traj, 0.0, lo));
        }
    }
}
