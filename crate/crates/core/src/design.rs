//! Controller synthesis.
//!
//! The damping control `u = -delta lambda x' - lambda^2 (x - x*)` stabilizes
//! any equation whose delayed coefficients are bounded by `alpha`, `beta`
//! once `lambda > mu(delta)`; see [`mu_of_delta`]. Proportional gains for
//! `u = -K (x - x*)` come from the three-case test in
//! [`crate::criteria::theorem4_check`].

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{case_c_threshold, theorem4_check, CriterionReport};
use crate::model::{envelope_bounds, BoundsEstimate, Controller, ModelError, SecondOrderDDE};

pub const DEFAULT_MARGIN: f64 = 0.1;
/// Coarse grid size used before golden-section refinement.
pub const DELTA_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("delta must lie in (0, 2), got {0}")]
    DeltaOutOfRange(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("alpha and beta must be finite and >= 0, got alpha = {alpha}, beta = {beta}")]
    BadBounds { alpha: f64, beta: f64 },
    #[error("margin must be finite and >= 0, got {0}")]
    BadMargin(f64),
    #[error("lambda = {lambda} does not strictly exceed the threshold mu = {threshold}")]
    NotAboveThreshold { lambda: f64, threshold: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Smallest admissible damping gain:
///
/// ```text
/// mu(delta) = [(delta + s) alpha + sqrt((delta + s)^2 alpha^2 + 4 s beta delta)] / (delta s),
/// s = sqrt(4 - delta^2)
/// ```
///
/// It is the positive root in `lambda` of
/// `delta s lambda^2 - 2 (delta + s) alpha lambda - 4 beta = 0`.
pub fn mu_of_delta(delta: f64, alpha: f64, beta: f64) -> Result<f64, DesignError> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(DesignError::DeltaOutOfRange(delta));
    }
    check_bounds(alpha, beta)?;
    let s = (4.0 - delta * delta).sqrt();
    let p = delta + s;
    Ok((p * alpha + (p * p * alpha * alpha + 4.0 * s * beta * delta).sqrt()) / (delta * s))
}

fn check_bounds(alpha: f64, beta: f64) -> Result<(), DesignError> {
    if alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite() {
        Ok(())
    } else {
        Err(DesignError::BadBounds { alpha, beta })
    }
}

/// Minimizes `mu(., alpha, beta)` over `[eps, 2 - eps]`.
///
/// A coarse grid of [`DELTA_GRID_POINTS`] points picks the best bracket, then
/// golden-section search refines it. When `alpha = beta = 0` the function is
/// identically zero and `delta0 = sqrt(2)` is returned.
pub fn optimal_delta(alpha: f64, beta: f64, epsilon: f64) -> Result<(f64, f64), DesignError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DesignError::EpsilonOutOfRange(epsilon));
    }
    check_bounds(alpha, beta)?;
    if alpha == 0.0 && beta == 0.0 {
        return Ok((SQRT_2, 0.0));
    }
    let mu = |d: f64| mu_of_delta(d, alpha, beta).expect("delta stays inside (0, 2)");
    let (lo, hi) = (epsilon, 2.0 - epsilon);
    let step = (hi - lo) / (DELTA_GRID_POINTS - 1) as f64;
    let grid = |i: usize| {
        if i + 1 == DELTA_GRID_POINTS {
            hi
        } else {
            lo + i as f64 * step
        }
    };
    let best = (0..DELTA_GRID_POINTS)
        .map(|i| (i, mu(grid(i))))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let a = grid(best.0.saturating_sub(1));
    let b = grid((best.0 + 1).min(DELTA_GRID_POINTS - 1));
    let (d, v) = golden_section(mu, a, b, 1e-12);
    // the refined point can only improve on the grid winner
    if v <= best.1 {
        Ok((d, v))
    } else {
        Ok((grid(best.0), best.1))
    }
}

/// Golden-section minimization of `f` on `[a, b]` down to bracket width `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainDesign {
    pub delta: f64,
    pub lambda_threshold: f64,
    pub lambda: f64,
    /// Relative excess: `lambda = (1 + margin) * lambda_threshold` when the
    /// threshold is positive, `lambda = margin` when it is zero.
    pub margin: f64,
    pub controller: Controller,
    pub bounds_used: BoundsEstimate,
}

/// How the gain above threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainTarget {
    Margin(f64),
    Lambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    Fixed(f64),
    Optimize { epsilon: f64 },
}

/// Damping gain `lambda = (1 + margin) mu(delta)` for the equilibrium at 0.
pub fn damping_gain(alpha: f64, beta: f64, delta: f64, margin: f64) -> Result<GainDesign, DesignError> {
    damping_gain_for(alpha, beta, delta, GainTarget::Margin(margin), 0.0)
}

/// As [`damping_gain`], with either a margin or an explicit `lambda`, and a
/// target equilibrium `xstar`.
pub fn damping_gain_for(
    alpha: f64,
    beta: f64,
    delta: f64,
    target: GainTarget,
    xstar: f64,
) -> Result<GainDesign, DesignError> {
    let threshold = mu_of_delta(delta, alpha, beta)?;
    let (lambda, margin) = match target {
        GainTarget::Margin(m) => {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(DesignError::BadMargin(m));
            }
            let lambda = if threshold > 0.0 { (1.0 + m) * threshold } else { m };
            (lambda, m)
        }
        GainTarget::Lambda(l) => {
            let m = if threshold > 0.0 { l / threshold - 1.0 } else { l };
            (l, m)
        }
    };
    if !(lambda > threshold && lambda.is_finite()) {
        return Err(DesignError::NotAboveThreshold { lambda, threshold });
    }
    Ok(GainDesign {
        delta,
        lambda_threshold: threshold,
        lambda,
        margin,
        controller: Controller::damping(delta, lambda, xstar)?,
        bounds_used: BoundsEstimate {
            alpha,
            beta,
            horizon: (0.0, 0.0),
            samples: 0,
        },
    })
}

/// Damping controller for a nonlinear system: reduce it to the envelope
/// bounds over `horizon`, pick `delta`, and target the system's equilibrium.
///
/// The envelopes stored on the terms are trusted as given.
pub fn synthesize_damping_controller(
    sys: &SecondOrderDDE,
    policy: DeltaPolicy,
    target: GainTarget,
    horizon: (f64, f64),
    samples: usize,
) -> Result<GainDesign, DesignError> {
    let bounds = envelope_bounds(sys, horizon.0, horizon.1, samples)?;
    let delta = match policy {
        DeltaPolicy::Fixed(d) => d,
        DeltaPolicy::Optimize { epsilon } => optimal_delta(bounds.alpha, bounds.beta, epsilon)?.0,
    };
    let mut design = damping_gain_for(bounds.alpha, bounds.beta, delta, target, sys.equilibrium())?;
    design.bounds_used = bounds;
    Ok(design)
}

/// A gain `K` passing the proportional-control test with nonlinearity bound
/// `C`: the midpoint of case a if it is nonempty, else the midpoint of case
/// b, else `1.25 K_c` for case c. `None` only for degenerate input.
pub fn proportional_gain(a: f64, c: f64) -> Option<(f64, CriterionReport)> {
    if !(a > 0.0 && a.is_finite() && c >= 0.0 && c.is_finite()) {
        return None;
    }
    let q = a * a / 4.0;
    let b_hi = a * a / 2.0 - c;
    let (k, case) = if c < q {
        ((c + q) / 2.0, "a")
    } else if q < b_hi {
        ((q + b_hi) / 2.0, "b")
    } else {
        (1.25 * case_c_threshold(a, c), "c")
    };
    let report = theorem4_check(a, k, c).ok()?;
    report
        .holding_cases
        .iter()
        .any(|h| h == case)
        .then_some((k, report))
}
