//! Stabilization toolkit for second-order nonlinear equations with variable
//! delays.
//!
//! - [`expr`]: scalar functions of `t` written as strings.
//! - [`model`]: equations, histories, control laws, envelope bounds.
//! - [`criteria`]: sufficient stability tests with margins.
//! - [`design`]: damping and proportional gain synthesis.
//! - [`integrator`]: method-of-steps RK4 with Hermite dense output.
//! - [`metrics`]: settling time, decay rate, deviation statistics.

pub mod criteria;
pub mod design;
pub mod expr;
pub mod integrator;
pub mod metrics;
pub mod model;

pub use criteria::{CriterionReport, Margin};
pub use design::{DeltaPolicy, GainDesign, GainTarget};
pub use expr::ScalarFn;
pub use integrator::{integrate, Node, Trajectory};
pub use metrics::ConvergenceReport;
pub use model::{
    BoundsEstimate, Controller, DampingTerm, DelayFn, History, SecondOrderDDE, StateTerm,
};
