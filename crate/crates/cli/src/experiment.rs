//! Experiment files: one JSON document describing a model, a controller, the
//! integration horizon and where to write results.
//!
//! ```json
//! {
//!   "model": {"builtin": {"name": "sunflower", "params": {"x0": 6}}},
//!   "controller": {"design": {"delta": 1.4142135623730951, "lambda": 4}},
//!   "simulation": {"t_end": 60, "dt": 0.005, "tol": 0.001},
//!   "outputs": {"csv_path": "run.csv", "report_path": "run.json", "plot_script": true}
//! }
//! ```
//!
//! `model` is either `{"builtin": {name, params}}` or `{"system": <model
//! config>}`; `controller` is either `{"fixed": <controller>}` or
//! `{"design": <directive>}`.

use std::f64::consts::SQRT_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddestab::design::{synthesize_damping_controller, GainDesign};
use ddestab::integrator::DEFAULT_DT;
use ddestab::metrics::convergence_report;
use ddestab::model::{builtin, BuiltinParams, SystemConfig};
use ddestab::{
    integrate, ConvergenceReport, Controller, DeltaPolicy, GainTarget, History, SecondOrderDDE,
    Trajectory,
};
use serde::{Deserialize, Serialize};

use crate::output;

pub const DEFAULT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinModel {
    pub name: String,
    #[serde(default)]
    pub params: BuiltinParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin(BuiltinModel),
    System(SystemConfig),
}

impl ModelSpec {
    pub fn build(&self) -> Result<(SecondOrderDDE, History)> {
        match self {
            ModelSpec::Builtin(b) => builtin(&b.name, &b.params)
                .with_context(|| format!("building model `{}`", b.name)),
            ModelSpec::System(cfg) => cfg.build().context("building model from config"),
        }
    }
}

/// Damping-controller synthesis from the model's envelope bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDirective {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Optimize `delta` over `[eps, 2 - eps]` instead of fixing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: (f64, f64),
    #[serde(default = "default_samples")]
    pub samples: usize,
}

pub fn default_horizon() -> (f64, f64) {
    (0.0, 100.0)
}

pub fn default_samples() -> usize {
    10_001
}

impl DesignDirective {
    pub fn policy(&self) -> Result<DeltaPolicy> {
        match (self.delta, self.optimize_epsilon) {
            (Some(_), Some(_)) => bail!("give either a fixed delta or an optimization epsilon, not both"),
            (Some(d), None) => Ok(DeltaPolicy::Fixed(d)),
            (None, Some(epsilon)) => Ok(DeltaPolicy::Optimize { epsilon }),
            (None, None) => Ok(DeltaPolicy::Fixed(SQRT_2)),
        }
    }

    pub fn target(&self) -> Result<GainTarget> {
        match (self.margin, self.lambda) {
            (Some(_), Some(_)) => bail!("give either a margin or a lambda, not both"),
            (Some(m), None) => Ok(GainTarget::Margin(m)),
            (None, Some(l)) => Ok(GainTarget::Lambda(l)),
            (None, None) => Ok(GainTarget::Margin(ddestab::design::DEFAULT_MARGIN)),
        }
    }

    pub fn synthesize(&self, sys: &SecondOrderDDE) -> Result<GainDesign> {
        Ok(synthesize_damping_controller(
            sys,
            self.policy()?,
            self.target()?,
            self.horizon,
            self.samples,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    Fixed(Controller),
    Design(DesignDirective),
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Fixed(Controller::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Settling band around the equilibrium.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    #[serde(default)]
    pub plot_script: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

pub struct ExperimentRun {
    pub xstar: f64,
    pub controller: Controller,
    pub design: Option<GainDesign>,
    pub trajectory: Trajectory,
    pub report: ConvergenceReport,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn run(&self) -> Result<ExperimentRun> {
        if self.outputs.plot_script && self.outputs.csv_path.is_none() {
            bail!("a plot script needs a CSV path to reference");
        }
        let (sys, hist) = self.model.build()?;
        let (controller, design) = match &self.controller {
            ControllerSpec::Fixed(c) => (c.clone(), None),
            ControllerSpec::Design(d) => {
                let design = d.synthesize(&sys)?;
                (design.controller.clone(), Some(design))
            }
        };
        let sim = &self.simulation;
        if !(sim.tol > 0.0) {
            bail!("settling tolerance must be positive, got {}", sim.tol);
        }
        let trajectory = integrate(&sys, &controller, &hist, sim.t_end, sim.dt)?;
        let xstar = sys.equilibrium();
        let t0 = hist.t0;
        let report = convergence_report(
            &trajectory,
            xstar,
            sim.tol,
            t0 + 0.5 * (sim.t_end - t0),
            (t0, trajectory.last_time()),
        );
        let run = ExperimentRun {
            xstar,
            controller,
            design,
            trajectory,
            report,
        };
        self.write_outputs(&run)?;
        Ok(run)
    }

    fn write_outputs(&self, run: &ExperimentRun) -> Result<()> {
        if let Some(csv) = &self.outputs.csv_path {
            output::write_file(csv, &run.trajectory.to_csv())?;
            if self.outputs.plot_script {
                let script = output::plot_script_path(csv);
                let curve = output::PlotCurve {
                    csv: csv.clone(),
                    title: "x(t)".into(),
                };
                let body = output::gnuplot_script(vec![curve], Some(run.xstar), &output::png_name(&script));
                output::write_file(&script, &body)?;
            }
        }
        if let Some(path) = &self.outputs.report_path {
            output::write_file(path, &(serde_json::to_string_pretty(&run.report)? + "\n"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let text = r#"{
          "model": {"builtin": {"name": "sunflower", "params": {"x0": 6}}},
          "controller": {"design": {"delta": 1.4142135623730951, "lambda": 4}},
          "simulation": {"t_end": 60, "dt": 0.005, "tol": 0.001},
          "outputs": {"csv_path": "run.csv", "report_path": "run.json", "plot_script": true}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(cfg.controller, ControllerSpec::Design(_)));
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn fixed_controller_and_defaults() {
        let text = r#"{
          "model": {"builtin": {"name": "saturating_feedback"}},
          "controller": {"fixed": {"kind": "delayed_proportional",
                                   "params": {"b": 1, "h": {"kind": "constant_lag", "params": {"tau": 10}}}}},
          "simulation": {"t_end": 5}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.simulation.dt, DEFAULT_DT);
        assert_eq!(cfg.simulation.tol, DEFAULT_TOL);
        assert_eq!(cfg.outputs, OutputSpec::default());
        let run = cfg.run().unwrap();
        assert_eq!(run.trajectory.nodes().len(), 1001);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"model": {"builtin": {"name": "sunflower"}},
                       "simulation": {"t_end": 5, "steps": 3}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
        let text = r#"{"model": {"builtin": {"name": "sunflower"}},
                       "controller": {"design": {"delta": 1, "gain": 3}},
                       "simulation": {"t_end": 5}}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn plot_without_csv_is_an_error() {
        let text = r#"{"model": {"builtin": {"name": "sunflower"}},
                       "simulation": {"t_end": 1}, "outputs": {"plot_script": true}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(cfg.run().is_err());
    }
}
