use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use ddestab::integrator::DEFAULT_DT;
use ddestab::{Controller, DelayFn, ScalarFn};

use crate::experiment::{
    default_horizon, default_samples, ControllerSpec, DesignDirective, ExperimentConfig, OutputSpec,
    SimulationSpec, DEFAULT_TOL,
};
use crate::model_args::{parse_number, ModelArgs};
use crate::Verdict;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    /// No control.
    None,
    /// `u = -delta lambda x' - lambda^2 (x - x*)` with given delta, lambda.
    Damping,
    /// `u = -b [x(t) - x(h(t))]`.
    Delayed,
    /// `u = -K (x - x*)`.
    Proportional,
    /// Damping control synthesized from the model's envelope bounds.
    Design,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    /// Experiment JSON file; replaces the model, controller and output flags.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["model", "config", "controller"])]
    pub experiment: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ControllerKind::None)]
    pub controller: ControllerKind,
    #[arg(long, value_parser = parse_number, conflicts_with = "optimize_delta")]
    pub delta: Option<f64>,
    #[arg(long = "optimize-delta", value_name = "EPS", value_parser = parse_number)]
    pub optimize_delta: Option<f64>,
    #[arg(long, value_parser = parse_number, conflicts_with = "margin")]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    pub margin: Option<f64>,
    /// Target for damping and proportional control [default: the model's equilibrium].
    #[arg(long, value_parser = parse_number)]
    pub xstar: Option<f64>,
    /// Gain of the delayed-proportional control.
    #[arg(short = 'b', value_parser = parse_number)]
    pub b: Option<f64>,
    /// Constant lag of the delayed-proportional control.
    #[arg(long, value_parser = parse_number, conflicts_with = "h")]
    pub tau: Option<f64>,
    /// Delay function of the delayed-proportional control, e.g. `t - 1 - 0.5*sin(t)`.
    #[arg(long)]
    pub h: Option<ScalarFn>,
    /// Upper bound on `t - h(t)` for an expression delay.
    #[arg(long = "lag-bound", value_parser = parse_number, requires = "h")]
    pub lag_bound: Option<f64>,
    /// Proportional gain K.
    #[arg(short = 'K', value_parser = parse_number)]
    pub k: Option<f64>,
    #[arg(long = "t-end", default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    /// Settling band around the equilibrium.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Write a gnuplot script next to the CSV.
    #[arg(long, requires = "csv")]
    pub plot: bool,
    /// Exit 2 unless the run settles.
    #[arg(long = "expect-settle")]
    pub expect_settle: bool,
    /// Print only the report JSON.
    #[arg(long)]
    pub json: bool,
}

fn required(v: Option<f64>, flag: &str, kind: &str) -> Result<f64> {
    match v {
        Some(v) => Ok(v),
        None => bail!("{kind} control needs {flag}"),
    }
}

impl SimulateArgs {
    fn controller(&self, equilibrium: f64) -> Result<ControllerSpec> {
        let xstar = self.xstar.unwrap_or(equilibrium);
        let fixed = match self.controller {
            ControllerKind::None => Controller::None,
            ControllerKind::Damping => Controller::damping(
                self.delta.unwrap_or(std::f64::consts::SQRT_2),
                required(self.lambda, "--lambda", "damping")?,
                xstar,
            )?,
            ControllerKind::Delayed => {
                let h = match (&self.h, self.tau) {
                    (Some(g), _) => DelayFn::expression(g.clone(), self.lag_bound),
                    (None, Some(tau)) => DelayFn::constant(tau)?,
                    (None, None) => bail!("delayed control needs --tau or --h"),
                };
                Controller::delayed_proportional(required(self.b, "-b", "delayed")?, h)?
            }
            ControllerKind::Proportional => {
                Controller::proportional_state(required(self.k, "-K", "proportional")?, xstar)?
            }
            ControllerKind::Design => {
                return Ok(ControllerSpec::Design(DesignDirective {
                    delta: self.delta,
                    optimize_epsilon: self.optimize_delta,
                    margin: self.margin,
                    lambda: self.lambda,
                    horizon: default_horizon(),
                    samples: default_samples(),
                }))
            }
        };
        Ok(ControllerSpec::Fixed(fixed))
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.experiment {
            return ExperimentConfig::from_path(path);
        }
        let Some(model) = self.model.spec()? else {
            bail!("give --model, --config or --experiment");
        };
        let (sys, _) = model.build()?;
        Ok(ExperimentConfig {
            controller: self.controller(sys.equilibrium())?,
            model,
            simulation: SimulationSpec {
                t_end: self.t_end,
                dt: self.dt,
                tol: self.tol,
            },
            outputs: OutputSpec {
                csv_path: self.csv.clone(),
                report_path: self.report.clone(),
                plot_script: self.plot,
            },
        })
    }
}

pub fn run(args: SimulateArgs) -> Result<Verdict> {
    let cfg = args.experiment()?;
    let run = cfg.run()?;
    if !args.json {
        if let Some(d) = &run.design {
            println!(
                "designed: delta = {}, mu(delta) = {}, lambda = {} (alpha = {}, beta = {})",
                d.delta, d.lambda_threshold, d.lambda, d.bounds_used.alpha, d.bounds_used.beta
            );
        }
        let traj = &run.trajectory;
        let last = traj.nodes().last().expect("trajectories hold the initial node");
        println!("controller: {}", serde_json::to_string(&run.controller)?);
        println!("x* = {}", run.xstar);
        println!("final: t = {}, x = {}, v = {}", last.t, last.x, last.v);
        if let Some(t) = traj.diverged_at() {
            println!("diverged at t = {t}");
        }
        if traj.used_extrapolation() {
            println!(
                "note: {} of {} delayed lookups extrapolated past the last node",
                traj.extrapolated_lookups(),
                traj.total_lookups()
            );
        }
    }
    println!("{}", serde_json::to_string_pretty(&run.report)?);
    if args.expect_settle && !run.report.settled {
        return Ok(Verdict::Negative);
    }
    Ok(Verdict::Positive)
}
