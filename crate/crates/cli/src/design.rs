use anyhow::{bail, Result};
use clap::Args;
use ddestab::design::{damping_gain_for, optimal_delta, GainDesign};
use ddestab::{Controller, DeltaPolicy};
use serde::Serialize;

use crate::experiment::{default_horizon, default_samples, DesignDirective};
use crate::model_args::{parse_number, ModelArgs};
use crate::Verdict;

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct DesignArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Envelope limit of the damping coefficients, instead of a model.
    #[arg(long, value_parser = parse_number, conflicts_with_all = ["model", "config"], requires = "beta")]
    pub alpha: Option<f64>,
    /// Envelope limit of the state coefficients, instead of a model.
    #[arg(long, value_parser = parse_number, conflicts_with_all = ["model", "config"], requires = "alpha")]
    pub beta: Option<f64>,
    /// Fixed delta in (0, 2): a number, a constant expression or `sqrt2`.
    #[arg(long, value_parser = parse_number, conflicts_with = "optimize_delta")]
    pub delta: Option<f64>,
    /// Minimize the threshold over delta in [EPS, 2 - EPS].
    #[arg(long = "optimize-delta", value_name = "EPS", value_parser = parse_number)]
    pub optimize_delta: Option<f64>,
    /// Explicit gain; must exceed the threshold.
    #[arg(long, value_parser = parse_number, conflicts_with = "margin")]
    pub lambda: Option<f64>,
    /// Relative excess over the threshold [default: 0.1].
    #[arg(long, value_parser = parse_number)]
    pub margin: Option<f64>,
    #[arg(long = "t-lo", default_value_t = default_horizon().0)]
    pub t_lo: f64,
    #[arg(long = "t-hi", default_value_t = default_horizon().1)]
    pub t_hi: f64,
    #[arg(long, default_value_t = default_samples())]
    pub samples: usize,
    /// Print only the JSON document.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct DesignOutput<'a> {
    alpha: f64,
    beta: f64,
    delta: f64,
    lambda_threshold: f64,
    lambda: f64,
    margin: f64,
    controller: &'a Controller,
}

impl DesignArgs {
    fn directive(&self) -> DesignDirective {
        DesignDirective {
            delta: self.delta,
            optimize_epsilon: self.optimize_delta,
            margin: self.margin,
            lambda: self.lambda,
            horizon: (self.t_lo, self.t_hi),
            samples: self.samples,
        }
    }
}

pub fn run(args: DesignArgs) -> Result<Verdict> {
    let directive = args.directive();
    let design: GainDesign = match (args.model.spec()?, args.alpha, args.beta) {
        (Some(spec), _, _) => {
            let (sys, _) = spec.build()?;
            directive.synthesize(&sys)?
        }
        (None, Some(alpha), Some(beta)) => {
            let delta = match directive.policy()? {
                DeltaPolicy::Fixed(d) => d,
                DeltaPolicy::Optimize { epsilon } => optimal_delta(alpha, beta, epsilon)?.0,
            };
            damping_gain_for(alpha, beta, delta, directive.target()?, 0.0)?
        }
        _ => bail!("give a model (--model or --config) or both --alpha and --beta"),
    };
    let out = DesignOutput {
        alpha: design.bounds_used.alpha,
        beta: design.bounds_used.beta,
        delta: design.delta,
        lambda_threshold: design.lambda_threshold,
        lambda: design.lambda,
        margin: design.margin,
        controller: &design.controller,
    };
    if !args.json {
        println!("alpha = {}", out.alpha);
        println!("beta = {}", out.beta);
        println!("delta = {}", out.delta);
        println!("mu(delta) = {}", out.lambda_threshold);
        println!("lambda = {} (margin {})", out.lambda, out.margin);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(Verdict::Positive)
}
