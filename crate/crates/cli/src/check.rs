use anyhow::{bail, Result};
use clap::{ArgGroup, Args};
use ddestab::criteria::{
    corollary5_gain_range, lemma1_check, lemma2_check, theorem3_check, theorem4_check, CaseInterval,
};
use ddestab::model::envelope_bounds;
use ddestab::{BoundsEstimate, CriterionReport};
use serde::Serialize;

use crate::experiment::{default_horizon, default_samples};
use crate::model_args::{need, parse_number, ModelArgs};
use crate::Verdict;

#[derive(Args, Debug)]
#[command(
    group(ArgGroup::new("criterion").required(true).args(["lemma", "theorem", "corollary"])),
    allow_negative_numbers = true
)]
pub struct CheckArgs {
    /// Lemma 1 (needs a, b, alpha, beta) or 2 (a0, A, b0, B, C sum).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub lemma: Option<u8>,
    /// Theorem 3 (a, b, C with delayed-proportional control) or 4 (a, K, C).
    #[arg(long, value_parser = clap::value_parser!(u8).range(3..=4))]
    pub theorem: Option<u8>,
    /// Corollary 5: gain ranges for sine feedback (a, A, omega, optional K).
    #[arg(long, value_parser = clap::value_parser!(u8).range(5..=5))]
    pub corollary: Option<u8>,

    #[arg(short = 'a', value_parser = parse_number)]
    pub a: Option<f64>,
    #[arg(short = 'b', value_parser = parse_number)]
    pub b: Option<f64>,
    /// Nonlinearity bound C.
    #[arg(short = 'C', value_parser = parse_number)]
    pub c: Option<f64>,
    /// Proportional gain K.
    #[arg(short = 'K', value_parser = parse_number)]
    pub k: Option<f64>,
    #[arg(long, value_parser = parse_number, conflicts_with_all = ["model", "config"])]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_number, conflicts_with_all = ["model", "config"])]
    pub beta: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    pub a0: Option<f64>,
    #[arg(long = "a-upper", value_parser = parse_number)]
    pub a_upper: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    pub b0: Option<f64>,
    #[arg(long = "b-upper", value_parser = parse_number)]
    pub b_upper: Option<f64>,
    #[arg(long = "c-sum", value_parser = parse_number)]
    pub c_sum: Option<f64>,
    /// Sine amplitude A.
    #[arg(short = 'A', long = "amplitude", value_parser = parse_number)]
    pub amplitude: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    pub omega: Option<f64>,

    /// Model whose envelope bounds supply alpha and beta (lemma 1).
    #[command(flatten)]
    pub model: ModelArgs,
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
struct GainRanges {
    c: f64,
    ranges: Vec<CaseInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<CriterionReport>,
}

pub fn run(args: CheckArgs) -> Result<Verdict> {
    if let Some(5) = args.corollary {
        return corollary(&args);
    }
    if args.model.is_given() && args.lemma != Some(1) {
        bail!("--model/--config only supplies alpha and beta for --lemma 1");
    }
    let mut bounds = None;
    let report = match (args.lemma, args.theorem) {
        (Some(1), _) => {
            let (alpha, beta) = match args.model.spec()? {
                Some(spec) => {
                    let (sys, _) = spec.build()?;
                    let est = envelope_bounds(&sys, args.t_lo, args.t_hi, args.samples)?;
                    bounds = Some(est);
                    (est.alpha, est.beta)
                }
                None => (need(args.alpha, "--alpha")?, need(args.beta, "--beta")?),
            };
            lemma1_check(need(args.a, "-a")?, need(args.b, "-b")?, alpha, beta)?
        }
        (Some(_), _) => lemma2_check(
            need(args.a0, "--a0")?,
            need(args.a_upper, "--a-upper")?,
            need(args.b0, "--b0")?,
            need(args.b_upper, "--b-upper")?,
            need(args.c_sum, "--c-sum")?,
        )?,
        (None, Some(3)) => theorem3_check(need(args.a, "-a")?, need(args.b, "-b")?, need(args.c, "-C")?)?,
        (None, Some(_)) => theorem4_check(need(args.a, "-a")?, need(args.k, "-K")?, need(args.c, "-C")?)?,
        (None, None) => bail!("name a criterion"),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        if let Some(est) = &bounds {
            print_bounds(est);
        }
        print_report(&report);
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(verdict(report.satisfied))
}

fn corollary(args: &CheckArgs) -> Result<Verdict> {
    let a = need(args.a, "-a")?;
    let amplitude = need(args.amplitude, "-A")?;
    let omega = need(args.omega, "--omega")?;
    let ranges = corollary5_gain_range(a, amplitude, omega)?;
    let report = match args.k {
        Some(k) => Some(theorem4_check(a, k, amplitude * omega)?),
        None => None,
    };
    let satisfied = match &report {
        Some(r) => r.satisfied,
        None => !ranges.is_empty(),
    };
    let out = GainRanges {
        c: amplitude * omega,
        ranges,
        report,
    };
    if !args.json {
        println!("C = A omega = {}", out.c);
        if out.ranges.is_empty() {
            println!("no admissible gain range");
        }
        for r in &out.ranges {
            let lo = if r.interval.lower.inclusive { '[' } else { '(' };
            let hi = match r.interval.upper {
                Some(u) => format!("{}{}", u.value, if u.inclusive { ']' } else { ')' }),
                None => "inf)".into(),
            };
            println!("case {}: K in {lo}{}, {hi}", r.case, r.interval.lower.value);
        }
        if let Some(rep) = &out.report {
            print_report(rep);
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(verdict(satisfied))
}

fn verdict(satisfied: bool) -> Verdict {
    if satisfied {
        Verdict::Positive
    } else {
        Verdict::Negative
    }
}

fn print_bounds(est: &BoundsEstimate) {
    println!(
        "alpha = {}, beta = {} (sampled on [{}, {}], {} points)",
        est.alpha, est.beta, est.horizon.0, est.horizon.1, est.samples
    );
}

pub fn print_report(r: &CriterionReport) {
    println!("satisfied: {}", if r.satisfied { "yes" } else { "no" });
    if let Some(case) = &r.which_case {
        println!("case: {case}");
    }
    if r.holding_cases.len() > 1 {
        println!("holding cases: {}", r.holding_cases.join(", "));
    }
    for m in &r.margins {
        println!("  {}: {} vs {}", m.name, m.left, m.right);
    }
    if !r.notes.is_empty() {
        println!("{}", r.notes);
    }
}
