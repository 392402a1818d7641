//! Figure scenarios. Each curve is integrated on its own thread and written
//! to its own CSV; the summary is assembled in scenario order.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use clap::{Args, ValueEnum};
use ddestab::integrator::DEFAULT_DT;
use ddestab::metrics::convergence_report;
use ddestab::model::{builtin, BuiltinParams};
use ddestab::{integrate, ConvergenceReport, Controller, DelayFn};
use serde::Serialize;

use crate::experiment::DEFAULT_TOL;
use crate::output::{self, Panel, PlotCurve};
use crate::Verdict;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Sunflower equation, damping control delta = sqrt2, lambda = 4.
    Fig2,
    /// Saturating feedback n = 8, tau = 10, delayed-proportional control b = 1.
    Fig3,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

struct Scenario {
    name: String,
    panel: usize,
    label: String,
    model: &'static str,
    params: BuiltinParams,
    controller: Controller,
    t_end: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    scenario: String,
    csv: String,
    x0: f64,
    xstar: f64,
    diverged_at: Option<f64>,
    report: ConvergenceReport,
}

fn params(kv: &[(&str, f64)]) -> BuiltinParams {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn fig2() -> Result<(Vec<Scenario>, [&'static str; 2])> {
    let ctrl = Controller::damping(SQRT_2, 4.0, PI)?;
    let mut out = Vec::new();
    for (panel, tag, controller, t_end) in [
        (0, "uncontrolled", Controller::None, 200.0),
        (1, "controlled", ctrl, 60.0),
    ] {
        for x0 in [6.0, 3.0, 0.1] {
            out.push(Scenario {
                name: format!("fig2_{tag}_x0_{x0}"),
                panel,
                label: format!("x0 = {x0}"),
                model: "sunflower",
                params: params(&[("x0", x0), ("v0", 1.0)]),
                controller: controller.clone(),
                t_end,
            });
        }
    }
    Ok((out, ["no control", "u = -sqrt2*4 x' - 16 (x - pi)"]))
}

fn fig3() -> Result<(Vec<Scenario>, [&'static str; 2])> {
    let p = params(&[("n", 8.0), ("tau", 10.0), ("x0", 1.0), ("v0", 0.0)]);
    let ctrl = Controller::delayed_proportional(1.0, DelayFn::constant(10.0)?)?;
    let out = vec![
        Scenario {
            name: "fig3_uncontrolled".into(),
            panel: 0,
            label: "x".into(),
            model: "saturating_feedback",
            params: p.clone(),
            controller: Controller::None,
            t_end: 200.0,
        },
        Scenario {
            name: "fig3_controlled".into(),
            panel: 1,
            label: "x".into(),
            model: "saturating_feedback",
            params: p,
            controller: ctrl,
            t_end: 400.0,
        },
    ];
    Ok((out, ["no control", "u = x(t - 10) - x(t)"]))
}

fn run_scenario(s: &Scenario, dir: &Path) -> Result<SummaryRow> {
    let (sys, hist) = builtin(s.model, &s.params)?;
    let traj = integrate(&sys, &s.controller, &hist, s.t_end, DEFAULT_DT)?;
    let csv = format!("{}.csv", s.name);
    output::write_file(&dir.join(&csv), &traj.to_csv())?;
    let xstar = sys.equilibrium();
    let report = convergence_report(&traj, xstar, DEFAULT_TOL, 0.5 * s.t_end, (0.0, traj.last_time()));
    Ok(SummaryRow {
        scenario: s.name.clone(),
        csv,
        x0: hist.initial_state()?.0,
        xstar,
        diverged_at: traj.diverged_at(),
        report,
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

fn table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>8} {:>8} {:>8} {:>10} {:>12} {:>10} {:>9}",
        "scenario", "x0", "x*", "settled", "settle_t", "tail_dev", "decay", "diverged"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<28} {:>8} {:>8.4} {:>8} {:>10} {:>12.4e} {:>10} {:>9}",
            r.scenario,
            r.x0,
            r.xstar,
            if r.report.settled { "yes" } else { "no" },
            opt(r.report.settling_time, 2),
            r.report.max_deviation_tail,
            opt(r.report.decay_rate, 4),
            opt(r.diverged_at, 1),
        );
    }
    s
}

pub fn run(args: DemoArgs) -> Result<Verdict> {
    let (tag, (scenarios, titles)) = match args.figure {
        Figure::Fig2 => ("fig2", fig2()?),
        Figure::Fig3 => ("fig3", fig3()?),
    };
    let dir = args.out.as_path();
    let results: Vec<Result<SummaryRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run_scenario(s, dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| anyhow!("scenario thread panicked"))?)
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let panels: Vec<Panel> = titles
        .iter()
        .enumerate()
        .map(|(i, title)| Panel {
            title: title.to_string(),
            curves: scenarios
                .iter()
                .filter(|s| s.panel == i)
                .map(|s| PlotCurve {
                    csv: PathBuf::from(format!("{}.csv", s.name)),
                    title: s.label.clone(),
                })
                .collect(),
        })
        .collect();
    let xstar = rows.first().map(|r| r.xstar);
    output::write_file(
        &dir.join(format!("{tag}.gp")),
        &output::panels_script(&panels, xstar, &format!("{tag}.png")),
    )?;
    let summary = table(&rows);
    output::write_file(&dir.join(format!("{tag}_summary.txt")), &summary)?;
    output::write_file(
        &dir.join(format!("{tag}_summary.json")),
        &(serde_json::to_string_pretty(&rows)? + "\n"),
    )?;
    print!("{summary}");
    println!("wrote {} CSV files, {tag}.gp and {tag}_summary.json to {}", rows.len(), dir.display());
    Ok(Verdict::Positive)
}
