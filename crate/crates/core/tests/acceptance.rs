//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs under `cargo test` (harness = false).

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ddestab::criteria::{
    case_c_threshold, corollary5_gain_range, lemma1_check, lemma2_check, rational_envelope_mu,
    theorem3_check, theorem4_check,
};
use ddestab::design::{mu_of_delta, optimal_delta};
use ddestab::metrics::{max_deviation, settling_time};
use ddestab::model::{builtin, BuiltinParams};
use ddestab::{integrate, Controller, DampingTerm, DelayFn, History, ScalarFn, SecondOrderDDE, StateTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn params(kv: &[(&str, f64)]) -> BuiltinParams {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn gain_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let alpha = rng.gen_range(0.0..=10.0);
        let beta = rng.gen_range(0.0..=10.0);
        let mu = mu_of_delta(SQRT_2, alpha, beta).map_err(|e| e.to_string())?;
        let closed = SQRT_2 * (alpha + (alpha * alpha + beta).sqrt());
        worst = worst.max((mu - closed).abs());
    }
    ensure(worst < 1e-12, format!("max |diff| = {worst:e}"))?;
    Ok(format!("max |diff| = {worst:e} over 1000 draws"))
}

fn example_thresholds() -> Outcome {
    let e1 = mu_of_delta(SQRT_2, 1.0, 1.0).map_err(|e| e.to_string())?;
    let e2 = mu_of_delta(SQRT_2, 1.0, 2.0).map_err(|e| e.to_string())?;
    let d1 = (e1 - (2.0 + SQRT_2)).abs();
    let d2 = (e2 - (SQRT_2 + 6f64.sqrt())).abs();
    ensure(d1 < 1e-12, format!("example 1: {e1} (diff {d1:e})"))?;
    ensure(d2 < 1e-12, format!("example 2: {e2} (diff {d2:e})"))?;
    Ok(format!("mu = {e1:.12} and {e2:.12}"))
}

fn threshold_sharpness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let delta = rng.gen_range(0.05..1.95);
        let alpha = rng.gen_range(0.01..10.0);
        let beta = rng.gen_range(0.01..10.0);
        let mu = mu_of_delta(delta, alpha, beta).map_err(|e| e.to_string())?;
        let check = |lambda: f64| {
            lemma1_check(delta * lambda, lambda * lambda, alpha, beta).map(|r| r.satisfied)
        };
        let below = check(mu * (1.0 - 1e-9)).map_err(|e| e.to_string())?;
        let above = check(mu * (1.0 + 1e-9)).map_err(|e| e.to_string())?;
        ensure(
            !below && above,
            format!("no flip at delta={delta}, alpha={alpha}, beta={beta}: below={below}, above={above}"),
        )?;
    }
    Ok("200/200 draws flip at (1 +- 1e-9) mu".into())
}

fn fig2() -> Outcome {
    let ctrl = Controller::damping(SQRT_2, 4.0, PI).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for x0 in [6.0, 3.0, 0.1] {
        let (sys, hist) = builtin("sunflower", &params(&[("x0", x0), ("v0", 1.0)])).map_err(|e| e.to_string())?;
        let on = integrate(&sys, &ctrl, &hist, 60.0, 0.005).map_err(|e| e.to_string())?;
        let settle = settling_time(&on, PI, 1e-3);
        ensure(
            settle.is_some() && on.diverged_at().is_none(),
            format!("controlled x0={x0} did not settle, x(60)={}", on.nodes().last().unwrap().x),
        )?;
        let off = integrate(&sys, &Controller::None, &hist, 200.0, 0.005).map_err(|e| e.to_string())?;
        let dev = max_deviation(&off, PI, 100.0);
        ensure(dev > 0.5, format!("uncontrolled x0={x0}: tail deviation {dev} <= 0.5"))?;
        summary.push(format!("x0={x0}: settle {:.2}, free dev {dev:.3}", settle.unwrap()));
    }
    Ok(summary.join("; "))
}

fn fig3() -> Outcome {
    let (sys, hist) = builtin("saturating_feedback", &params(&[("n", 8.0), ("tau", 10.0), ("x0", 1.0), ("v0", 0.0)]))
        .map_err(|e| e.to_string())?;
    let ctrl = Controller::delayed_proportional(1.0, DelayFn::constant(10.0).unwrap()).map_err(|e| e.to_string())?;
    let on = integrate(&sys, &ctrl, &hist, 300.0, 0.005).map_err(|e| e.to_string())?;
    let settle = settling_time(&on, 0.0, 1e-3);
    if settle.is_none() {
        let last = on.nodes().last().unwrap();
        return Err(format!("controlled run ends at |x({})| = {:.4e} > 1e-3", last.t, last.x.abs()));
    }

    let off = integrate(&sys, &Controller::None, &hist, 200.0, 0.005).map_err(|e| e.to_string())?;
    let growth = if let Some(t) = off.diverged_at() {
        format!("diverged at t={t:.1}")
    } else {
        let m100 = off.nodes().iter().filter(|n| n.t <= 100.0).map(|n| n.x.abs()).fold(0.0, f64::max);
        let m200 = off.nodes().iter().map(|n| n.x.abs()).fold(0.0, f64::max);
        ensure(m200 > m100, format!("no growth: max|x| {m100} on [0,100], {m200} on [0,200]"))?;
        format!("max|x| {m100:.3e} -> {m200:.3e}")
    };
    Ok(format!("controlled settles at t={:.1}; uncontrolled {growth}", settle.unwrap()))
}

fn criteria_table() -> Outcome {
    let t3 = theorem3_check(2.0, 1.0, 0.8).map_err(|e| e.to_string())?;
    ensure(t3.which_case.as_deref() == Some("a"), format!("theorem 3: {:?}", t3.which_case))?;
    let l2 = lemma2_check(2.0, 2.0, 1.0, 1.0, 0.8).map_err(|e| e.to_string())?;
    ensure(l2.which_case.as_deref() == Some("1"), format!("lemma 2: {:?}", l2.which_case))?;
    let mut worst = 0.0f64;
    for n in 1..=10u32 {
        for m in 0..n {
            // brute force over v in [0, 100], step 1e-4
            let grid = (0..=1_000_000u32)
                .map(|i| {
                    let v = i as f64 * 1e-4;
                    v.powi(m as i32) / (1.0 + v.powi(n as i32))
                })
                .fold(0.0f64, f64::max);
            let diff = (rational_envelope_mu(m, n) - grid).abs();
            ensure(diff < 1e-6, format!("mu({m},{n}) off by {diff:e}"))?;
            worst = worst.max(diff);
        }
    }
    Ok(format!("cases a / 1 found; mu grid max diff {worst:.1e}"))
}

fn oscillator_error(dt: f64) -> Result<f64, String> {
    let sys = SecondOrderDDE::new(
        vec![DampingTerm::linear(ScalarFn::constant(2.0), DelayFn::none())],
        vec![StateTerm::linear(ScalarFn::constant(1.0), DelayFn::none())],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let traj = integrate(&sys, &Controller::None, &History::constant(1.0, 0.0), 5.0, dt).map_err(|e| e.to_string())?;
    Ok(traj
        .nodes()
        .iter()
        .map(|n| (n.x - (1.0 + n.t) * (-n.t).exp()).abs())
        .fold(0.0, f64::max))
}

fn integrator_order() -> Outcome {
    let e02 = oscillator_error(0.02)?;
    let e01 = oscillator_error(0.01)?;
    let e005 = oscillator_error(0.005)?;
    let (r1, r2) = (e02 / e01, e01 / e005);
    ensure((12.0..=20.0).contains(&r1), format!("ratio dt=0.02/0.01: {r1}"))?;
    ensure((12.0..=20.0).contains(&r2), format!("ratio dt=0.01/0.005: {r2}"))?;
    ensure(e01 < 1e-8, format!("error at dt=0.01: {e01:e}"))?;
    Ok(format!("ratios {r1:.2}, {r2:.2}; error(dt=0.01) = {e01:.2e}"))
}

fn constant_invariance() -> Outcome {
    // x'' + x(t) - x(t - 1) = -3 x'
    let sys = SecondOrderDDE::new(
        vec![DampingTerm::linear(ScalarFn::constant(3.0), DelayFn::none())],
        vec![
            StateTerm::linear(ScalarFn::constant(1.0), DelayFn::none()),
            StateTerm::linear(ScalarFn::constant(-1.0), DelayFn::constant(1.0).unwrap()),
        ],
        5.0,
    )
    .map_err(|e| e.to_string())?;
    let traj = integrate(&sys, &Controller::None, &History::constant(5.0, 0.0), 50.0, 0.005).map_err(|e| e.to_string())?;
    let worst = traj.nodes().iter().map(|n| (n.x - 5.0).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-9, format!("max |x - 5| = {worst:e}"))?;
    Ok(format!("max |x - 5| = {worst:e} over {} nodes", traj.nodes().len()))
}

fn delta_optimization() -> Outcome {
    let mut out = Vec::new();
    for beta in [0.5, 1.0, 4.0] {
        let (d, _) = optimal_delta(0.0, beta, 0.01).map_err(|e| e.to_string())?;
        let diff = (d - SQRT_2).abs();
        ensure(diff < 1e-6, format!("beta={beta}: delta0={d}"))?;
        out.push(format!("{diff:.1e}"));
    }
    Ok(format!("|delta0 - sqrt2| = {}", out.join(", ")))
}

fn corollary5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for _ in 0..100 {
        let a = rng.gen_range(0.1..5.0);
        let amp = rng.gen_range(0.05..5.0);
        let omega = rng.gen_range(0.1..3.0);
        let c = amp * omega;
        let ranges = corollary5_gain_range(a, amp, omega).map_err(|e| e.to_string())?;
        for r in &ranges {
            let lo = r.interval.lower.value;
            let samples: Vec<f64> = match r.interval.upper {
                Some(hi) => (1..=9)
                    .map(|i| lo + (hi.value - lo) * i as f64 / 10.0)
                    .chain([hi.value].into_iter().filter(|_| hi.inclusive))
                    .chain([lo].into_iter().filter(|_| r.interval.lower.inclusive))
                    .collect(),
                None => [1e-6, 1e-3, 0.1, 1.0, 10.0].iter().map(|u| lo * (1.0 + u)).collect(),
            };
            for k in samples {
                let rep = theorem4_check(a, k, c).map_err(|e| e.to_string())?;
                ensure(
                    rep.satisfied && rep.holding_cases.contains(&r.case),
                    format!("a={a} A={amp} w={omega}: K={k} in case {} fails: {:?}", r.case, rep.holding_cases),
                )?;
                checked += 1;
            }
        }
        let below = case_c_threshold(a, c) * (1.0 - 1e-9);
        let rep = theorem4_check(a, below, c).map_err(|e| e.to_string())?;
        ensure(
            !rep.holding_cases.iter().any(|h| h == "c"),
            format!("a={a} A={amp} w={omega}: K={below} below K_c passes case c"),
        )?;
    }
    Ok(format!("{checked} in-range gains pass; all K_c(1 - 1e-9) fail case c"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC-1 gain-formula identity at delta = sqrt2", gain_identity, Duration::from_secs(1)),
        ("AC-2 example thresholds 2+sqrt2 and sqrt2+sqrt6", example_thresholds, Duration::from_secs(1)),
        ("AC-3 threshold sharpness of mu(delta)", threshold_sharpness, Duration::from_secs(1)),
        ("AC-4 sunflower stabilization (fig. 2)", fig2, Duration::from_secs(10)),
        ("AC-5 saturating feedback stabilization (fig. 3)", fig3, Duration::from_secs(10)),
        ("AC-6 criteria truth table and mu(m, n)", criteria_table, Duration::from_secs(5)),
        ("AC-7 integrator fourth-order convergence", integrator_order, Duration::from_secs(2)),
        ("AC-8 constant-solution invariance", constant_invariance, Duration::from_secs(1)),
        ("AC-9 delta optimization", delta_optimization, Duration::from_secs(1)),
        ("AC-10 gain ranges vs proportional-control test", corollary5, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > budget => Err(format!("{msg}; runtime {elapsed:.2?} > {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name} [{elapsed:.2?}]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name} [{elapsed:.2?}]: {msg}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
