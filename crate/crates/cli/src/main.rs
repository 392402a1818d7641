//! `ddestab`: stability checks, gain design, simulation and figure
//! reproduction for second-order delay equations.
//!
//! Exit codes: 0 success or positive verdict, 2 well-formed but negative
//! verdict, 1 error.

mod check;
mod demo;
mod design;
mod experiment;
mod model_args;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ddestab", version, about = "Stabilization of second-order delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a stability criterion and report margins.
    Check(check::CheckArgs),
    /// Synthesize a damping controller `u = -delta lambda x' - lambda^2 (x - x*)`.
    Design(design::DesignArgs),
    /// Integrate a model under a controller and report convergence.
    Simulate(simulate::SimulateArgs),
    /// Reproduce a figure scenario: fig2 or fig3.
    Demo(demo::DemoArgs),
    /// Print a builtin model as a JSON config, or list the builtins.
    Model(model_args::ModelDumpArgs),
}

pub enum Verdict {
    Positive,
    Negative,
}

fn run(cli: Cli) -> anyhow::Result<Verdict> {
    match cli.command {
        Command::Check(args) => check::run(args),
        Command::Design(args) => design::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Demo(args) => demo::run(args),
        Command::Model(args) => model_args::dump(args),
    }
}

fn main() -> ExitCode {
    // die quietly when piped into `head` and friends
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Verdict::Positive) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
