//! Command-line rigidity analyzer for pinned bar-and-joint frameworks.
//!
//! Five subcommands cover the pipeline: `validate` checks an input file,
//! `analyze` reports ranks and order-by-order rigidity verdicts, `trace`
//! follows a finite motion and writes it to CSV, `order` estimates the
//! vanishing order of bar elongations along a path, and `cusp-demo` runs
//! the double-Watt cusp construction end to end.
//!
//! Exit codes: 0 on success, 1 on runtime or numerical failure, 2 when the
//! input file fails validation. All reports go to stdout as JSON with
//! floats at full precision; sampled paths go to CSV files. Runs with the
//! same inputs and `--seed` are byte-identical.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, OrderSource};
use rigidity_core::Measure;

#[derive(Parser)]
#[command(name = "rigidity", version, about = "Rigidity analysis of pinned bar-and-joint frameworks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum MeasureArg {
    /// Squared elongations (default, matches the constraint equations).
    Squared,
    /// Linear elongations (length difference).
    Linear,
}

impl From<MeasureArg> for Measure {
    fn from(arg: MeasureArg) -> Measure {
        match arg {
            MeasureArg::Squared => Measure::Squared,
            MeasureArg::Linear => Measure::Linear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a framework file and report its basic shape.
    Validate {
        /// Framework JSON file.
        path: PathBuf,
    },
    /// Rank, flex and stress dimensions, and rigidity verdicts per order.
    Analyze {
        /// Framework JSON file.
        path: PathBuf,
        /// Highest order to test.
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        /// Seed for the randomized parts of the order tests.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Trace a finite motion and write the sampled path to CSV.
    Trace {
        /// Framework JSON file.
        path: PathBuf,
        /// 'auto' or an index into the first-order flex basis.
        #[arg(long, default_value = "auto")]
        direction: String,
        /// Number of continuation steps.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Arclength step size.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Output CSV file (per-branch suffixes are added when a
        /// degenerate point opens several branches).
        #[arg(long)]
        out: PathBuf,
        /// Seed for the direction-picking order test.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the vanishing order of bar elongations along a path.
    Order {
        /// Framework JSON file (not needed with --synthetic-alpha).
        path: Option<PathBuf>,
        /// Build a polynomial path from an order-n flex witness.
        #[arg(long, value_name = "N", conflicts_with_all = ["from_trace", "synthetic_alpha"])]
        from_flex: Option<usize>,
        /// Trace the mechanism and fit the traced samples.
        #[arg(long, conflicts_with = "synthetic_alpha")]
        from_trace: bool,
        /// Fit a synthetic profile with a known exponent (test hook).
        #[arg(long, value_name = "ALPHA")]
        synthetic_alpha: Option<f64>,
        /// Classify against every order up to this one.
        #[arg(long, default_value_t = 6)]
        max_order: usize,
        /// Which elongation measure to fit.
        #[arg(long, value_enum, default_value_t = MeasureArg::Squared)]
        measure: MeasureArg,
        /// Continuation steps for --from-trace.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Arclength step size for --from-trace.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Seed for the randomized parts of the order tests.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the double-Watt cusp construction end to end.
    CuspDemo {
        /// Directory for the branch CSV files.
        #[arg(long, default_value = "cusp-out")]
        out_dir: PathBuf,
        /// Shared vertical tracer acceleration (must be negative).
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        a: f64,
        /// Left tracer jerk.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b: f64,
        /// Also solve the unit-connector variant, where the branch
        /// relation reads 9*a^3 + (b_bar - b)^2 = 0 on the nose.
        #[arg(long)]
        with_unit_bar: bool,
        /// Demonstrate that a positive acceleration is rejected.
        #[arg(long)]
        a_positive: bool,
        /// Seed for the randomized parts of the order tests.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { path } => commands::cmd_validate(&path),
        Command::Analyze {
            path,
            max_order,
            seed,
        } => commands::cmd_analyze(&path, max_order, seed),
        Command::Trace {
            path,
            direction,
            steps,
            step,
            out,
            seed,
        } => commands::cmd_trace(&path, &direction, steps, step, &out, seed),
        Command::Order {
            path,
            from_flex,
            from_trace,
            synthetic_alpha,
            max_order,
            measure,
            steps,
            step,
            seed,
        } => {
            let source = match (from_flex, from_trace, synthetic_alpha) {
                (Some(n), false, None) => OrderSource::FromFlex(n),
                (None, true, None) => OrderSource::FromTrace,
                (None, false, Some(alpha)) => OrderSource::Synthetic(alpha),
                _ => {
                    return Err(CliError::Runtime(
                        "choose exactly one of --from-flex, --from-trace, --synthetic-alpha"
                            .to_string(),
                    ))
                }
            };
            commands::cmd_order(
                path.as_deref(),
                source,
                max_order,
                measure.into(),
                steps,
                step,
                seed,
            )
        }
        Command::CuspDemo {
            out_dir,
            a,
            b,
            with_unit_bar,
            a_positive,
            seed,
        } => commands::cmd_cusp_demo(&out_dir, a, b, with_unit_bar, a_positive, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(message)) => {
            for line in message.lines() {
                eprintln!("invalid input: {line}");
            }
            ExitCode::from(2)
        }
    }
}
