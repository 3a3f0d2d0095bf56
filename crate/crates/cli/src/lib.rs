//! Command-line front end for `vceo`: instance files, the five commands and
//! their renderings.

pub mod commands;
pub mod instance;
pub mod range;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Outcome, SweepRow, EXIT_INFEASIBLE, EXIT_OK, EXIT_OUTSIDE_CONDITION, EXIT_PARSE, EXIT_VERIFY_FAIL};
pub use instance::{InstanceError, InstanceSpec, SweepVar, Unit};
pub use range::{parse_range, SweepRange};
pub use report::OutputFormat;

#[derive(Debug, Parser)]
#[command(name = "vceo", version, about = "Sum rate of the two-encoder, two-description Gaussian CEO problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file (TOML).
    #[arg(long)]
    pub instance: PathBuf,
    /// Optimizer tolerance; for `verify`, the identity tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Optimizer multistart count.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Lower-bound grid points per dimension.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report rates in bits instead of nats.
    #[arg(long)]
    pub bits: bool,
    #[arg(long, value_enum)]
    pub output: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the achievable sum rate over Gaussian schemes.
    SumRate(Common),
    /// Evaluate the sum-rate lower bound.
    LowerBound(Common),
    /// Certify that the bound is met with equality.
    Verify(Common),
    /// Trace achievable rate and bound along one instance field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Field to vary: D0, D1, D2, sigma_s2, sigma_n1_2, sigma_n2_2.
        #[arg(long)]
        var: Option<String>,
        /// `start:end`.
        #[arg(long)]
        range: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Check closed-form distortions against Monte-Carlo estimates.
    McCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn parse_error(msg: impl std::fmt::Display) -> Outcome {
    Outcome { code: EXIT_PARSE, stdout: String::new(), stderr: format!("error: {msg}\n") }
}

fn load(common: &Common) -> Result<InstanceSpec, Outcome> {
    let mut spec = InstanceSpec::load(&common.instance).map_err(parse_error)?;
    if let Some(v) = common.starts {
        spec.options.starts = v;
    }
    if let Some(v) = common.grid {
        spec.options.grid = v;
    }
    if let Some(v) = common.seed {
        spec.options.seed = v;
    }
    if common.bits {
        spec.options.unit = Unit::Bits;
    }
    Ok(spec)
}

fn settings(common: &Common, spec: &InstanceSpec, default: OutputFormat) -> commands::Settings {
    commands::Settings { unit: spec.options.unit, format: common.output.unwrap_or(default) }
}

/// Runs an already parsed command line.
pub fn execute(cli: Cli) -> Outcome {
    let outcome = match &cli.command {
        Command::SumRate(c) | Command::LowerBound(c) | Command::Verify(c) => {
            let mut spec = match load(c) {
                Ok(s) => s,
                Err(o) => return o,
            };
            let is_verify = matches!(cli.command, Command::Verify(_));
            if let (Some(t), false) = (c.tol, is_verify) {
                spec.options.tol = t;
            }
            if let Err(e) = spec.check() {
                return parse_error(e);
            }
            let s = settings(c, &spec, OutputFormat::Text);
            match cli.command {
                Command::SumRate(_) => commands::sum_rate(&spec, s),
                Command::LowerBound(_) => commands::lower_bound_cmd(&spec, s),
                _ => {
                    let tol = c.tol.unwrap_or(spec.options.verify_tol);
                    if !(tol.is_finite() && tol >= 0.0) {
                        return parse_error(format!("--tol must be finite and >= 0, got {tol}"));
                    }
                    commands::verify(&spec, s, tol, spec.options.optimizer_rel_tol)
                }
            }
        }
        Command::Sweep { common, var, range, steps } => {
            let mut spec = match load(common) {
                Ok(s) => s,
                Err(o) => return o,
            };
            if let Some(t) = common.tol {
                spec.options.tol = t;
            }
            if let Err(e) = spec.check() {
                return parse_error(e);
            }
            let var = match (var, &spec.sweep) {
                (Some(v), _) => match v.parse::<SweepVar>() {
                    Ok(v) => v,
                    Err(e) => return parse_error(e),
                },
                (None, Some(sw)) => sw.var,
                (None, None) => return parse_error("no sweep variable: pass --var or add a [sweep] table"),
            };
            let range = match (range, &spec.sweep) {
                (Some(r), _) => match parse_range(r) {
                    Ok(r) => r,
                    Err(e) => return parse_error(format!("--range: {e}")),
                },
                (None, Some(sw)) => match sw.parsed_range() {
                    Ok(r) => r,
                    Err(e) => return parse_error(e),
                },
                (None, None) => return parse_error("no sweep range: pass --range or add a [sweep] table"),
            };
            let steps = steps.or(spec.sweep.as_ref().map(|s| s.steps)).unwrap_or(11);
            if steps == 0 {
                return parse_error("--steps must be at least 1");
            }
            let s = settings(common, &spec, OutputFormat::Csv);
            commands::sweep(&spec, s, var, &range.points(steps))
        }
        Command::McCheck { common, samples } => {
            let mut spec = match load(common) {
                Ok(s) => s,
                Err(o) => return o,
            };
            if let Some(t) = common.tol {
                spec.options.tol = t;
            }
            if let Some(n) = samples {
                spec.options.samples = *n;
            }
            if let Err(e) = spec.check() {
                return parse_error(e);
            }
            let s = settings(common, &spec, OutputFormat::Text);
            commands::mc_check(&spec, s, spec.options.samples, spec.options.seed)
        }
    };
    outcome
}

/// Parses `args` (including the program name) and runs the command. Usage
/// errors exit with the parse code; `--help` and `--version` exit 0.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            }
        }
    }
}
