//! Command-line front end for the `weakdep` library. The binary is a thin
//! wrapper around [`run`]; the `cmd_*` functions are usable in-process.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input or output error
//! (including malformed JSON and bad flags), 3 law outside the model,
//! 4 sequence generation failure.

mod commands;
mod error;
pub mod plan;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_adversarial, cmd_coverage, cmd_solve, cmd_validate, json_sibling, CoverageOptions, CoverageOutput,
    SequenceFile, SolveOutput, ValidateOutput,
};
pub use error::CliError;

/// Run configuration; all randomness comes from `--seed`.
#[derive(Debug, Clone, Parser)]
#[command(name = "weakdep", version, about = "Integral-equation functionals under weak dependence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed for sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Confidence level 1 − α.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub level: f64,

    /// Residual and certification tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,

    /// Grid points for score inversion.
    #[arg(long, global = true, default_value_t = 4001)]
    pub grid: usize,

    /// Output path (directory for `adversarial`, CSV file for `coverage`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Human-readable tables instead of JSON/CSV on stdout.
    #[arg(long, global = true)]
    pub pretty: bool,

    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true, env = "WEAKDEP_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check a law file against the law invariants.
    Validate { law: PathBuf },
    /// Solve the integral equation and evaluate the functional.
    Solve { law: PathBuf, spec: PathBuf },
    /// Generate laws with a fixed functional value converging to the base.
    Adversarial {
        base: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        zeta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        tv_targets: Vec<f64>,
    },
    /// Run a coverage experiment.
    Coverage {
        plan: PathBuf,
        /// Comma-separated list replacing the plan's methods.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

impl Cli {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Input(format!("--level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Input(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.grid < 2 {
            return Err(CliError::Input(format!("--grid needs at least 2 points, got {}", self.grid)));
        }
        if let Command::Adversarial { zeta, .. } = &self.command {
            if !zeta.is_finite() {
                return Err(CliError::Input(format!("--zeta must be finite, got {zeta}")));
            }
        }
        Ok(())
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    cli.validate()?;
    let out = cli.out.as_deref();
    let text = match &cli.command {
        Command::Validate { law } => {
            let r = cmd_validate(law)?;
            if cli.pretty { "valid\n".to_string() } else { commands::to_json(&r) + "\n" }
        }
        Command::Solve { law, spec } => {
            let r = cmd_solve(law, spec, cli.tol)?;
            if let Some(path) = out {
                std::fs::write(path, commands::to_json(&r))?;
            }
            if cli.pretty { commands::pretty_solve(&r) } else { commands::to_json(&r) + "\n" }
        }
        Command::Adversarial { base, zeta, tv_targets } => {
            let r = cmd_adversarial(base, *zeta, tv_targets, cli.tol, out)?;
            if cli.pretty {
                commands::pretty_certificates(&r.certificates)
            } else if out.is_some() {
                commands::to_json(&r.certificates) + "\n"
            } else {
                commands::to_json(&r) + "\n"
            }
        }
        Command::Coverage { plan, methods } => {
            let opts =
                CoverageOptions { seed: cli.seed, level: cli.level, tol: cli.tol, grid: cli.grid, methods: methods.clone() };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.threads)
                .build()
                .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
            let start = Instant::now();
            let r = pool.install(|| cmd_coverage(plan, &opts, out))?;
            let _ = writeln!(
                stderr,
                "{} cells, {} threads, {:.2} s",
                r.report.cells.len(),
                pool.current_num_threads(),
                start.elapsed().as_secs_f64()
            );
            if cli.pretty {
                commands::pretty_coverage(&r.report)
            } else if out.is_some() {
                String::new()
            } else {
                r.csv
            }
        }
    };
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            if let Some(report) = e.report() {
                let _ = writeln!(stdout, "{report}");
            }
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
