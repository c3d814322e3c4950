//! Command-line driver.
//!
//! Exit codes: 0 success, 1 selftest failure, 2 configuration error,
//! 3 evaluator error. `HOROMASS_THREADS` sets the worker count.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, ExperimentConfig};

use crate::quadrature::with_workers;
use crate::selftest::{self, SelftestOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVALUATOR: i32 = 3;

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "HOROMASS_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Eval(crate::Error),
    Io { path: PathBuf, source: std::io::Error },
    SelftestFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Eval(_) => EXIT_EVALUATOR,
            CliError::SelftestFailed(_) => EXIT_SELFTEST,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Eval(e) => write!(f, "evaluator error: {e}"),
            CliError::Io { path, source } => write!(f, "cannot access {}: {source}", path.display()),
            CliError::SelftestFailed(k) => write!(f, "selftest: {k} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Eval(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "horomass", version, about = "Mass of asymptotically hyperbolic and flat metrics by surface integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one evaluator over an L or r sweep and extrapolate.
    Mass(ExperimentArgs),
    /// Flux through each piece of the parabolic cylinder, with decay exponents.
    CylinderReport(ExperimentArgs),
    /// Footprint size of a region and the mass outside it.
    Theta(ExperimentArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

/// Experiment flags. Each maps onto a config key and overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub evaluator: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// L values, comma-separated.
    #[arg(long = "L", value_name = "LIST")]
    pub l: Option<String>,
    /// r values, comma-separated.
    #[arg(long, value_name = "LIST")]
    pub r: Option<String>,
    /// sigma(L) = e^{kL}.
    #[arg(long = "sigma-k")]
    pub sigma_k: Option<String>,
    /// `auto` or a disk radius.
    #[arg(long = "rho-max")]
    pub rho_max: Option<String>,
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long)]
    pub region: Option<String>,
    /// Divide by 2(n-1)omega_{n-1} so AdS-Schwarzschild reads m.
    #[arg(long)]
    pub normalize: bool,
    /// Finite-difference derivatives.
    #[arg(long)]
    pub fd: bool,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    pub out: Option<String>,
    /// SVG output path.
    #[arg(long)]
    pub svg: Option<String>,
    /// Print the normalized configuration and exit.
    #[arg(long = "print-config")]
    pub print_config: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SelftestArgs {
    /// Run only these criteria.
    #[arg(long = "only", value_name = "ID")]
    pub only: Vec<u8>,
    /// Test hook: multiply every tolerance by this factor.
    #[arg(long = "tolerance-scale", hide = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write_file(path: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

impl ExperimentArgs {
    /// Defaults, then the config file, then `--set`, then the named flags.
    pub fn to_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&read_file(path)?)?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::new(kv, "expected KEY=VALUE"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("evaluator", &self.evaluator),
            ("model.name", &self.model),
            ("model.m", &self.m),
            ("model.n", &self.n),
            ("model.q", &self.q),
            ("sweep.L", &self.l),
            ("sweep.r", &self.r),
            ("sweep.sigma_k", &self.sigma_k),
            ("sweep.rho_max", &self.rho_max),
            ("sweep.direction", &self.direction),
            ("sweep.potential", &self.potential),
            ("region.kind", &self.region),
            ("output.csv", &self.out),
            ("output.svg", &self.svg),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.normalize {
            cfg.normalize = true;
        }
        if self.fd {
            cfg.derivatives = crate::jet::DerivMode::FiniteDifference;
        }
        Ok(cfg)
    }
}

/// Worker count from `HOROMASS_THREADS`; `None` leaves rayon's default.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(ConfigError::new(THREADS_ENV, format!("expected a positive integer, got `{s}`")).into()),
        },
    }
}

fn emit(cfg: &ExperimentConfig, table: &str, plot: impl FnOnce() -> output::LinePlot, out: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.csv {
        Some(path) => write_file(path, table)?,
        None => out
            .write_all(table.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?,
    }
    if let Some(path) = &cfg.svg {
        write_file(path, &plot().to_svg())?;
    }
    Ok(())
}

/// Run a parsed command, writing tables to `out` and progress to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let workers = workers_from_env()?;
    match &cli.command {
        Command::Mass(args) | Command::CylinderReport(args) | Command::Theta(args) => {
            let cfg = args.to_config()?;
            if args.print_config {
                let _ = out.write_all(cfg.normalized().as_bytes());
                return Ok(());
            }
            match &cli.command {
                Command::Mass(_) => {
                    let rows = with_workers(workers, || commands::mass_rows(&cfg))?;
                    for r in &rows {
                        for note in &r.notes {
                            let _ = writeln!(err, "note ({} = {}): {note}", r.param_name, r.param_value);
                        }
                    }
                    if let Some(x) = rows.last().and_then(|r| r.extrapolated) {
                        let _ = writeln!(err, "extrapolated {}: {x:.12}", cfg.evaluator);
                    }
                    emit(&cfg, &commands::mass_csv(&rows), || commands::mass_plot(&cfg, &rows), out)
                }
                Command::CylinderReport(_) => {
                    let rows = with_workers(workers, || commands::cylinder_rows(&cfg))?;
                    emit(&cfg, &commands::cylinder_csv(&rows), || commands::cylinder_plot(&rows), out)
                }
                _ => {
                    let rows = with_workers(workers, || commands::theta_rows(&cfg))?;
                    emit(&cfg, &commands::theta_csv(&rows), || commands::theta_plot(&rows), out)
                }
            }
        }
        Command::Selftest(args) => {
            let opts = SelftestOptions { tolerance_scale: args.tolerance_scale, only: args.only.clone() };
            let report = with_workers(workers, || selftest::run(&opts));
            let _ = out.write_all(report.table().as_bytes());
            let failed = report.failures();
            if failed > 0 {
                Err(CliError::SelftestFailed(failed))
            } else {
                Ok(())
            }
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "horomass: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_from_args(std::iter::once("horomass").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&["mass", "--evaluator", "cube"]).0, EXIT_CONFIG);
        assert_eq!(run(&["mass", "--set", "sweep.bogus=1"]).0, EXIT_CONFIG);
        assert_eq!(run(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
        let (code, _, err) = run(&["mass", "--evaluator", "sphere", "--r", "0.5,1"]);
        assert_eq!(code, EXIT_EVALUATOR);
        assert!(err.contains("r_min"), "{err}");
        let (code, _, err) = run(&["mass", "--config", "/nonexistent/x.cfg"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("/nonexistent/x.cfg"));
    }

    #[test]
    fn flags_override_config_keys() {
        let (code, out, _) = run(&["mass", "--set", "model.m=2", "--m", "3", "--L", "1,2", "--fd", "--print-config"]);
        assert_eq!(code, 0);
        let cfg = ExperimentConfig::parse(&out).unwrap();
        assert_eq!(cfg.m, 3.0);
        assert_eq!(cfg.l_list, vec![1.0, 2.0]);
        assert_eq!(cfg.derivatives, crate::jet::DerivMode::FiniteDifference);
    }

    #[test]
    fn sphere_on_background_prints_table() {
        let (code, out, _) = run(&["mass", "--evaluator", "sphere", "--model", "hyperbolic", "--n", "3", "--r", "10,20"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], commands::MASS_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("sphere,r,1.0000000000000000e1,"));
    }
}
