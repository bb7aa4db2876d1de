//! `cpt-squeeze`: command-line front end for the squeezed-light simulator.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 invalid physical
//! parameters, 4 numerical failure.

mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use figures::FigureId;
use output::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid parameters: {0}")]
    Physics(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<cpt_squeeze::Error> for CliError {
    fn from(e: cpt_squeeze::Error) -> Self {
        use cpt_squeeze::Error as E;
        match e {
            E::InvalidParams(_) | E::UndefinedInput(_) => CliError::Physics(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cpt-squeeze", version, about = "Squeezed light from a coherent-population-trapping medium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Atomic steady state and response coefficients at the input fields.
    Steady(Run),
    /// Mean-field propagation; writes the field profile.
    Propagate(Run),
    /// Output quadrature variance at the optimal angle.
    Squeeze(Run),
    /// Minimise V over the common input Rabi frequency.
    OptimizeRabi(Run),
    /// Minimise V over the two-photon detuning.
    OptimizeDetuning(Run),
    /// V on an (omega, delta) grid.
    Sweep(Run),
    /// Squeezing spectrum at the optimal zero-frequency angle.
    Spectrum(Run),
    /// Detuning optimisation for several probe/coupling Rabi ratios.
    RatioScan(Run),
    /// Rabi optimisation under the three detuning splits.
    CompareSettings(Run),
    /// Reproduce one of the fixed figure data sets.
    Figure {
        id: FigureId,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        xi_steps: Option<usize>,
        #[command(flatten)]
        io: IoArgs,
    },
}

#[derive(Args, Debug)]
struct Run {
    #[command(flatten)]
    physics: PhysicsArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug, Default)]
struct PhysicsArgs {
    /// Optical depth alpha.
    #[arg(long = "od", visible_alias = "alpha", allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Common input Rabi frequency, in units of Gamma.
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Input probe Rabi frequency, `re` or `re,im`.
    #[arg(long = "omega-p", allow_hyphen_values = true)]
    omega_p0: Option<String>,
    /// Input coupling Rabi frequency, `re` or `re,im`.
    #[arg(long = "omega-c", allow_hyphen_values = true)]
    omega_c0: Option<String>,
    /// Two-photon detuning.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_c: Option<f64>,
    /// How delta is split between the fields: symmetric, probe-only, coupling-only.
    #[arg(long)]
    setting: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Ground-state decoherence rate.
    #[arg(long, allow_negative_numbers = true)]
    gamma12: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma2: Option<f64>,
    /// Medium transit factor L/c in units of 1/Gamma (spectra only).
    #[arg(long, allow_negative_numbers = true)]
    lc: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g_norm: Option<f64>,
    /// Base number of propagation steps.
    #[arg(long)]
    xi_steps: Option<usize>,
    /// Probe/coupling ratios for ratio-scan, comma separated.
    #[arg(long)]
    ratios: Option<String>,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    omega_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega_max: Option<f64>,
    #[arg(long)]
    omega_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_points: Option<usize>,
    /// Noise-frequency grid for spectra.
    #[arg(long, allow_negative_numbers = true)]
    w_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    w_max: Option<f64>,
    #[arg(long)]
    w_points: Option<usize>,
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Config file: `key = value` lines or one JSON object. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; defaults to `<command>.csv` (or `.json`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn push<T: ToString>(flags: &mut RunConfig, key: &str, v: &Option<T>) -> Result<(), CliError> {
    match v {
        Some(v) => flags.set(key, &v.to_string()),
        None => Ok(()),
    }
}

impl PhysicsArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<(), CliError> {
        push(c, "alpha", &self.alpha)?;
        push(c, "omega", &self.omega)?;
        push(c, "omega_p0", &self.omega_p0)?;
        push(c, "omega_c0", &self.omega_c0)?;
        push(c, "delta", &self.delta)?;
        push(c, "delta_p", &self.delta_p)?;
        push(c, "delta_c", &self.delta_c)?;
        push(c, "setting", &self.setting)?;
        push(c, "gamma", &self.gamma)?;
        push(c, "gamma12", &self.gamma12)?;
        push(c, "gamma1", &self.gamma1)?;
        push(c, "gamma2", &self.gamma2)?;
        push(c, "lc", &self.lc)?;
        push(c, "g_norm", &self.g_norm)?;
        push(c, "xi_steps", &self.xi_steps)?;
        push(c, config::RATIOS_KEY, &self.ratios)
    }
}

impl GridArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<(), CliError> {
        push(c, "omega_min", &self.omega_min)?;
        push(c, "omega_max", &self.omega_max)?;
        push(c, "omega_points", &self.omega_points)?;
        push(c, "delta_min", &self.delta_min)?;
        push(c, "delta_max", &self.delta_max)?;
        push(c, "delta_points", &self.delta_points)?;
        push(c, "w_min", &self.w_min)?;
        push(c, "w_max", &self.w_max)?;
        push(c, "w_points", &self.w_points)
    }
}

/// Config file first, then flags on top.
fn build_config(io: &IoArgs, apply: impl FnOnce(&mut RunConfig) -> Result<(), CliError>) -> Result<RunConfig, CliError> {
    let mut cfg = match &io.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig::default();
    apply(&mut flags)?;
    cfg.merge(&flags);
    Ok(cfg)
}

type Handler = fn(&mut RunConfig) -> Result<output::Report, CliError>;

fn run(cli: Cli) -> Result<String, CliError> {
    let (name, io, cfg, report) = match cli.command {
        Command::Figure { id, grid, xi_steps, io } => {
            let cfg = build_config(&io, |c| {
                grid.apply(c)?;
                push(c, "xi_steps", &xi_steps)
            })?;
            let report = figures::figure(id, &cfg)?;
            (format!("figure-{}", id.name()), io, cfg, report)
        }
        cmd => {
            let (name, args, f): (&str, Run, Handler) = match cmd {
                Command::Steady(a) => ("steady", a, commands::steady),
                Command::Propagate(a) => ("propagate", a, commands::propagate),
                Command::Squeeze(a) => ("squeeze", a, commands::squeeze_cmd),
                Command::OptimizeRabi(a) => ("optimize-rabi", a, commands::optimize_rabi),
                Command::OptimizeDetuning(a) => ("optimize-detuning", a, commands::optimize_detuning),
                Command::Sweep(a) => ("sweep", a, commands::sweep),
                Command::Spectrum(a) => ("spectrum", a, commands::spectrum),
                Command::RatioScan(a) => ("ratio-scan", a, commands::ratio_scan_cmd),
                Command::CompareSettings(a) => ("compare-settings", a, commands::compare_settings),
                Command::Figure { .. } => unreachable!("handled above"),
            };
            let mut cfg = build_config(&args.io, |c| {
                args.physics.apply(c)?;
                args.grid.apply(c)
            })?;
            let report = f(&mut cfg)?;
            (name.to_string(), args.io, cfg, report)
        }
    };
    let out = io.out.clone().unwrap_or_else(|| {
        PathBuf::from(match io.format {
            Format::Csv => format!("{name}.csv"),
            Format::Json => format!("{name}.json"),
        })
    });
    let files = output::write_report(&report, &cfg, &out, io.format)?;
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    Ok(format!("{} -> {}", report.summary, names.join(", ")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
