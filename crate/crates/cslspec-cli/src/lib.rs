//! `cslspec` — command-line front end for the spectrum and collapse-model
//! correction library.
//!
//! Subcommands:
//!
//! * `spectrum`        — standard curvature power spectrum on a k-grid
//! * `correction`      — collapse correction δP (closed form or quadrature)
//! * `bound`           — collapse-rate bound from an amplitude error bar
//! * `compare-kernels` — cross-check the two exact-kernel evaluation routes
//! * `modes`           — dump mode functions and invariants on an η-grid
//! * `kernel`          — evaluate one kernel at one phase-space point
//! * `simulate`        — collapse toy model: master / trajectories / perturbative
//! * `reproduce`       — headline-number pass/fail table
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical
//! non-convergence, 4 reproduction-check failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cslspec_core::{CoreError, EraTag, KernelVariant};

#[derive(Debug, Parser)]
#[command(
    name = "cslspec",
    version,
    about = "Inflationary curvature spectrum and collapse-model corrections"
)]
pub struct Cli {
    /// Configuration file (TOML; `.json` for JSON). Defaults to fiducials.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output file; `.csv` writes tabular form, anything else JSON.
    /// Without it, JSON goes to stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Worker threads for the parallel quadratures and ensembles
    /// (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Print progress details to stderr.
    #[arg(long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Standard curvature power spectrum P(k) on a log k-grid.
    Spectrum(SpectrumArgs),
    /// Collapse correction spectrum δP(q).
    Correction(CorrectionArgs),
    /// Collapse-rate bound λ_max from an amplitude error bar.
    Bound(BoundArgs),
    /// Cross-check the transcription and composition routes to the exact
    /// kernel at random phase-space points.
    CompareKernels(CompareKernelsArgs),
    /// Dump mode functions, curvature, and the Wronskian on an η-grid.
    Modes(ModesArgs),
    /// Evaluate a single kernel at a single point.
    Kernel(KernelArgs),
    /// Collapse toy model: master equation vs trajectory ensemble vs
    /// first-order perturbation theory.
    Simulate(SimulateArgs),
    /// Recompute the headline numbers and check them against their
    /// published windows.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EraArg {
    Inflation,
    Radiation,
}

impl From<EraArg> for EraTag {
    fn from(e: EraArg) -> EraTag {
        match e {
            EraArg::Inflation => EraTag::Inflation,
            EraArg::Radiation => EraTag::Radiation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Exact,
    Leading,
    Linearized,
}

impl From<VariantArg> for KernelVariant {
    fn from(v: VariantArg) -> KernelVariant {
        match v {
            VariantArg::Exact => KernelVariant::ExactQuadratic,
            VariantArg::Leading => KernelVariant::LeadingQuadratic,
            VariantArg::Linearized => KernelVariant::Linearized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Quadrature for the exact kernel, closed form otherwise.
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_enum, default_value = "inflation")]
    pub era: EraArg,
    /// Evaluation time (default: end of the era).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Grid bounds in Planck units (default: the configured q-window).
    #[arg(long)]
    pub k_min: Option<f64>,
    #[arg(long)]
    pub k_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorrectionArgs {
    #[arg(long, value_enum, default_value = "inflation")]
    pub era: EraArg,
    #[arg(long, value_enum, default_value = "leading")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Observational error bar on the spectrum amplitude.
    #[arg(long, default_value_t = 1e-11)]
    pub sigma: f64,
    /// Laboratory reference rate the bound is contrasted against, s⁻¹.
    #[arg(long, default_value_t = 1e-10)]
    pub reference_rate: f64,
}

#[derive(Debug, Args)]
pub struct CompareKernelsArgs {
    /// Restrict to one era (default: both).
    #[arg(long, value_enum)]
    pub era: Option<EraArg>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Largest acceptable relative deviation between the two routes.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long, value_enum, default_value = "inflation")]
    pub era: EraArg,
    /// Wavenumber in Planck units.
    #[arg(long, default_value_t = 5e-60)]
    pub k: f64,
    #[arg(long, default_value_t = 48)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    /// Adaptive exact kernel (composition route).
    Exact,
    /// Adaptive exact kernel, direct transcription route.
    ExactTranscribed,
    /// Orientation-averaged exact kernel.
    ExactSymmetrized,
    /// Leading superhorizon kernel (four-term during inflation).
    Leading,
    /// Leading inflation kernel truncated to the dominant pair.
    LeadingTwoTerm,
    /// Linearized-operator kernel.
    Linearized,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "inflation")]
    pub era: EraArg,
    /// Internal momentum, Planck units.
    #[arg(long)]
    pub p: f64,
    /// External momentum, Planck units.
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub costheta: f64,
    /// Collapse-insertion time η′, Planck units.
    #[arg(long, allow_hyphen_values = true)]
    pub eta_prime: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub variant: KernelChoice,
    /// Also evaluate the big-float oracle at this precision and report the
    /// relative deviation.
    #[arg(long)]
    pub oracle_bits: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CollapseOpArg {
    Number,
    PositionSq,
    Hamiltonian,
}

impl From<CollapseOpArg> for cslspec_core::CollapseOp {
    fn from(c: CollapseOpArg) -> Self {
        match c {
            CollapseOpArg::Number => cslspec_core::CollapseOp::Number,
            CollapseOpArg::PositionSq => cslspec_core::CollapseOp::PositionSq,
            CollapseOpArg::Hamiltonian => cslspec_core::CollapseOp::Hamiltonian,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Hilbert-space dimension (≥ 3).
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Contracted collapse rate γ_eff.
    #[arg(long, default_value_t = 0.1)]
    pub lambda_eff: f64,
    #[arg(long, value_enum, default_value = "position-sq")]
    pub collapse_op: CollapseOpArg,
    #[arg(long, default_value_t = 10_000)]
    pub ntraj: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    /// Trajectory steps (default: chosen from the noise-resolution bound).
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Skip the leading-kernel quadrature cross-checks (closed forms and
    /// bound only).
    #[arg(long)]
    pub skip_quadrature: bool,
    #[arg(long, default_value_t = 1e-11)]
    pub sigma: f64,
}

/// Errors surfaced to the user, each mapped to a documented exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("reproduction check failed: {0}")]
    Reproduction(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Reproduction(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::Validation { .. } | CoreError::Domain(_) => CliError::Config(e.to_string()),
            CoreError::NonConvergence { .. } | CoreError::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Parse arguments and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version arrive here as non-errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = config::load_config(cli.config.as_deref())?;
    let params = cfg.build()?;
    let ctx = commands::Ctx {
        params,
        out: cli.out,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Spectrum(args) => commands::spectrum::run(&ctx, &args),
        Command::Correction(args) => commands::correction::run(&ctx, &args),
        Command::Bound(args) => commands::bound::run(&ctx, &args),
        Command::CompareKernels(args) => commands::compare::run(&ctx, &args),
        Command::Modes(args) => commands::modes_dump::run(&ctx, &args),
        Command::Kernel(args) => commands::kernel_eval::run(&ctx, &args),
        Command::Simulate(args) => commands::simulate::run(&ctx, &args),
        Command::Reproduce(args) => commands::reproduce::run(&ctx, &args),
    }
}
