mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

/// Electro-elastic PANN pipeline: data generation, calibration, analysis and
/// finite element runs. Flags override values from the config file.
#[derive(Debug, Parser)]
#[command(name = "electropann", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model selector: gt:mr, gt:laminate or pann:<file>.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (calibration restarts); 1 is deterministic by construction.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample load states and evaluate a ground-truth model.
    GenData(GenDataArgs),
    /// Calibrate a PANN on a dataset.
    Calibrate(CalibrateArgs),
    /// Print log10(MSE) of a PANN on datasets.
    Evaluate(EvaluateArgs),
    /// Gauss-point equilibrium path under a growing field.
    Path(PathArgs),
    /// Acoustic-tensor scan at a probe state or over a dataset.
    Ellipticity(ScanArgs),
    /// Directional moduli at a probe state.
    Moduli(ScanArgs),
    /// Legendre transform diagnostics at a probe state.
    LegendreCheck(LegendreArgs),
    /// Finite element run with load stepping.
    Fem(FemArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n_dirs: Option<usize>,
    #[arg(long)]
    pub n_amps: Option<usize>,
    #[arg(long)]
    pub n_d0_amps: Option<usize>,
    #[arg(long)]
    pub amp_max: Option<f64>,
    #[arg(long)]
    pub d0_max: Option<f64>,
    /// Flag every record with the ellipticity scan.
    #[arg(long)]
    pub scan: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Calibration dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test dataset used for restart selection.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Calibration report destination; stderr when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// iso or ti.
    #[arg(long)]
    pub symmetry: Option<String>,
    /// polyconvex or unconstrained.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    /// Largest field in units of `e0_unit`.
    #[arg(long)]
    pub e0_max: Option<f64>,
    /// Number of output rows, the reference state included.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Field unit; defaults to sqrt(mu1/eps) of the Mooney-Rivlin parameters.
    #[arg(long)]
    pub e0_unit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long)]
    pub n_psi: Option<usize>,
    /// Scan every record of this dataset instead of the probe state.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LegendreArgs {}

#[derive(Debug, Args)]
pub struct FemArgs {
    /// Mesh file (mesh-v1); overrides the configured box mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Number of equal load steps up to 1.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Directory for per-step nodal and quadrature-point tables.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = commands::Context::new(&cli.global, cfg)?;
    match &cli.command {
        Command::GenData(a) => commands::gen_data(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Path(a) => commands::path(&ctx, a),
        Command::Ellipticity(a) => commands::ellipticity(&ctx, a),
        Command::Moduli(a) => commands::moduli(&ctx, a),
        Command::LegendreCheck(_) => commands::legendre_check(&ctx),
        Command::Fem(a) => commands::fem(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.global.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
