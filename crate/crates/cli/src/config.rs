//! TOML run configuration. Every section is optional; each subcommand
//! resolves the keys it needs and reports the first missing or invalid one.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// `gt:mr`, `gt:laminate` or `pann:<file>`.
    pub model: Option<String>,
    pub mooney_rivlin: Option<MooneyRivlinSection>,
    pub laminate: Option<LaminateSection>,
    pub scale: Option<ScaleSection>,
    pub sampling: Option<SamplingSection>,
    pub ellipticity: Option<GridSection>,
    pub architecture: Option<ArchitectureSection>,
    pub calibration: Option<CalibrationSection>,
    pub path: Option<PathSection>,
    pub probe: Option<ProbeSection>,
    pub fem: Option<FemSection>,
    pub files: Option<FilesSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MooneyRivlinSection {
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateSection {
    pub f_m: Option<f64>,
    pub f_e: Option<f64>,
    pub c_a: Option<f64>,
    pub n: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    pub mu_ref: Option<f64>,
    pub eps_ref: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub n_dirs: Option<usize>,
    pub n_amps: Option<usize>,
    pub n_d0_amps: Option<usize>,
    pub amp_max: Option<f64>,
    pub d0_max: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_theta: Option<usize>,
    pub n_psi: Option<usize>,
    /// Flag every generated record with the ellipticity scan.
    pub scan_dataset: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    /// `iso` or `ti`.
    pub symmetry: Option<String>,
    pub n: Option<[f64; 3]>,
    /// `polyconvex` or `unconstrained`.
    pub mode: Option<String>,
    pub width: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub restarts: Option<usize>,
    pub batch: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    /// In units of `e0_unit`.
    pub e0_max: Option<f64>,
    pub steps: Option<usize>,
    /// Unit of the scaled field column; defaults to `sqrt(mu1/eps)`.
    pub e0_unit: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Deformation gradient, row-major.
    pub f: Option<[f64; 9]>,
    pub d0: Option<[f64; 3]>,
    pub e0: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub order: Option<String>,
    pub counts: Option<[usize; 3]>,
    pub lengths: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSetSection {
    pub name: String,
    /// `x`, `y` or `z`.
    pub axis: String,
    pub value: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSection {
    pub set: String,
    /// `ux`, `uy`, `uz` or `phi`.
    pub field: String,
    pub value: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceChargeSection {
    pub set: String,
    pub density: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemSection {
    pub mesh: Option<PathBuf>,
    #[serde(rename = "box")]
    pub box_mesh: Option<BoxSection>,
    #[serde(default)]
    pub plane_sets: Vec<PlaneSetSection>,
    #[serde(default)]
    pub dirichlet: Vec<DirichletSection>,
    #[serde(default)]
    pub surface_charge: Vec<SurfaceChargeSection>,
    pub body_force: Option<[f64; 3]>,
    pub charge_density: Option<f64>,
    pub schedule: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub min_step: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    pub output: Option<PathBuf>,
    pub calibration_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let key = e.message().split('`').nth(1).map(str::to_string).unwrap_or_else(|| "<document>".to_string());
            CliError::config(key, e.message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// `Some(flag)` wins over `Some(file)`; reports `key` when both are absent.
pub fn require<T>(flag: Option<T>, file: Option<T>, key: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| CliError::config(key, "required value is missing"))
}

pub fn positive(v: f64, key: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be positive, got {v}")))
    }
}

pub fn at_least_one(v: usize, key: &str) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::config(key, "must be at least 1"))
    }
}
