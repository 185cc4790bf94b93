//! Rank-one convexity diagnostics.
//!
//! The electromechanical acoustic tensor condenses the electric jump out of
//! the second variation:
//!
//! ```text
//! Q_ij = A_iIjJ V_I V_J + b_Ki M_KL b_Lj,     b_Ki = B_iIK V_I
//! M    = (D⁻¹V ⊗ D⁻¹V) / (V · D⁻¹V) − D⁻¹
//! ```
//!
//! with `A = ∂²e/∂F∂F`, `B = ∂²e/∂F∂d0`, `D = ∂²e/∂d0∂d0`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::energy::{EnergyOutput, InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Vector3};

/// Elliptic verdict threshold on the smallest acoustic eigenvalue.
pub const ELLIPTIC_TOL: f64 = 1e-9;

/// Uniform `(θ, ψ)` grid over `[0, 2π] × [0, π]`, both ends included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SphericalGrid {
    pub n_theta: usize,
    pub n_psi: usize,
}

impl Default for SphericalGrid {
    fn default() -> Self {
        Self { n_theta: 64, n_psi: 32 }
    }
}

impl SphericalGrid {
    pub fn new(n_theta: usize, n_psi: usize) -> Result<Self> {
        if n_theta == 0 || n_psi == 0 {
            return Err(Error::Config("spherical grid needs at least one node per axis".into()));
        }
        Ok(Self { n_theta, n_psi })
    }

    fn coord(k: usize, n: usize, span: f64) -> f64 {
        if n == 1 {
            0.0
        } else {
            span * k as f64 / (n - 1) as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.n_theta).flat_map(move |i| {
            let theta = Self::coord(i, self.n_theta, TAU);
            (0..self.n_psi).map(move |j| (theta, Self::coord(j, self.n_psi, PI)))
        })
    }
}

/// `V = (cos θ sin ψ, sin θ sin ψ, cos ψ)`.
pub fn direction(theta: f64, psi: f64) -> Vector3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Vector3::from_array([ct * sp, st * sp, cp])
}

/// Acoustic tensor from precomputed second derivatives.
pub fn acoustic_tensor_from(out: &EnergyOutput, v: &Vector3) -> Result<Tensor2> {
    let dinv = out.d2_d0d0.inverse().ok_or_else(|| Error::Stability("singular dielectric block".into()))?;
    acoustic_with_inverse(out, &dinv, v)
}

fn acoustic_with_inverse(out: &EnergyOutput, dinv: &Tensor2, v: &Vector3) -> Result<Tensor2> {
    let dv = dinv.apply(v);
    let denom = v.dot(&dv);
    if denom.abs() < 1e-300 || !denom.is_finite() {
        return Err(Error::Stability("V · D⁻¹ V vanishes".into()));
    }
    let m = dv.outer(&dv).scale(1.0 / denom) - *dinv;
    let q_mech = out.d2_ff.contract_inner(v, v);
    // b[K][i] = B_iIK V_I
    let b = Tensor2::from_fn(|k, i| (0..3).map(|ii| out.d2_fd0[(i, ii, k)] * v[ii]).sum());
    let q = q_mech + b.transpose().dot(&m).dot(&b);
    Ok(q.sym())
}

/// Acoustic tensor of `model` at `state` in direction `v` (unit length).
pub fn acoustic_tensor<M: InternalEnergy + ?Sized>(model: &M, state: &MaterialState, v: &Vector3) -> Result<Tensor2> {
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Stability(format!("direction must be a unit vector, |V| = {}", v.norm())));
    }
    acoustic_tensor_from(&model.evaluate(state)?, v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityResult {
    pub min_eigenvalue: f64,
    pub min_least_minor: f64,
    /// `(θ, ψ)` of the smallest eigenvalue.
    pub argmin: (f64, f64),
    pub elliptic: bool,
}

/// Scan over precomputed second derivatives.
pub fn ellipticity_scan_from(out: &EnergyOutput, grid: &SphericalGrid) -> Result<EllipticityResult> {
    let dinv = out.d2_d0d0.inverse().ok_or_else(|| Error::Stability("singular dielectric block".into()))?;
    let mut res = EllipticityResult {
        min_eigenvalue: f64::INFINITY,
        min_least_minor: f64::INFINITY,
        argmin: (0.0, 0.0),
        elliptic: true,
    };
    for (theta, psi) in grid.nodes() {
        let q = acoustic_with_inverse(out, &dinv, &direction(theta, psi))?;
        let lmin = q.sym_eigenvalues()[0];
        if lmin < res.min_eigenvalue {
            res.min_eigenvalue = lmin;
            res.argmin = (theta, psi);
        }
        let minor = q.leading_minors().iter().cloned().fold(f64::INFINITY, f64::min);
        res.min_least_minor = res.min_least_minor.min(minor);
    }
    res.elliptic = res.min_eigenvalue >= -ELLIPTIC_TOL;
    Ok(res)
}

pub fn ellipticity_scan<M: InternalEnergy + ?Sized>(
    model: &M,
    state: &MaterialState,
    grid: &SphericalGrid,
) -> Result<EllipticityResult> {
    ellipticity_scan_from(&model.evaluate(state)?, grid)
}

/// Contractions of the three second-derivative blocks with powers of `e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moduli {
    pub mu: f64,
    pub q: f64,
    pub theta: f64,
}

pub fn moduli_at(out: &EnergyOutput, e: &Vector3) -> Moduli {
    let mut mu = 0.0;
    let mut q = 0.0;
    for i in 0..3 {
        for ii in 0..3 {
            let eii = e[i] * e[ii];
            for k in 0..3 {
                q += out.d2_fd0[(i, ii, k)] * eii * e[k];
                for kk in 0..3 {
                    mu += out.d2_ff[(i, ii, k, kk)] * eii * e[k] * e[kk];
                }
            }
        }
    }
    Moduli { mu, q, theta: e.dot(&out.d2_d0d0.apply(e)) }
}

/// Per-node `(θ, ψ, moduli)`.
pub fn moduli_scan<M: InternalEnergy + ?Sized>(
    model: &M,
    state: &MaterialState,
    grid: &SphericalGrid,
) -> Result<Vec<(f64, f64, Moduli)>> {
    let out = model.evaluate(state)?;
    Ok(grid.nodes().map(|(t, p)| (t, p, moduli_at(&out, &direction(t, p)))).collect())
}

/// One row of the exported scan table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub theta: f64,
    pub psi: f64,
    pub min_eigenvalue: f64,
    pub least_minor: f64,
    pub moduli: Moduli,
}

pub fn scan_table<M: InternalEnergy + ?Sized>(
    model: &M,
    state: &MaterialState,
    grid: &SphericalGrid,
) -> Result<Vec<ScanRow>> {
    let out = model.evaluate(state)?;
    let dinv = out.d2_d0d0.inverse().ok_or_else(|| Error::Stability("singular dielectric block".into()))?;
    grid.nodes()
        .map(|(theta, psi)| {
            let v = direction(theta, psi);
            let q = acoustic_with_inverse(&out, &dinv, &v)?;
            Ok(ScanRow {
                theta,
                psi,
                min_eigenvalue: q.sym_eigenvalues()[0],
                least_minor: q.leading_minors().iter().cloned().fold(f64::INFINITY, f64::min),
                moduli: moduli_at(&out, &v),
            })
        })
        .collect()
}

pub fn format_scan_table(rows: &[ScanRow]) -> String {
    let mut s = String::from("theta psi min_eig least_minor mu_t q_t theta_t\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            r.theta, r.psi, r.min_eigenvalue, r.least_minor, r.moduli.mu, r.moduli.q, r.moduli.theta
        );
    }
    s
}
