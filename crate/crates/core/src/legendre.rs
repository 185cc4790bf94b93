//! Free energy `Ψ(F, e0) = inf_d0 { e(F, d0) − d0·e0 }` and its derivatives.
//!
//! The infimum is located through the stationarity condition `∂e/∂d0 = e0`,
//! which is solved by Newton's method with a backtracking line search on the
//! convex objective `e − d0·e0`. The second derivatives are assembled from
//! the internal-energy blocks:
//!
//! ```text
//! Ψ_ee = −(e_dd)⁻¹,   Ψ_Fe = e_Fd (e_dd)⁻¹,   Ψ_FF = e_FF − e_Fd (e_dd)⁻¹ e_dF
//! ```

use nalgebra::{Matrix3, Vector3 as NVec3};

use crate::energy::{EnergyOutput, InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor3, Tensor4, Vector3};

pub const LEGENDRE_TOL: f64 = 1e-12;
pub const LEGENDRE_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug)]
pub struct FreeEnergyOutput {
    pub psi: f64,
    pub p: Tensor2,
    /// Electric displacement `d0 = −∂Ψ/∂e0` at the solved point.
    pub d0: Vector3,
    pub d2_ee: Tensor2,
    pub d2_fe: Tensor3,
    pub d2_ff: Tensor4,
}

/// Converged Legendre point with the internal-energy output evaluated there.
#[derive(Clone, Copy, Debug)]
pub struct LegendreSolution {
    pub d0: Vector3,
    pub inner: EnergyOutput,
    pub residual: f64,
    pub iterations: usize,
}

fn to_na(t: &Tensor2) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| t[(i, j)])
}

fn cholesky_solve(a: &Tensor2, r: &Vector3) -> Option<Vector3> {
    let ch = to_na(&a.sym()).cholesky()?;
    let x = ch.solve(&NVec3::new(r[0], r[1], r[2]));
    Some(Vector3::from_array([x[0], x[1], x[2]]))
}

/// Solves `∂e/∂d0 (F, d0) = e0` for `d0`, starting from `guess`.
pub fn solve_d0_full<M: InternalEnergy + ?Sized>(
    model: &M,
    f: &Tensor2,
    e0: &Vector3,
    guess: &Vector3,
) -> Result<LegendreSolution> {
    let objective = |d: &Vector3| -> Result<f64> { Ok(model.energy(&MaterialState { f: *f, d0: *d })? - d.dot(e0)) };
    let mut d = *guess;
    let mut out = model.evaluate(&MaterialState::new(*f, d)?)?;
    let mut r = out.e0 - *e0;
    for it in 0..=LEGENDRE_MAX_ITER {
        let res = r.norm();
        if !res.is_finite() {
            return Err(Error::LegendreFailure { residual: res, singular: false });
        }
        if res <= LEGENDRE_TOL {
            return Ok(LegendreSolution { d0: d, inner: out, residual: res, iterations: it });
        }
        if it == LEGENDRE_MAX_ITER {
            break;
        }
        let step = cholesky_solve(&out.d2_d0d0, &r).ok_or(Error::LegendreFailure { residual: res, singular: true })?;
        let phi0 = out.e - d.dot(e0);
        let slope = -r.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = d - step.scale(t);
            let phi = objective(&trial)?;
            // Near the solution the objective decrease drowns in round-off,
            // so a strictly smaller residual is accepted as well.
            if phi <= phi0 + 1e-4 * t * slope {
                accepted = Some(trial);
                break;
            }
            let trial_out = model.gradients(&MaterialState { f: *f, d0: trial })?;
            if (trial_out.2 - *e0).norm() < res {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::LegendreFailure { residual: res, singular: false });
        };
        d = next;
        out = model.evaluate(&MaterialState { f: *f, d0: d })?;
        r = out.e0 - *e0;
    }
    Err(Error::LegendreFailure { residual: r.norm(), singular: false })
}

pub fn solve_d0<M: InternalEnergy + ?Sized>(model: &M, f: &Tensor2, e0: &Vector3, guess: &Vector3) -> Result<Vector3> {
    solve_d0_full(model, f, e0, guess).map(|s| s.d0)
}

/// Free-energy blocks from an internal-energy output and the applied field.
pub fn free_energy_from(inner: &EnergyOutput, d0: &Vector3, e0: &Vector3) -> Result<FreeEnergyOutput> {
    let dd_inv = to_na(&inner.d2_d0d0.sym())
        .cholesky()
        .ok_or(Error::LegendreFailure { residual: 0.0, singular: true })?
        .inverse();
    let inv = Tensor2::from_fn(|i, j| dd_inv[(i, j)]);
    // (e_Fd e_dd⁻¹)_iIk
    let fe = Tensor3::from_fn(|i, ii, k| (0..3).map(|m| inner.d2_fd0[(i, ii, m)] * inv[(m, k)]).sum());
    let mut ff = inner.d2_ff;
    for i in 0..3 {
        for ii in 0..3 {
            for j in 0..3 {
                for jj in 0..3 {
                    let s: f64 = (0..3).map(|k| fe[(i, ii, k)] * inner.d2_fd0[(j, jj, k)]).sum();
                    ff[(i, ii, j, jj)] -= s;
                }
            }
        }
    }
    Ok(FreeEnergyOutput {
        psi: inner.e - d0.dot(e0),
        p: inner.p,
        d0: *d0,
        d2_ee: inv.scale(-1.0),
        d2_fe: fe,
        d2_ff: ff,
    })
}

/// Free energy at `(F, e0)` with a warm start for `d0`.
pub fn free_energy_with_guess<M: InternalEnergy + ?Sized>(
    model: &M,
    f: &Tensor2,
    e0: &Vector3,
    guess: &Vector3,
) -> Result<FreeEnergyOutput> {
    let sol = solve_d0_full(model, f, e0, guess)?;
    free_energy_from(&sol.inner, &sol.d0, e0)
}

/// Free energy at `(F, e0)`, starting the inner solve from `d0 = 0`.
pub fn free_energy<M: InternalEnergy + ?Sized>(model: &M, f: &Tensor2, e0: &Vector3) -> Result<FreeEnergyOutput> {
    free_energy_with_guess(model, f, e0, &Vector3::zero())
}

/// Free energy value and first derivatives `(Ψ, P, −d0)`, i.e. `∂Ψ/∂e0 = −d0`.
pub fn free_energy_gradients<M: InternalEnergy + ?Sized>(
    model: &M,
    f: &Tensor2,
    e0: &Vector3,
    guess: &Vector3,
) -> Result<(f64, Tensor2, Vector3)> {
    let sol = solve_d0_full(model, f, e0, guess)?;
    Ok((sol.inner.e - sol.d0.dot(e0), sol.inner.p, sol.d0.scale(-1.0)))
}
