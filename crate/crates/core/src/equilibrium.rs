//! Homogeneous equilibrium paths at a single material point.
//!
//! The deformation is restricted to `F = diag(F11, 1, F33)` with the field
//! `e0 = (0, 0, e0)` prescribed. The unknowns `(F11, F33, p, d0)` make the
//! Lagrangian `e(F, d0) + p (J − 1) − e0·d0` stationary. A compressible
//! variant without the multiplier and with a free `F22` mirrors the state of
//! a traction-free specimen loaded only electrically.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::energy::{InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Vector3};

pub const PATH_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
/// Smallest continuation step as a fraction of the nominal step.
const MIN_STEP_FRACTION: f64 = 1.0 / 1024.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathState {
    pub f11: f64,
    pub f33: f64,
    pub p: f64,
    pub d0: Vector3,
    pub e0_mag: f64,
}

impl PathState {
    pub fn reference() -> Self {
        Self { f11: 1.0, f33: 1.0, p: 0.0, d0: Vector3::zero(), e0_mag: 0.0 }
    }

    pub fn deformation(&self) -> Tensor2 {
        Tensor2::diag([self.f11, 1.0, self.f33])
    }

    fn unknowns(&self) -> [f64; 6] {
        [self.f11, self.f33, self.p, self.d0[0], self.d0[1], self.d0[2]]
    }

    fn with_unknowns(&self, x: &[f64; 6]) -> Self {
        Self { f11: x[0], f33: x[1], p: x[2], d0: Vector3::from_array([x[3], x[4], x[5]]), e0_mag: self.e0_mag }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PathResiduals {
    pub r_f11: f64,
    pub r_f33: f64,
    pub r_p: f64,
    pub r_d0: Vector3,
    /// Rows follow the residual order, columns the unknowns `(F11, F33, p, d0)`.
    pub jacobian: [[f64; 6]; 6],
}

impl PathResiduals {
    pub fn as_array(&self) -> [f64; 6] {
        [self.r_f11, self.r_f33, self.r_p, self.r_d0[0], self.r_d0[1], self.r_d0[2]]
    }

    pub fn inf_norm(&self) -> f64 {
        self.as_array().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

pub fn path_residuals<M: InternalEnergy + ?Sized>(model: &M, s: &PathState) -> Result<PathResiduals> {
    let out = model.evaluate(&MaterialState::new(s.deformation(), s.d0)?)?;
    // With F22 = 1 the relevant cofactor entries are H11 = F33 and H33 = F11.
    let e0 = Vector3::from_array([0.0, 0.0, s.e0_mag]);
    let r_d0 = out.e0 - e0;
    let mut jac = [[0.0; 6]; 6];
    let a = &out.d2_ff;
    jac[0][0] = a[(0, 0, 0, 0)];
    jac[0][1] = a[(0, 0, 2, 2)] + s.p;
    jac[0][2] = s.f33;
    jac[1][0] = a[(2, 2, 0, 0)] + s.p;
    jac[1][1] = a[(2, 2, 2, 2)];
    jac[1][2] = s.f11;
    jac[2][0] = s.f33;
    jac[2][1] = s.f11;
    for k in 0..3 {
        jac[0][3 + k] = out.d2_fd0[(0, 0, k)];
        jac[1][3 + k] = out.d2_fd0[(2, 2, k)];
        jac[3 + k][0] = out.d2_fd0[(0, 0, k)];
        jac[3 + k][1] = out.d2_fd0[(2, 2, k)];
        for l in 0..3 {
            jac[3 + k][3 + l] = out.d2_d0d0[(k, l)];
        }
    }
    Ok(PathResiduals {
        r_f11: out.p[(0, 0)] + s.p * s.f33,
        r_f33: out.p[(2, 2)] + s.p * s.f11,
        r_p: s.f11 * s.f33 - 1.0,
        r_d0,
        jacobian: jac,
    })
}

/// Generic damped Newton iteration on `N` unknowns.
fn newton<const N: usize>(
    x0: [f64; N],
    tol: f64,
    admissible: impl Fn(&[f64; N]) -> bool,
    eval: impl Fn(&[f64; N]) -> Result<([f64; N], [[f64; N]; N])>,
) -> std::result::Result<([f64; N], usize), f64> {
    let norm = |r: &[f64; N]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut x = x0;
    let Ok((mut r, mut jac)) = eval(&x) else { return Err(f64::NAN) };
    for it in 0..=NEWTON_MAX_ITER {
        let res = norm(&r);
        if !res.is_finite() {
            return Err(res);
        }
        if res <= tol {
            return Ok((x, it));
        }
        if it == NEWTON_MAX_ITER {
            return Err(res);
        }
        let a = DMatrix::from_fn(N, N, |i, j| jac[i][j]);
        let b = DVector::from_fn(N, |i, _| r[i]);
        let Some(dx) = a.lu().solve(&b) else { return Err(res) };
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let trial: [f64; N] = std::array::from_fn(|i| x[i] - t * dx[i]);
            if admissible(&trial) {
                if let Ok((rt, jt)) = eval(&trial) {
                    if norm(&rt) < res || t == 1.0 && norm(&rt) < 10.0 * res.max(tol) {
                        next = Some((trial, rt, jt));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((xn, rn, jn)) = next else { return Err(res) };
        x = xn;
        r = rn;
        jac = jn;
    }
    Err(norm(&r))
}

/// Converges the path equations at `guess.e0_mag` from `guess`.
pub fn solve_path_point<M: InternalEnergy + ?Sized>(model: &M, guess: &PathState) -> Result<(PathState, usize)> {
    let eval = |x: &[f64; 6]| -> Result<([f64; 6], [[f64; 6]; 6])> {
        let r = path_residuals(model, &guess.with_unknowns(x))?;
        Ok((r.as_array(), r.jacobian))
    };
    newton(guess.unknowns(), PATH_TOL, |x| x[0] > 0.0 && x[1] > 0.0, eval)
        .map(|(x, it)| (guess.with_unknowns(&x), it))
        .map_err(|res| Error::PathFailure {
            last_e0: guess.e0_mag,
            reason: format!("Newton did not converge (residual {res:e})"),
        })
}

/// Traces `n_steps` equally spaced states from `e0 = 0` to `e0_max`
/// inclusive. Failed steps are bisected down to 1/1024 of the nominal step.
pub fn trace_path<M: InternalEnergy + ?Sized>(model: &M, e0_max: f64, n_steps: usize) -> Result<Vec<PathState>> {
    if !(e0_max > 0.0 && e0_max.is_finite()) {
        return Err(Error::Config(format!("e0_max must be positive, got {e0_max}")));
    }
    if n_steps == 0 {
        return Err(Error::Config("path needs at least one step".into()));
    }
    let (first, _) = solve_path_point(model, &PathState::reference())?;
    let mut states = vec![first];
    if n_steps == 1 {
        return Ok(states);
    }
    let nominal = e0_max / (n_steps - 1) as f64;
    let mut prev: Option<PathState> = None;
    let mut cur = first;
    for k in 1..n_steps {
        let target = e0_max * k as f64 / (n_steps - 1) as f64;
        let mut h = nominal;
        while cur.e0_mag < target {
            let e_next = (cur.e0_mag + h).min(target);
            let guess = predict(prev.as_ref(), &cur, e_next);
            match solve_path_point(model, &guess) {
                Ok((s, _)) => {
                    prev = Some(cur);
                    cur = s;
                    h = (2.0 * h).min(nominal);
                }
                Err(e) => {
                    h *= 0.5;
                    if h < nominal * MIN_STEP_FRACTION {
                        log::warn!("path stopped: {e}");
                        return Err(Error::PathFailure {
                            last_e0: cur.e0_mag,
                            reason: format!("step bisection exhausted ({e})"),
                        });
                    }
                }
            }
        }
        cur.e0_mag = target;
        states.push(cur);
    }
    Ok(states)
}

/// Secant predictor from the last two converged states.
fn predict(prev: Option<&PathState>, cur: &PathState, e_next: f64) -> PathState {
    let mut g = *cur;
    g.e0_mag = e_next;
    if let Some(p) = prev {
        let de = cur.e0_mag - p.e0_mag;
        if de > 0.0 {
            let t = (e_next - cur.e0_mag) / de;
            let (a, b) = (p.unknowns(), cur.unknowns());
            let x: [f64; 6] = std::array::from_fn(|i| b[i] + t * (b[i] - a[i]));
            if x[0] > 0.0 && x[1] > 0.0 {
                g = g.with_unknowns(&x);
            }
        }
    }
    g
}

pub fn format_path_table(states: &[PathState], e0_unit: f64) -> String {
    let mut s = String::from("e0_mag e0_scaled F11 F33 p d0_z\n");
    for st in states {
        let _ = writeln!(
            s,
            "{:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
            st.e0_mag,
            st.e0_mag / e0_unit,
            st.f11,
            st.f33,
            st.p,
            st.d0[2]
        );
    }
    s
}

/// Traction-free homogeneous state `F = diag(F11, F22, F33)` under a
/// prescribed field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeState {
    pub stretches: [f64; 3],
    pub d0: Vector3,
}

impl FreeState {
    pub fn deformation(&self) -> Tensor2 {
        Tensor2::diag(self.stretches)
    }
}

/// Solves `P11 = P22 = P33 = 0`, `∂e/∂d0 = e0` over diagonal deformations.
/// Meaningful when the response keeps the principal axes, e.g. isotropic
/// models with `e0` along a coordinate axis.
pub fn solve_free_state<M: InternalEnergy + ?Sized>(model: &M, e0: &Vector3, guess: &FreeState) -> Result<FreeState> {
    let unpack =
        |x: &[f64; 6]| FreeState { stretches: [x[0], x[1], x[2]], d0: Vector3::from_array([x[3], x[4], x[5]]) };
    let eval = |x: &[f64; 6]| -> Result<([f64; 6], [[f64; 6]; 6])> {
        let s = unpack(x);
        let out = model.evaluate(&MaterialState::new(s.deformation(), s.d0)?)?;
        let r = [out.p[(0, 0)], out.p[(1, 1)], out.p[(2, 2)], out.e0[0] - e0[0], out.e0[1] - e0[1], out.e0[2] - e0[2]];
        let mut j = [[0.0; 6]; 6];
        for a in 0..3 {
            for b in 0..3 {
                j[a][b] = out.d2_ff[(a, a, b, b)];
                j[a][3 + b] = out.d2_fd0[(a, a, b)];
                j[3 + b][a] = out.d2_fd0[(a, a, b)];
                j[3 + a][3 + b] = out.d2_d0d0[(a, b)];
            }
        }
        Ok((r, j))
    };
    let x0 = [guess.stretches[0], guess.stretches[1], guess.stretches[2], guess.d0[0], guess.d0[1], guess.d0[2]];
    newton(x0, 1e-12, |x| x[0] > 0.0 && x[1] > 0.0 && x[2] > 0.0, eval).map(|(x, _)| unpack(&x)).map_err(|res| {
        Error::PathFailure {
            last_e0: e0.norm(),
            reason: format!("free-state Newton did not converge (residual {res:e})"),
        }
    })
}
