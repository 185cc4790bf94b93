//! Independent numerical oracles: fourth-order central finite differences,
//! random admissible states and error measures. Used by the test suites of
//! every crate in the workspace and by the `*-check` CLI commands.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::energy::{EnergyOutput, InternalEnergy, MaterialState};
use crate::error::Result;
use crate::tensor::{rotation, Tensor2, Tensor3, Tensor4, Vector3};

/// Default finite-difference step for O(1) inputs.
pub const FD_STEP: f64 = 1e-5;

/// Packs `(F, d0)` into 12 numbers: `F` row-major then `d0`.
pub fn pack_state(s: &MaterialState) -> [f64; 12] {
    let mut x = [0.0; 12];
    x[..9].copy_from_slice(&s.f.to_row_major());
    x[9..].copy_from_slice(s.d0.as_array());
    x
}

pub fn unpack_state(x: &[f64]) -> MaterialState {
    MaterialState { f: Tensor2::from_fn(|i, j| x[3 * i + j]), d0: Vector3::from_array([x[9], x[10], x[11]]) }
}

/// Fourth-order central difference of a scalar function along coordinate `k`.
pub fn central_diff<F>(f: &F, x: &[f64], k: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut y = x.to_vec();
    let mut at = |t: f64| -> Result<f64> {
        y[k] = x[k] + t;
        f(&y)
    };
    let fp1 = at(h)?;
    let fm1 = at(-h)?;
    let fp2 = at(2.0 * h)?;
    let fm2 = at(-2.0 * h)?;
    Ok((8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h))
}

/// Gradient of a scalar function by fourth-order central differences.
pub fn fd_gradient<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    (0..x.len()).map(|k| central_diff(f, x, k, h)).collect()
}

/// Jacobian `J[r][k] = ∂f_r/∂x_k` of a vector function by fourth-order central differences.
pub fn fd_jacobian<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut cols = Vec::with_capacity(x.len());
    let mut y = x.to_vec();
    for k in 0..x.len() {
        let mut at = |t: f64| -> Result<Vec<f64>> {
            y[k] = x[k] + t;
            let r = f(&y);
            y[k] = x[k];
            r
        };
        let p1 = at(h)?;
        let m1 = at(-h)?;
        let p2 = at(2.0 * h)?;
        let m2 = at(-2.0 * h)?;
        cols.push((0..p1.len()).map(|r| (8.0 * (p1[r] - m1[r]) - (p2[r] - m2[r])) / (12.0 * h)).collect::<Vec<_>>());
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok((0..rows).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

/// `max |a − b| / max(max |b|, 1)`; the floor keeps the measure meaningful
/// for blocks that vanish at the probed state.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "relative_error: length mismatch");
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

/// Flattened first derivatives `(P row-major, e0)`.
pub fn flatten_first(p: &Tensor2, e0: &Vector3) -> Vec<f64> {
    let mut v = p.to_row_major().to_vec();
    v.extend_from_slice(e0.as_array());
    v
}

/// Flattened 12×12 Hessian in the packing order of [`pack_state`].
pub fn flatten_hessian(out: &EnergyOutput) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; 12]; 12];
    for r in 0..9 {
        for c in 0..9 {
            h[r][c] = out.d2_ff[(r / 3, r % 3, c / 3, c % 3)];
        }
        for k in 0..3 {
            h[r][9 + k] = out.d2_fd0[(r / 3, r % 3, k)];
            h[9 + k][r] = out.d2_fd0[(r / 3, r % 3, k)];
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            h[9 + a][9 + b] = out.d2_d0d0[(a, b)];
        }
    }
    h
}

/// Outcome of a derivative-consistency probe of an energy model.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeCheck {
    /// Relative error of `(P, e0)` against differences of `e`.
    pub first: f64,
    /// Relative error of the Hessian blocks against differences of `(P, e0)`.
    pub second: f64,
}

/// Compares the analytic derivatives of `model` at `state` with central
/// differences of its energy (first order) and of its gradients (second order).
pub fn check_energy_derivatives<M: InternalEnergy + ?Sized>(
    model: &M,
    state: &MaterialState,
    h: f64,
) -> Result<DerivativeCheck> {
    let out = model.evaluate(state)?;
    let x = pack_state(state);
    let energy = |y: &[f64]| model.energy(&unpack_state(y));
    let grad_fd = fd_gradient(&energy, &x, h)?;
    let first = relative_error(&flatten_first(&out.p, &out.e0), &grad_fd);

    let gradients = |y: &[f64]| {
        let (_, p, e0) = model.gradients(&unpack_state(y))?;
        Ok(flatten_first(&p, &e0))
    };
    let jac = fd_jacobian(&gradients, &x, h)?;
    let analytic: Vec<f64> = flatten_hessian(&out).into_iter().flatten().collect();
    let numeric: Vec<f64> = jac.into_iter().flatten().collect();
    let second = relative_error(&analytic, &numeric);
    Ok(DerivativeCheck { first, second })
}

/// Builds an `EnergyOutput` entirely from differences of the energy and
/// gradients, for use as a drop-in reference.
pub fn fd_energy_output<M: InternalEnergy + ?Sized>(model: &M, state: &MaterialState, h: f64) -> Result<EnergyOutput> {
    let x = pack_state(state);
    let e = model.energy(state)?;
    let energy = |y: &[f64]| model.energy(&unpack_state(y));
    let g = fd_gradient(&energy, &x, h)?;
    let gradients = |y: &[f64]| {
        let (_, p, e0) = model.gradients(&unpack_state(y))?;
        Ok(flatten_first(&p, &e0))
    };
    let jac = fd_jacobian(&gradients, &x, h)?;
    let d2_ff = Tensor4::from_fn(|i, ii, j, jj| jac[3 * i + ii][3 * j + jj]);
    let d2_fd0 = Tensor3::from_fn(|i, ii, k| jac[3 * i + ii][9 + k]);
    let d2_d0d0 = Tensor2::from_fn(|a, b| jac[9 + a][9 + b]);
    Ok(EnergyOutput {
        e,
        p: Tensor2::from_fn(|i, j| g[3 * i + j]),
        e0: Vector3::from_array([g[9], g[10], g[11]]),
        d2_ff,
        d2_fd0,
        d2_d0d0,
    })
}

/// Random unit vector, uniform on the sphere.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3 {
    loop {
        let v =
            Vector3::from_array([StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)]);
        if v.norm() > 1e-8 {
            return v.normalized();
        }
    }
}

/// Random rotation (uniform axis, uniform angle in `[0, 2π)`).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Tensor2 {
    let axis = random_unit(rng);
    rotation(&axis, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Tensor with entries uniform in `[-amp, amp]`.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, amp: f64) -> Tensor2 {
    let mut a = [0.0; 9];
    a.iter_mut().for_each(|x| *x = rng.random_range(-amp..=amp));
    Tensor2::from_fn(|i, j| a[3 * i + j])
}

/// Random state with `F = I + A`, entries of `A` uniform in `[-f_amp, f_amp]`,
/// and `d0` entries uniform in `[-d_amp, d_amp]`; redrawn until `det F ≥ 0.2`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, f_amp: f64, d_amp: f64) -> MaterialState {
    loop {
        let f = if f_amp > 0.0 { Tensor2::identity() + random_tensor(rng, f_amp) } else { Tensor2::identity() };
        if f.det() < 0.2 {
            continue;
        }
        let mut d = [0.0; 3];
        if d_amp > 0.0 {
            d.iter_mut().for_each(|x| *x = rng.random_range(-d_amp..=d_amp));
        }
        let d0 = Vector3::from_array(d);
        return MaterialState { f, d0 };
    }
}

/// Smallest eigenvalue of a small symmetric matrix via nalgebra.
pub fn min_symmetric_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    mat.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}
