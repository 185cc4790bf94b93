//! Analytical reference energies: the Mooney-Rivlin solid with an ideal
//! dielectric coupling, the two phases of a rank-one laminate, and the
//! laminate homogenizer.
//!
//! The homogenized laminate energy is
//!
//! ```text
//! W(F, d0) = min_{α, β}  c_a e_a(F + c_b α⊗N, d0 + c_b β) + c_b e_b(F − c_a α⊗N, d0 − c_a β)
//! ```
//!
//! with `β ⊥ N`, solved by a safeguarded Newton iteration on the five jump
//! coordinates. Second derivatives follow from condensing the inner Hessian.

use nalgebra::{DMatrix, SMatrix, SVector};

use crate::energy::{EnergyOutput, InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::invariants::{compute_invariant_gradients, compute_invariants, ConvexityMode, SymmetryClass};
use crate::tensor::{Tensor2, Vector3};

/// Parameters of `μ1/2 I1 + μ2/2 I2 − (μ1 + 2μ2) log J + λ/2 (J − 1)² + I5/(2εJ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MooneyRivlinParams {
    pub mu1: f64,
    pub mu2: f64,
    pub lambda: f64,
    pub eps: f64,
}

impl Default for MooneyRivlinParams {
    fn default() -> Self {
        Self { mu1: 0.5, mu2: 0.5, lambda: 5.0, eps: 1.0 }
    }
}

impl MooneyRivlinParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu1 > 0.0 && self.mu2 > 0.0 && self.eps > 0.0 && self.lambda >= 0.0;
        let finite = [self.mu1, self.mu2, self.lambda, self.eps].iter().all(|x| x.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::Config(format!("Mooney-Rivlin parameters need mu1, mu2, eps > 0 and lambda >= 0, got {self:?}")))
        }
    }
}

/// Mooney-Rivlin energy whose mechanical part is multiplied by `mech_scale`
/// and whose permittivity is multiplied by `perm_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MooneyRivlin {
    pub params: MooneyRivlinParams,
    pub mech_scale: f64,
    pub perm_scale: f64,
}

impl MooneyRivlin {
    pub fn new(params: MooneyRivlinParams) -> Result<Self> {
        Self::scaled(params, 1.0, 1.0)
    }

    pub fn scaled(params: MooneyRivlinParams, mech_scale: f64, perm_scale: f64) -> Result<Self> {
        params.validate()?;
        if !(mech_scale > 0.0 && perm_scale > 0.0) {
            return Err(Error::Config("contrast factors must be positive".into()));
        }
        Ok(Self { params, mech_scale, perm_scale })
    }

    /// Invariant gradient over `(I1, I2, J, I4, I5, I6)` and `∂²/∂J²`.
    fn invariant_weights(&self, j: f64) -> ([f64; 6], f64) {
        let p = &self.params;
        let s = self.mech_scale;
        let k = p.mu1 + 2.0 * p.mu2;
        let g = [
            s * 0.5 * p.mu1,
            s * 0.5 * p.mu2,
            s * (-k / j + p.lambda * (j - 1.0)),
            0.0,
            0.0,
            0.5 / (self.perm_scale * p.eps),
        ];
        (g, s * (k / (j * j) + p.lambda))
    }

    fn value(&self, v: &[f64]) -> f64 {
        let p = &self.params;
        let j = v[2];
        self.mech_scale
            * (0.5 * p.mu1 * v[0] + 0.5 * p.mu2 * v[1] - (p.mu1 + 2.0 * p.mu2) * j.ln()
                + 0.5 * p.lambda * (j - 1.0) * (j - 1.0))
            + v[5] / (2.0 * self.perm_scale * p.eps)
    }
}

impl InternalEnergy for MooneyRivlin {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        let inv = compute_invariants(state, &SymmetryClass::Isotropic, ConvexityMode::Unconstrained)?;
        let (g, hjj) = self.invariant_weights(inv.values[2]);
        let mut out = EnergyOutput { e: self.value(&inv.values), ..EnergyOutput::zero() };
        for (i, gi) in g.iter().enumerate() {
            if *gi == 0.0 {
                continue;
            }
            out.p += inv.d_f[i].scale(*gi);
            out.e0 += inv.d_d0[i].scale(*gi);
            out.d2_ff.add_scaled(&inv.d2_ff[i], *gi);
            out.d2_fd0.add_scaled(&inv.d2_fd0[i], *gi);
            out.d2_d0d0 += inv.d2_d0d0[i].scale(*gi);
        }
        out.add_rank_one(&inv.d_f[2], &inv.d_d0[2], hjj);
        Ok(out)
    }

    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        let inv = compute_invariant_gradients(state, &SymmetryClass::Isotropic, ConvexityMode::Unconstrained)?;
        let (g, _) = self.invariant_weights(inv.values[2]);
        let mut p = Tensor2::zero();
        let mut e0 = Vector3::zero();
        for (i, gi) in g.iter().enumerate() {
            p += inv.d_f[i].scale(*gi);
            e0 += inv.d_d0[i].scale(*gi);
        }
        Ok((self.value(&inv.values), p, e0))
    }

    fn name(&self) -> String {
        if self.mech_scale == 1.0 && self.perm_scale == 1.0 {
            "gt:mr".into()
        } else {
            format!("gt:mr(fm={}, fe={})", self.mech_scale, self.perm_scale)
        }
    }
}

/// Mooney-Rivlin energy with analytic derivatives.
pub fn mr_energy(state: &MaterialState, p: &MooneyRivlinParams) -> Result<EnergyOutput> {
    MooneyRivlin::new(*p)?.evaluate(state)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaminateParams {
    pub phase_a: MooneyRivlinParams,
    /// Mechanical contrast applied to phase b.
    pub f_m: f64,
    /// Electrical contrast applied to phase b.
    pub f_e: f64,
    /// Volume fraction of phase a.
    pub c_a: f64,
    /// Lamination normal.
    pub n: Vector3,
}

impl Default for LaminateParams {
    fn default() -> Self {
        Self {
            phase_a: MooneyRivlinParams::default(),
            f_m: 2.0,
            f_e: 2.0,
            c_a: 0.6,
            n: Vector3::from_array([0.5, 0.5, 0.5 * std::f64::consts::SQRT_2]),
        }
    }
}

impl LaminateParams {
    pub fn validate(&self) -> Result<()> {
        self.phase_a.validate()?;
        if !(self.c_a > 0.0 && self.c_a < 1.0) {
            return Err(Error::Config(format!("volume fraction must lie in (0, 1), got {}", self.c_a)));
        }
        if !(self.f_m > 0.0 && self.f_e > 0.0) {
            return Err(Error::Config("contrast factors must be positive".into()));
        }
        SymmetryClass::transversely_isotropic(self.n)?;
        Ok(())
    }

    pub fn c_b(&self) -> f64 {
        1.0 - self.c_a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
}

/// Phase energy of the laminate evaluated at the phase's own state.
pub fn laminate_phase_energy(phase: Phase, state: &MaterialState, p: &LaminateParams) -> Result<EnergyOutput> {
    p.validate()?;
    let model = match phase {
        Phase::A => MooneyRivlin::new(p.phase_a)?,
        Phase::B => MooneyRivlin::scaled(p.phase_a, p.f_m, p.f_e)?,
    };
    model.evaluate(state)
}

/// Inner solver settings.
#[derive(Clone, Copy, Debug)]
pub struct InnerSolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerSolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

/// Converged laminate state.
#[derive(Clone, Debug)]
pub struct LaminateSolution {
    pub output: EnergyOutput,
    /// Mechanical jump vector `α`.
    pub alpha: Vector3,
    /// Tangential electric-displacement jump `β` (three components, `β·N = 0`).
    pub beta: Vector3,
    /// Five inner coordinates `(α, β·T1, β·T2)`.
    pub coords: [f64; 5],
    pub iterations: usize,
    pub gradient_norm: f64,
    /// The inner Hessian at the solution is not positive definite.
    pub inner_indefinite: bool,
}

type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

/// Homogenized rank-one laminate.
#[derive(Clone, Debug)]
pub struct Laminate {
    params: LaminateParams,
    phase_a: MooneyRivlin,
    phase_b: MooneyRivlin,
    t: [Vector3; 2],
    options: InnerSolverOptions,
}

struct InnerEval {
    w: f64,
    grad: Vec5,
    hess: Mat5,
    a: EnergyOutput,
    b: EnergyOutput,
}

impl Laminate {
    pub fn new(params: LaminateParams) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        let k = (0..3).min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs())).unwrap_or(0);
        let t1 = n.cross(&Vector3::unit(k)).normalized();
        let t2 = n.cross(&t1);
        Ok(Self {
            params,
            phase_a: MooneyRivlin::new(params.phase_a)?,
            phase_b: MooneyRivlin::scaled(params.phase_a, params.f_m, params.f_e)?,
            t: [t1, t2],
            options: InnerSolverOptions::default(),
        })
    }

    pub fn with_options(mut self, options: InnerSolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn params(&self) -> &LaminateParams {
        &self.params
    }

    /// Orthonormal basis of the plane normal to `N`.
    pub fn tangent_basis(&self) -> [Vector3; 2] {
        self.t
    }

    pub fn phase_models(&self) -> (&MooneyRivlin, &MooneyRivlin) {
        (&self.phase_a, &self.phase_b)
    }

    fn jumps(&self, z: &[f64; 5]) -> (Vector3, Vector3) {
        let alpha = Vector3::from_array([z[0], z[1], z[2]]);
        let beta = self.t[0].scale(z[3]) + self.t[1].scale(z[4]);
        (alpha, beta)
    }

    /// Phase states for given inner coordinates.
    pub fn phase_states(&self, state: &MaterialState, z: &[f64; 5]) -> (MaterialState, MaterialState) {
        let (alpha, beta) = self.jumps(z);
        let ca = self.params.c_a;
        let cb = self.params.c_b();
        let jump = alpha.outer(&self.params.n);
        let a = MaterialState { f: state.f + jump.scale(cb), d0: state.d0 + beta.scale(cb) };
        let b = MaterialState { f: state.f - jump.scale(ca), d0: state.d0 - beta.scale(ca) };
        (a, b)
    }

    /// Volume-averaged energy for fixed inner coordinates.
    pub fn total_energy(&self, state: &MaterialState, z: &[f64; 5]) -> Result<f64> {
        let (sa, sb) = self.phase_states(state, z);
        let ca = self.params.c_a;
        Ok(ca * self.phase_a.energy(&sa)? + (1.0 - ca) * self.phase_b.energy(&sb)?)
    }

    fn inner_eval(&self, state: &MaterialState, z: &[f64; 5]) -> Result<InnerEval> {
        let (sa, sb) = self.phase_states(state, z);
        let a = self.phase_a.evaluate(&sa)?;
        let b = self.phase_b.evaluate(&sb)?;
        let ca = self.params.c_a;
        let cb = self.params.c_b();
        let cc = ca * cb;
        let n = &self.params.n;
        let w = ca * a.e + cb * b.e;

        let mut grad = Vec5::zeros();
        let dp = (a.p - b.p).apply(n).scale(cc);
        let de = (a.e0 - b.e0).scale(cc);
        for i in 0..3 {
            grad[i] = dp[i];
        }
        grad[3] = de.dot(&self.t[0]);
        grad[4] = de.dot(&self.t[1]);

        let mut hess = Mat5::zeros();
        let qaa = a.d2_ff.contract_inner(n, n).scale(cb) + b.d2_ff.contract_inner(n, n).scale(ca);
        let bmix = a.d2_fd0.scale(cb) + b.d2_fd0.scale(ca);
        let dmix = a.d2_d0d0.scale(cb) + b.d2_d0d0.scale(ca);
        for i in 0..3 {
            for j in 0..3 {
                hess[(i, j)] = cc * qaa[(i, j)];
            }
            for (k, t) in self.t.iter().enumerate() {
                let mut s = 0.0;
                for jj in 0..3 {
                    for kk in 0..3 {
                        s += bmix[(i, jj, kk)] * n[jj] * t[kk];
                    }
                }
                hess[(i, 3 + k)] = cc * s;
                hess[(3 + k, i)] = cc * s;
            }
        }
        for (k, tk) in self.t.iter().enumerate() {
            for (l, tl) in self.t.iter().enumerate() {
                hess[(3 + k, 3 + l)] = cc * tk.dot(&dmix.apply(tl));
            }
        }
        Ok(InnerEval { w, grad, hess, a, b })
    }

    /// Solves the inner problem starting from `guess` (zero jumps if `None`).
    pub fn homogenize(&self, state: &MaterialState, guess: Option<[f64; 5]>) -> Result<LaminateSolution> {
        let mut z = guess.unwrap_or([0.0; 5]);
        let tol = self.options.tol;
        let mut ev = match self.inner_eval(state, &z) {
            Ok(ev) => ev,
            Err(_) if guess.is_some() => {
                z = [0.0; 5];
                self.inner_eval(state, &z)?
            }
            Err(e) => return Err(e),
        };
        let mut iterations = 0;
        loop {
            let gnorm = ev.grad.norm();
            if gnorm <= tol {
                break;
            }
            if iterations >= self.options.max_iter {
                return Err(Error::HomogenizationFailure { residual: gnorm, iterations });
            }
            iterations += 1;

            let (step, pd) = newton_direction(&ev.hess, &ev.grad);
            // Inside the quadratic basin the full step is taken unconditionally;
            // energy differences there are below round-off.
            let mut t = 1.0;
            let mut accepted = None;
            let slope = step.dot(&ev.grad);
            for _ in 0..60 {
                let trial: [f64; 5] = std::array::from_fn(|i| z[i] + t * step[i]);
                if let Ok(next) = self.inner_eval(state, &trial) {
                    let armijo = next.w <= ev.w + 1e-4 * t * slope;
                    if (pd && gnorm < 1e-6) || armijo {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, next)) => {
                    z = trial;
                    ev = next;
                }
                None => {
                    if gnorm <= 1e3 * tol {
                        break;
                    }
                    return Err(Error::HomogenizationFailure { residual: gnorm, iterations });
                }
            }
        }

        let inner_indefinite = ev.hess.cholesky().is_none();
        let output = self.condense(&ev)?;
        let (alpha, beta) = self.jumps(&z);
        Ok(LaminateSolution {
            output,
            alpha,
            beta,
            coords: z,
            iterations,
            gradient_norm: ev.grad.norm(),
            inner_indefinite,
        })
    }

    /// Envelope-theorem first derivatives and condensed second derivatives.
    fn condense(&self, ev: &InnerEval) -> Result<EnergyOutput> {
        let ca = self.params.c_a;
        let cb = self.params.c_b();
        let cc = ca * cb;
        let n = &self.params.n;
        let (a, b) = (&ev.a, &ev.b);

        let mut out = EnergyOutput::zero();
        out.add_scaled(a, ca);
        out.add_scaled(b, cb);

        // Coupling W_Xz, X = (F row-major, d0) with 12 rows, z with 5 columns.
        let da = a.d2_ff - b.d2_ff;
        let db = a.d2_fd0 - b.d2_fd0;
        let dd = a.d2_d0d0 - b.d2_d0d0;
        let mut wxz = DMatrix::<f64>::zeros(12, 5);
        for r in 0..9 {
            let (j, jj) = (r / 3, r % 3);
            for i in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += da[(i, k, j, jj)] * n[k];
                }
                wxz[(r, i)] = cc * s;
            }
            for (k, t) in self.t.iter().enumerate() {
                let mut s = 0.0;
                for l in 0..3 {
                    s += db[(j, jj, l)] * t[l];
                }
                wxz[(r, 3 + k)] = cc * s;
            }
        }
        for l in 0..3 {
            for i in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += db[(i, k, l)] * n[k];
                }
                wxz[(9 + l, i)] = cc * s;
            }
            for (k, t) in self.t.iter().enumerate() {
                wxz[(9 + l, 3 + k)] = cc * dd.apply(t)[l];
            }
        }
        let hzz = DMatrix::from_fn(5, 5, |i, j| ev.hess[(i, j)]);
        let lu = hzz.lu();
        let sol = lu
            .solve(&wxz.transpose())
            .ok_or(Error::HomogenizationFailure { residual: ev.grad.norm(), iterations: 0 })?;
        let corr = &wxz * sol;
        for r in 0..12 {
            for c in 0..12 {
                let v = 0.5 * (corr[(r, c)] + corr[(c, r)]);
                match (r < 9, c < 9) {
                    (true, true) => out.d2_ff[(r / 3, r % 3, c / 3, c % 3)] -= v,
                    (true, false) => out.d2_fd0[(r / 3, r % 3, c - 9)] -= v,
                    (false, false) => out.d2_d0d0[(r - 9, c - 9)] -= v,
                    (false, true) => {}
                }
            }
        }
        Ok(out)
    }
}

/// Newton direction, with a diagonal shift when the Hessian is not positive
/// definite. Returns the direction and whether the unshifted Hessian was PD.
fn newton_direction(h: &Mat5, g: &Vec5) -> (Vec5, bool) {
    if let Some(ch) = h.cholesky() {
        return (-ch.solve(g), true);
    }
    let scale = (0..5).map(|i| h[(i, i)].abs()).fold(1e-8, f64::max);
    let mut tau = 1e-6 * scale;
    loop {
        let shifted = h + Mat5::identity() * tau;
        if let Some(ch) = shifted.cholesky() {
            return (-ch.solve(g), false);
        }
        tau *= 4.0;
        if tau > 1e12 * scale {
            return (-g, false);
        }
    }
}

impl InternalEnergy for Laminate {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        Ok(self.homogenize(state, None)?.output)
    }

    fn name(&self) -> String {
        "gt:laminate".into()
    }
}

/// Brute-force reference for the inner problem: a pattern search over the
/// `3⁵` neighbourhood of the current point, halving the step when no
/// neighbour improves, down to `min_step`.
pub fn grid_search_energy(lam: &Laminate, state: &MaterialState, min_step: f64) -> Result<(f64, [f64; 5])> {
    let mut z = [0.0; 5];
    let mut best = lam.total_energy(state, &z)?;
    let mut step = 0.25;
    while step >= min_step {
        let mut improved = false;
        let mut cand = z;
        for code in 0..243usize {
            let mut c = code;
            let mut trial = z;
            for t in trial.iter_mut() {
                *t += step * ((c % 3) as f64 - 1.0);
                c /= 3;
            }
            if let Ok(e) = lam.total_energy(state, &trial) {
                if e < best {
                    best = e;
                    cand = trial;
                    improved = true;
                }
            }
        }
        if improved {
            z = cand;
        } else {
            step *= 0.5;
        }
    }
    Ok((best, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_energy_derivatives, random_rotation, random_state, FD_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mooney_rivlin_reference_values() {
        let p = MooneyRivlinParams::default();
        let out = mr_energy(&MaterialState::reference(), &p).unwrap();
        assert!((out.e - 1.5).abs() < 1e-15);
        assert!(out.p.max_abs() < 1e-15 && out.e0.max_abs() < 1e-15);
        let s = MaterialState::new(Tensor2::identity(), Vector3::from_array([0.0, 0.0, 0.3])).unwrap();
        let out = mr_energy(&s, &p).unwrap();
        assert!((out.e0 - Vector3::from_array([0.0, 0.0, 0.3])).max_abs() < 1e-15);
    }

    #[test]
    fn phase_examples() {
        let lp = LaminateParams::default();
        for ph in [Phase::A, Phase::B] {
            let out = laminate_phase_energy(ph, &MaterialState::reference(), &lp).unwrap();
            assert!(out.p.max_abs() < 1e-15 && out.e0.max_abs() < 1e-15);
        }
        let s = MaterialState::new(Tensor2::identity(), Vector3::unit(2)).unwrap();
        let out = laminate_phase_energy(Phase::B, &s, &lp).unwrap();
        assert!((out.e0 - Vector3::from_array([0.0, 0.0, 0.5])).max_abs() < 1e-15);
    }

    #[test]
    fn mr_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = MooneyRivlin::scaled(MooneyRivlinParams::default(), 2.0, 2.0).unwrap();
        for _ in 0..50 {
            let s = random_state(&mut rng, 0.3, 0.8);
            let c = check_energy_derivatives(&m, &s, FD_STEP).unwrap();
            assert!(c.first < 1e-6 && c.second < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn identical_phases_give_zero_jumps() {
        let lp = LaminateParams { f_m: 1.0, f_e: 1.0, c_a: 0.3, ..Default::default() };
        let lam = Laminate::new(lp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..10 {
            let s = random_state(&mut rng, 0.2, 0.3);
            let sol = lam.homogenize(&s, None).unwrap();
            assert!(sol.alpha.max_abs() < 1e-12 && sol.beta.max_abs() < 1e-12);
            let mr = mr_energy(&s, &lp.phase_a).unwrap();
            assert!((sol.output.e - mr.e).abs() < 1e-12);
            assert!((sol.output.p - mr.p).max_abs() < 1e-12);
            assert!((sol.output.d2_ff - mr.d2_ff).max_abs() < 1e-9);
        }
    }

    #[test]
    fn reference_state_is_normalized() {
        let lam = Laminate::new(LaminateParams::default()).unwrap();
        let sol = lam.homogenize(&MaterialState::reference(), None).unwrap();
        assert!(sol.output.p.max_abs() < 1e-12 && sol.output.e0.max_abs() < 1e-12);
        assert!(sol.alpha.max_abs() < 1e-12 && sol.beta.max_abs() < 1e-12);
    }

    #[test]
    fn homogenized_matches_grid_search() {
        let lam = Laminate::new(LaminateParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..3 {
            let a = crate::oracle::random_tensor(&mut rng, 1.0);
            let d = crate::oracle::random_unit(&mut rng);
            let f = Tensor2::identity() + a.scale(0.2 * rng.random_range(0.2..1.0) / a.norm());
            let s = MaterialState::new(f, d.scale(0.3 * rng.random_range(0.2..1.0))).unwrap();
            let sol = lam.homogenize(&s, None).unwrap();
            let (e, _) = grid_search_energy(&lam, &s, 1e-4).unwrap();
            assert!((sol.output.e - e).abs() <= 1e-6, "{} vs {e}", sol.output.e);
            assert!(sol.output.e <= e + 1e-12);
        }
    }

    #[test]
    fn laminate_properties() {
        let lam = Laminate::new(LaminateParams::default()).unwrap();
        let p = lam.params;
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10 {
            let s = random_state(&mut rng, 0.25, 0.5);
            let sol = lam.homogenize(&s, None).unwrap();
            assert!(sol.beta.dot(&p.n).abs() < 1e-14);
            let (sa, sb) = lam.phase_states(&s, &sol.coords);
            let fbar = sa.f.scale(p.c_a) + sb.f.scale(p.c_b());
            assert!((fbar - s.f).max_abs() < 1e-14);
            assert!((sa.d0.scale(p.c_a) + sb.d0.scale(p.c_b()) - s.d0).max_abs() < 1e-14);

            let voigt = lam.total_energy(&s, &[0.0; 5]).unwrap();
            assert!(sol.output.e <= voigt + 1e-14);

            let q = random_rotation(&mut rng);
            let r = lam.homogenize(&MaterialState { f: q.dot(&s.f), d0: s.d0 }, None).unwrap();
            assert!((r.output.e - sol.output.e).abs() <= 1e-9 * sol.output.e.abs().max(1.0));

            let c = check_energy_derivatives(&lam, &s, FD_STEP).unwrap();
            assert!(c.first < 1e-6 && c.second < 1e-5, "{c:?}");
        }
    }
}
