//! Isotropic and transversely isotropic electro-mechanical invariants with
//! analytic first and second derivatives w.r.t. `F` and `d0`.
//!
//! Ordering of the emitted vector:
//!
//! ```text
//! isotropic, unconstrained        I1 I2 J I4 I5 I6
//! isotropic, polyconvex           I1 I2 J I4 I5 I6 I7
//! transversely isotropic, unconstr.  iso block, I1ti I2ti I3ti
//! transversely isotropic, polyconvex iso block, I1ti I2ti I3ti I4ti I5ti I6ti
//! ```
//!
//! with `I6 = I5 / J`, `I7 = -J`, `I1ti = ‖F G‖²`, `I2ti = ‖H G‖²`,
//! `I3ti = tr((d0⊗d0) G)`, `I4ti = I1 - I1ti`, `I5ti = I2 - I2ti`, `I6ti = I4 - I3ti`.

use crate::energy::MaterialState;
use crate::error::{Error, Result};
use crate::tensor::{kinematic_triplet, Tensor2, Tensor3, Tensor4, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SymmetryClass {
    Isotropic,
    /// Preferred direction `N`, unit length.
    TransverselyIsotropic(Vector3),
}

impl SymmetryClass {
    /// Transversely isotropic class; rejects a non-unit direction.
    pub fn transversely_isotropic(n: Vector3) -> Result<Self> {
        let sym = SymmetryClass::TransverselyIsotropic(n);
        sym.validate()?;
        Ok(sym)
    }

    pub fn validate(&self) -> Result<()> {
        if let SymmetryClass::TransverselyIsotropic(n) = self {
            if !n.is_finite() || (n.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("preferred direction must have unit norm, got |N| = {}", n.norm())));
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> Option<Vector3> {
        match self {
            SymmetryClass::Isotropic => None,
            SymmetryClass::TransverselyIsotropic(n) => Some(*n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvexityMode {
    Polyconvex,
    Unconstrained,
}

/// Identifier of each slot in the invariant vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InvariantKind {
    I1,
    I2,
    J,
    I4,
    I5,
    I6,
    I7,
    I1ti,
    I2ti,
    I3ti,
    I4ti,
    I5ti,
    I6ti,
}

impl InvariantKind {
    pub fn label(&self) -> &'static str {
        match self {
            InvariantKind::I1 => "I1",
            InvariantKind::I2 => "I2",
            InvariantKind::J => "J",
            InvariantKind::I4 => "I4",
            InvariantKind::I5 => "I5",
            InvariantKind::I6 => "I6",
            InvariantKind::I7 => "I7",
            InvariantKind::I1ti => "I1ti",
            InvariantKind::I2ti => "I2ti",
            InvariantKind::I3ti => "I3ti",
            InvariantKind::I4ti => "I4ti",
            InvariantKind::I5ti => "I5ti",
            InvariantKind::I6ti => "I6ti",
        }
    }
}

use InvariantKind as K;

const ISO_UNCONSTRAINED: [InvariantKind; 6] = [K::I1, K::I2, K::J, K::I4, K::I5, K::I6];
const ISO_POLYCONVEX: [InvariantKind; 7] = [K::I1, K::I2, K::J, K::I4, K::I5, K::I6, K::I7];
const TI_UNCONSTRAINED: [InvariantKind; 9] = [K::I1, K::I2, K::J, K::I4, K::I5, K::I6, K::I1ti, K::I2ti, K::I3ti];
const TI_POLYCONVEX: [InvariantKind; 13] =
    [K::I1, K::I2, K::J, K::I4, K::I5, K::I6, K::I7, K::I1ti, K::I2ti, K::I3ti, K::I4ti, K::I5ti, K::I6ti];

/// The invariant slots emitted for a (symmetry, mode) combination.
pub fn invariant_layout(sym: &SymmetryClass, mode: ConvexityMode) -> &'static [InvariantKind] {
    match (sym, mode) {
        (SymmetryClass::Isotropic, ConvexityMode::Unconstrained) => &ISO_UNCONSTRAINED,
        (SymmetryClass::Isotropic, ConvexityMode::Polyconvex) => &ISO_POLYCONVEX,
        (SymmetryClass::TransverselyIsotropic(_), ConvexityMode::Unconstrained) => &TI_UNCONSTRAINED,
        (SymmetryClass::TransverselyIsotropic(_), ConvexityMode::Polyconvex) => &TI_POLYCONVEX,
    }
}

pub fn invariant_count(sym: &SymmetryClass, mode: ConvexityMode) -> usize {
    invariant_layout(sym, mode).len()
}

/// Position of `kind` in the layout, if present.
pub fn slot_of(layout: &[InvariantKind], kind: InvariantKind) -> Option<usize> {
    layout.iter().position(|k| *k == kind)
}

/// Invariant values with their derivative blocks. The second-order blocks are
/// empty when produced by [`compute_invariant_gradients`].
#[derive(Clone, Debug)]
pub struct InvariantSet {
    pub layout: &'static [InvariantKind],
    pub values: Vec<f64>,
    pub d_f: Vec<Tensor2>,
    pub d_d0: Vec<Vector3>,
    pub d2_ff: Vec<Tensor4>,
    pub d2_fd0: Vec<Tensor3>,
    pub d2_d0d0: Vec<Tensor2>,
}

impl InvariantSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_second_order(&self) -> bool {
        !self.d2_ff.is_empty()
    }
}

/// One scalar invariant together with all derivative blocks.
#[derive(Clone, Copy, Debug)]
struct Scalar {
    value: f64,
    d_f: Tensor2,
    d_d0: Vector3,
    d2_ff: Tensor4,
    d2_fd0: Tensor3,
    d2_d0d0: Tensor2,
}

impl Scalar {
    fn zero() -> Self {
        Scalar {
            value: 0.0,
            d_f: Tensor2::zero(),
            d_d0: Vector3::zero(),
            d2_ff: Tensor4::zero(),
            d2_fd0: Tensor3::zero(),
            d2_d0d0: Tensor2::zero(),
        }
    }

    fn sub(&self, o: &Scalar) -> Scalar {
        Scalar {
            value: self.value - o.value,
            d_f: self.d_f - o.d_f,
            d_d0: self.d_d0 - o.d_d0,
            d2_ff: self.d2_ff - o.d2_ff,
            d2_fd0: self.d2_fd0 - o.d2_fd0,
            d2_d0d0: self.d2_d0d0 - o.d2_d0d0,
        }
    }

    fn neg(&self) -> Scalar {
        Scalar::zero().sub(self)
    }

    /// `a / b` for a positive divisor.
    fn quotient(a: &Scalar, b: &Scalar, second: bool) -> Scalar {
        let inv = 1.0 / b.value;
        let inv2 = inv * inv;
        let value = a.value * inv;
        // g = 1/b: dg = -b⁻² db, d²g = 2 b⁻³ db⊗db - b⁻² d²b
        let g_df = b.d_f.scale(-inv2);
        let g_dd = b.d_d0.scale(-inv2);
        let d_f = a.d_f.scale(inv) + g_df.scale(a.value);
        let d_d0 = a.d_d0.scale(inv) + g_dd.scale(a.value);
        let mut out = Scalar { value, d_f, d_d0, ..Scalar::zero() };
        if second {
            let inv3 = inv2 * inv;
            let mut g_ff = b.d2_ff.scale(-inv2);
            g_ff.add_outer(&b.d_f, &b.d_f, 2.0 * inv3);
            let g_fd = Tensor3::outer(&b.d_f, &b.d_d0).scale(2.0 * inv3) - b.d2_fd0.scale(inv2);
            let g_dd2 = b.d_d0.outer(&b.d_d0).scale(2.0 * inv3) - b.d2_d0d0.scale(inv2);

            let mut ff = a.d2_ff.scale(inv);
            ff.add_outer(&a.d_f, &g_df, 1.0);
            ff.add_outer(&g_df, &a.d_f, 1.0);
            ff.add_scaled(&g_ff, a.value);
            let fd = a.d2_fd0.scale(inv)
                + Tensor3::outer(&a.d_f, &g_dd)
                + Tensor3::outer(&g_df, &a.d_d0)
                + g_fd.scale(a.value);
            let dd = a.d2_d0d0.scale(inv) + a.d_d0.outer(&g_dd) + g_dd.outer(&a.d_d0) + g_dd2.scale(a.value);
            out.d2_ff = ff;
            out.d2_fd0 = fd;
            out.d2_d0d0 = dd;
        }
        out
    }
}

struct Kinematics {
    f: Tensor2,
    h: Tensor2,
    j: f64,
    d0: Vector3,
    /// `∂H_kK/∂F_jJ`, also the Hessian of `det F`.
    dh: Tensor4,
}

/// `tr(F W Fᵀ)` for symmetric `W`.
fn quad_f(k: &Kinematics, w: &Tensor2, second: bool) -> Scalar {
    let fw = k.f.dot(w);
    let mut s = Scalar { value: fw.ddot(&k.f), d_f: fw.scale(2.0), ..Scalar::zero() };
    if second {
        s.d2_ff = Tensor4::from_fn(|i, ii, j, jj| if i == j { 2.0 * w[(ii, jj)] } else { 0.0 });
    }
    s
}

/// `tr(H W Hᵀ)` for symmetric `W`.
fn quad_h(k: &Kinematics, w: &Tensor2, second: bool) -> Scalar {
    let hw = k.h.dot(w);
    let value = hw.ddot(&k.h);
    let mut d_f = Tensor2::zero();
    for kk in 0..3 {
        for cap in 0..3 {
            let a = hw[(kk, cap)];
            if a == 0.0 {
                continue;
            }
            for j in 0..3 {
                for jj in 0..3 {
                    d_f[(j, jj)] += 2.0 * a * k.dh[(kk, cap, j, jj)];
                }
            }
        }
    }
    let mut s = Scalar { value, d_f, ..Scalar::zero() };
    if second {
        // 2 Σ dH[k][K][iI] W_KL dH[k][L][jJ] + 2 Σ (HW)_kK ε_kij ε_KIJ
        let mut ff = Tensor4::det_hessian(&hw).scale(2.0);
        for kk in 0..3 {
            // wdh[L][iI] = Σ_K W_LK dH[k][K][iI]
            let mut wdh = [[0.0f64; 9]; 3];
            for (l, row) in wdh.iter_mut().enumerate() {
                for cap in 0..3 {
                    let wl = w[(l, cap)];
                    if wl == 0.0 {
                        continue;
                    }
                    for (r, v) in row.iter_mut().enumerate() {
                        *v += wl * k.dh[(kk, cap, r / 3, r % 3)];
                    }
                }
            }
            let flat = ff.flat_mut();
            for l in 0..3 {
                for r in 0..9 {
                    let a = 2.0 * wdh[l][r];
                    if a == 0.0 {
                        continue;
                    }
                    for c in 0..9 {
                        flat[9 * r + c] += a * k.dh[(kk, l, c / 3, c % 3)];
                    }
                }
            }
        }
        s.d2_ff = ff;
    }
    s
}

/// `d0 · W d0` for symmetric `W`.
fn quad_d(k: &Kinematics, w: &Tensor2, second: bool) -> Scalar {
    let wd = w.apply(&k.d0);
    let mut s = Scalar { value: wd.dot(&k.d0), d_d0: wd.scale(2.0), ..Scalar::zero() };
    if second {
        s.d2_d0d0 = w.scale(2.0);
    }
    s
}

fn det_scalar(k: &Kinematics, second: bool) -> Scalar {
    let mut s = Scalar { value: k.j, d_f: k.h, ..Scalar::zero() };
    if second {
        s.d2_ff = k.dh;
    }
    s
}

/// `I5 = |F d0|²`.
fn i5_scalar(k: &Kinematics, second: bool) -> Scalar {
    let d = k.f.apply(&k.d0);
    let c = k.f.transpose().dot(&k.f);
    let mut s = Scalar {
        value: d.norm_sq(),
        d_f: d.outer(&k.d0).scale(2.0),
        d_d0: c.apply(&k.d0).scale(2.0),
        ..Scalar::zero()
    };
    if second {
        let d0 = &k.d0;
        s.d2_ff = Tensor4::from_fn(|i, ii, j, jj| if i == j { 2.0 * d0[ii] * d0[jj] } else { 0.0 });
        s.d2_fd0 = Tensor3::from_fn(|i, ii, kk| 2.0 * k.f[(i, kk)] * d0[ii] + if ii == kk { 2.0 * d[i] } else { 0.0 });
        s.d2_d0d0 = c.scale(2.0);
    }
    s
}

fn compute(state: &MaterialState, sym: &SymmetryClass, mode: ConvexityMode, second: bool) -> Result<InvariantSet> {
    sym.validate()?;
    let (h, j) = kinematic_triplet(&state.f)?;
    let kin = Kinematics { f: state.f, h, j, d0: state.d0, dh: Tensor4::det_hessian(&state.f) };
    let eye = Tensor2::identity();
    let layout = invariant_layout(sym, mode);

    let i1 = quad_f(&kin, &eye, second);
    let i2 = quad_h(&kin, &eye, second);
    let jj = det_scalar(&kin, second);
    let i4 = quad_d(&kin, &eye, second);
    let i5 = i5_scalar(&kin, second);
    let i6 = Scalar::quotient(&i5, &jj, second);

    let mut scalars: Vec<Scalar> = Vec::with_capacity(layout.len());
    scalars.extend([i1, i2, jj, i4, i5, i6]);
    if mode == ConvexityMode::Polyconvex {
        scalars.push(jj.neg());
    }
    if let SymmetryClass::TransverselyIsotropic(n) = sym {
        let g = n.outer(n);
        let i1ti = quad_f(&kin, &g, second);
        let i2ti = quad_h(&kin, &g, second);
        let i3ti = quad_d(&kin, &g, second);
        scalars.extend([i1ti, i2ti, i3ti]);
        if mode == ConvexityMode::Polyconvex {
            scalars.extend([i1.sub(&i1ti), i2.sub(&i2ti), i4.sub(&i3ti)]);
        }
    }
    debug_assert_eq!(scalars.len(), layout.len());

    let mut set = InvariantSet {
        layout,
        values: scalars.iter().map(|s| s.value).collect(),
        d_f: scalars.iter().map(|s| s.d_f).collect(),
        d_d0: scalars.iter().map(|s| s.d_d0).collect(),
        d2_ff: Vec::new(),
        d2_fd0: Vec::new(),
        d2_d0d0: Vec::new(),
    };
    if second {
        set.d2_ff = scalars.iter().map(|s| s.d2_ff).collect();
        set.d2_fd0 = scalars.iter().map(|s| s.d2_fd0).collect();
        set.d2_d0d0 = scalars.iter().map(|s| s.d2_d0d0).collect();
    }
    Ok(set)
}

/// Invariants with first and second derivative blocks.
pub fn compute_invariants(state: &MaterialState, sym: &SymmetryClass, mode: ConvexityMode) -> Result<InvariantSet> {
    compute(state, sym, mode, true)
}

/// Invariants with first derivatives only.
pub fn compute_invariant_gradients(
    state: &MaterialState,
    sym: &SymmetryClass,
    mode: ConvexityMode,
) -> Result<InvariantSet> {
    compute(state, sym, mode, false)
}

/// Invariant values at the reference state `F = I`, `d0 = 0`.
pub fn reference_values(sym: &SymmetryClass, mode: ConvexityMode) -> Vec<f64> {
    invariant_layout(sym, mode)
        .iter()
        .map(|k| match k {
            K::I1 | K::I2 => 3.0,
            K::J => 1.0,
            K::I7 => -1.0,
            K::I1ti | K::I2ti => 1.0,
            K::I4ti | K::I5ti => 2.0,
            K::I4 | K::I5 | K::I6 | K::I3ti | K::I6ti => 0.0,
        })
        .collect()
}
