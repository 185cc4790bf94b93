//! Shared constitutive vocabulary: the evaluation point, the energy output
//! with its derivative blocks, and the trait every internal-energy model implements.

use crate::error::{Error, Result};
use crate::tensor::{Tensor2, Tensor3, Tensor4, Vector3};

/// Deformation gradient plus material electric displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialState {
    pub f: Tensor2,
    pub d0: Vector3,
}

impl MaterialState {
    pub fn new(f: Tensor2, d0: Vector3) -> Result<Self> {
        let det = f.det();
        if !(det > 0.0) {
            return Err(Error::InvalidDeformation { det });
        }
        Ok(Self { f, d0 })
    }

    pub fn reference() -> Self {
        Self { f: Tensor2::identity(), d0: Vector3::zero() }
    }
}

/// Internal energy and its first and second derivatives w.r.t. `(F, d0)`.
#[derive(Clone, Copy, Debug)]
pub struct EnergyOutput {
    pub e: f64,
    /// First Piola-Kirchhoff stress `∂e/∂F`.
    pub p: Tensor2,
    /// Material electric field `∂e/∂d0`.
    pub e0: Vector3,
    pub d2_ff: Tensor4,
    pub d2_fd0: Tensor3,
    pub d2_d0d0: Tensor2,
}

impl EnergyOutput {
    pub fn zero() -> Self {
        Self {
            e: 0.0,
            p: Tensor2::zero(),
            e0: Vector3::zero(),
            d2_ff: Tensor4::zero(),
            d2_fd0: Tensor3::zero(),
            d2_d0d0: Tensor2::zero(),
        }
    }

    /// `self + s · other`, block by block.
    pub fn add_scaled(&mut self, other: &EnergyOutput, s: f64) {
        self.e += s * other.e;
        self.p += other.p.scale(s);
        self.e0 += other.e0.scale(s);
        self.d2_ff.add_scaled(&other.d2_ff, s);
        self.d2_fd0.add_scaled(&other.d2_fd0, s);
        self.d2_d0d0 += other.d2_d0d0.scale(s);
    }

    /// Adds the rank-one Hessian `s · (g ⊗ g)` for a gradient `g = (g_f, g_d)`.
    pub fn add_rank_one(&mut self, g_f: &Tensor2, g_d: &Vector3, s: f64) {
        self.d2_ff.add_outer(g_f, g_f, s);
        self.d2_fd0.add_scaled(&Tensor3::outer(g_f, g_d), s);
        self.d2_d0d0 += g_d.outer(g_d).scale(s);
    }
}

/// An internal energy density `e(F, d0)`.
pub trait InternalEnergy: Send + Sync {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput>;

    /// Energy and first derivatives only. Models with a cheaper first-order
    /// path override this.
    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        let out = self.evaluate(state)?;
        Ok((out.e, out.p, out.e0))
    }

    fn energy(&self, state: &MaterialState) -> Result<f64> {
        Ok(self.gradients(state)?.0)
    }

    /// Short identifier used in reports and exported tables.
    fn name(&self) -> String;
}

impl<T: InternalEnergy + ?Sized> InternalEnergy for &T {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        (**self).evaluate(state)
    }
    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        (**self).gradients(state)
    }
    fn energy(&self, state: &MaterialState) -> Result<f64> {
        (**self).energy(state)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: InternalEnergy + ?Sized> InternalEnergy for Box<T> {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        (**self).evaluate(state)
    }
    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        (**self).gradients(state)
    }
    fn energy(&self, state: &MaterialState) -> Result<f64> {
        (**self).energy(state)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: InternalEnergy + ?Sized> InternalEnergy for std::sync::Arc<T> {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        (**self).evaluate(state)
    }
    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        (**self).gradients(state)
    }
    fn energy(&self, state: &MaterialState) -> Result<f64> {
        (**self).energy(state)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}
