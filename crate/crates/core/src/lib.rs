//! Physics-augmented neural network constitutive models for finite-strain
//! electro-elasticity.
//!
//! The crate covers the constitutive side of the pipeline: tensor kinematics,
//! invariant sets, the PANN energy, analytical ground-truth energies, dataset
//! generation, Sobolev calibration, the Legendre transform to the free energy,
//! ellipticity diagnostics and the Gauss-point equilibrium path.

pub mod calibration;
pub mod dataset;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod ground_truth;
pub mod invariants;
pub mod legendre;
pub mod oracle;
pub mod pann;
pub mod stability;
pub mod tensor;

pub use energy::{EnergyOutput, InternalEnergy, MaterialState};
pub use error::{Error, Result};
pub use invariants::{compute_invariants, ConvexityMode, InvariantSet, SymmetryClass};
pub use pann::{PannModel, PannParams};
pub use tensor::{Tensor2, Tensor3, Tensor4, Vector3};
