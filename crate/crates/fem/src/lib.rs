//! Hexahedral finite elements for quasi-static electro-elasticity driven by
//! an internal-energy constitutive model.
//!
//! Unknowns are the displacement and the electric potential at every node.
//! Each quadrature point turns the internal energy into the free energy by
//! a local Legendre transform, and the global saddle-point system is solved
//! by Newton's method with a sparse LU factorization.

pub mod dofs;
pub mod error;
pub mod mesh;
pub mod output;
pub mod problem;
pub mod shape;
pub mod solver;

pub use dofs::{BoundaryConditions, Dirichlet, DofMap, Field, SurfaceCharge, DOFS_PER_NODE};
pub use error::{FemError, Result};
pub use mesh::{ElementOrder, Mesh};
pub use problem::{Assembled, Problem, QpCache, QpResult};
pub use solver::{load_stepping, newton_solve, NewtonOptions, NewtonReport, Snapshot, SteppingOptions};
