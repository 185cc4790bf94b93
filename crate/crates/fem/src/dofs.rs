//! Boundary conditions and the global degree-of-freedom numbering.
//!
//! Every node carries four unknowns, interleaved as `(u_x, u_y, u_z, φ)`, so
//! dof `4·node + c` is component `c` of that node. Prescribed dofs are
//! removed from the solved system; the rest are numbered consecutively.

use crate::error::{FemError, Result};
use crate::mesh::Mesh;

pub const DOFS_PER_NODE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Ux,
    Uy,
    Uz,
    Phi,
}

impl Field {
    pub fn component(self) -> usize {
        match self {
            Field::Ux => 0,
            Field::Uy => 1,
            Field::Uz => 2,
            Field::Phi => 3,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ux" => Some(Field::Ux),
            "uy" => Some(Field::Uy),
            "uz" => Some(Field::Uz),
            "phi" => Some(Field::Phi),
            _ => None,
        }
    }
}

/// Prescribed value on a node set, multiplied by the load factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub set: String,
    pub field: Field,
    pub value: f64,
}

/// Surface charge density on a face set, multiplied by the load factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCharge {
    pub set: String,
    pub density: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<Dirichlet>,
    /// Body force per reference volume.
    pub body_force: [f64; 3],
    /// Free charge per reference volume.
    pub charge_density: f64,
    pub surface_charges: Vec<SurfaceCharge>,
}

impl BoundaryConditions {
    pub fn fix(mut self, set: &str, field: Field, value: f64) -> Self {
        self.dirichlet.push(Dirichlet { set: set.into(), field, value });
        self
    }

    pub fn charge(mut self, set: &str, density: f64) -> Self {
        self.surface_charges.push(SurfaceCharge { set: set.into(), density });
        self
    }
}

#[derive(Clone, Debug)]
pub struct DofMap {
    n_nodes: usize,
    /// Prescribed value at unit load factor, per global dof.
    prescribed: Vec<Option<f64>>,
    /// Index into the reduced system, per global dof.
    free: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, bcs: &BoundaryConditions) -> Result<Self> {
        let n = mesh.nodes.len() * DOFS_PER_NODE;
        let mut prescribed: Vec<Option<f64>> = vec![None; n];
        for d in &bcs.dirichlet {
            if !d.value.is_finite() {
                return Err(FemError::Bc(format!("non-finite value on set '{}'", d.set)));
            }
            for node in mesh.node_set(&d.set)? {
                let dof = DOFS_PER_NODE * node + d.field.component();
                match prescribed[dof] {
                    Some(v) if v != d.value => {
                        return Err(FemError::Bc(format!(
                            "node {node} receives conflicting {:?} values {v} and {}",
                            d.field, d.value
                        )))
                    }
                    _ => prescribed[dof] = Some(d.value),
                }
            }
        }
        for sc in &bcs.surface_charges {
            mesh.face_set(&sc.set)?;
            if bcs.dirichlet.iter().any(|d| d.field == Field::Phi && d.set == sc.set) {
                return Err(FemError::Bc(format!(
                    "set '{}' carries both a prescribed potential and a surface charge",
                    sc.set
                )));
            }
        }
        let mut free = vec![None; n];
        let mut n_free = 0;
        for (slot, p) in free.iter_mut().zip(&prescribed) {
            if p.is_none() {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        Ok(Self { n_nodes: mesh.nodes.len(), prescribed, free, n_free })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * DOFS_PER_NODE
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free[dof]
    }

    pub fn prescribed(&self, dof: usize) -> Option<f64> {
        self.prescribed[dof]
    }

    /// Writes the prescribed values at load factor `lambda` into `x`.
    pub fn apply(&self, x: &mut [f64], lambda: f64) {
        for (xi, p) in x.iter_mut().zip(&self.prescribed) {
            if let Some(v) = p {
                *xi = lambda * v;
            }
        }
    }

    /// Free entries of a full-length vector, in reduced order.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (v, f) in full.iter().zip(&self.free) {
            if let Some(i) = f {
                out[*i] = *v;
            }
        }
        out
    }

    /// Adds a reduced vector to the free entries of `full`.
    pub fn add_reduced(&self, full: &mut [f64], reduced: &[f64], scale: f64) {
        for (v, f) in full.iter_mut().zip(&self.free) {
            if let Some(i) = f {
                *v += scale * reduced[*i];
            }
        }
    }
}
