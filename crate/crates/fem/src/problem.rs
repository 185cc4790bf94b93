//! Element residuals and tangents of the coupled displacement/potential
//! formulation, and their global assembly.
//!
//! The discrete functional is
//!
//! ```text
//! Π(u, φ) = ∫ Ψ(F, e0) dV − λ ∫ f0·u dV + λ ∫ ρ φ dV + λ ∫ ω φ dA,
//! F = I + ∇0 u,   e0 = −∇0 φ,
//! ```
//!
//! minimized in `u` and maximized in `φ`. The free energy `Ψ` and its
//! derivatives come from the Legendre transform of the internal energy at
//! every quadrature point, warm-started from the previous electric
//! displacement stored per point.

use electropann::legendre::{free_energy_with_guess, FreeEnergyOutput};
use electropann::{InternalEnergy, Tensor2, Vector3};

use crate::dofs::{BoundaryConditions, DofMap, DOFS_PER_NODE};
use crate::error::{FemError, Result};
use crate::mesh::Mesh;
use crate::shape::{face_quadrature, hex_quadrature, shape_functions};

/// Shape data at one volume quadrature point.
#[derive(Clone, Debug)]
pub struct QpGeometry {
    pub n: Vec<f64>,
    /// Reference gradients `∇0 N_a`.
    pub grad: Vec<[f64; 3]>,
    /// `det J · w`.
    pub dv: f64,
    /// Reference position.
    pub x: [f64; 3],
}

#[derive(Clone, Debug)]
struct FaceGeometry {
    element: usize,
    local_nodes: Vec<usize>,
    /// Per quadrature point: shape values of `local_nodes` and area weight.
    points: Vec<(Vec<f64>, f64)>,
    density: f64,
}

/// Per-quadrature-point electric displacement used to warm-start the
/// Legendre solves.
#[derive(Clone, Debug, PartialEq)]
pub struct QpCache {
    pub d0: Vec<Vec<Vector3>>,
}

/// Local residual (and tangent) in the interleaved `(u_x, u_y, u_z, φ)` order.
#[derive(Clone, Debug)]
pub struct ElementOutput {
    pub residual: Vec<f64>,
    /// Row-major square matrix; empty when not requested.
    pub tangent: Vec<f64>,
}

/// Assembled full-length residual and reduced tangent triplets.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub residual: Vec<f64>,
    /// `(row, col, value)` in reduced numbering; duplicates are to be summed.
    pub triplets: Vec<(usize, usize, f64)>,
    /// `(reduced row, global prescribed col, value)`: the tangent block that
    /// couples free equations to prescribed dofs.
    pub coupling: Vec<(usize, usize, f64)>,
}

/// Stress measures at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct QpResult {
    pub element: usize,
    pub point: usize,
    pub x: [f64; 3],
    pub p: Tensor2,
    /// Cauchy stress `J⁻¹ P Fᵀ`.
    pub sigma: Tensor2,
    pub d0: Vector3,
    pub e0: Vector3,
}

pub struct Problem<M> {
    pub mesh: Mesh,
    pub bcs: BoundaryConditions,
    pub model: M,
    pub dofs: DofMap,
    geometry: Vec<Vec<QpGeometry>>,
    faces: Vec<FaceGeometry>,
}

fn jacobian(conn: &[usize], nodes: &[[f64; 3]], dn: &[[f64; 3]]) -> Tensor2 {
    Tensor2::from_fn(|r, c| conn.iter().zip(dn).map(|(n, g)| nodes[*n][r] * g[c]).sum())
}

impl<M: InternalEnergy> Problem<M> {
    pub fn new(mesh: Mesh, bcs: BoundaryConditions, model: M) -> Result<Self> {
        mesh.validate()?;
        let dofs = DofMap::new(&mesh, &bcs)?;
        let order = mesh.order;
        let quad = hex_quadrature(order.gauss_points());
        let mut geometry = Vec::with_capacity(mesh.elements.len());
        for (e, conn) in mesh.elements.iter().enumerate() {
            let mut pts = Vec::with_capacity(quad.points.len());
            for (xi, w) in quad.points.iter().zip(&quad.weights) {
                let (n, dn) = shape_functions(order, xi);
                let j = jacobian(conn, &mesh.nodes, &dn);
                let det = j.det();
                let jinv = j
                    .inverse()
                    .filter(|_| det > 0.0)
                    .ok_or_else(|| FemError::Mesh(format!("element {e} has Jacobian determinant {det:e}")))?;
                // ∇0 N = J⁻ᵀ ∇ξ N
                let grad =
                    dn.iter().map(|g| std::array::from_fn(|i| (0..3).map(|k| jinv[(k, i)] * g[k]).sum())).collect();
                let mut x = [0.0; 3];
                for (a, node) in conn.iter().enumerate() {
                    for d in 0..3 {
                        x[d] += n[a] * mesh.nodes[*node][d];
                    }
                }
                pts.push(QpGeometry { n, grad, dv: det * w, x });
            }
            geometry.push(pts);
        }
        let mut faces = Vec::new();
        for sc in &bcs.surface_charges {
            for &(e, f) in mesh.face_set(&sc.set)? {
                let conn = &mesh.elements[e];
                let local_nodes = mesh.face_local_nodes(f);
                let fq = face_quadrature(order.gauss_points(), f);
                let axis = f / 2;
                let tangents: Vec<usize> = (0..3).filter(|d| *d != axis).collect();
                let mut points = Vec::with_capacity(fq.points.len());
                for (xi, w) in fq.points.iter().zip(&fq.weights) {
                    let (n, dn) = shape_functions(order, xi);
                    let j = jacobian(conn, &mesh.nodes, &dn);
                    let t1 = Vector3::from_array([j[(0, tangents[0])], j[(1, tangents[0])], j[(2, tangents[0])]]);
                    let t2 = Vector3::from_array([j[(0, tangents[1])], j[(1, tangents[1])], j[(2, tangents[1])]]);
                    let da = t1.cross(&t2).norm() * w;
                    points.push((local_nodes.iter().map(|a| n[*a]).collect(), da));
                }
                faces.push(FaceGeometry { element: e, local_nodes, points, density: sc.density });
            }
        }
        Ok(Self { mesh, bcs, model, dofs, geometry, faces })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn geometry(&self, element: usize) -> &[QpGeometry] {
        &self.geometry[element]
    }

    pub fn new_cache(&self) -> QpCache {
        QpCache { d0: self.geometry.iter().map(|g| vec![Vector3::zero(); g.len()]).collect() }
    }

    /// Zero fields with the prescribed values at `lambda`.
    pub fn initial_state(&self, lambda: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs()];
        self.dofs.apply(&mut x, lambda);
        x
    }

    /// Deformation gradient and material electric field at a point.
    pub fn kinematics(&self, element: usize, g: &QpGeometry, x: &[f64]) -> (Tensor2, Vector3) {
        let conn = &self.mesh.elements[element];
        let mut f = Tensor2::identity();
        let mut e0 = [0.0; 3];
        for (a, node) in conn.iter().enumerate() {
            let base = DOFS_PER_NODE * node;
            let ga = g.grad[a];
            for i in 0..3 {
                for jj in 0..3 {
                    f[(i, jj)] += x[base + i] * ga[jj];
                }
                e0[i] -= x[base + 3] * ga[i];
            }
        }
        (f, Vector3::from_array(e0))
    }

    fn material(&self, element: usize, f: &Tensor2, e0: &Vector3, guess: &Vector3) -> Result<FreeEnergyOutput> {
        free_energy_with_guess(&self.model, f, e0, guess).map_err(|source| FemError::Material { element, source })
    }

    /// Local residual and, if `tangent`, the local stiffness. `d0` holds the
    /// warm starts of this element's points and receives the solved values.
    pub fn element(
        &self,
        element: usize,
        x: &[f64],
        lambda: f64,
        d0: &mut [Vector3],
        tangent: bool,
    ) -> Result<ElementOutput> {
        let npe = self.mesh.order.nodes_per_element();
        let nd = DOFS_PER_NODE * npe;
        let mut r = vec![0.0; nd];
        let mut k = if tangent { vec![0.0; nd * nd] } else { Vec::new() };
        let f0 = self.bcs.body_force.map(|v| lambda * v);
        let rho = lambda * self.bcs.charge_density;
        for (q, g) in self.geometry[element].iter().enumerate() {
            let (f, e0) = self.kinematics(element, g, x);
            let m = self.material(element, &f, &e0, &d0[q])?;
            d0[q] = m.d0;
            for a in 0..npe {
                let ga = g.grad[a];
                let pa = m.p.apply(&Vector3::from_array(ga));
                for i in 0..3 {
                    r[4 * a + i] += (pa[i] - g.n[a] * f0[i]) * g.dv;
                }
                r[4 * a + 3] += (m.d0.dot(&Vector3::from_array(ga)) + g.n[a] * rho) * g.dv;
            }
            if !tangent {
                continue;
            }
            for a in 0..npe {
                let ga = g.grad[a];
                for b in 0..npe {
                    let gb = g.grad[b];
                    for i in 0..3 {
                        let row = (4 * a + i) * nd;
                        for j in 0..3 {
                            let mut s = 0.0;
                            for ii in 0..3 {
                                for jj in 0..3 {
                                    s += ga[ii] * m.d2_ff[(i, ii, j, jj)] * gb[jj];
                                }
                            }
                            k[row + 4 * b + j] += s * g.dv;
                        }
                        let mut c = 0.0;
                        for ii in 0..3 {
                            for jj in 0..3 {
                                c += ga[ii] * m.d2_fe[(i, ii, jj)] * gb[jj];
                            }
                        }
                        k[row + 4 * b + 3] -= c * g.dv;
                        k[(4 * b + 3) * nd + 4 * a + i] -= c * g.dv;
                    }
                    let mut s = 0.0;
                    for ii in 0..3 {
                        for jj in 0..3 {
                            s += ga[ii] * m.d2_ee[(ii, jj)] * gb[jj];
                        }
                    }
                    k[(4 * a + 3) * nd + 4 * b + 3] += s * g.dv;
                }
            }
        }
        Ok(ElementOutput { residual: r, tangent: k })
    }

    /// Global residual (full length, prescribed rows included) and, if
    /// requested, the reduced tangent as triplets.
    pub fn assemble(&self, x: &[f64], lambda: f64, cache: &mut QpCache, tangent: bool) -> Result<Assembled> {
        let mut residual = vec![0.0; self.n_dofs()];
        let mut triplets = Vec::new();
        let mut coupling = Vec::new();
        for (e, conn) in self.mesh.elements.iter().enumerate() {
            let out = self.element(e, x, lambda, &mut cache.d0[e], tangent)?;
            let gdofs: Vec<usize> =
                conn.iter().flat_map(|n| (0..DOFS_PER_NODE).map(move |c| DOFS_PER_NODE * n + c)).collect();
            for (l, gd) in gdofs.iter().enumerate() {
                residual[*gd] += out.residual[l];
            }
            if tangent {
                let nd = gdofs.len();
                for (l, gr) in gdofs.iter().enumerate() {
                    let Some(fr) = self.dofs.free_index(*gr) else { continue };
                    for (m, gc) in gdofs.iter().enumerate() {
                        let v = out.tangent[l * nd + m];
                        if v == 0.0 {
                            continue;
                        }
                        match self.dofs.free_index(*gc) {
                            Some(fc) => triplets.push((fr, fc, v)),
                            None => coupling.push((fr, *gc, v)),
                        }
                    }
                }
            }
        }
        for face in &self.faces {
            let conn = &self.mesh.elements[face.element];
            for (n, da) in &face.points {
                for (a, local) in face.local_nodes.iter().enumerate() {
                    residual[DOFS_PER_NODE * conn[*local] + 3] += lambda * face.density * n[a] * da;
                }
            }
        }
        Ok(Assembled { residual, triplets, coupling })
    }

    pub fn residual(&self, x: &[f64], lambda: f64, cache: &mut QpCache) -> Result<Vec<f64>> {
        Ok(self.assemble(x, lambda, cache, false)?.residual)
    }

    /// Discrete saddle functional `Π(u, φ)`.
    pub fn energy(&self, x: &[f64], lambda: f64, cache: &mut QpCache) -> Result<f64> {
        let mut total = 0.0;
        let f0 = self.bcs.body_force.map(|v| lambda * v);
        let rho = lambda * self.bcs.charge_density;
        for (e, conn) in self.mesh.elements.iter().enumerate() {
            for (q, g) in self.geometry[e].iter().enumerate() {
                let (f, e0) = self.kinematics(e, g, x);
                let m = self.material(e, &f, &e0, &cache.d0[e][q])?;
                cache.d0[e][q] = m.d0;
                let mut ext = 0.0;
                for (a, node) in conn.iter().enumerate() {
                    let base = DOFS_PER_NODE * node;
                    ext += g.n[a] * ((0..3).map(|i| f0[i] * x[base + i]).sum::<f64>() - rho * x[base + 3]);
                }
                total += (m.psi - ext) * g.dv;
            }
        }
        for face in &self.faces {
            let conn = &self.mesh.elements[face.element];
            for (n, da) in &face.points {
                for (a, local) in face.local_nodes.iter().enumerate() {
                    total += lambda * face.density * n[a] * da * x[DOFS_PER_NODE * conn[*local] + 3];
                }
            }
        }
        Ok(total)
    }

    /// Stress and field values at every quadrature point.
    pub fn quadrature_results(&self, x: &[f64], cache: &QpCache) -> Result<Vec<QpResult>> {
        let mut out = Vec::new();
        for e in 0..self.mesh.elements.len() {
            for (q, g) in self.geometry[e].iter().enumerate() {
                let (f, e0) = self.kinematics(e, g, x);
                let m = self.material(e, &f, &e0, &cache.d0[e][q])?;
                let sigma = m.p.dot(&f.transpose()).scale(1.0 / f.det());
                out.push(QpResult { element: e, point: q, x: g.x, p: m.p, sigma, d0: m.d0, e0 });
            }
        }
        Ok(out)
    }
}
