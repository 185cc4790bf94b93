//! Plain-text tables of nodal fields and quadrature-point stresses.

use std::fmt::Write;

use electropann::InternalEnergy;

use crate::dofs::DOFS_PER_NODE;
use crate::error::Result;
use crate::problem::{Problem, QpCache};

/// One row per node: coordinates, displacement and potential.
pub fn nodal_table<M: InternalEnergy>(problem: &Problem<M>, x: &[f64]) -> String {
    let mut out = String::from("node x y z ux uy uz phi\n");
    for (n, p) in problem.mesh.nodes.iter().enumerate() {
        let v = &x[DOFS_PER_NODE * n..DOFS_PER_NODE * (n + 1)];
        let _ = writeln!(
            out,
            "{n} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
            p[0], p[1], p[2], v[0], v[1], v[2], v[3]
        );
    }
    out
}

/// One row per quadrature point with the first Piola and Cauchy stresses
/// (row-major) and the material electric displacement and field.
pub fn quadrature_table<M: InternalEnergy>(problem: &Problem<M>, x: &[f64], cache: &QpCache) -> Result<String> {
    let mut out = String::from("element point x y z");
    for name in ["P", "sigma"] {
        for i in 1..=3 {
            for j in 1..=3 {
                let _ = write!(out, " {name}{i}{j}");
            }
        }
    }
    out.push_str(" d0_x d0_y d0_z e0_x e0_y e0_z\n");
    for r in problem.quadrature_results(x, cache)? {
        let _ = write!(out, "{} {}", r.element, r.point);
        let vals =
            r.x.iter()
                .chain(r.p.to_row_major().iter())
                .chain(r.sigma.to_row_major().iter())
                .chain(r.d0.as_array())
                .chain(r.e0.as_array())
                .copied()
                .collect::<Vec<f64>>();
        for v in vals {
            let _ = write!(out, " {v:.10e}");
        }
        out.push('\n');
    }
    Ok(out)
}
