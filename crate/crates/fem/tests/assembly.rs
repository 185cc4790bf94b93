use electropann::ground_truth::{MooneyRivlin, MooneyRivlinParams};
use electropann::oracle::{min_symmetric_eigenvalue, relative_error};
use electropann_fem::{BoundaryConditions, ElementOrder, Field, Mesh, Problem, DOFS_PER_NODE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mr() -> MooneyRivlin {
    MooneyRivlin::new(MooneyRivlinParams::default()).unwrap()
}

fn dense(n: usize, triplets: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut k = vec![vec![0.0; n]; n];
    for &(r, c, v) in triplets {
        k[r][c] += v;
    }
    k
}

/// Random small perturbation of the reference state: displacements of
/// order `u_amp` and potentials of order `phi_amp`.
fn perturbed(n_nodes: usize, u_amp: f64, phi_amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_nodes * DOFS_PER_NODE)
        .map(|d| if d % 4 == 3 { phi_amp } else { u_amp } * rng.random_range(-1.0..1.0))
        .collect()
}

#[test]
fn zero_residual_in_reference_configuration() {
    for order in [ElementOrder::Q1, ElementOrder::Q2] {
        let mesh = Mesh::box_mesh(order, [2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        let p = Problem::new(mesh, BoundaryConditions::default(), mr()).unwrap();
        let x = vec![0.0; p.n_dofs()];
        let r = p.residual(&x, 1.0, &mut p.new_cache()).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "max {}", r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
}

#[test]
fn residual_is_gradient_of_discrete_energy() {
    for order in [ElementOrder::Q1, ElementOrder::Q2] {
        let mesh = Mesh::box_mesh(order, [1, 1, 1], [1.0, 1.2, 0.8]).unwrap();
        let mut bcs = BoundaryConditions { body_force: [0.1, -0.2, 0.3], charge_density: 0.15, ..Default::default() };
        bcs = bcs.charge("zmax", 0.25);
        let p = Problem::new(mesh, bcs, mr()).unwrap();
        let x = perturbed(p.mesh.nodes.len(), 0.05, 0.1, 7);
        let lambda = 0.8;
        let mut cache = p.new_cache();
        let r = p.residual(&x, lambda, &mut cache).unwrap();
        let h = 1e-6;
        let fd: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let ep = p.energy(&xp, lambda, &mut cache.clone()).unwrap();
                let em = p.energy(&xm, lambda, &mut cache.clone()).unwrap();
                (ep - em) / (2.0 * h)
            })
            .collect();
        let err = relative_error(&r, &fd);
        assert!(err < 1e-6, "{order:?}: relative error {err:e}");
    }
}

#[test]
fn tangent_matches_finite_differences_of_residual() {
    for order in [ElementOrder::Q1, ElementOrder::Q2] {
        let mesh = Mesh::box_mesh(order, [2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        let bcs = BoundaryConditions { body_force: [0.0, 0.0, -0.1], ..Default::default() }.charge("xmax", 0.1);
        let p = Problem::new(mesh, bcs, mr()).unwrap();
        let n = p.n_dofs();
        let x = perturbed(p.mesh.nodes.len(), 0.05, 0.2, 11);
        let mut cache = p.new_cache();
        let k = dense(n, &p.assemble(&x, 1.0, &mut cache, true).unwrap().triplets);
        let h = 1e-6;
        let mut flat_k = Vec::with_capacity(n * n);
        let mut flat_fd = Vec::with_capacity(n * n);
        let mut cols = Vec::with_capacity(n);
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let rp = p.residual(&xp, 1.0, &mut cache.clone()).unwrap();
            let rm = p.residual(&xm, 1.0, &mut cache.clone()).unwrap();
            cols.push(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        for r in 0..n {
            for c in 0..n {
                flat_k.push(k[r][c]);
                flat_fd.push(cols[c][r]);
            }
        }
        let err = relative_error(&flat_k, &flat_fd);
        assert!(err < 1e-5, "{order:?}: relative error {err:e}");
        let asym =
            (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).fold(0.0f64, |m, (r, c)| m.max((k[r][c] - k[c][r]).abs()));
        assert!(asym < 1e-10, "tangent asymmetry {asym:e}");
    }
}

#[test]
fn reference_tangent_blocks_of_mooney_rivlin() {
    let mesh = Mesh::box_mesh(ElementOrder::Q2, [1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    let bcs = BoundaryConditions::default()
        .fix("xmin", Field::Ux, 0.0)
        .fix("xmin", Field::Uy, 0.0)
        .fix("xmin", Field::Uz, 0.0)
        .fix("xmin", Field::Phi, 0.0);
    let p = Problem::new(mesh, bcs, mr()).unwrap();
    let x = vec![0.0; p.n_dofs()];
    let asm = p.assemble(&x, 0.0, &mut p.new_cache(), true).unwrap();
    let k = dense(p.dofs.n_free(), &asm.triplets);

    let mut mech = Vec::new();
    let mut elec = Vec::new();
    for d in 0..p.n_dofs() {
        if let Some(i) = p.dofs.free_index(d) {
            if d % 4 == 3 {
                elec.push(i)
            } else {
                mech.push(i)
            }
        }
    }
    let block = |rows: &[usize], cols: &[usize]| -> Vec<Vec<f64>> {
        rows.iter().map(|r| cols.iter().map(|c| k[*r][*c]).collect()).collect()
    };
    let kuu = block(&mech, &mech);
    assert!(min_symmetric_eigenvalue(&kuu) > 1e-6);
    let kup = block(&mech, &elec);
    assert!(kup.iter().flatten().all(|v| v.abs() < 1e-14));
    let kpp: Vec<Vec<f64>> = block(&elec, &elec).iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    assert!(min_symmetric_eigenvalue(&kpp) > 1e-6, "potential block must be negative definite");
}

#[test]
fn rejects_inverted_elements_and_conflicting_conditions() {
    let mut mesh = Mesh::box_mesh(ElementOrder::Q1, [1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
    assert!(Problem::new(
        mesh.clone(),
        BoundaryConditions::default().fix("xmin", Field::Phi, 0.0).charge("xmin", 1.0),
        mr()
    )
    .is_err());
    assert!(Problem::new(
        mesh.clone(),
        BoundaryConditions::default().fix("xmin", Field::Ux, 0.0).fix("xmin", Field::Ux, 1.0),
        mr()
    )
    .is_err());
    assert!(Problem::new(mesh.clone(), BoundaryConditions::default().fix("nowhere", Field::Ux, 0.0), mr()).is_err());
    mesh.nodes.iter_mut().for_each(|x| x[0] = -x[0]);
    assert!(Problem::new(mesh, BoundaryConditions::default(), mr()).is_err());
}
