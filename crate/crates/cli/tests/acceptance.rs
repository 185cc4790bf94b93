//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use electropann::calibration::{calibrate, Architecture, CalibrationConfig};
use electropann::dataset::{generate, SamplingPlan, ScaleFactors};
use electropann::equilibrium::{solve_free_state, trace_path, FreeState, PathState};
use electropann::ground_truth::{Laminate, LaminateParams, MooneyRivlin, MooneyRivlinParams};
use electropann::legendre::{free_energy_from, free_energy_gradients, solve_d0_full};
use electropann::oracle::{
    check_energy_derivatives, fd_gradient, fd_jacobian, min_symmetric_eigenvalue, random_state, random_tensor,
    random_unit, relative_error, FD_STEP,
};
use electropann::pann::nn_potential;
use electropann::stability::SphericalGrid;
use electropann::{
    compute_invariants, ConvexityMode, InternalEnergy, MaterialState, PannModel, PannParams, SymmetryClass, Tensor2,
    Vector3,
};
use electropann_fem::{
    load_stepping, newton_solve, BoundaryConditions, ElementOrder, Field, Mesh, NewtonOptions, Problem,
    SteppingOptions, DOFS_PER_NODE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Calibrated models shared by the table and path criteria.
#[derive(Default)]
struct Trained {
    iso: Option<PannParams>,
    rol_sp8: Option<PannParams>,
}

fn mr() -> MooneyRivlin {
    MooneyRivlin::new(MooneyRivlinParams::default()).unwrap()
}

fn laminate() -> Laminate {
    Laminate::new(LaminateParams::default()).unwrap()
}

fn ti() -> SymmetryClass {
    SymmetryClass::transversely_isotropic(LaminateParams::default().n).unwrap()
}

fn configs() -> Vec<(SymmetryClass, ConvexityMode)> {
    let mut v = Vec::new();
    for sym in [SymmetryClass::Isotropic, ti()] {
        for mode in [ConvexityMode::Polyconvex, ConvexityMode::Unconstrained] {
            v.push((sym, mode));
        }
    }
    v
}

fn random_pann<R: Rng>(sym: SymmetryClass, mode: ConvexityMode, width: usize, rng: &mut R) -> PannParams {
    let mut p = PannParams::glorot(sym, mode, width, rng);
    p.b.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
    p
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_consistency() -> Outcome {
    let start = Instant::now();
    let lam = LaminateParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut models: Vec<(String, Box<dyn InternalEnergy>)> = vec![
        ("mooney-rivlin".into(), Box::new(mr())),
        ("phase a".into(), Box::new(MooneyRivlin::new(lam.phase_a).unwrap())),
        ("phase b".into(), Box::new(MooneyRivlin::scaled(lam.phase_a, lam.f_m, lam.f_e).unwrap())),
        ("laminate".into(), Box::new(laminate())),
    ];
    for (sym, mode) in configs() {
        let p = random_pann(sym, mode, 8, &mut rng);
        models.push((electropann::pann::architecture_name(&p), Box::new(PannModel::new(p).unwrap())));
    }
    let mut worst = Vec::new();
    let mut ok = true;
    for (name, model) in &models {
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let s = random_state(&mut rng, 0.3, 0.8);
            match check_energy_derivatives(model.as_ref(), &s, FD_STEP) {
                Ok(c) => {
                    first = first.max(c.first);
                    second = second.max(c.second);
                }
                Err(e) => return Err(format!("{name}: evaluation failed: {e}")),
            }
        }
        ok &= first <= 1e-6 && second <= 1e-5;
        worst.push(format!("{name} {first:.1e}/{second:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 60.0, format!("first/second relative errors: {}; {secs:.1} s", worst.join(", ")))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for (sym, mode) in configs() {
        for _ in 0..50 {
            let model = PannModel::new(random_pann(sym, mode, 8, &mut rng)).map_err(|e| e.to_string())?;
            let out = model.evaluate(&MaterialState::reference()).map_err(|e| e.to_string())?;
            worst = worst.max(out.p.norm()).max(out.e0.norm());
        }
    }
    check(worst <= 1e-10, format!("max |P(I,0)|, |e0(I,0)| over 4 x 50 draws = {worst:.2e}"))
}

fn polyconvexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut min_eig = f64::INFINITY;
    for sym in [SymmetryClass::Isotropic, ti()] {
        let p = PannParams::glorot(sym, ConvexityMode::Polyconvex, 16, &mut rng);
        let n = p.n_inputs();
        for _ in 0..100 {
            let inv: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h = nn_potential(&inv, &p).map_err(|e| e.to_string())?.hess;
            let rows: Vec<Vec<f64>> = h.chunks(n).map(<[f64]>::to_vec).collect();
            min_eig = min_eig.min(min_symmetric_eigenvalue(&rows));
        }
    }

    // Additional invariants, evaluated through the implementation: I4ti is
    // differenced in F, I5ti in cof F and I6ti in d0.
    let mode = ConvexityMode::Polyconvex;
    let inv = |f: &Tensor2, d: &Vector3, sym: &SymmetryClass| -> Vec<f64> {
        compute_invariants(&MaterialState { f: *f, d0: *d }, sym, mode).unwrap().values
    };
    // F with cof F = h, valid for det h > 0.
    let from_cofactor = |h: &Tensor2| h.cofactor().scale(1.0 / h.det().sqrt());
    let t = 1e-3;
    let mut min_second = f64::INFINITY;
    for _ in 0..100 {
        let sym = SymmetryClass::transversely_isotropic(random_unit(&mut rng)).unwrap();
        let s = random_state(&mut rng, 0.4, 1.0);
        let df = random_tensor(&mut rng, 1.0);
        let dd = random_unit(&mut rng);
        let (fp, fm) = (s.f + df.scale(t), s.f - df.scale(t));
        let d2 = |a: f64, b: f64, c: f64| (a - 2.0 * b + c) / (t * t);
        let base = inv(&s.f, &s.d0, &sym);
        min_second = min_second.min(d2(inv(&fp, &s.d0, &sym)[10], base[10], inv(&fm, &s.d0, &sym)[10]));
        let dp = s.d0 + dd.scale(t);
        let dm = s.d0 - dd.scale(t);
        min_second = min_second.min(d2(inv(&s.f, &dp, &sym)[12], base[12], inv(&s.f, &dm, &sym)[12]));

        let h = s.f.cofactor();
        let dh = random_tensor(&mut rng, 0.2);
        let (hp, hm) = (h + dh.scale(t), h - dh.scale(t));
        if hp.det() > 0.0 && hm.det() > 0.0 {
            let i5 = |hh: &Tensor2| inv(&from_cofactor(hh), &s.d0, &sym)[11];
            min_second = min_second.min(d2(i5(&hp), i5(&h), i5(&hm)));
        }
        // I7 = -J is linear in J.
        if (base[6] + s.f.det()).abs() > 1e-14 {
            return Err("I7 is not -J".into());
        }
    }
    check(
        min_eig >= -1e-10 && min_second >= -1e-10,
        format!(
            "min ICNN Hessian eigenvalue {min_eig:.2e}; min additional-invariant second difference {min_second:.2e}"
        ),
    )
}

fn iso_table(trained: &mut Trained) -> Outcome {
    let start = Instant::now();
    let scale = ScaleFactors::default();
    let (cal, _, _) = generate(&SamplingPlan::new(50, 10, 1, 1), &mr(), None, &scale).map_err(|e| e.to_string())?;
    let (test, _, _) = generate(&SamplingPlan::new(100, 30, 10, 2), &mr(), None, &scale).map_err(|e| e.to_string())?;
    let arch = Architecture { sym: SymmetryClass::Isotropic, mode: ConvexityMode::Polyconvex, width: 8 };
    let cfg = CalibrationConfig { epochs: 2000, learning_rate: 2e-3, restarts: 3, seed: 1, batch: Some(32) };
    let report = calibrate(&cal.records, Some(&test.records), &arch, &cfg, 1).map_err(|e| e.to_string())?;
    let best = report.best_restart().ok_or("every restart failed")?;
    let log_mse = best.test_mse.unwrap().log10();
    trained.iso = Some(best.params.clone());
    let secs = start.elapsed().as_secs_f64();
    check(
        log_mse <= -6.0 && secs < 600.0,
        format!(
            "SP+(8) iso, {} / {} points, best test log10(MSE) {log_mse:.3}; {secs:.1} s",
            cal.records.len(),
            test.records.len()
        ),
    )
}

fn rol_table(trained: &mut Trained) -> Outcome {
    let start = Instant::now();
    let scale = ScaleFactors::default();
    let grid = SphericalGrid::default();
    let gt = laminate();
    let (cal, _, _) =
        generate(&SamplingPlan::new(10, 10, 5, 1), &gt, Some(&grid), &scale).map_err(|e| e.to_string())?;
    let (test, _, _) =
        generate(&SamplingPlan::new(50, 20, 5, 2), &gt, Some(&grid), &scale).map_err(|e| e.to_string())?;
    let (cal, test) = (cal.usable(), test.usable());
    let cfg = CalibrationConfig { epochs: 5000, learning_rate: 2e-3, restarts: 3, seed: 1, batch: Some(32) };
    let mut scores = Vec::new();
    for (mode, width) in
        [(ConvexityMode::Unconstrained, 8), (ConvexityMode::Polyconvex, 8), (ConvexityMode::Polyconvex, 64)]
    {
        let arch = Architecture { sym: ti(), mode, width };
        let report = calibrate(&cal, Some(&test), &arch, &cfg, 1).map_err(|e| e.to_string())?;
        let best = report.best_restart().ok_or("every restart failed")?;
        if mode == ConvexityMode::Unconstrained {
            trained.rol_sp8 = Some(best.params.clone());
        }
        scores.push(best.test_mse.unwrap().log10());
    }
    let secs = start.elapsed().as_secs_f64();
    let gap = scores[1].min(scores[2]) - scores[0];
    check(
        scores[0] <= -3.0 && gap >= 0.5 && secs < 1800.0,
        format!(
            "{} / {} usable points; best test log10(MSE) SP(8) {:.3}, SP+(8) {:.3}, SP+(64) {:.3}; gap {gap:.2} decades; {secs:.1} s",
            cal.len(),
            test.len(),
            scores[0],
            scores[1],
            scores[2]
        ),
    )
}

fn ellipticity_statistics() -> Outcome {
    let plan = SamplingPlan::new(10, 10, 5, 1);
    let (_, sampled, report) = generate(&plan, &laminate(), Some(&SphericalGrid::default()), &ScaleFactors::default())
        .map_err(|e| e.to_string())?;
    let skipped: Vec<usize> = report.skipped.iter().map(|(i, _)| *i).collect();
    let load = |k: usize| {
        let s = &sampled[k];
        (s.amp as f64 / plan.n_amps as f64) * (s.d0_amp as f64 / plan.n_d0_amps as f64)
    };
    let kept: Vec<usize> = (0..sampled.len()).filter(|k| !skipped.contains(k)).collect();
    let flagged: Vec<usize> =
        kept.iter().zip(&report.records).filter(|(_, r)| r.elliptic == Some(false)).map(|(k, _)| *k).collect();
    let mut loads: Vec<f64> = kept.iter().map(|k| load(*k)).collect();
    loads.sort_by(|a, b| b.total_cmp(a));
    let cutoff = loads[(loads.len().div_ceil(10)).saturating_sub(1)];
    let in_top = flagged.iter().filter(|k| load(**k) >= cutoff).count();
    let fraction = flagged.len() as f64 / kept.len() as f64;
    let concentrated = flagged.is_empty() || 2 * in_top >= flagged.len();
    check(
        fraction < 0.05 && concentrated && skipped.is_empty(),
        format!(
            "{} of {} records non-elliptic ({:.2}%), {in_top} in the top load decile; {} skipped",
            flagged.len(),
            kept.len(),
            100.0 * fraction,
            skipped.len()
        ),
    )
}

fn max_f11_deviation(a: &[PathState], b: &[PathState]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.f11 - y.f11).abs() / y.f11).fold(0.0, f64::max)
}

fn path_agreement(trained: &Trained) -> Outcome {
    let e0_max = (MooneyRivlinParams::default().mu1 / MooneyRivlinParams::default().eps).sqrt();
    let steps = 51;
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, params, gt, tol) in [
        ("iso", trained.iso.clone(), Box::new(mr()) as Box<dyn InternalEnergy>, 0.02),
        ("laminate SP(8)", trained.rol_sp8.clone(), Box::new(laminate()), 0.05),
    ] {
        let start = Instant::now();
        let params = params.ok_or(format!("{name}: no calibrated model"))?;
        let reference = trace_path(gt.as_ref(), e0_max, steps).map_err(|e| format!("{name} ground truth: {e}"))?;
        let model = PannModel::new(params).map_err(|e| e.to_string())?;
        let pann = trace_path(&model, e0_max, steps).map_err(|e| format!("{name} PANN: {e}"))?;
        let dev = max_f11_deviation(&pann, &reference);
        let secs = start.elapsed().as_secs_f64();
        ok &= dev <= tol && secs < 60.0;
        parts.push(format!("{name} max F11 deviation {:.3}% (limit {:.0}%, {secs:.1} s)", 100.0 * dev, 100.0 * tol));
    }
    check(ok, parts.join("; "))
}

fn legendre_suite(trained: &Trained) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let iso = PannModel::new(trained.iso.clone().ok_or("no calibrated iso model")?).map_err(|e| e.to_string())?;
    let models: Vec<(&str, Box<dyn InternalEnergy>)> =
        vec![("mooney-rivlin", Box::new(mr())), ("laminate", Box::new(laminate())), ("iso PANN", Box::new(iso))];
    let (mut duality, mut round_trip, mut fd1, mut fd2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (name, m) in &models {
        for _ in 0..10 {
            let s = random_state(&mut rng, 0.3, 0.8);
            let e0 = m.gradients(&s).map_err(|e| format!("{name}: {e}"))?.2;
            let sol = solve_d0_full(m.as_ref(), &s.f, &e0, &Vector3::zero()).map_err(|e| format!("{name}: {e}"))?;
            round_trip = round_trip.max((sol.d0 - s.d0).max_abs());
            let fe = free_energy_from(&sol.inner, &sol.d0, &e0).map_err(|e| e.to_string())?;
            duality = duality.max((fe.psi + sol.d0.dot(&e0) - sol.inner.e).abs() / sol.inner.e.abs().max(1.0));

            let mut x = s.f.to_row_major().to_vec();
            x.extend_from_slice(e0.as_array());
            let unpack = |y: &[f64]| (Tensor2::from_fn(|i, j| y[3 * i + j]), Vector3::from_array([y[9], y[10], y[11]]));
            let psi = |y: &[f64]| {
                let (f, e) = unpack(y);
                Ok(free_energy_gradients(m.as_ref(), &f, &e, &sol.d0)?.0)
            };
            let first = |y: &[f64]| {
                let (f, e) = unpack(y);
                let (_, p, g) = free_energy_gradients(m.as_ref(), &f, &e, &sol.d0)?;
                let mut v = p.to_row_major().to_vec();
                v.extend_from_slice(g.as_array());
                Ok(v)
            };
            let mut analytic_first = fe.p.to_row_major().to_vec();
            analytic_first.extend_from_slice(fe.d0.scale(-1.0).as_array());
            fd1 = fd1.max(relative_error(&analytic_first, &fd_gradient(&psi, &x, FD_STEP).map_err(|e| e.to_string())?));

            let jac = fd_jacobian(&first, &x, FD_STEP).map_err(|e| e.to_string())?;
            let mut analytic = Vec::with_capacity(144);
            let mut numeric = Vec::with_capacity(144);
            for r in 0..12 {
                for c in 0..12 {
                    analytic.push(match (r < 9, c < 9) {
                        (true, true) => fe.d2_ff[(r / 3, r % 3, c / 3, c % 3)],
                        (true, false) => fe.d2_fe[(r / 3, r % 3, c - 9)],
                        (false, true) => fe.d2_fe[(c / 3, c % 3, r - 9)],
                        (false, false) => fe.d2_ee[(r - 9, c - 9)],
                    });
                    numeric.push(jac[r][c]);
                }
            }
            fd2 = fd2.max(relative_error(&analytic, &numeric));
        }
    }
    check(
        duality <= 1e-12 && fd1 <= 1e-6 && fd2 <= 1e-5 && round_trip <= 1e-10,
        format!("duality {duality:.1e}, first-derivative FD {fd1:.1e}, second-derivative FD {fd2:.1e}, round trip {round_trip:.1e}"),
    )
}

fn fixed_end() -> BoundaryConditions {
    BoundaryConditions::default()
        .fix("xmin", Field::Ux, 0.0)
        .fix("xmin", Field::Uy, 0.0)
        .fix("xmin", Field::Uz, 0.0)
        .fix("zmin", Field::Phi, 0.0)
}

fn fem_verification() -> Outcome {
    let mut parts = Vec::new();

    // Patch test against the homogeneous Gauss-point state.
    let e = 0.6;
    let oracle = solve_free_state(
        &mr(),
        &Vector3::from_array([0.0, 0.0, e]),
        &FreeState { stretches: [1.0; 3], d0: Vector3::zero() },
    )
    .map_err(|e| e.to_string())?;
    let mut patch = 0.0f64;
    for order in [ElementOrder::Q1, ElementOrder::Q2] {
        let mesh = Mesh::box_mesh(order, [1, 1, 1], [1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
        let bcs = BoundaryConditions::default()
            .fix("xmin", Field::Ux, 0.0)
            .fix("ymin", Field::Uy, 0.0)
            .fix("zmin", Field::Uz, 0.0)
            .fix("zmin", Field::Phi, 0.0)
            .fix("zmax", Field::Phi, -e);
        let p = Problem::new(mesh, bcs, mr()).map_err(|e| e.to_string())?;
        let mut cache = p.new_cache();
        let mut x = p.initial_state(0.0);
        newton_solve(&p, &mut x, 1.0, &mut cache, &NewtonOptions::default()).map_err(|e| e.to_string())?;
        let expected = oracle.deformation();
        for r in p.quadrature_results(&x, &cache).map_err(|e| e.to_string())? {
            let (f, _) = p.kinematics(r.element, &p.geometry(r.element)[r.point], &x);
            patch = patch.max((f - expected).max_abs()).max((r.d0 - oracle.d0).max_abs()).max(r.p.max_abs());
        }
    }
    parts.push(format!("patch {patch:.1e}"));

    // Tangent against differenced residual on two elements.
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut tangent = 0.0f64;
    for order in [ElementOrder::Q1, ElementOrder::Q2] {
        let mesh = Mesh::box_mesh(order, [2, 1, 1], [2.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
        let bcs = BoundaryConditions { body_force: [0.0, 0.0, -0.1], ..Default::default() }.charge("xmax", 0.1);
        let p = Problem::new(mesh, bcs, mr()).map_err(|e| e.to_string())?;
        let n = p.n_dofs();
        let x: Vec<f64> = (0..n).map(|d| if d % 4 == 3 { 0.2 } else { 0.05 } * rng.random_range(-1.0..1.0)).collect();
        let mut cache = p.new_cache();
        let mut k = vec![0.0; n * n];
        for (r, c, v) in p.assemble(&x, 1.0, &mut cache, true).map_err(|e| e.to_string())?.triplets {
            k[r * n + c] += v;
        }
        let h = 1e-6;
        let mut fd = vec![0.0; n * n];
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let rp = p.residual(&xp, 1.0, &mut cache.clone()).map_err(|e| e.to_string())?;
            let rm = p.residual(&xm, 1.0, &mut cache.clone()).map_err(|e| e.to_string())?;
            for r in 0..n {
                fd[r * n + c] = (rp[r] - rm[r]) / (2.0 * h);
            }
        }
        tangent = tangent.max(relative_error(&k, &fd));
    }
    parts.push(format!("tangent {tangent:.1e}"));

    // Quadratic regime on the cantilever.
    let mesh = Mesh::box_mesh(ElementOrder::Q2, [8, 2, 1], [8.0, 2.0, 1.0]).map_err(|e| e.to_string())?;
    let bcs = BoundaryConditions { body_force: [0.0, 0.0, -5e-5], ..fixed_end() }.fix("zmax", Field::Phi, 0.3);
    let p = Problem::new(mesh, bcs, mr()).map_err(|e| e.to_string())?;
    let mut x = p.initial_state(0.0);
    let mut cache = p.new_cache();
    let report = newton_solve(&p, &mut x, 1.0, &mut cache, &NewtonOptions::default()).map_err(|e| e.to_string())?;
    let hist = &report.history;
    let m = hist.len();
    let ratios: Vec<f64> =
        if m >= 4 { (m - 3..m - 1).map(|k| hist[k + 1] / (hist[k] * hist[k])).collect() } else { vec![] };
    let quadratic = !ratios.is_empty() && ratios.iter().all(|r| *r < 1e6);
    parts.push(format!(
        "Newton residuals {:?}, ratios {:?}",
        hist.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>(),
        ratios.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>()
    ));

    // Monotone actuation of a small bimorph.
    let mut mesh = Mesh::box_mesh(ElementOrder::Q2, [8, 2, 1], [8.0, 2.0, 1.0]).map_err(|e| e.to_string())?;
    mesh.add_node_set_where("mid", |x| (x[2] - 0.5).abs() < 1e-12);
    let tip = (0..mesh.nodes.len())
        .min_by(|a, b| {
            let d = |q: &[f64; 3]| (q[0] - 8.0).powi(2) + (q[1] - 1.0).powi(2) + (q[2] - 0.5).powi(2);
            d(&mesh.nodes[*a]).total_cmp(&d(&mesh.nodes[*b]))
        })
        .unwrap();
    let bcs = fixed_end().fix("mid", Field::Phi, 0.3);
    let p = Problem::new(mesh, bcs, mr()).map_err(|e| e.to_string())?;
    let schedule: Vec<f64> = (0..=5).map(|k| k as f64 / 5.0).collect();
    let snaps = load_stepping(&p, &schedule, &SteppingOptions::default()).map_err(|e| e.to_string())?;
    let w: Vec<f64> = snaps.iter().map(|s| s.x[DOFS_PER_NODE * tip + 2].abs()).collect();
    let monotone = w[1..].windows(2).all(|p| p[1] > p[0]) && w[1] > 0.0;
    parts.push(format!("bimorph tip |w| {:.3e} .. {:.3e} monotone {monotone}", w[1], w[5]));

    check(patch <= 1e-8 && tangent <= 1e-5 && quadratic && monotone, parts.join("; "))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_electropann"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

const FEM_CONFIG: &str = r#"model = "gt:mr"
[fem]
steps = 2
output_dir = "fem"
dirichlet = [
  { set = "xmin", field = "ux", value = 0.0 },
  { set = "xmin", field = "uy", value = 0.0 },
  { set = "xmin", field = "uz", value = 0.0 },
  { set = "zmin", field = "phi", value = 0.0 },
  { set = "zmax", field = "phi", value = 0.2 },
]
[fem.box]
order = "Q1"
counts = [4, 1, 1]
lengths = [4.0, 1.0, 1.0]
"#;

const PROBE_CONFIG: &str = r#"model = "gt:laminate"
[probe]
f = [1.1, 0.05, 0.0, 0.0, 0.95, 0.02, 0.0, 0.0, 0.97]
d0 = [0.1, -0.2, 0.6]
e0 = [0.0, 0.1, 0.4]
[ellipticity]
n_theta = 16
n_psi = 8
"#;

/// Runs every pipeline stage in `dir` and returns the named artefacts.
fn pipeline(dir: &Path, workers: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::fs::write(dir.join("fem.toml"), FEM_CONFIG).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("probe.toml"), PROBE_CONFIG).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let stages: Vec<Vec<&str>> = vec![
        vec![
            "gen-data",
            "--model",
            "gt:mr",
            "--n-dirs",
            "20",
            "--n-amps",
            "5",
            "--n-d0-amps",
            "2",
            "--seed",
            "5",
            "--out",
            "mr.dat",
        ],
        vec![
            "gen-data",
            "--model",
            "gt:laminate",
            "--n-dirs",
            "4",
            "--n-amps",
            "5",
            "--n-d0-amps",
            "2",
            "--seed",
            "5",
            "--scan",
            "--out",
            "lam.dat",
        ],
        vec![
            "calibrate",
            "--data",
            "mr.dat",
            "--symmetry",
            "iso",
            "--width",
            "6",
            "--epochs",
            "60",
            "--restarts",
            "3",
            "--batch",
            "32",
            "--seed",
            "5",
            "--workers",
            workers,
            "--report",
            "report.txt",
            "--out",
            "m.pann",
        ],
        vec!["evaluate", "--model", "pann:m.pann", "--data", "mr.dat"],
        vec!["path", "--model", "pann:m.pann", "--e0-max", "0.5", "--steps", "10"],
        vec!["path", "--model", "gt:laminate", "--e0-max", "1.0", "--steps", "10"],
        vec!["ellipticity", "--config", "probe.toml"],
        vec!["ellipticity", "--config", "probe.toml", "--data", "lam.dat"],
        vec!["moduli", "--config", "probe.toml"],
        vec!["legendre-check", "--config", "probe.toml"],
        vec!["fem", "--config", "fem.toml"],
    ];
    for args in &stages {
        out.push((format!("stdout of {}", args.join(" ")), run_cli(dir, args)?));
    }
    let mut files: Vec<_> = walk(dir).map_err(|e| e.to_string())?;
    files.sort();
    for f in files {
        let bytes = std::fs::read(&f).map_err(|e| e.to_string())?;
        out.push((f.strip_prefix(dir).unwrap().display().to_string(), bytes));
    }
    Ok(out)
}

fn walk(dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut v = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            v.extend(walk(&p)?);
        } else {
            v.push(p);
        }
    }
    Ok(v)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path(), "1")?;
    let second = pipeline(b.path(), "1")?;
    let threaded = pipeline(c.path(), "3")?;
    if first.len() != second.len() {
        return Err(format!("artefact counts differ: {} vs {}", first.len(), second.len()));
    }
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let threaded_same = first.len() == threaded.len() && first.iter().zip(&threaded).all(|(x, y)| x.1 == y.1);
    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} artefacts byte-identical across runs; 3-worker calibration identical: {threaded_same}",
                first.len()
            )
        } else {
            format!("differing artefacts: {differing:?}")
        },
    )
}

fn main() {
    let mut trained = Trained::default();
    let names = [
        "gradient consistency",
        "normalization",
        "polyconvexity",
        "ISO table reproduction",
        "ROL ordering",
        "ellipticity statistics",
        "equilibrium path agreement",
        "Legendre suite",
        "FEM verification",
        "determinism",
    ];
    let mut failures = 0;
    for (k, name) in names.iter().enumerate() {
        let outcome = match k + 1 {
            1 => gradient_consistency(),
            2 => normalization(),
            3 => polyconvexity(),
            4 => iso_table(&mut trained),
            5 => rol_table(&mut trained),
            6 => ellipticity_statistics(),
            7 => path_agreement(&trained),
            8 => legendre_suite(&trained),
            9 => fem_verification(),
            _ => determinism(),
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", names.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
