use electropann::calibration::{calibrate, mse, Architecture, CalibrationConfig, PreparedData};
use electropann::dataset::{self, generate, read_dataset, write_dataset, SamplingPlan, ScaleFactors};
use electropann::equilibrium::{path_residuals, trace_path, PATH_TOL};
use electropann::ground_truth::{Laminate, LaminateParams, MooneyRivlin, MooneyRivlinParams};
use electropann::legendre::free_energy;
use electropann::stability::{ellipticity_scan, SphericalGrid};
use electropann::{pann, ConvexityMode, InternalEnergy, MaterialState, PannModel, SymmetryClass, Tensor2, Vector3};

fn mr() -> MooneyRivlin {
    MooneyRivlin::new(MooneyRivlinParams::default()).unwrap()
}

#[test]
fn dataset_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, sampled, report) = generate(
        &SamplingPlan::new(5, 4, 3, 9),
        &Laminate::new(LaminateParams::default()).unwrap(),
        Some(&SphericalGrid::new(16, 8).unwrap()),
        &ScaleFactors::default(),
    )
    .unwrap();
    assert_eq!(sampled.len(), 60);
    assert!(report.skipped.is_empty());
    let path = dir.path().join("lam.dat");
    write_dataset(&path, &ds).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(dataset::to_text(&back), std::fs::read_to_string(&path).unwrap());
    assert!(back.records.iter().all(|r| r.elliptic.is_some()));
}

#[test]
fn scaled_records_recover_physical_values() {
    let scale = ScaleFactors { mu_ref: 2.0, eps_ref: 0.5 };
    let plan = SamplingPlan::new(3, 2, 2, 4);
    let (ds, sampled, _) = generate(&plan, &mr(), None, &scale).unwrap();
    for (rec, s) in ds.records.iter().zip(&sampled) {
        let (_, p, e0) = mr().gradients(&s.state).unwrap();
        assert!((rec.p.scale(scale.stress()) - p).max_abs() < 1e-14);
        assert!((rec.e0.scale(scale.e0()) - e0).max_abs() < 1e-14);
        assert!((rec.d0.scale(scale.d0()) - s.state.d0).max_abs() < 1e-14);
    }
}

#[test]
fn calibrated_model_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let (cal, _, _) = generate(&SamplingPlan::new(20, 5, 2, 1), &mr(), None, &ScaleFactors::default()).unwrap();
    let arch = Architecture { sym: SymmetryClass::Isotropic, mode: ConvexityMode::Polyconvex, width: 4 };
    let cfg = CalibrationConfig { epochs: 50, restarts: 2, seed: 3, batch: Some(16), ..Default::default() };
    let a = calibrate(&cal.records, None, &arch, &cfg, 1).unwrap();
    let b = calibrate(&cal.records, None, &arch, &cfg, 2).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let best = a.best_restart().unwrap();
    let losses = &best.losses;
    assert!(losses.last().unwrap() < losses.first().unwrap());

    let path = dir.path().join("m.pann");
    pann::save(&path, &best.params).unwrap();
    let loaded = pann::load(&path).unwrap();
    assert_eq!(loaded, best.params);
    let prepared = PreparedData::new(&cal.records, &loaded.sym, loaded.mode).unwrap();
    assert_eq!(mse(&loaded, &prepared).unwrap(), best.calibration_mse);

    let model = PannModel::new(loaded).unwrap();
    let out = model.evaluate(&MaterialState::reference()).unwrap();
    assert!(out.p.max_abs() < 1e-10 && out.e0.max_abs() < 1e-10);
}

#[test]
fn mooney_rivlin_path_obeys_invariants() {
    let m = mr();
    let states = trace_path(&m, 0.7, 15).unwrap();
    assert_eq!(states.len(), 15);
    for w in states.windows(2) {
        assert!(w[1].f11 > w[0].f11 && w[1].f33 < w[0].f33);
    }
    for s in &states {
        assert!((s.f11 * s.f33 - 1.0).abs() <= 1e-10);
        assert!(path_residuals(&m, s).unwrap().inf_norm() <= PATH_TOL);
        // F11^4 (1 - e0^2) = 1 for the default parameters.
        assert!((s.f11.powi(4) * (1.0 - s.e0_mag * s.e0_mag) - 1.0).abs() < 1e-8);
    }
    assert!(trace_path(&m, -1.0, 5).is_err());
    assert!(trace_path(&m, 1.0, 0).is_err());
}

#[test]
fn laminate_free_energy_and_scan_agree_with_mooney_rivlin_limit() {
    // Identical phases reduce the laminate to its matrix material.
    let params = LaminateParams { f_m: 1.0, f_e: 1.0, ..Default::default() };
    let lam = Laminate::new(params).unwrap();
    let m = mr();
    let f = Tensor2::diag([1.1, 0.95, 1.0 / (1.1 * 0.95)]);
    let e0 = Vector3::from_array([0.1, 0.0, 0.3]);
    let a = free_energy(&lam, &f, &e0).unwrap();
    let b = free_energy(&m, &f, &e0).unwrap();
    assert!((a.psi - b.psi).abs() < 1e-10);
    assert!((a.d0 - b.d0).max_abs() < 1e-9);
    let grid = SphericalGrid::new(16, 8).unwrap();
    let s = MaterialState { f, d0: b.d0 };
    let ra = ellipticity_scan(&lam, &s, &grid).unwrap();
    let rb = ellipticity_scan(&m, &s, &grid).unwrap();
    assert!(ra.elliptic && rb.elliptic);
    assert!((ra.min_eigenvalue - rb.min_eigenvalue).abs() < 1e-7);
}
