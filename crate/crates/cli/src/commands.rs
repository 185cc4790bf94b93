use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use electropann::calibration::{self, mse, Architecture, CalibrationConfig, PreparedData};
use electropann::dataset::{self, generate, read_dataset, Dataset, SamplingPlan, ScaleFactors};
use electropann::equilibrium::trace_path;
use electropann::ground_truth::{Laminate, LaminateParams, MooneyRivlin, MooneyRivlinParams};
use electropann::legendre::{free_energy, solve_d0};
use electropann::pann::{self, PannParams};
use electropann::stability::{ellipticity_scan, format_scan_table, moduli_scan, scan_table, SphericalGrid};
use electropann::{ConvexityMode, InternalEnergy, MaterialState, PannModel, SymmetryClass, Tensor2, Vector3};
use electropann_fem::output::{nodal_table, quadrature_table};
use electropann_fem::{
    load_stepping, BoundaryConditions, ElementOrder, FemError, Field, Mesh, NewtonOptions, Problem, Snapshot,
    SteppingOptions,
};

use crate::config::{at_least_one, positive, require, RunConfig};
use crate::error::CliError;
use crate::{CalibrateArgs, EvaluateArgs, FemArgs, GenDataArgs, GlobalArgs, PathArgs, ScanArgs};

/// Config merged with the global flags.
pub struct Context {
    pub cfg: RunConfig,
    pub model: Option<String>,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn new(g: &GlobalArgs, cfg: RunConfig) -> Result<Self, CliError> {
        let workers = at_least_one(g.workers.or(cfg.workers).unwrap_or(1), "workers")?;
        let out = g.out.clone().or_else(|| cfg.files.as_ref().and_then(|f| f.output.clone()));
        Ok(Self {
            model: g.model.clone().or_else(|| cfg.model.clone()),
            seed: g.seed.or(cfg.seed).unwrap_or(0),
            workers,
            out,
            cfg,
        })
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => {
                std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn mr_params(&self) -> Result<MooneyRivlinParams, CliError> {
        let d = MooneyRivlinParams::default();
        let s = self.cfg.mooney_rivlin.clone().unwrap_or_default();
        let p = MooneyRivlinParams {
            mu1: s.mu1.unwrap_or(d.mu1),
            mu2: s.mu2.unwrap_or(d.mu2),
            lambda: s.lambda.unwrap_or(d.lambda),
            eps: s.eps.unwrap_or(d.eps),
        };
        p.validate().map_err(|e| CliError::config("mooney_rivlin", e.to_string()))?;
        Ok(p)
    }

    fn laminate_params(&self) -> Result<LaminateParams, CliError> {
        let d = LaminateParams::default();
        let s = self.cfg.laminate.clone().unwrap_or_default();
        let p = LaminateParams {
            phase_a: self.mr_params()?,
            f_m: s.f_m.unwrap_or(d.f_m),
            f_e: s.f_e.unwrap_or(d.f_e),
            c_a: s.c_a.unwrap_or(d.c_a),
            n: s.n.map(Vector3::from_array).unwrap_or(d.n),
        };
        p.validate().map_err(|e| CliError::config("laminate", e.to_string()))?;
        Ok(p)
    }

    fn scale(&self) -> Result<ScaleFactors, CliError> {
        let d = ScaleFactors::default();
        let s = self.cfg.scale.clone().unwrap_or_default();
        Ok(ScaleFactors {
            mu_ref: positive(s.mu_ref.unwrap_or(d.mu_ref), "scale.mu_ref")?,
            eps_ref: positive(s.eps_ref.unwrap_or(d.eps_ref), "scale.eps_ref")?,
        })
    }

    fn model(&self) -> Result<Box<dyn InternalEnergy>, CliError> {
        let spec = require(self.model.clone(), None, "model")?;
        match spec.as_str() {
            "gt:mr" => Ok(Box::new(MooneyRivlin::new(self.mr_params()?)?)),
            "gt:laminate" => Ok(Box::new(Laminate::new(self.laminate_params()?)?)),
            s => match s.strip_prefix("pann:") {
                Some(path) => Ok(Box::new(PannModel::new(load_pann(Path::new(path))?)?)),
                None => {
                    Err(CliError::config("model", format!("expected gt:mr, gt:laminate or pann:<file>, got '{s}'")))
                }
            },
        }
    }

    fn grid(&self, a: &ScanArgs) -> Result<SphericalGrid, CliError> {
        let s = self.cfg.ellipticity.clone().unwrap_or_default();
        let d = SphericalGrid::default();
        let nt = at_least_one(a.n_theta.or(s.n_theta).unwrap_or(d.n_theta), "ellipticity.n_theta")?;
        let np = at_least_one(a.n_psi.or(s.n_psi).unwrap_or(d.n_psi), "ellipticity.n_psi")?;
        Ok(SphericalGrid::new(nt, np)?)
    }

    fn probe(&self) -> Result<(Tensor2, Vector3, Vector3), CliError> {
        let s = self.cfg.probe.clone().unwrap_or_default();
        let f = match s.f {
            Some(v) => Tensor2::from_row_major(&v).map_err(|e| CliError::config("probe.f", e.to_string()))?,
            None => Tensor2::identity(),
        };
        if !(f.det() > 0.0) {
            return Err(CliError::config("probe.f", format!("det F = {:e} must be positive", f.det())));
        }
        let vec = |v: Option<[f64; 3]>, key: &str| -> Result<Vector3, CliError> {
            v.map_or(Ok(Vector3::zero()), |a| Vector3::new(a).map_err(|e| CliError::config(key, e.to_string())))
        };
        Ok((f, vec(s.d0, "probe.d0")?, vec(s.e0, "probe.e0")?))
    }
}

fn load_pann(path: &Path) -> Result<PannParams, CliError> {
    pann::load(path).map_err(|e| CliError::Runtime(format!("cannot load model {}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    read_dataset(path).map_err(|e| CliError::Runtime(format!("cannot read dataset {}: {e}", path.display())))
}

fn parse_symmetry(s: &str, n: Option<Vector3>, laminate_n: Vector3) -> Result<SymmetryClass, CliError> {
    match s {
        "iso" => Ok(SymmetryClass::Isotropic),
        "ti" => SymmetryClass::transversely_isotropic(n.unwrap_or(laminate_n))
            .map_err(|e| CliError::config("architecture.n", e.to_string())),
        other => Err(CliError::config("architecture.symmetry", format!("expected iso or ti, got '{other}'"))),
    }
}

fn parse_mode(s: &str) -> Result<ConvexityMode, CliError> {
    match s {
        "polyconvex" => Ok(ConvexityMode::Polyconvex),
        "unconstrained" => Ok(ConvexityMode::Unconstrained),
        other => {
            Err(CliError::config("architecture.mode", format!("expected polyconvex or unconstrained, got '{other}'")))
        }
    }
}

pub fn gen_data(ctx: &Context, a: &GenDataArgs) -> Result<(), CliError> {
    let s = ctx.cfg.sampling.clone().unwrap_or_default();
    let plan = SamplingPlan {
        n_dirs: at_least_one(require(a.n_dirs, s.n_dirs, "sampling.n_dirs")?, "sampling.n_dirs")?,
        n_amps: at_least_one(require(a.n_amps, s.n_amps, "sampling.n_amps")?, "sampling.n_amps")?,
        n_d0_amps: at_least_one(require(a.n_d0_amps, s.n_d0_amps, "sampling.n_d0_amps")?, "sampling.n_d0_amps")?,
        amp_max: positive(a.amp_max.or(s.amp_max).unwrap_or(1.0), "sampling.amp_max")?,
        d0_max: positive(a.d0_max.or(s.d0_max).unwrap_or(1.5), "sampling.d0_max")?,
        seed: ctx.seed,
    };
    let scan = a.scan || ctx.cfg.ellipticity.as_ref().and_then(|e| e.scan_dataset).unwrap_or(false);
    let grid = if scan { Some(ctx.grid(&ScanArgs { n_theta: None, n_psi: None, data: None })?) } else { None };
    let model = ctx.model()?;
    let (ds, _, report) = generate(&plan, model.as_ref(), grid.as_ref(), &ctx.scale()?)?;
    for (i, why) in &report.skipped {
        log::warn!("state {i} skipped: {why}");
    }
    eprintln!(
        "generated {} records ({} skipped, {} flagged non-elliptic)",
        ds.records.len(),
        report.skipped.len(),
        ds.non_elliptic_count()
    );
    ctx.emit(&dataset::to_text(&ds))
}

pub fn calibrate(ctx: &Context, a: &CalibrateArgs) -> Result<(), CliError> {
    let files = ctx.cfg.files.clone().unwrap_or_default();
    let data = load_data(&require(a.data.clone(), files.calibration_data.clone(), "files.calibration_data")?)?;
    let test = match a.test.clone().or(files.test_data.clone()) {
        Some(p) => Some(load_data(&p)?),
        None => None,
    };
    let arch_cfg = ctx.cfg.architecture.clone().unwrap_or_default();
    let sym_name = require(a.symmetry.clone(), arch_cfg.symmetry.clone(), "architecture.symmetry")?;
    let laminate_n = ctx.laminate_params()?.n;
    let sym = parse_symmetry(&sym_name, arch_cfg.n.map(Vector3::from_array), laminate_n)?;
    let mode = parse_mode(&a.mode.clone().or(arch_cfg.mode.clone()).unwrap_or_else(|| "polyconvex".into()))?;
    let width = at_least_one(require(a.width, arch_cfg.width, "architecture.width")?, "architecture.width")?;
    let c = ctx.cfg.calibration.clone().unwrap_or_default();
    let d = CalibrationConfig::default();
    let cfg = CalibrationConfig {
        epochs: at_least_one(a.epochs.or(c.epochs).unwrap_or(d.epochs), "calibration.epochs")?,
        learning_rate: positive(
            a.learning_rate.or(c.learning_rate).unwrap_or(d.learning_rate),
            "calibration.learning_rate",
        )?,
        restarts: at_least_one(a.restarts.or(c.restarts).unwrap_or(d.restarts), "calibration.restarts")?,
        seed: ctx.seed,
        batch: match a.batch.or(c.batch) {
            Some(b) => Some(at_least_one(b, "calibration.batch")?),
            None => None,
        },
    };
    let out = ctx.out.clone().ok_or_else(|| CliError::config("files.output", "calibrate needs a model output path"))?;
    let usable = data.usable();
    let test_usable = test.as_ref().map(Dataset::usable);
    let report =
        calibration::calibrate(&usable, test_usable.as_deref(), &Architecture { sym, mode, width }, &cfg, ctx.workers)?;
    let text = report.to_text();
    match a.report.clone().or(files.report.clone()) {
        Some(p) => std::fs::write(&p, &text)?,
        None => eprint!("{text}"),
    }
    let best = report.best_params().ok_or_else(|| CliError::Runtime("every calibration restart failed".into()))?;
    pann::save(&out, best)?;
    Ok(())
}

pub fn evaluate(ctx: &Context, a: &EvaluateArgs) -> Result<(), CliError> {
    let spec = require(ctx.model.clone(), None, "model")?;
    let path =
        spec.strip_prefix("pann:").ok_or_else(|| CliError::config("model", "evaluate needs a pann:<file> model"))?;
    let params = load_pann(Path::new(path))?;
    let files = ctx.cfg.files.clone().unwrap_or_default();
    let mut sets = Vec::new();
    if let Some(p) = a.data.clone().or(files.calibration_data) {
        sets.push(("calibration", p));
    }
    if let Some(p) = a.test.clone().or(files.test_data) {
        sets.push(("test", p));
    }
    if sets.is_empty() {
        return Err(CliError::config("files.calibration_data", "no dataset to evaluate"));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# evaluation {}", pann::architecture_name(&params));
    let _ = writeln!(s, "dataset records log10_mse");
    for (name, p) in sets {
        let records = load_data(&p)?.usable();
        let prepared = PreparedData::new(&records, &params.sym, params.mode)?;
        let _ = writeln!(s, "{name} {} {:.6}", records.len(), mse(&params, &prepared)?.log10());
    }
    ctx.emit(&s)
}

pub fn path(ctx: &Context, a: &PathArgs) -> Result<(), CliError> {
    let s = ctx.cfg.path.clone().unwrap_or_default();
    let e0_max = positive(require(a.e0_max, s.e0_max, "path.e0_max")?, "path.e0_max")?;
    let steps = at_least_one(require(a.steps, s.steps, "path.steps")?, "path.steps")?;
    let mr = ctx.mr_params()?;
    let unit = positive(a.e0_unit.or(s.e0_unit).unwrap_or((mr.mu1 / mr.eps).sqrt()), "path.e0_unit")?;
    let model = ctx.model()?;
    let states = trace_path(model.as_ref(), e0_max * unit, steps)?;
    let mut out = String::from("e0,e0_scaled,F11,F33,p,d0_z\n");
    for st in &states {
        let _ = writeln!(
            out,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            st.e0_mag,
            st.e0_mag / unit,
            st.f11,
            st.f33,
            st.p,
            st.d0[2]
        );
    }
    ctx.emit(&out)
}

pub fn ellipticity(ctx: &Context, a: &ScanArgs) -> Result<(), CliError> {
    let grid = ctx.grid(a)?;
    let model = ctx.model()?;
    if let Some(p) = &a.data {
        let ds = load_data(p)?;
        let mut s = String::from("record min_eig least_minor elliptic\n");
        let mut lost = 0;
        for (i, r) in ds.records.iter().enumerate() {
            let res = ellipticity_scan(model.as_ref(), &r.state(), &grid)?;
            lost += usize::from(!res.elliptic);
            let _ =
                writeln!(s, "{i} {:.10e} {:.10e} {}", res.min_eigenvalue, res.min_least_minor, u8::from(res.elliptic));
        }
        let _ = writeln!(s, "# non-elliptic {lost} of {}", ds.records.len());
        return ctx.emit(&s);
    }
    let (f, d0, _) = ctx.probe()?;
    let state = MaterialState::new(f, d0)?;
    let rows = scan_table(model.as_ref(), &state, &grid)?;
    let res = ellipticity_scan(model.as_ref(), &state, &grid)?;
    let mut s = format_scan_table(&rows);
    let _ = writeln!(
        s,
        "# min_eig {:.10e} at theta {:.6} psi {:.6} elliptic {}",
        res.min_eigenvalue, res.argmin.0, res.argmin.1, res.elliptic
    );
    ctx.emit(&s)
}

pub fn moduli(ctx: &Context, a: &ScanArgs) -> Result<(), CliError> {
    let grid = ctx.grid(a)?;
    let model = ctx.model()?;
    let (f, d0, _) = ctx.probe()?;
    let rows = moduli_scan(model.as_ref(), &MaterialState::new(f, d0)?, &grid)?;
    let mut s = String::from("theta psi mu q theta_e\n");
    for (t, p, m) in rows {
        let _ = writeln!(s, "{t:.10e} {p:.10e} {:.10e} {:.10e} {:.10e}", m.mu, m.q, m.theta);
    }
    ctx.emit(&s)
}

pub fn legendre_check(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let (f, d0_probe, e0) = ctx.probe()?;
    let free = free_energy(model.as_ref(), &f, &e0)?;
    let inner = model.evaluate(&MaterialState::new(f, free.d0)?)?;
    let duality = (free.psi - (inner.e - free.d0.dot(&e0))).abs();
    let stationarity = (inner.e0 - e0).max_abs();
    let stress_gap = (free.p - inner.p).max_abs();
    // Round trip from the probe displacement: d0 -> e0 -> d0.
    let e0_probe = model.evaluate(&MaterialState::new(f, d0_probe)?)?.e0;
    let back = solve_d0(model.as_ref(), &f, &e0_probe, &Vector3::zero())?;
    let round_trip = (back - d0_probe).max_abs();
    let mut s = String::new();
    let _ = writeln!(s, "# legendre check {}", model.name());
    let _ = writeln!(s, "d0 {:.12e} {:.12e} {:.12e}", free.d0[0], free.d0[1], free.d0[2]);
    let _ = writeln!(s, "psi {:.12e}", free.psi);
    let _ = writeln!(s, "duality_residual {duality:.3e}");
    let _ = writeln!(s, "stationarity_residual {stationarity:.3e}");
    let _ = writeln!(s, "stress_difference {stress_gap:.3e}");
    let _ = writeln!(s, "round_trip_error {round_trip:.3e}");
    ctx.emit(&s)
}

fn parse_axis(s: &str, key: &str) -> Result<usize, CliError> {
    match s {
        "x" => Ok(0),
        "y" => Ok(1),
        "z" => Ok(2),
        other => Err(CliError::config(key, format!("expected x, y or z, got '{other}'"))),
    }
}

pub fn fem(ctx: &Context, a: &FemArgs) -> Result<(), CliError> {
    let s = ctx.cfg.fem.clone().ok_or_else(|| CliError::config("fem", "the fem section is required"))?;
    let mut mesh = match a.mesh.clone().or(s.mesh.clone()) {
        Some(p) => Mesh::load(&p).map_err(|e| CliError::Runtime(format!("cannot load mesh {}: {e}", p.display())))?,
        None => {
            let b = s
                .box_mesh
                .clone()
                .ok_or_else(|| CliError::config("fem.mesh", "give a mesh file or a fem.box section"))?;
            let order_name = b.order.unwrap_or_else(|| "Q2".into());
            let order = ElementOrder::parse(&order_name)
                .ok_or_else(|| CliError::config("fem.box.order", format!("expected Q1 or Q2, got '{order_name}'")))?;
            let counts = require(None, b.counts, "fem.box.counts")?;
            let lengths = require(None, b.lengths, "fem.box.lengths")?;
            Mesh::box_mesh(order, counts, lengths).map_err(|e| CliError::config("fem.box", e.to_string()))?
        }
    };
    for (i, ps) in s.plane_sets.iter().enumerate() {
        let axis = parse_axis(&ps.axis, &format!("fem.plane_sets[{i}].axis"))?;
        let (v, tol) = (ps.value, 1e-9 * (1.0 + ps.value.abs()));
        mesh.add_node_set_where(&ps.name, |x| (x[axis] - v).abs() <= tol);
    }
    let mut bcs = BoundaryConditions {
        body_force: s.body_force.unwrap_or([0.0; 3]),
        charge_density: s.charge_density.unwrap_or(0.0),
        ..Default::default()
    };
    for (i, d) in s.dirichlet.iter().enumerate() {
        let field = Field::parse(&d.field).ok_or_else(|| {
            CliError::config(format!("fem.dirichlet[{i}].field"), format!("unknown field '{}'", d.field))
        })?;
        bcs = bcs.fix(&d.set, field, d.value);
    }
    for c in &s.surface_charge {
        bcs = bcs.charge(&c.set, c.density);
    }
    let schedule = match (a.steps, s.schedule.clone(), s.steps) {
        (Some(n), _, _) | (None, None, Some(n)) => {
            let n = at_least_one(n, "fem.steps")?;
            (1..=n).map(|k| k as f64 / n as f64).collect()
        }
        (None, Some(v), _) => v,
        (None, None, None) => return Err(CliError::config("fem.schedule", "give a schedule or a number of steps")),
    };
    let d = SteppingOptions::default();
    let opts = SteppingOptions {
        newton: NewtonOptions {
            tol: positive(s.tol.unwrap_or(d.newton.tol), "fem.tol")?,
            max_iter: at_least_one(s.max_iter.unwrap_or(d.newton.max_iter), "fem.max_iter")?,
            ..d.newton
        },
        min_step: positive(s.min_step.unwrap_or(d.min_step), "fem.min_step")?,
    };
    let problem = Problem::new(mesh, bcs, ctx.model()?).map_err(|e| match e {
        FemError::Bc(msg) | FemError::Mesh(msg) => CliError::config("fem", msg),
        other => other.into(),
    })?;
    let output_dir = a.output_dir.clone().or(s.output_dir.clone());
    let (snaps, failure) = match load_stepping(&problem, &schedule, &opts) {
        Ok(snaps) => (snaps, None),
        Err(FemError::StepFailure { last_lambda, completed }) => {
            (completed, Some(format!("load stepping stopped; last converged load factor {last_lambda}")))
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(dir) = &output_dir {
        std::fs::create_dir_all(dir)?;
        write_steps(&problem, &snaps, dir)?;
    }
    let mut summary = String::from("step lambda iterations residual\n");
    for (k, snap) in snaps.iter().enumerate() {
        let last = snap.newton.history.last().copied().unwrap_or(0.0);
        let _ = writeln!(summary, "{k} {:.10e} {} {:.3e}", snap.lambda, snap.newton.iterations, last);
    }
    ctx.emit(&summary)?;
    match failure {
        Some(msg) => Err(CliError::Runtime(msg)),
        None => Ok(()),
    }
}

fn write_steps<M: InternalEnergy>(problem: &Problem<M>, snaps: &[Snapshot], dir: &Path) -> Result<(), CliError> {
    for (k, snap) in snaps.iter().enumerate() {
        std::fs::write(dir.join(format!("step_{k:03}_nodes.txt")), nodal_table(problem, &snap.x))?;
        std::fs::write(dir.join(format!("step_{k:03}_qp.txt")), quadrature_table(problem, &snap.x, &snap.cache)?)?;
    }
    Ok(())
}
