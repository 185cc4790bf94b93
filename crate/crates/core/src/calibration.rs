//! Sobolev calibration of PANN parameters against `(P, e0)` data.
//!
//! The loss is the mean over records of `‖ΔP‖² + ‖Δe0‖²`. Invariants and
//! their `(F, d0)` gradients do not depend on the parameters and are
//! prepared once per dataset; every epoch then only evaluates the network,
//! its invariant gradient and the adjoint chain back to `W1`, `W2`, `b`,
//! including the dependence of the normalization constants on the weights.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::DataRecord;
use crate::energy::MaterialState;
use crate::error::{Error, Result};
use crate::invariants::{
    compute_invariant_gradients, invariant_layout, reference_values, slot_of, ConvexityMode, InvariantKind,
    SymmetryClass,
};
use crate::pann::{growth_term, logistic, logistic_prime, reference_stress_weights, softplus, PannParams};

/// Record reduced to what the loss needs: invariant values, the flattened
/// gradient of every invariant w.r.t. `(F, d0)`, and the target `(P, e0)`.
#[derive(Clone, Debug)]
pub struct PreparedRecord {
    values: Vec<f64>,
    grads: Vec<[f64; 12]>,
    target: [f64; 12],
}

/// Records prepared for one architecture.
#[derive(Clone, Debug)]
pub struct PreparedData {
    sym: SymmetryClass,
    mode: ConvexityMode,
    records: Vec<PreparedRecord>,
}

impl PreparedData {
    pub fn new(records: &[DataRecord], sym: &SymmetryClass, mode: ConvexityMode) -> Result<Self> {
        sym.validate()?;
        let prepared = records
            .iter()
            .map(|r| {
                let inv = compute_invariant_gradients(&MaterialState::new(r.f, r.d0)?, sym, mode)?;
                let grads = (0..inv.len())
                    .map(|i| {
                        let mut g = [0.0; 12];
                        g[..9].copy_from_slice(&inv.d_f[i].to_row_major());
                        g[9..].copy_from_slice(inv.d_d0[i].as_array());
                        g
                    })
                    .collect();
                let mut target = [0.0; 12];
                target[..9].copy_from_slice(&r.p.to_row_major());
                target[9..].copy_from_slice(r.e0.as_array());
                Ok(PreparedRecord { values: inv.values, grads, target })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sym: *sym, mode, records: prepared })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Slots and constant-term structure shared by loss evaluations.
struct Structure {
    slot_j: usize,
    slot_ti: Option<(usize, usize)>,
    ref_values: Vec<f64>,
    wa: Vec<f64>,
    wx: Vec<f64>,
    ti: bool,
}

impl Structure {
    fn new(sym: &SymmetryClass, mode: ConvexityMode) -> Self {
        let layout = invariant_layout(sym, mode);
        let (wa, wx) = reference_stress_weights(layout);
        let slot_ti = match (slot_of(layout, InvariantKind::I1ti), slot_of(layout, InvariantKind::I2ti)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        Self {
            slot_j: slot_of(layout, InvariantKind::J).expect("J is part of every layout"),
            slot_ti,
            ref_values: reference_values(sym, mode),
            wa,
            wx,
            ti: matches!(sym, SymmetryClass::TransverselyIsotropic(_)),
        }
    }
}

/// Network gradient `Σ_a W2_a σ(h_a) W1_a` at invariants `x`, written into `g`.
fn network_gradient(p: &PannParams, x: &[f64], h: &mut [f64], g: &mut [f64]) {
    let n = x.len();
    g.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..p.width {
        let row = &p.w1[a * n..(a + 1) * n];
        h[a] = p.b[a] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let s = p.w2[a] * logistic(h[a]);
        for (gi, w) in g.iter_mut().zip(row) {
            *gi += s * w;
        }
    }
}

/// Adds the parameter gradient of `λ · g(x)` where `g` is the network's
/// invariant gradient at `x` and `h` its pre-activations.
fn backprop_gradient(p: &PannParams, x: &[f64], h: &[f64], lambda: &[f64], out: &mut [f64]) {
    let n = x.len();
    let m = p.width;
    let (dw1, rest) = out.split_at_mut(m * n);
    let (dw2, db) = rest.split_at_mut(m);
    for a in 0..m {
        let row = &p.w1[a * n..(a + 1) * n];
        let u: f64 = row.iter().zip(lambda).map(|(w, l)| w * l).sum();
        let s = logistic(h[a]);
        let ds = logistic_prime(h[a]);
        dw2[a] += s * u;
        db[a] += p.w2[a] * ds * u;
        let c1 = p.w2[a] * ds * u;
        let c2 = p.w2[a] * s;
        let drow = &mut dw1[a * n..(a + 1) * n];
        for j in 0..n {
            drow[j] += c1 * x[j] + c2 * lambda[j];
        }
    }
}

/// Stress-term coefficients `(c_J, c_1ti, c_2ti)` and the reference
/// pre-activations they were derived from.
fn constants(p: &PannParams, st: &Structure, h0: &mut [f64], g0: &mut [f64]) -> (f64, f64, f64, f64) {
    network_gradient(p, &st.ref_values, h0, g0);
    let a: f64 = st.wa.iter().zip(g0.iter()).map(|(w, d)| w * d).sum();
    let x: f64 = st.wx.iter().zip(g0.iter()).map(|(w, d)| w * d).sum();
    if st.ti {
        let pp = (-x).max(0.0);
        let q = x.max(0.0);
        (-(a + 2.0 * q), pp, q, x)
    } else {
        (-a, 0.0, 0.0, x)
    }
}

/// Mean squared error over `idx` (all records when `None`) and, optionally,
/// its parameter gradient in the [`PannParams::to_flat`] order.
fn loss_impl(p: &PannParams, data: &PreparedData, idx: Option<&[usize]>, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    if p.sym != data.sym || p.mode != data.mode {
        return Err(Error::Config("parameters and prepared data use different invariant sets".into()));
    }
    let count = idx.map_or(data.records.len(), |i| i.len());
    if count == 0 {
        return Err(Error::Config("loss needs at least one record".into()));
    }
    let st = Structure::new(&data.sym, data.mode);
    let n = st.ref_values.len();
    let m = p.width;
    if p.w1.len() != m * n || p.w2.len() != m || p.b.len() != m {
        return Err(Error::Config(format!("parameter shapes do not match width {m} and {n} inputs")));
    }
    let mut h0 = vec![0.0; m];
    let mut g0 = vec![0.0; n];
    let (cj, c1, c2, x_ref) = constants(p, &st, &mut h0, &mut g0);

    let mut grad = if want_grad { vec![0.0; p.n_params()] } else { Vec::new() };
    let mut h = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    // Accumulated adjoints of the three constant coefficients.
    let (mut lam_j, mut lam_1, mut lam_2) = (0.0, 0.0, 0.0);
    let mut loss = 0.0;
    let scale = 1.0 / count as f64;
    for k in 0..count {
        let rec = &data.records[idx.map_or(k, |i| i[k])];
        network_gradient(p, &rec.values, &mut h, &mut g);
        g[st.slot_j] += growth_term(rec.values[st.slot_j])?.1 + cj;
        if let Some((s1, s2)) = st.slot_ti {
            g[s1] += c1;
            g[s2] += c2;
        }
        let mut r = [0.0; 12];
        for (gi, dg) in g.iter().zip(&rec.grads) {
            for c in 0..12 {
                r[c] += gi * dg[c];
            }
        }
        for c in 0..12 {
            r[c] -= rec.target[c];
        }
        loss += r.iter().map(|v| v * v).sum::<f64>();
        if want_grad {
            for (l, dg) in lambda.iter_mut().zip(&rec.grads) {
                *l = 2.0 * scale * r.iter().zip(dg).map(|(a, b)| a * b).sum::<f64>();
            }
            backprop_gradient(p, &rec.values, &h, &lambda, &mut grad);
            lam_j += lambda[st.slot_j];
            if let Some((s1, s2)) = st.slot_ti {
                lam_1 += lambda[s1];
                lam_2 += lambda[s2];
            }
        }
    }
    loss *= scale;
    if want_grad {
        // c_J = −(a + 2q), c_1 = max(−x, 0), c_2 = max(x, 0); zero subgradient at the kink.
        let dl_da = -lam_j;
        let dl_dx = if !st.ti {
            0.0
        } else if x_ref > 0.0 {
            -2.0 * lam_j + lam_2
        } else if x_ref < 0.0 {
            -lam_1
        } else {
            0.0
        };
        let mu: Vec<f64> = st.wa.iter().zip(&st.wx).map(|(a, x)| dl_da * a + dl_dx * x).collect();
        backprop_gradient(p, &st.ref_values, &h0, &mu, &mut grad);
    }
    Ok((loss, grad))
}

/// Loss and analytic parameter gradient over all records.
pub fn mse_loss(params: &PannParams, data: &PreparedData) -> Result<(f64, Vec<f64>)> {
    loss_impl(params, data, None, true)
}

/// Loss over a subset of records.
pub fn mse_loss_subset(params: &PannParams, data: &PreparedData, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
    loss_impl(params, data, Some(idx), true)
}

pub fn mse(params: &PannParams, data: &PreparedData) -> Result<f64> {
    Ok(loss_impl(params, data, None, false)?.0)
}

/// Energy value of the prepared records, mainly for diagnostics.
pub fn network_value(p: &PannParams, x: &[f64]) -> f64 {
    let n = x.len();
    (0..p.width)
        .map(|a| {
            let row = &p.w1[a * n..(a + 1) * n];
            p.w2[a] * softplus(p.b[a] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        })
        .sum()
}

/// First and second moment estimates of the ADAM optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected ADAM update of `x` in place.
pub fn adam_step(state: &mut AdamState, x: &mut [f64], grad: &[f64], lr: f64) {
    assert_eq!(x.len(), grad.len(), "adam_step: parameter and gradient lengths differ");
    assert_eq!(state.m.len(), grad.len(), "adam_step: optimizer state has the wrong length");
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..x.len() {
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * grad[i];
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        x[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Mini-batch size; `None` means full batch.
    pub batch: Option<usize>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { epochs: 2000, learning_rate: 2e-3, restarts: 3, seed: 0, batch: None }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.batch == Some(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Network architecture to calibrate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Architecture {
    pub sym: SymmetryClass,
    pub mode: ConvexityMode,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct RestartResult {
    pub seed: u64,
    /// Calibration loss after every epoch.
    pub losses: Vec<f64>,
    pub calibration_mse: f64,
    pub test_mse: Option<f64>,
    pub params: PannParams,
    /// Set when the loss became non-finite.
    pub failure: Option<String>,
}

impl RestartResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Test MSE when a test set was given, calibration MSE otherwise.
    pub fn selection_mse(&self) -> f64 {
        self.test_mse.unwrap_or(self.calibration_mse)
    }
}

#[derive(Clone, Debug)]
pub struct CalibrationReport {
    pub architecture: String,
    pub restarts: Vec<RestartResult>,
    /// Index of the successful restart with the smallest test MSE.
    pub best: Option<usize>,
}

impl CalibrationReport {
    pub fn best_restart(&self) -> Option<&RestartResult> {
        self.best.map(|i| &self.restarts[i])
    }

    pub fn best_params(&self) -> Option<&PannParams> {
        self.best_restart().map(|r| &r.params)
    }

    /// Per-restart summary in `log10(MSE)` form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# calibration report");
        let _ = writeln!(s, "architecture {}", self.architecture);
        let _ = writeln!(s, "restart seed epochs log10_mse_calibration log10_mse_test status");
        for (i, r) in self.restarts.iter().enumerate() {
            let test = r.test_mse.map_or("-".to_string(), |t| format!("{:.6}", t.log10()));
            let status = match &r.failure {
                Some(f) => format!("failed: {f}"),
                None => "ok".into(),
            };
            let _ = writeln!(s, "{i} {} {} {:.6} {test} {status}", r.seed, r.losses.len(), r.calibration_mse.log10());
        }
        match self.best {
            Some(b) => {
                let _ = writeln!(s, "best {b}");
            }
            None => {
                let _ = writeln!(s, "best none");
            }
        }
        s
    }
}

fn restart_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One calibration run from a Glorot initialization with the given seed.
pub fn calibrate_once(
    calib: &PreparedData,
    test: Option<&PreparedData>,
    arch: &Architecture,
    cfg: &CalibrationConfig,
    seed: u64,
) -> Result<RestartResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PannParams::glorot(arch.sym, arch.mode, arch.width, &mut rng);
    let mut x = params.to_flat();
    let mut adam = AdamState::new(x.len());
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..calib.len()).collect();
    let mut failure = None;
    'epochs: for epoch in 0..cfg.epochs {
        let epoch_loss = match cfg.batch {
            Some(bs) if bs < calib.len() => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs) {
                    let (l, g) = mse_loss_subset(&params, calib, chunk)?;
                    if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                        failure = Some(format!("non-finite loss in epoch {epoch}"));
                        break 'epochs;
                    }
                    adam_step(&mut adam, &mut x, &g, cfg.learning_rate);
                    params.set_flat(&x)?;
                    params.clamp_nonnegative();
                    x = params.to_flat();
                }
                mse(&params, calib)?
            }
            _ => {
                let (l, g) = mse_loss(&params, calib)?;
                if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    failure = Some(format!("non-finite loss in epoch {epoch}"));
                    break 'epochs;
                }
                adam_step(&mut adam, &mut x, &g, cfg.learning_rate);
                params.set_flat(&x)?;
                params.clamp_nonnegative();
                x = params.to_flat();
                l
            }
        };
        losses.push(epoch_loss);
    }
    let calibration_mse = if failure.is_none() { mse(&params, calib)? } else { f64::NAN };
    let test_mse = match (test, &failure) {
        (Some(t), None) => Some(mse(&params, t)?),
        (Some(_), Some(_)) => Some(f64::NAN),
        _ => None,
    };
    if failure.is_none() && !(calibration_mse.is_finite() && test_mse.is_none_or(|t| t.is_finite())) {
        failure = Some("non-finite final loss".into());
    }
    if let Some(last) = losses.last() {
        log::info!("restart seed {seed}: final calibration loss {last:e}");
    }
    Ok(RestartResult { seed, losses, calibration_mse, test_mse, params, failure })
}

/// Independent restarts with selection of the best by test MSE. Restarts are
/// distributed over `workers` threads; results do not depend on the count.
pub fn calibrate(
    calibration: &[DataRecord],
    test: Option<&[DataRecord]>,
    arch: &Architecture,
    cfg: &CalibrationConfig,
    workers: usize,
) -> Result<CalibrationReport> {
    cfg.validate()?;
    if arch.width == 0 {
        return Err(Error::Config("hidden width must be at least 1".into()));
    }
    if calibration.is_empty() {
        return Err(Error::Config("calibration dataset is empty".into()));
    }
    let calib = PreparedData::new(calibration, &arch.sym, arch.mode)?;
    let test = match test {
        Some(t) if !t.is_empty() => Some(PreparedData::new(t, &arch.sym, arch.mode)?),
        _ => None,
    };
    let seeds: Vec<u64> = (0..cfg.restarts).map(|k| restart_seed(cfg.seed, k)).collect();
    let workers = workers.clamp(1, seeds.len());
    let mut results: Vec<Option<Result<RestartResult>>> = (0..seeds.len()).map(|_| None).collect();
    if workers == 1 {
        for (slot, seed) in results.iter_mut().zip(&seeds) {
            *slot = Some(calibrate_once(&calib, test.as_ref(), arch, cfg, *seed));
        }
    } else {
        std::thread::scope(|scope| {
            let chunk = seeds.len().div_ceil(workers);
            for (slots, seeds) in results.chunks_mut(chunk).zip(seeds.chunks(chunk)) {
                let (calib, test) = (&calib, test.as_ref());
                scope.spawn(move || {
                    for (slot, seed) in slots.iter_mut().zip(seeds) {
                        *slot = Some(calibrate_once(calib, test, arch, cfg, *seed));
                    }
                });
            }
        });
    }
    let restarts = results.into_iter().map(|r| r.expect("every restart runs")).collect::<Result<Vec<_>>>()?;
    let best = restarts
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.failed())
        .min_by(|a, b| a.1.selection_mse().total_cmp(&b.1.selection_mse()))
        .map(|(i, _)| i);
    let architecture = crate::pann::architecture_name(&PannParams::zeros(arch.sym, arch.mode, arch.width));
    Ok(CalibrationReport { architecture, restarts, best })
}
