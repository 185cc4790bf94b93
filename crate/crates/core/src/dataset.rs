//! Concentric load-state sampling, dataset assembly from a reference model,
//! and the `eedata-v1` text format.
//!
//! Each deviatoric direction `u ∈ S⁴` is mapped to a traceless symmetric
//! tensor through a fixed Frobenius-orthonormal basis and combined with
//! linearly spaced amplitudes: `F = exp(a Σ u_k E_k)`, so `det F = 1`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::energy::{InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::stability::{ellipticity_scan_from, SphericalGrid};
use crate::tensor::{Tensor2, Vector3};

pub const FORMAT_TAG: &str = "eedata-v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingPlan {
    pub n_dirs: usize,
    pub n_amps: usize,
    pub n_d0_amps: usize,
    pub amp_max: f64,
    pub d0_max: f64,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(n_dirs: usize, n_amps: usize, n_d0_amps: usize, seed: u64) -> Self {
        Self { n_dirs, n_amps, n_d0_amps, amp_max: 1.0, d0_max: 1.5, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dirs == 0 || self.n_amps == 0 || self.n_d0_amps == 0 {
            return Err(Error::Config("sampling counts must be at least 1".into()));
        }
        if !(self.amp_max > 0.0 && self.d0_max > 0.0) || !self.amp_max.is_finite() || !self.d0_max.is_finite() {
            return Err(Error::Config("sampling amplitudes must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_dirs * self.n_amps * self.n_d0_amps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Frobenius-orthonormal basis of traceless symmetric tensors.
pub fn deviatoric_basis() -> [Tensor2; 5] {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r6 = 1.0 / 6f64.sqrt();
    [
        Tensor2::diag([r2, -r2, 0.0]),
        Tensor2::diag([r6, r6, -2.0 * r6]),
        Tensor2::from_rows([[0.0, r2, 0.0], [r2, 0.0, 0.0], [0.0, 0.0, 0.0]]),
        Tensor2::from_rows([[0.0, 0.0, r2], [0.0, 0.0, 0.0], [r2, 0.0, 0.0]]),
        Tensor2::from_rows([[0.0, 0.0, 0.0], [0.0, 0.0, r2], [0.0, r2, 0.0]]),
    ]
}

fn unit_normal<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    loop {
        let v: [f64; N] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.map(|x| x / n);
        }
    }
}

/// Sampled state with its position in the concentric plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledState {
    pub state: MaterialState,
    pub dir: usize,
    /// 1-based amplitude index of `F`.
    pub amp: usize,
    /// 1-based amplitude index of `d0`.
    pub d0_amp: usize,
}

/// States ordered by direction, then `F` amplitude, then `d0` amplitude.
pub fn sample_states(plan: &SamplingPlan) -> Result<Vec<SampledState>> {
    plan.validate()?;
    let basis = deviatoric_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::with_capacity(plan.len());
    for dir in 0..plan.n_dirs {
        let u: [f64; 5] = unit_normal(&mut rng);
        let dvec = Vector3::from_array(unit_normal::<3>(&mut rng));
        let dev = basis.iter().zip(u).fold(Tensor2::zero(), |acc, (e, c)| acc + e.scale(c));
        for amp in 1..=plan.n_amps {
            let a = plan.amp_max * amp as f64 / plan.n_amps as f64;
            let f = dev.scale(a).sym_exp();
            for d0_amp in 1..=plan.n_d0_amps {
                let m = plan.d0_max * d0_amp as f64 / plan.n_d0_amps as f64;
                out.push(SampledState { state: MaterialState { f, d0: dvec.scale(m) }, dir, amp, d0_amp });
            }
        }
    }
    Ok(out)
}

/// Reference scales; quantities are stored divided by their scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFactors {
    pub mu_ref: f64,
    pub eps_ref: f64,
}

impl Default for ScaleFactors {
    fn default() -> Self {
        Self { mu_ref: 1.0, eps_ref: 1.0 }
    }
}

impl ScaleFactors {
    pub fn stress(&self) -> f64 {
        self.mu_ref
    }
    pub fn d0(&self) -> f64 {
        (self.mu_ref * self.eps_ref).sqrt()
    }
    pub fn e0(&self) -> f64 {
        (self.mu_ref / self.eps_ref).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataRecord {
    pub f: Tensor2,
    pub d0: Vector3,
    pub p: Tensor2,
    pub e0: Vector3,
    /// `None` when ellipticity was not checked.
    pub elliptic: Option<bool>,
}

impl DataRecord {
    pub fn state(&self) -> MaterialState {
        MaterialState { f: self.f, d0: self.d0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetHeader {
    pub seed: Option<u64>,
    pub plan: Option<SamplingPlan>,
    pub scale: ScaleFactors,
    pub model: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DataRecord>,
}

impl Dataset {
    /// Records that are not known to be non-elliptic.
    pub fn usable(&self) -> Vec<DataRecord> {
        self.records.iter().filter(|r| r.elliptic != Some(false)).cloned().collect()
    }

    pub fn non_elliptic_count(&self) -> usize {
        self.records.iter().filter(|r| r.elliptic == Some(false)).count()
    }
}

/// Outcome of [`build_dataset`].
#[derive(Clone, Debug)]
pub struct BuildReport {
    pub records: Vec<DataRecord>,
    /// Index into the input list and reason for each skipped state.
    pub skipped: Vec<(usize, String)>,
}

/// Evaluates `model` at every state. With `ellipticity = Some(grid)` each
/// record is flagged through an acoustic-tensor scan.
pub fn build_dataset<M: InternalEnergy + ?Sized>(
    states: &[MaterialState],
    model: &M,
    ellipticity: Option<&SphericalGrid>,
    scale: &ScaleFactors,
) -> BuildReport {
    let mut records = Vec::with_capacity(states.len());
    let mut skipped = Vec::new();
    for (idx, s) in states.iter().enumerate() {
        let evaluated = match ellipticity {
            Some(grid) => model.evaluate(s).and_then(|out| {
                let verdict = ellipticity_scan_from(&out, grid)?;
                Ok((out.p, out.e0, Some(verdict.elliptic)))
            }),
            None => model.gradients(s).map(|(_, p, e0)| (p, e0, None)),
        };
        match evaluated {
            Ok((p, e0, elliptic)) => records.push(DataRecord {
                f: s.f,
                d0: s.d0.scale(1.0 / scale.d0()),
                p: p.scale(1.0 / scale.stress()),
                e0: e0.scale(1.0 / scale.e0()),
                elliptic,
            }),
            Err(e) => {
                log::warn!("state {idx} skipped: {e}");
                skipped.push((idx, e.to_string()));
            }
        }
    }
    BuildReport { records, skipped }
}

fn push_floats(s: &mut String, vals: &[f64]) {
    for v in vals {
        let _ = write!(s, "{v:.17e} ");
    }
}

pub fn to_text(ds: &Dataset) -> String {
    let h = &ds.header;
    let mut s = String::new();
    let _ = writeln!(s, "# format {FORMAT_TAG}");
    if let Some(seed) = h.seed {
        let _ = writeln!(s, "# seed {seed}");
    }
    if let Some(p) = &h.plan {
        let _ = writeln!(
            s,
            "# plan {} {} {} {:.17e} {:.17e} {}",
            p.n_dirs, p.n_amps, p.n_d0_amps, p.amp_max, p.d0_max, p.seed
        );
    }
    let sc = &h.scale;
    let _ = writeln!(
        s,
        "# scale {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
        sc.mu_ref,
        sc.eps_ref,
        sc.stress(),
        sc.d0(),
        sc.e0()
    );
    if let Some(m) = &h.model {
        let _ = writeln!(s, "# model {m}");
    }
    let _ = writeln!(s, "# records {}", ds.records.len());
    for r in &ds.records {
        push_floats(&mut s, &r.f.to_row_major());
        push_floats(&mut s, r.d0.as_array());
        push_floats(&mut s, &r.p.to_row_major());
        push_floats(&mut s, r.e0.as_array());
        let flag = match r.elliptic {
            Some(true) => 1,
            Some(false) => 0,
            None => -1,
        };
        let _ = writeln!(s, "{flag}");
    }
    s
}

pub fn from_text(text: &str) -> Result<Dataset> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut ds = Dataset::default();
    let mut format_seen = false;
    let mut expected: Option<(usize, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('#') {
            let mut it = body.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let num = |t: &str| t.parse::<f64>().map_err(|e| perr(ln, format!("bad number '{t}': {e}")));
            let int = |t: &str| t.parse::<u64>().map_err(|e| perr(ln, format!("bad integer '{t}': {e}")));
            match key {
                "format" => {
                    if rest != [FORMAT_TAG] {
                        return Err(perr(ln, format!("unsupported format, expected {FORMAT_TAG}")));
                    }
                    format_seen = true;
                }
                "seed" if rest.len() == 1 => ds.header.seed = Some(int(rest[0])?),
                "plan" if rest.len() == 6 => {
                    ds.header.plan = Some(SamplingPlan {
                        n_dirs: int(rest[0])? as usize,
                        n_amps: int(rest[1])? as usize,
                        n_d0_amps: int(rest[2])? as usize,
                        amp_max: num(rest[3])?,
                        d0_max: num(rest[4])?,
                        seed: int(rest[5])?,
                    })
                }
                "scale" if rest.len() >= 2 => {
                    ds.header.scale = ScaleFactors { mu_ref: num(rest[0])?, eps_ref: num(rest[1])? };
                }
                "model" => ds.header.model = Some(rest.join(" ")),
                "records" if rest.len() == 1 => expected = Some((ln, int(rest[0])? as usize)),
                "seed" | "plan" | "scale" | "records" => {
                    return Err(perr(ln, format!("malformed '{key}' header line")));
                }
                // Free-form comments are allowed.
                _ => {}
            }
            continue;
        }
        if !format_seen {
            return Err(perr(ln, format!("record before '# format {FORMAT_TAG}' header")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 25 {
            return Err(perr(ln, format!("expected 24 floats and a flag, found {} fields", toks.len())));
        }
        let mut v = [0.0; 24];
        for (slot, t) in v.iter_mut().zip(&toks) {
            *slot = t.parse::<f64>().map_err(|e| perr(ln, format!("bad number '{t}': {e}")))?;
            if !slot.is_finite() {
                return Err(perr(ln, "non-finite value".into()));
            }
        }
        let elliptic = match toks[24] {
            "1" => Some(true),
            "0" => Some(false),
            "-1" => None,
            other => return Err(perr(ln, format!("bad elliptic flag '{other}'"))),
        };
        let f = Tensor2::from_fn(|i, j| v[3 * i + j]);
        if !(f.det() > 0.0) {
            return Err(perr(ln, format!("det F = {} is not positive", f.det())));
        }
        ds.records.push(DataRecord {
            f,
            d0: Vector3::from_array([v[9], v[10], v[11]]),
            p: Tensor2::from_fn(|i, j| v[12 + 3 * i + j]),
            e0: Vector3::from_array([v[21], v[22], v[23]]),
            elliptic,
        });
    }
    if !format_seen {
        return Err(perr(1, format!("missing '# format {FORMAT_TAG}' header")));
    }
    if let Some((ln, n)) = expected {
        if n != ds.records.len() {
            return Err(perr(ln, format!("header announces {n} records, found {}", ds.records.len())));
        }
    }
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, to_text(ds))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    from_text(&std::fs::read_to_string(path)?)
}

/// Samples `plan`, evaluates `model` and packages the result with a header.
pub fn generate<M: InternalEnergy + ?Sized>(
    plan: &SamplingPlan,
    model: &M,
    ellipticity: Option<&SphericalGrid>,
    scale: &ScaleFactors,
) -> Result<(Dataset, Vec<SampledState>, BuildReport)> {
    let sampled = sample_states(plan)?;
    let states: Vec<MaterialState> = sampled.iter().map(|s| s.state).collect();
    let report = build_dataset(&states, model, ellipticity, scale);
    let ds = Dataset {
        header: DatasetHeader { seed: Some(plan.seed), plan: Some(*plan), scale: *scale, model: Some(model.name()) },
        records: report.records.clone(),
    };
    Ok((ds, sampled, report))
}
