//! Physics-augmented neural network energy
//!
//! ```text
//! e = W2 · SP(W1 · I + b) + (J + 1/J − 2)² + stress term
//! ```
//!
//! where `I` is the invariant vector of [`crate::invariants`] and the stress
//! term is chosen so that `P(I, 0) = 0`:
//!
//! ```text
//! isotropic                 −n J
//! transversely isotropic    −o J + p I1ti + q I2ti
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::energy::{EnergyOutput, InternalEnergy, MaterialState};
use crate::error::{Error, Result};
use crate::invariants::{
    compute_invariant_gradients, compute_invariants, invariant_count, invariant_layout, reference_values, slot_of,
    ConvexityMode, InvariantKind, InvariantSet, SymmetryClass,
};
use crate::tensor::{Tensor2, Vector3};

pub const FORMAT_TAG: &str = "pann-v1";

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `eˣ / (1 + eˣ)`, the derivative of softplus.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let t = x.exp();
        t / (1.0 + t)
    }
}

/// `eˣ / (1 + eˣ)²`, the second derivative of softplus.
#[inline]
pub fn logistic_prime(x: f64) -> f64 {
    let s = logistic(x);
    s * (1.0 - s)
}

/// Trainable weights of a single-hidden-layer network with its architecture tags.
#[derive(Clone, Debug, PartialEq)]
pub struct PannParams {
    pub sym: SymmetryClass,
    pub mode: ConvexityMode,
    /// Hidden width `m`.
    pub width: usize,
    /// `m × n`, row-major.
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b: Vec<f64>,
}

impl PannParams {
    /// All-zero parameters (the network output vanishes identically).
    pub fn zeros(sym: SymmetryClass, mode: ConvexityMode, width: usize) -> Self {
        let n = invariant_count(&sym, mode);
        Self { sym, mode, width, w1: vec![0.0; width * n], w2: vec![0.0; width], b: vec![0.0; width] }
    }

    /// Glorot-uniform weights, zero bias. In polyconvex mode the absolute value
    /// of each draw is taken.
    pub fn glorot<R: Rng + ?Sized>(sym: SymmetryClass, mode: ConvexityMode, width: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(sym, mode, width);
        let n = p.n_inputs();
        let l1 = (6.0 / (n + width) as f64).sqrt();
        let l2 = (6.0 / (width + 1) as f64).sqrt();
        for w in p.w1.iter_mut() {
            *w = rng.random_range(-l1..l1);
        }
        for w in p.w2.iter_mut() {
            *w = rng.random_range(-l2..l2);
        }
        if mode == ConvexityMode::Polyconvex {
            p.project();
        }
        p
    }

    pub fn n_inputs(&self) -> usize {
        invariant_count(&self.sym, self.mode)
    }

    pub fn layout(&self) -> &'static [InvariantKind] {
        invariant_layout(&self.sym, self.mode)
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.w2.len() + self.b.len()
    }

    /// Polyconvex mode: replaces negative weights by their absolute value.
    fn project(&mut self) {
        for w in self.w1.iter_mut().chain(self.w2.iter_mut()) {
            *w = w.abs();
        }
    }

    /// Polyconvex mode: clamps `W1`, `W2` to be non-negative. No-op otherwise.
    pub fn clamp_nonnegative(&mut self) {
        if self.mode == ConvexityMode::Polyconvex {
            for w in self.w1.iter_mut().chain(self.w2.iter_mut()) {
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        }
    }

    /// Flat parameter vector ordered `W1, W2, b`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::Config(format!("expected {} parameters, got {}", self.n_params(), v.len())));
        }
        let (a, rest) = v.split_at(self.w1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.w2.copy_from_slice(c);
        self.b.copy_from_slice(d);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sym.validate()?;
        let n = self.n_inputs();
        if self.width == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        if self.w1.len() != self.width * n || self.w2.len() != self.width || self.b.len() != self.width {
            return Err(Error::Config(format!("parameter shapes do not match width {} and {} inputs", self.width, n)));
        }
        if self.to_flat().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        if self.mode == ConvexityMode::Polyconvex && self.w1.iter().chain(&self.w2).any(|w| *w < 0.0) {
            return Err(Error::Config("polyconvex network requires non-negative W1 and W2".into()));
        }
        Ok(())
    }
}

/// Network value with its invariant gradient and (optionally) Hessian.
#[derive(Clone, Debug)]
pub struct NnEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// `n × n` row-major; empty when not requested.
    pub hess: Vec<f64>,
}

fn check_dims(inv: &[f64], params: &PannParams) -> Result<usize> {
    let n = inv.len();
    let m = params.width;
    if params.w1.len() != m * n || params.w2.len() != m || params.b.len() != m {
        return Err(Error::Config(format!(
            "network expects {} inputs with width {}, got {} invariants",
            params.w1.len().checked_div(m).unwrap_or(0),
            m,
            n
        )));
    }
    Ok(n)
}

fn nn_eval(inv: &[f64], params: &PannParams, hessian: bool) -> Result<NnEval> {
    let n = check_dims(inv, params)?;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = if hessian { vec![0.0; n * n] } else { Vec::new() };
    for a in 0..params.width {
        let row = &params.w1[a * n..(a + 1) * n];
        let h = params.b[a] + row.iter().zip(inv).map(|(w, x)| w * x).sum::<f64>();
        let w2 = params.w2[a];
        value += w2 * softplus(h);
        let s = w2 * logistic(h);
        for (g, w) in grad.iter_mut().zip(row) {
            *g += s * w;
        }
        if hessian {
            let c = w2 * logistic_prime(h);
            for i in 0..n {
                let ci = c * row[i];
                for j in 0..n {
                    hess[i * n + j] += ci * row[j];
                }
            }
        }
    }
    Ok(NnEval { value, grad, hess })
}

/// `W2 · SP(W1 · I + b)` with invariant gradient and Hessian.
pub fn nn_potential(inv: &[f64], params: &PannParams) -> Result<NnEval> {
    nn_eval(inv, params, true)
}

/// Network value and invariant gradient only.
pub fn nn_gradient(inv: &[f64], params: &PannParams) -> Result<NnEval> {
    nn_eval(inv, params, false)
}

/// `(J + 1/J − 2)²` and its first two derivatives.
pub fn growth_term(j: f64) -> Result<(f64, f64, f64)> {
    if !(j > 0.0) {
        return Err(Error::InvalidDeformation { det: j });
    }
    let u = j + 1.0 / j - 2.0;
    let du = 1.0 - 1.0 / (j * j);
    let ddu = 2.0 / (j * j * j);
    Ok((u * u, 2.0 * u * du, 2.0 * du * du + 2.0 * u * ddu))
}

/// Stress-normalization constants. For isotropic models only `n_iso` is used.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormalizationConstants {
    pub n_iso: f64,
    pub o_ti: f64,
    pub p_ti: f64,
    pub q_ti: f64,
}

/// Weights `(a, x)` of the reference-state network stress `P = a I + 2 x G`
/// expressed through the invariant gradient. Used for both the constants and
/// their parameter sensitivities.
pub(crate) fn reference_stress_weights(layout: &[InvariantKind]) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; layout.len()];
    let mut x = vec![0.0; layout.len()];
    for (slot, kind) in layout.iter().enumerate() {
        match kind {
            InvariantKind::I1 => a[slot] = 2.0,
            InvariantKind::I2 => a[slot] = 4.0,
            InvariantKind::J => a[slot] = 1.0,
            InvariantKind::I7 => a[slot] = -1.0,
            InvariantKind::I1ti => x[slot] = 1.0,
            InvariantKind::I2ti => {
                a[slot] = 2.0;
                x[slot] = -1.0;
            }
            InvariantKind::I4ti => {
                a[slot] = 2.0;
                x[slot] = -1.0;
            }
            InvariantKind::I5ti => {
                a[slot] = 2.0;
                x[slot] = 1.0;
            }
            InvariantKind::I4 | InvariantKind::I5 | InvariantKind::I6 | InvariantKind::I3ti | InvariantKind::I6ti => {}
        }
    }
    (a, x)
}

/// Constants from the network gradient at `F = I`, `d0 = 0`. Invariants
/// absent from the layout contribute zero.
pub fn normalization_constants(params: &PannParams) -> Result<NormalizationConstants> {
    let layout = params.layout();
    let inv0 = reference_values(&params.sym, params.mode);
    let g = nn_gradient(&inv0, params)?.grad;
    Ok(constants_from_gradient(&params.sym, layout, &g))
}

pub(crate) fn constants_from_gradient(
    sym: &SymmetryClass,
    layout: &[InvariantKind],
    g: &[f64],
) -> NormalizationConstants {
    let (wa, wx) = reference_stress_weights(layout);
    let a: f64 = wa.iter().zip(g).map(|(w, d)| w * d).sum();
    let x: f64 = wx.iter().zip(g).map(|(w, d)| w * d).sum();
    match sym {
        SymmetryClass::Isotropic => NormalizationConstants { n_iso: a, ..Default::default() },
        SymmetryClass::TransverselyIsotropic(_) => {
            let p = (-x).max(0.0);
            let q = x.max(0.0);
            NormalizationConstants { n_iso: 0.0, o_ti: a + 2.0 * q, p_ti: p, q_ti: q }
        }
    }
}

/// Coefficients of the stress term on the `J`, `I1ti` and `I2ti` slots.
fn stress_term_coefficients(sym: &SymmetryClass, c: &NormalizationConstants) -> (f64, f64, f64) {
    match sym {
        SymmetryClass::Isotropic => (-c.n_iso, 0.0, 0.0),
        SymmetryClass::TransverselyIsotropic(_) => (-c.o_ti, c.p_ti, c.q_ti),
    }
}

/// A PANN energy with its normalization constants computed once at
/// construction. Parameters are replaced through [`PannModel::set_params`],
/// which refreshes the constants.
#[derive(Clone, Debug)]
pub struct PannModel {
    params: PannParams,
    constants: NormalizationConstants,
    slot_j: usize,
    slot_ti: Option<(usize, usize)>,
}

impl PannModel {
    pub fn new(params: PannParams) -> Result<Self> {
        params.validate()?;
        let constants = normalization_constants(&params)?;
        let layout = params.layout();
        let slot_j = slot_of(layout, InvariantKind::J).expect("J is part of every layout");
        let slot_ti = match (slot_of(layout, InvariantKind::I1ti), slot_of(layout, InvariantKind::I2ti)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        Ok(Self { params, constants, slot_j, slot_ti })
    }

    pub fn params(&self) -> &PannParams {
        &self.params
    }

    pub fn constants(&self) -> &NormalizationConstants {
        &self.constants
    }

    pub fn set_params(&mut self, params: PannParams) -> Result<()> {
        *self = Self::new(params)?;
        Ok(())
    }

    /// Effective gradient of the full potential w.r.t. the invariants, with the
    /// network evaluation it was built from.
    fn invariant_gradient(&self, inv: &InvariantSet) -> Result<(f64, Vec<f64>, f64)> {
        let nn = nn_gradient(&inv.values, &self.params)?;
        let j = inv.values[self.slot_j];
        let (vol, dvol, ddvol) = growth_term(j)?;
        let (cj, c1, c2) = stress_term_coefficients(&self.params.sym, &self.constants);
        let mut g = nn.grad;
        g[self.slot_j] += dvol + cj;
        let mut e = nn.value + vol + cj * j;
        if let Some((s1, s2)) = self.slot_ti {
            g[s1] += c1;
            g[s2] += c2;
            e += c1 * inv.values[s1] + c2 * inv.values[s2];
        }
        Ok((e, g, ddvol))
    }
}

impl InternalEnergy for PannModel {
    fn evaluate(&self, state: &MaterialState) -> Result<EnergyOutput> {
        let inv = compute_invariants(state, &self.params.sym, self.params.mode)?;
        let (e, g, ddvol) = self.invariant_gradient(&inv)?;
        let mut out = EnergyOutput { e, ..EnergyOutput::zero() };
        for (i, gi) in g.iter().enumerate() {
            out.p += inv.d_f[i].scale(*gi);
            out.e0 += inv.d_d0[i].scale(*gi);
            out.d2_ff.add_scaled(&inv.d2_ff[i], *gi);
            out.d2_fd0.add_scaled(&inv.d2_fd0[i], *gi);
            out.d2_d0d0 += inv.d2_d0d0[i].scale(*gi);
        }
        // The network Hessian is a sum of rank-one terms, one per hidden unit.
        let n = inv.len();
        for a in 0..self.params.width {
            let row = &self.params.w1[a * n..(a + 1) * n];
            let h = self.params.b[a] + row.iter().zip(&inv.values).map(|(w, x)| w * x).sum::<f64>();
            let c = self.params.w2[a] * logistic_prime(h);
            if c == 0.0 {
                continue;
            }
            let mut u_f = Tensor2::zero();
            let mut u_d = Vector3::zero();
            for (i, w) in row.iter().enumerate() {
                if *w != 0.0 {
                    u_f += inv.d_f[i].scale(*w);
                    u_d += inv.d_d0[i].scale(*w);
                }
            }
            out.add_rank_one(&u_f, &u_d, c);
        }
        out.add_rank_one(&inv.d_f[self.slot_j], &inv.d_d0[self.slot_j], ddvol);
        Ok(out)
    }

    fn gradients(&self, state: &MaterialState) -> Result<(f64, Tensor2, Vector3)> {
        let inv = compute_invariant_gradients(state, &self.params.sym, self.params.mode)?;
        let (e, g, _) = self.invariant_gradient(&inv)?;
        let mut p = Tensor2::zero();
        let mut e0 = Vector3::zero();
        for (i, gi) in g.iter().enumerate() {
            p += inv.d_f[i].scale(*gi);
            e0 += inv.d_d0[i].scale(*gi);
        }
        Ok((e, p, e0))
    }

    fn name(&self) -> String {
        architecture_name(&self.params)
    }
}

/// Short architecture label, e.g. `SP+(8) iso` or `SP(16) ti`.
pub fn architecture_name(p: &PannParams) -> String {
    let plus = if p.mode == ConvexityMode::Polyconvex { "+" } else { "" };
    let sym = match p.sym {
        SymmetryClass::Isotropic => "iso",
        SymmetryClass::TransverselyIsotropic(_) => "ti",
    };
    format!("SP{plus}({}) {sym}", p.width)
}

fn fmt_row(out: &mut String, key: &str, vals: &[f64]) {
    out.push_str(key);
    for v in vals {
        let _ = write!(out, " {v:.17e}");
    }
    out.push('\n');
}

/// Serializes parameters as a `pann-v1` text document.
pub fn to_text(p: &PannParams) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format {FORMAT_TAG}");
    match p.sym {
        SymmetryClass::Isotropic => s.push_str("symmetry isotropic\n"),
        SymmetryClass::TransverselyIsotropic(n) => {
            s.push_str("symmetry transversely_isotropic\n");
            fmt_row(&mut s, "direction", n.as_array());
        }
    }
    let mode = match p.mode {
        ConvexityMode::Polyconvex => "polyconvex",
        ConvexityMode::Unconstrained => "unconstrained",
    };
    let _ = writeln!(s, "mode {mode}");
    let _ = writeln!(s, "width {}", p.width);
    let _ = writeln!(s, "inputs {}", p.n_inputs());
    let labels: Vec<&str> = p.layout().iter().map(|k| k.label()).collect();
    let _ = writeln!(s, "ordering {}", labels.join(","));
    let n = p.n_inputs();
    for a in 0..p.width {
        fmt_row(&mut s, "w1", &p.w1[a * n..(a + 1) * n]);
    }
    fmt_row(&mut s, "w2", &p.w2);
    fmt_row(&mut s, "b", &p.b);
    s
}

/// Parses a `pann-v1` document.
pub fn from_text(text: &str) -> Result<PannParams> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut format_seen = false;
    let mut sym_tag: Option<String> = None;
    let mut direction: Option<Vector3> = None;
    let mut mode: Option<ConvexityMode> = None;
    let mut width: Option<usize> = None;
    let mut inputs: Option<usize> = None;
    let mut ordering: Option<(usize, String)> = None;
    let mut w1: Vec<f64> = Vec::new();
    let mut w2: Option<Vec<f64>> = None;
    let mut b: Option<Vec<f64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let floats = || -> Result<Vec<f64>> {
            rest.iter().map(|t| t.parse::<f64>().map_err(|e| perr(line_no, format!("bad number '{t}': {e}")))).collect()
        };
        let single = || -> Result<&str> {
            match rest.as_slice() {
                [v] => Ok(*v),
                _ => Err(perr(line_no, format!("'{key}' expects exactly one value"))),
            }
        };
        match key {
            "format" => {
                if single()? != FORMAT_TAG {
                    return Err(perr(line_no, format!("unsupported format, expected {FORMAT_TAG}")));
                }
                format_seen = true;
            }
            "symmetry" => sym_tag = Some(single()?.to_string()),
            "direction" => {
                let v = floats()?;
                if v.len() != 3 {
                    return Err(perr(line_no, "direction needs 3 components".into()));
                }
                direction = Some(Vector3::new([v[0], v[1], v[2]]).map_err(|e| perr(line_no, e.to_string()))?);
            }
            "mode" => {
                mode = Some(match single()? {
                    "polyconvex" => ConvexityMode::Polyconvex,
                    "unconstrained" => ConvexityMode::Unconstrained,
                    other => return Err(perr(line_no, format!("unknown mode '{other}'"))),
                })
            }
            "width" => width = Some(single()?.parse().map_err(|e| perr(line_no, format!("bad width: {e}")))?),
            "inputs" => inputs = Some(single()?.parse().map_err(|e| perr(line_no, format!("bad input count: {e}")))?),
            "ordering" => ordering = Some((line_no, single()?.to_string())),
            "w1" => w1.extend(floats()?),
            "w2" => w2 = Some(floats()?),
            "b" => b = Some(floats()?),
            other => return Err(perr(line_no, format!("unknown key '{other}'"))),
        }
    }
    let end = text.lines().count();
    if !format_seen {
        return Err(perr(1, format!("missing 'format {FORMAT_TAG}' line")));
    }
    let sym = match sym_tag.as_deref() {
        Some("isotropic") => SymmetryClass::Isotropic,
        Some("transversely_isotropic") => {
            let n = direction.ok_or_else(|| perr(end, "missing direction".into()))?;
            SymmetryClass::transversely_isotropic(n).map_err(|e| perr(end, e.to_string()))?
        }
        Some(other) => return Err(perr(end, format!("unknown symmetry '{other}'"))),
        None => return Err(perr(end, "missing symmetry".into())),
    };
    let mode = mode.ok_or_else(|| perr(end, "missing mode".into()))?;
    let width = width.ok_or_else(|| perr(end, "missing width".into()))?;
    let n = invariant_count(&sym, mode);
    if let Some(k) = inputs {
        if k != n {
            return Err(perr(end, format!("inputs {k} inconsistent with architecture ({n})")));
        }
    }
    if let Some((line, ord)) = ordering {
        let expected: Vec<&str> = invariant_layout(&sym, mode).iter().map(|k| k.label()).collect();
        if ord != expected.join(",") {
            return Err(perr(line, format!("invariant ordering '{ord}' does not match '{}'", expected.join(","))));
        }
    }
    let params = PannParams {
        sym,
        mode,
        width,
        w1,
        w2: w2.ok_or_else(|| perr(end, "missing w2".into()))?,
        b: b.ok_or_else(|| perr(end, "missing b".into()))?,
    };
    params.validate().map_err(|e| perr(end, e.to_string()))?;
    Ok(params)
}

pub fn save(path: &Path, p: &PannParams) -> Result<()> {
    std::fs::write(path, to_text(p))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PannParams> {
    from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_energy_derivatives, min_symmetric_eigenvalue, random_rotation, random_state, FD_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ti() -> SymmetryClass {
        SymmetryClass::transversely_isotropic(Vector3::from_array([0.5, 0.5, 0.5 * 2f64.sqrt()])).unwrap()
    }

    fn configs() -> Vec<(SymmetryClass, ConvexityMode)> {
        vec![
            (SymmetryClass::Isotropic, ConvexityMode::Polyconvex),
            (SymmetryClass::Isotropic, ConvexityMode::Unconstrained),
            (ti(), ConvexityMode::Polyconvex),
            (ti(), ConvexityMode::Unconstrained),
        ]
    }

    #[test]
    fn zero_output_layer_vanishes() {
        let mut p = PannParams::glorot(
            SymmetryClass::Isotropic,
            ConvexityMode::Polyconvex,
            4,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        p.w2.iter_mut().for_each(|w| *w = 0.0);
        let nn = nn_potential(&[1.0, 2.0, 0.5, 0.1, 0.2, 0.3, -0.5], &p).unwrap();
        assert_eq!(nn.value, 0.0);
        assert!(nn.grad.iter().chain(&nn.hess).all(|x| *x == 0.0));
        let c = normalization_constants(&p).unwrap();
        assert_eq!(c, NormalizationConstants::default());
    }

    #[test]
    fn single_unit_at_zero() {
        let p = PannParams {
            sym: SymmetryClass::Isotropic,
            mode: ConvexityMode::Unconstrained,
            width: 1,
            w1: vec![1.0],
            w2: vec![1.0],
            b: vec![0.0],
        };
        let nn = nn_potential(&[0.0], &p).unwrap();
        assert!((nn.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(nn.grad, vec![0.5]);
        assert_eq!(nn.hess, vec![0.25]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let p = PannParams::zeros(SymmetryClass::Isotropic, ConvexityMode::Polyconvex, 3);
        assert!(matches!(nn_potential(&[1.0, 2.0], &p), Err(Error::Config(_))));
    }

    #[test]
    fn growth_examples() {
        assert_eq!(growth_term(1.0).unwrap(), (0.0, 0.0, 0.0));
        assert!((growth_term(2.0).unwrap().0 - 0.25).abs() < 1e-15);
        let mut last = 0.0;
        for k in 1..40 {
            let v = growth_term(0.5f64.powi(k)).unwrap().0;
            assert!(v > last);
            last = v;
        }
        assert!(matches!(growth_term(0.0), Err(Error::InvalidDeformation { .. })));
    }

    #[test]
    fn normalization_for_all_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (sym, mode) in configs() {
            for _ in 0..20 {
                let mut p = PannParams::glorot(sym, mode, 6, &mut rng);
                p.b.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
                let model = PannModel::new(p).unwrap();
                let out = model.evaluate(&MaterialState::reference()).unwrap();
                assert!(out.p.max_abs() <= 1e-10, "{sym:?} {mode:?}: {:?}", out.p);
                assert!(out.e0.max_abs() <= 1e-10);
                let c = model.constants();
                assert!(c.p_ti >= 0.0 && c.q_ti >= 0.0 && c.p_ti * c.q_ti == 0.0);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (sym, mode) in configs() {
            for _ in 0..10 {
                let p = PannParams::glorot(sym, mode, 8, &mut rng);
                let model = PannModel::new(p).unwrap();
                let s = random_state(&mut rng, 0.3, 0.6);
                let chk = check_energy_derivatives(&model, &s, FD_STEP).unwrap();
                assert!(chk.first < 1e-6 && chk.second < 1e-5, "{sym:?} {mode:?}: {chk:?}");
                let out = model.evaluate(&s).unwrap();
                assert!((out.d2_ff - out.d2_ff.major_transpose()).max_abs() < 1e-10);
                assert!((out.d2_d0d0 - out.d2_d0d0.transpose()).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn objectivity_and_material_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (sym, mode) in configs() {
            let model = PannModel::new(PannParams::glorot(sym, mode, 8, &mut rng)).unwrap();
            for _ in 0..10 {
                let s = random_state(&mut rng, 0.3, 0.5);
                let e = model.energy(&s).unwrap();
                let q = random_rotation(&mut rng);
                let rotated = MaterialState::new(q.dot(&s.f), s.d0).unwrap();
                assert!((model.energy(&rotated).unwrap() - e).abs() <= 1e-10 * e.abs().max(1.0));
                if let Some(n) = sym.direction() {
                    let r = crate::tensor::rotation(&n, rng.random_range(0.0..6.0));
                    let s2 = MaterialState::new(s.f.dot(&r), r.apply_transpose(&s.d0)).unwrap();
                    assert!((model.energy(&s2).unwrap() - e).abs() <= 1e-10 * e.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn polyconvex_network_hessian_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PannParams::glorot(ti(), ConvexityMode::Polyconvex, 16, &mut rng);
        let n = p.n_inputs();
        for _ in 0..100 {
            let inv: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h = nn_potential(&inv, &p).unwrap().hess;
            let rows: Vec<Vec<f64>> = h.chunks(n).map(|r| r.to_vec()).collect();
            assert!(min_symmetric_eigenvalue(&rows) >= -1e-10);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (sym, mode) in configs() {
            let p = PannParams::glorot(sym, mode, 5, &mut rng);
            let q = from_text(&to_text(&p)).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn malformed_text_reports_line() {
        let p = PannParams::zeros(SymmetryClass::Isotropic, ConvexityMode::Polyconvex, 2);
        let text = to_text(&p).replace("width 2", "width two");
        match from_text(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
