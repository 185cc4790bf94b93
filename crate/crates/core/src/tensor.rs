//! Fixed-size 3×3 / 3-vector / third- and fourth-order tensors and the
//! kinematic quantities (cofactor, determinant, spatial push-forward).
//!
//! Index conventions used throughout the crate:
//!
//! ```text
//! Tensor2   A[i][J]            e.g. F, P, H
//! Tensor3   B[i][J][K]         ∂²e/∂F_iJ ∂d0_K
//! Tensor4   A[i][I][j][J]      ∂²e/∂F_iI ∂F_jJ
//! ```

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Levi-Civita symbol.
#[inline]
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vector3(pub(crate) [f64; 3]);

impl Vector3 {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(Self(v))
        } else {
            Err(Error::NonFinite("vector"))
        }
    }

    /// Unchecked constructor for hot paths where finiteness is inherited from inputs.
    #[inline]
    pub const fn from_array(v: [f64; 3]) -> Self {
        Self(v)
    }

    pub const fn zero() -> Self {
        Self([0.0; 3])
    }

    pub fn unit(k: usize) -> Self {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        Self(v)
    }

    #[inline]
    pub fn as_array(&self) -> &[f64; 3] {
        &self.0
    }

    #[inline]
    pub fn dot(&self, o: &Vector3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn cross(&self, o: &Vector3) -> Vector3 {
        let a = &self.0;
        let b = &o.0;
        Vector3([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Vector3 {
        Vector3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn normalized(&self) -> Vector3 {
        self.scale(1.0 / self.norm())
    }

    pub fn outer(&self, o: &Vector3) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.0[i] * o.0[j])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for Vector3 {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector3 {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, o: Vector3) -> Vector3 {
        Vector3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, o: Vector3) -> Vector3 {
        Vector3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        self.scale(s)
    }
}

impl AddAssign for Vector3 {
    fn add_assign(&mut self, o: Vector3) {
        for k in 0..3 {
            self.0[k] += o.0[k];
        }
    }
}

impl SubAssign for Vector3 {
    fn sub_assign(&mut self, o: Vector3) {
        for k in 0..3 {
            self.0[k] -= o.0[k];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tensor2(pub(crate) [[f64; 3]; 3]);

impl Tensor2 {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        if rows.iter().flatten().all(|x| x.is_finite()) {
            Ok(Self(rows))
        } else {
            Err(Error::NonFinite("second-order tensor"))
        }
    }

    #[inline]
    pub const fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(rows)
    }

    /// Builds from a row-major slice of 9 values.
    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::Config(format!("expected 9 tensor entries, got {}", v.len())));
        }
        Self::new(std::array::from_fn(|i| std::array::from_fn(|j| v[3 * i + j])))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        std::array::from_fn(|k| self.0[k / 3][k % 3])
    }

    #[inline]
    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub const fn zero() -> Self {
        Self([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        Self([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    #[inline]
    pub fn as_rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn transpose(&self) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Tensor cross product `(A ⨯ B)_iI = ε_ijk ε_IJK A_jJ B_kK`.
    pub fn cross(&self, b: &Tensor2) -> Tensor2 {
        let a = &self.0;
        let b = &b.0;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for (ii, v) in row.iter_mut().enumerate() {
                let (jj, kk) = ((ii + 1) % 3, (ii + 2) % 3);
                *v = a[j][jj] * b[k][kk] - a[j][kk] * b[k][jj] - a[k][jj] * b[j][kk] + a[k][kk] * b[j][jj];
            }
        }
        Tensor2(out)
    }

    /// Cofactor `½ F ⨯ F`; equals `det(F) F⁻ᵀ` for invertible F.
    pub fn cofactor(&self) -> Tensor2 {
        self.cross(self).scale(0.5)
    }

    pub fn inverse(&self) -> Option<Tensor2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.cofactor().transpose().scale(1.0 / det))
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn dot(&self, b: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * b.0[k][j]).sum())
    }

    #[inline]
    pub fn apply(&self, v: &Vector3) -> Vector3 {
        Vector3(std::array::from_fn(|i| self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2]))
    }

    /// `Aᵀ v`
    pub fn apply_transpose(&self, v: &Vector3) -> Vector3 {
        Vector3(std::array::from_fn(|j| self.0[0][j] * v.0[0] + self.0[1][j] * v.0[1] + self.0[2][j] * v.0[2]))
    }

    /// Double contraction `A : B`.
    #[inline]
    pub fn ddot(&self, b: &Tensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * b.0[i][j];
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sym(&self) -> Tensor2 {
        Tensor2::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Eigen-decomposition of a symmetric tensor by cyclic Jacobi rotations.
    /// Returns eigenvalues (ascending) and eigenvectors as columns.
    pub fn sym_eigen(&self) -> ([f64; 3], Tensor2) {
        let mut a = self.sym().0;
        let mut v = Tensor2::identity().0;
        for _sweep in 0..50 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let scale = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2] + off;
            if off <= 1e-34 * scale || off == 0.0 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
        let vals = [a[idx[0]][idx[0]], a[idx[1]][idx[1]], a[idx[2]][idx[2]]];
        let vecs = Tensor2::from_fn(|r, c| v[r][idx[c]]);
        (vals, vecs)
    }

    pub fn sym_eigenvalues(&self) -> [f64; 3] {
        self.sym_eigen().0
    }

    /// Matrix exponential of a symmetric tensor via its spectral decomposition.
    pub fn sym_exp(&self) -> Tensor2 {
        let (vals, q) = self.sym_eigen();
        let d = Tensor2::diag([vals[0].exp(), vals[1].exp(), vals[2].exp()]);
        q.dot(&d).dot(&q.transpose())
    }

    /// Leading principal minors `(A11, det A[..2,..2], det A)`.
    pub fn leading_minors(&self) -> [f64; 3] {
        let a = &self.0;
        [a[0][0], a[0][0] * a[1][1] - a[0][1] * a[1][0], self.det()]
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, o: Tensor2) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, o: Tensor2) -> Tensor2 {
        Tensor2::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        self.scale(s)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, o: Tensor2) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, o: Tensor2) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= o.0[i][j];
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tensor3(pub(crate) [[[f64; 3]; 3]; 3]);

impl Tensor3 {
    pub const fn zero() -> Self {
        Self([[[0.0; 3]; 3]; 3])
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| f(i, j, k)))))
    }

    /// `A ⊗ v`
    pub fn outer(a: &Tensor2, v: &Vector3) -> Self {
        Self::from_fn(|i, j, k| a.0[i][j] * v.0[k])
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        Self::from_fn(|i, j, k| self.0[i][j][k] * s)
    }

    /// `B · v` contracting the last index.
    pub fn contract_last(&self, v: &Vector3) -> Tensor2 {
        Tensor2::from_fn(|i, j| (0..3).map(|k| self.0[i][j][k] * v.0[k]).sum())
    }

    /// `A : B` contracting the first two indices, giving a vector over the last.
    pub fn contract_first(&self, a: &Tensor2) -> Vector3 {
        let mut out = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += a.0[i][j] * self.0[i][j][k];
                }
            }
        }
        Vector3(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Flat `[9 × 3]` view with row index `3i + J`.
    pub fn as_flat(&self) -> [[f64; 3]; 9] {
        std::array::from_fn(|r| self.0[r / 3][r % 3])
    }

    pub fn from_flat(m: &[[f64; 3]; 9]) -> Self {
        Self::from_fn(|i, j, k| m[3 * i + j][k])
    }

    pub fn add_scaled(&mut self, o: &Tensor3, s: f64) {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    self.0[i][j][k] += s * o.0[i][j][k];
                }
            }
        }
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.0[i][j][k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k]
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, o: Tensor3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| self.0[i][j][k] + o.0[i][j][k])
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(self, o: Tensor3) -> Tensor3 {
        Tensor3::from_fn(|i, j, k| self.0[i][j][k] - o.0[i][j][k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4(pub(crate) [[[[f64; 3]; 3]; 3]; 3]);

impl Default for Tensor4 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Tensor4 {
    pub const fn zero() -> Self {
        Self([[[[0.0; 3]; 3]; 3]; 3])
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|ii| std::array::from_fn(|j| std::array::from_fn(|jj| f(i, ii, j, jj))))
        }))
    }

    /// `A ⊗ B`
    pub fn outer(a: &Tensor2, b: &Tensor2) -> Self {
        Self::from_fn(|i, ii, j, jj| a.0[i][ii] * b.0[j][jj])
    }

    /// Second derivative of the determinant, `∂²J/∂F_iI ∂F_jJ = ε_ijk ε_IJK F_kK`.
    pub fn det_hessian(f: &Tensor2) -> Self {
        Self::from_fn(|i, ii, j, jj| {
            let mut s = 0.0;
            for k in 0..3 {
                let e = levi_civita(i, j, k);
                if e == 0.0 {
                    continue;
                }
                for kk in 0..3 {
                    s += e * levi_civita(ii, jj, kk) * f.0[k][kk];
                }
            }
            s
        })
    }

    /// `(A : B)_iI = A_iIjJ B_jJ`
    pub fn ddot(&self, b: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(|i, ii| {
            let mut s = 0.0;
            for j in 0..3 {
                for jj in 0..3 {
                    s += self.0[i][ii][j][jj] * b.0[j][jj];
                }
            }
            s
        })
    }

    /// Acoustic-type contraction `Q_ij = A_iIjJ u_I v_J`.
    pub fn contract_inner(&self, u: &Vector3, v: &Vector3) -> Tensor2 {
        Tensor2::from_fn(|i, j| {
            let mut s = 0.0;
            for ii in 0..3 {
                for jj in 0..3 {
                    s += self.0[i][ii][j][jj] * u.0[ii] * v.0[jj];
                }
            }
            s
        })
    }

    pub fn scale(&self, s: f64) -> Tensor4 {
        Self::from_fn(|i, ii, j, jj| self.0[i][ii][j][jj] * s)
    }

    pub fn add_scaled(&mut self, o: &Tensor4, s: f64) {
        for (a, b) in self.flat_mut().iter_mut().zip(o.flat().iter()) {
            *a += s * b;
        }
    }

    /// Adds `s · (A ⊗ B)`.
    pub fn add_outer(&mut self, a: &Tensor2, b: &Tensor2, s: f64) {
        for i in 0..3 {
            for ii in 0..3 {
                let aa = s * a.0[i][ii];
                if aa == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    for jj in 0..3 {
                        self.0[i][ii][j][jj] += aa * b.0[j][jj];
                    }
                }
            }
        }
    }

    /// Swap of the index pairs `(iI) ↔ (jJ)`.
    pub fn major_transpose(&self) -> Tensor4 {
        Self::from_fn(|i, ii, j, jj| self.0[j][jj][i][ii])
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn flat(&self) -> &[f64; 81] {
        // SAFETY: [[[[f64; 3]; 3]; 3]; 3] has the same layout as [f64; 81].
        unsafe { &*(self.0.as_ptr() as *const [f64; 81]) }
    }

    pub fn flat_mut(&mut self) -> &mut [f64; 81] {
        // SAFETY: see `flat`.
        unsafe { &mut *(self.0.as_mut_ptr() as *mut [f64; 81]) }
    }

    /// 9×9 matrix view with row `3i + I` and column `3j + J`.
    pub fn as_matrix(&self) -> [[f64; 9]; 9] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[r / 3][r % 3][c / 3][c % 3]))
    }

    pub fn from_matrix(m: &[[f64; 9]; 9]) -> Self {
        Self::from_fn(|i, ii, j, jj| m[3 * i + ii][3 * j + jj])
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, ii, j, jj): (usize, usize, usize, usize)) -> &f64 {
        &self.0[i][ii][j][jj]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    #[inline]
    fn index_mut(&mut self, (i, ii, j, jj): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][ii][j][jj]
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(mut self, o: Tensor4) -> Tensor4 {
        self.add_scaled(&o, 1.0);
        self
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(mut self, o: Tensor4) -> Tensor4 {
        self.add_scaled(&o, -1.0);
        self
    }
}

/// Cofactor and determinant of a deformation gradient.
pub fn kinematic_triplet(f: &Tensor2) -> Result<(Tensor2, f64)> {
    let j = f.det();
    if !(j > 0.0) {
        return Err(Error::InvalidDeformation { det: j });
    }
    Ok((f.cofactor(), j))
}

/// Spatial electric displacement `d = F d0`.
pub fn spatial_push(f: &Tensor2, d0: &Vector3) -> Vector3 {
    f.apply(d0)
}

/// Rotation matrix from an axis (need not be normalized) and angle (Rodrigues).
pub fn rotation(axis: &Vector3, angle: f64) -> Tensor2 {
    let n = axis.normalized();
    let (s, c) = angle.sin_cos();
    let k = Tensor2::from_rows([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]]);
    Tensor2::identity() + k.scale(s) + k.dot(&k).scale(1.0 - c)
}
