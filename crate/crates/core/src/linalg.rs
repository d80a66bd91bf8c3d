//! Dense complex Hermitian linear algebra.
//!
//! Everything the solvers need and nothing more: validation, the lower
//! Cholesky factor and its inverse (used for whitening), cyclic Jacobi
//! eigenvalues, and Hermitian quadratic forms.

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Conjugate-symmetry tolerance, relative to the largest absolute entry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default Jacobi sweep budget.
pub const DEFAULT_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("not positive definite: pivot {pivot} is {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

/// Checks conjugate symmetry of a square matrix given as rows.
///
/// `tol` is relative to the largest absolute entry; an all-zero matrix is Hermitian.
pub fn validate_hermitian(rows: &[Vec<C64>], tol: f64) -> Result<bool, LinalgError> {
    let n = rows.len();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(LinalgError::NotSquare { rows: n, row, cols: r.len() });
        }
    }
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, z| m.max(z.norm()));
    if !scale.is_finite() {
        return Ok(false);
    }
    let bound = tol * scale;
    for i in 0..n {
        for j in i..n {
            if (rows[i][j] - rows[j][i].conj()).norm() > bound {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Midpoint that leaves already-equal entries bit-identical (halving is
/// inexact for subnormals).
fn average(a: C64, b: C64) -> C64 {
    if a == b {
        a
    } else {
        a * 0.5 + b * 0.5
    }
}

/// N×N Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl HermitianMatrix {
    /// Builds from rows after checking shape, finiteness and conjugate symmetry.
    ///
    /// The stored matrix is the exact Hermitian part `(M + Mᴴ)/2`, so rounding
    /// noise below the tolerance does not leak into quadratic forms.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        if rows.iter().flat_map(|r| r.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        if !validate_hermitian(rows, HERMITIAN_TOL)? {
            return Err(LinalgError::NotHermitian);
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(average(rows[i][j], rows[j][i].conj()));
            }
        }
        Ok(Self { dim: n, data })
    }

    /// Real rows convenience constructor (symmetric real input).
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = C64::new(d, 0.0);
        }
        Self { dim: n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self { dim: n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    /// Symmetrizes an arbitrary row-major buffer: `(M + Mᴴ)/2`.
    pub(crate) fn hermitian_part(dim: usize, data: &[C64]) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        let mut out = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = average(data[i * dim + j], data[j * dim + i].conj());
            }
        }
        Self { dim, data: out }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in combine");
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x * a + y * b).collect();
        Self { dim: self.dim, data }
    }

    /// `self + Σ wₖ·Mₖ`.
    pub fn affine(&self, terms: &[(f64, &Self)]) -> Self {
        let mut data = self.data.clone();
        for &(w, m) in terms {
            assert_eq!(self.dim, m.dim, "dimension mismatch in affine");
            if w == 0.0 {
                continue;
            }
            for (d, x) in data.iter_mut().zip(&m.data) {
                *d += x * w;
            }
        }
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        self.data
            .chunks(n)
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Congruence `L·self·Lᴴ` for a lower-triangular `L`.
    pub fn congruence(&self, l: &LowerTriangular) -> Self {
        let n = self.dim;
        assert_eq!(n, l.dim, "dimension mismatch in congruence");
        // B = L·A
        let mut b = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..=i {
                let lik = l.data[i * n + k];
                if lik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    b[i * n + j] += lik * self.data[k * n + j];
                }
            }
        }
        // C = B·Lᴴ, C[i][j] = Σₖ B[i][k]·conj(L[j][k])
        let mut c = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..=j {
                    s += b[i * n + k] * l.data[j * n + k].conj();
                }
                c[i * n + j] = s;
            }
        }
        Self::hermitian_part(n, &c)
    }

    /// Restriction `Vᴴ·self·V` onto the span of the given vectors.
    pub fn compress(&self, basis: &[Vec<C64>]) -> Self {
        let k = basis.len();
        let images: Vec<Vec<C64>> = basis.iter().map(|v| self.mul_vec(v)).collect();
        let mut data = vec![C64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for j in 0..k {
                data[i * k + j] = dot(&basis[i], &images[j]);
            }
        }
        Self::hermitian_part(k, &data)
    }

    /// Largest off-diagonal magnitude relative to the Frobenius norm.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j].norm() <= tol * scale))
    }
}

/// Lower-triangular complex matrix, stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<C64>,
}

impl LowerTriangular {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = C64::new(1.0, 0.0);
        }
        Self { dim: n, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..=i).map(|k| self.data[i * n + k] * v[k]).sum())
            .collect()
    }

    /// `Lᴴ·v`.
    pub fn adjoint_mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        (0..n)
            .map(|j| (j..n).map(|i| self.data[i * n + j].conj() * v[i]).sum())
            .collect()
    }
}

/// Returns `F⁻¹` where `F` is the lower Cholesky factor of `t` (`t = F·Fᴴ`).
pub fn inverse_sqrt_factor(t: &HermitianMatrix) -> Result<LowerTriangular, LinalgError> {
    let n = t.dim;
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = t.get(j, j).re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[j * n + j] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = t.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    // Forward substitution for L⁻¹, column by column.
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        inv[j * n + j] = C64::new(1.0, 0.0) / l[j * n + j];
        for i in j + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[i * n + k] * inv[k * n + j];
            }
            inv[i * n + j] = -s / l[i * n + i];
        }
    }
    Ok(LowerTriangular { dim: n, data: inv })
}

/// An eigenvalue with a unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<C64>,
}

/// Full eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub sweeps: usize,
}

impl HermitianEigen {
    pub fn pair(&self, k: usize) -> EigenPair {
        EigenPair { value: self.values[k], vector: self.vectors[k].clone() }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Number of eigenvalues within `tol` of the smallest one.
    pub fn lowest_cluster(&self, tol: f64) -> usize {
        let lo = self.values[0];
        self.values.iter().take_while(|&&v| v - lo <= tol).count()
    }
}

fn off_diagonal_norm(a: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
pub fn eigh(a: &HermitianMatrix, max_sweeps: usize) -> Result<HermitianEigen, LinalgError> {
    let n = a.dim;
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut w = a.data.clone();
    let mut v = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = C64::new(1.0, 0.0);
        w[i * n + i] = C64::new(w[i * n + i].re, 0.0);
    }
    let frob = a.frobenius_norm();
    if !frob.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let target = f64::EPSILON * frob;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&w, n);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(LinalgError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 || mag < 1e-3 * target / n as f64 {
                    continue;
                }
                let app = w[p * n + p].re;
                let aqq = w[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Unitary J: J_pp = c, J_pq = s, J_qp = -s·e^{-iφ}, J_qq = c·e^{-iφ}.
                let phase = apq / mag;
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    w[k * n + p] = akp * c + akq * jqp;
                    w[k * n + q] = akp * s + akq * jqq;
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * c + vkq * jqp;
                    v[k * n + q] = vkp * s + vkq * jqq;
                }
                for k in 0..n {
                    let apk = w[p * n + k];
                    let aqk = w[q * n + k];
                    w[p * n + k] = apk * c + aqk * jqp.conj();
                    w[q * n + k] = apk * s + aqk * jqq.conj();
                }
                w[p * n + q] = C64::new(0.0, 0.0);
                w[q * n + p] = C64::new(0.0, 0.0);
                w[p * n + p] = C64::new(app - t * mag, 0.0);
                w[q * n + q] = C64::new(aqq + t * mag, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].re.total_cmp(&w[j * n + j].re));
    let values = order.iter().map(|&i| w[i * n + i].re).collect();
    let vectors = order
        .iter()
        .map(|&j| {
            let mut col: Vec<C64> = (0..n).map(|k| v[k * n + j]).collect();
            normalize_phase(&mut col);
            col
        })
        .collect();
    Ok(HermitianEigen { values, vectors, sweeps })
}

/// Smallest eigenvalue and its unit eigenvector.
pub fn min_eigenpair(a: &HermitianMatrix) -> Result<EigenPair, LinalgError> {
    min_eigenpair_with(a, DEFAULT_MAX_SWEEPS)
}

pub fn min_eigenpair_with(a: &HermitianMatrix, max_sweeps: usize) -> Result<EigenPair, LinalgError> {
    Ok(eigh(a, max_sweeps)?.pair(0))
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
pub fn normalize_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= rot;
        }
        v[best] = C64::new(v[best].norm(), 0.0);
    }
}

/// `uᴴ·v`.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales `v` to unit norm in place; returns the original norm.
pub fn normalize(v: &mut [C64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Real part of `uᴴ·A·u`; the imaginary part of the raw sum is rounding noise.
pub fn quadratic_form(a: &HermitianMatrix, u: &[C64]) -> Result<f64, LinalgError> {
    if u.len() != a.dim {
        return Err(LinalgError::DimensionMismatch { expected: a.dim, found: u.len() });
    }
    Ok(qform(a, u))
}

/// Unchecked quadratic form. Uses the Hermitian structure: the diagonal plus
/// twice the real part of the strict upper triangle.
#[inline]
pub(crate) fn qform(a: &HermitianMatrix, u: &[C64]) -> f64 {
    let n = a.dim;
    let d = &a.data;
    let mut s = 0.0;
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        s += row[i].re * u[i].norm_sqr();
        let mut acc = C64::new(0.0, 0.0);
        for j in i + 1..n {
            acc += row[j] * u[j];
        }
        s += 2.0 * (u[i].conj() * acc).re;
    }
    s
}
