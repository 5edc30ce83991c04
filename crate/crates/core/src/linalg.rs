//! Dense and sparse complex matrix helpers: Padé matrix exponential,
//! Taylor action of a sparse exponential, gauge-fixed QR and Hermitian spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular Padé denominator")]
    Singular,
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("QR diagonal vanished at column {0}; columns are linearly dependent")]
    RankDeficient(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest one-norm for which the degree-13 Padé approximant meets double
/// precision backward error without scaling.
const THETA13: f64 = 5.371920351148152;

pub fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a fixed degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> Result<CMat, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare { rows: n, cols: a.ncols() });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = Complex64::new(0.5f64.powi(s), 0.0);
    let a = a * scale;

    let id = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| Complex64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9));
    let u = &a * (u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
    let v_inner = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8));
    let v = v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(LinalgError::Singular)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(r)
}

/// Compressed sparse row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMat {
    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet index out of range");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                cols.push(j);
                vals.push(v);
                last = Some((i, j));
            }
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((i, j), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != Complex64::new(0.0, 0.0) {
                row_ptr[i + 1] += 1;
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMat { n, row_ptr, cols: keep_cols, vals: keep_vals }
    }

    pub fn from_dense(a: &CMat) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> CMat {
        let mut a = CMat::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[(i, self.cols[k])] += self.vals[k];
            }
        }
        a
    }

    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (&j, v) in self.cols.iter().zip(&self.vals) {
            col[j] += v.re.abs() + v.im.abs();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// out = scale * self * x with x, out stored row-major with `m` columns.
    fn mul_rows(&self, x: &[Complex64], m: usize, scale: f64, out: &mut [Complex64]) {
        for i in 0..self.n {
            let o = &mut out[i * m..(i + 1) * m];
            o.fill(Complex64::new(0.0, 0.0));
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[k] * scale;
                let xr = &x[self.cols[k] * m..(self.cols[k] + 1) * m];
                for (a, b) in o.iter_mut().zip(xr) {
                    *a += v * b;
                }
            }
        }
    }

    /// exp(self) * x by truncated Taylor series on s sub-steps with
    /// ||self/s||_1 <= 4; each series stops once two successive terms fall
    /// below `tol` relative to the partial sum.
    pub fn expm_action(&self, x: &CMat, tol: f64) -> Result<CMat, LinalgError> {
        if x.nrows() != self.n {
            return Err(LinalgError::Dimension { expected: self.n, got: x.nrows() });
        }
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let m = x.ncols();
        let s = (self.one_norm() / 4.0).ceil().max(1.0) as usize;
        let mut f: Vec<Complex64> = x.transpose().as_slice().to_vec();
        let mut term = f.clone();
        let mut next = vec![Complex64::new(0.0, 0.0); f.len()];
        let peak = |v: &[Complex64]| v.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        for _ in 0..s {
            term.copy_from_slice(&f);
            let mut small = 0;
            for k in 1..=120 {
                self.mul_rows(&term, m, 1.0 / (s as f64 * k as f64), &mut next);
                std::mem::swap(&mut term, &mut next);
                for (a, b) in f.iter_mut().zip(&term) {
                    *a += b;
                }
                if peak(&term) <= tol * peak(&f) {
                    small += 1;
                    if small == 2 {
                        break;
                    }
                } else {
                    small = 0;
                }
            }
        }
        if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(CMat::from_row_slice(self.n, m, &f))
    }
}

/// conj(a) . b
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// One Cholesky-QR pass in place on column-major `y` (m x n). Returns the
/// largest deviation of the Gram matrix from the identity, or None when
/// the Gram matrix is not numerically positive definite.
fn chol_qr_pass(y: &mut [Complex64], m: usize, n: usize) -> Option<f64> {
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            let v = cdot(&y[i * m..(i + 1) * m], &y[j * m..(j + 1) * m]);
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((v - target).norm());
            g[i + j * n] = v;
        }
    }
    // upper R with G = R^H R, stored over g
    for j in 0..n {
        for i in 0..j {
            let mut v = g[i + j * n];
            for k in 0..i {
                v -= g[k + i * n].conj() * g[k + j * n];
            }
            g[i + j * n] = v / g[i + i * n].re;
        }
        let mut d = g[j + j * n].re;
        let scale = d;
        for k in 0..j {
            d -= g[k + j * n].norm_sqr();
        }
        if !(d > 1e-14 * scale) || !d.is_finite() {
            return None;
        }
        g[j + j * n] = Complex64::new(d.sqrt(), 0.0);
    }
    // y <- y R^{-1}, column by column
    for j in 0..n {
        let (done, rest) = y.split_at_mut(j * m);
        let col = &mut rest[..m];
        for k in 0..j {
            let r = g[k + j * n];
            for (c, q) in col.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                *c -= r * q;
            }
        }
        let inv = 1.0 / g[j + j * n].re;
        for c in col.iter_mut() {
            *c *= inv;
        }
    }
    Some(dev)
}

/// Thin QR of a tall matrix with the gauge fixed so that diag(R) is real and
/// nonnegative. Returns Q only.
///
/// Two Cholesky-QR passes when the matrix is well conditioned, Householder
/// otherwise; both give the same Q since the gauge makes it unique.
pub fn qr_gauge(x: &CMat) -> Result<CMat, LinalgError> {
    let (m, n) = x.shape();
    if n <= m && n > 0 {
        let mut y = x.as_slice().to_vec();
        if chol_qr_pass(&mut y, m, n).is_some() {
            if let Some(dev) = chol_qr_pass(&mut y, m, n) {
                if dev < 1e-2 {
                    return Ok(CMat::from_column_slice(m, n, &y));
                }
            }
        }
    }
    qr_householder(x)
}

fn qr_householder(x: &CMat) -> Result<CMat, LinalgError> {
    let n = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = max_abs(x).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let d = r[(k, k)];
        let mag = d.norm();
        if !(mag > 1e-300 * scale) || !mag.is_finite() {
            return Err(LinalgError::RankDeficient(k));
        }
        let phase = d / mag;
        for i in 0..q.nrows() {
            q[(i, k)] *= phase;
        }
    }
    Ok(q)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
