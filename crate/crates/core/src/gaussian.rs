//! Fermionic Gaussian (BdG) states of L complex fermions.
//!
//! A state is stored as the stacked 2L x L matrix X = [U; V]. Quasiparticle
//! annihilators are d_n = sum_k conj(U_kn) c_k + conj(V_kn) c_k^dag, and the
//! state is the common vacuum of all d_n. With psi = (c; c^dag), the Nambu
//! Green's function <psi psi^dag> equals X X^dag.

use crate::linalg::{expm, hermitian_eigenvalues, qr_gauge, CMat, LinalgError, SparseMat};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalues of a Nambu Green's function may stray this far outside [0,1]
/// before it is treated as an error rather than round-off.
pub const SPECTRUM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("bad chain length {len}: {reason}")]
    BadLength { len: usize, reason: &'static str },
    #[error("site index {index} out of range for L = {l}")]
    IndexOutOfRange { index: usize, l: usize },
    #[error("site {0} listed twice in a subsystem")]
    DuplicateSite(usize),
    #[error("Nambu eigenvalue {0} outside [0,1] beyond tolerance")]
    SpectrumOutOfRange(f64),
    #[error("(U,V) violate the Bogoliubov constraints: defect {0:e}")]
    NotUnitary(f64),
    #[error("exponentiated generator reached magnitude {value:e} above bound {bound:e}")]
    NumericalBlowup { value: f64, bound: f64 },
    #[error("Renyi order must be > 1, got {0}")]
    RenyiOrder(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropyConvention {
    /// Von Neumann entropy of the reduced fermionic density matrix: half the
    /// binary-entropy sum over the 2 L_A Nambu eigenvalues.
    #[default]
    Physical,
    /// Binary-entropy sum over every Nambu eigenvalue (each mode counted twice).
    NambuSum,
}

impl EntropyConvention {
    fn weight(self) -> f64 {
        match self {
            EntropyConvention::Physical => 0.5,
            EntropyConvention::NambuSum => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    l: usize,
    x: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPair {
    /// C_ij = <c_i^dag c_j>
    pub c: CMat,
    /// F_ij = <c_i c_j>
    pub f: CMat,
}

/// Nambu Green's function [[1 - C^T, F], [F^dag, C]] on a subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuGreen {
    pub sites: Vec<usize>,
    pub g: CMat,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl GaussianState {
    pub fn vacuum(l: usize) -> Result<Self, GaussianError> {
        if l == 0 || l % 2 == 1 {
            return Err(GaussianError::BadLength { len: l, reason: "L must be even and positive" });
        }
        let mut x = CMat::zeros(2 * l, l);
        for i in 0..l {
            x[(i, i)] = Complex64::new(1.0, 0.0);
        }
        Ok(GaussianState { l, x })
    }

    /// Every site occupied (U = 0, V = 1).
    pub fn filled(l: usize) -> Result<Self, GaussianError> {
        let mut s = Self::vacuum(l)?;
        s.x.fill(czero());
        for i in 0..l {
            s.x[(l + i, i)] = Complex64::new(1.0, 0.0);
        }
        Ok(s)
    }

    pub fn from_uv(u: &CMat, v: &CMat) -> Result<Self, GaussianError> {
        let l = u.nrows();
        if u.shape() != (l, l) || v.shape() != (l, l) || l == 0 {
            return Err(GaussianError::BadLength { len: l, reason: "U and V must be square and equal size" });
        }
        let mut x = CMat::zeros(2 * l, l);
        x.view_mut((0, 0), (l, l)).copy_from(u);
        x.view_mut((l, 0), (l, l)).copy_from(v);
        let s = GaussianState { l, x };
        let d = s.unitarity_defect();
        if d > 1e-10 {
            return Err(GaussianError::NotUnitary(d));
        }
        Ok(s)
    }

    /// Random pure state exp(iH)|vac> with H a random Hermitian BdG matrix
    /// (entries of order `strength`).
    pub fn random<R: Rng + ?Sized>(l: usize, strength: f64, rng: &mut R) -> Result<Self, GaussianError> {
        let vac = Self::vacuum(l)?;
        let mut gauss = || -> f64 { rng.sample::<f64, _>(StandardNormal) * strength };
        let mut a = CMat::zeros(l, l);
        let mut b = CMat::zeros(l, l);
        for i in 0..l {
            a[(i, i)] = Complex64::new(gauss(), 0.0);
            for j in (i + 1)..l {
                let z = Complex64::new(gauss(), gauss());
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
                let w = Complex64::new(gauss(), gauss());
                b[(i, j)] = w;
                b[(j, i)] = -w;
            }
        }
        let mut h = CMat::zeros(2 * l, 2 * l);
        h.view_mut((0, 0), (l, l)).copy_from(&a);
        h.view_mut((0, l), (l, l)).copy_from(&b);
        h.view_mut((l, 0), (l, l)).copy_from(&b.adjoint());
        h.view_mut((l, l), (l, l)).copy_from(&(-a.transpose()));
        let w = expm(&(h * Complex64::new(0.0, 1.0)))?;
        let x = qr_gauge(&(w * &vac.x))?;
        Ok(GaussianState { l, x })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    /// The stacked 2L x L matrix [U; V].
    pub fn stacked(&self) -> &CMat {
        &self.x
    }

    pub fn u(&self) -> CMat {
        self.x.rows(0, self.l).into_owned()
    }

    pub fn v(&self) -> CMat {
        self.x.rows(self.l, self.l).into_owned()
    }

    /// Largest Frobenius violation of U^dag U + V^dag V = 1 and U^T V + V^T U = 0.
    pub fn unitarity_defect(&self) -> f64 {
        let l = self.l;
        let gram = self.x.adjoint() * &self.x - CMat::identity(l, l);
        let u = self.x.rows(0, l);
        let v = self.x.rows(l, l);
        let anti = u.transpose() * v + v.transpose() * u;
        gram.norm().max(anti.norm())
    }

    pub fn correlations(&self) -> CorrelationPair {
        let u = self.u();
        let v = self.v();
        CorrelationPair { c: &v * v.adjoint(), f: &u * v.adjoint() }
    }

    fn row_dot(&self, a: usize, b: usize) -> Complex64 {
        // sum_n X[a,n] conj(X[b,n])
        let mut acc = czero();
        for n in 0..self.l {
            acc += self.x[(a, n)] * self.x[(b, n)].conj();
        }
        acc
    }

    /// <1 - 2 c_j^dag c_j> for every site.
    pub fn onsite_parity(&self) -> Vec<f64> {
        (0..self.l).map(|j| 1.0 - 2.0 * self.row_dot(self.l + j, self.l + j).re).collect()
    }

    /// <(c_j^dag - c_j)(c_{j+1}^dag + c_{j+1})> for j = 0..L-1 (open chain).
    pub fn bond_parity(&self) -> Vec<f64> {
        let l = self.l;
        (0..l - 1)
            .map(|j| {
                let c = self.row_dot(l + j, l + j + 1);
                let f = self.row_dot(j, l + j + 1);
                2.0 * c.re - 2.0 * f.re
            })
            .collect()
    }

    fn check_sites(&self, sites: &[usize]) -> Result<(), GaussianError> {
        let mut seen = vec![false; self.l];
        for &s in sites {
            if s >= self.l {
                return Err(GaussianError::IndexOutOfRange { index: s, l: self.l });
            }
            if seen[s] {
                return Err(GaussianError::DuplicateSite(s));
            }
            seen[s] = true;
        }
        Ok(())
    }

    pub fn reduced_green(&self, sites: &[usize]) -> Result<NambuGreen, GaussianError> {
        self.check_sites(sites)?;
        let n = sites.len();
        let mut xa = CMat::zeros(2 * n, self.l);
        for (r, &s) in sites.iter().enumerate() {
            xa.row_mut(r).copy_from(&self.x.row(s));
            xa.row_mut(n + r).copy_from(&self.x.row(self.l + s));
        }
        Ok(NambuGreen { sites: sites.to_vec(), g: &xa * xa.adjoint() })
    }

    pub fn entropy(&self, sites: &[usize], conv: EntropyConvention) -> Result<f64, GaussianError> {
        self.reduced_green(sites)?.entropy_vn(conv)
    }

    /// Entropy of the whole chain. The nonzero Nambu eigenvalues of X X^dag
    /// coincide with those of the L x L Gram matrix X^dag X.
    pub fn full_entropy(&self, conv: EntropyConvention) -> Result<f64, GaussianError> {
        let gram = self.x.adjoint() * &self.x;
        let mut ev = hermitian_eigenvalues(&gram);
        ev.extend(std::iter::repeat_n(0.0, self.l));
        spectrum_entropy(&ev, conv)
    }

    pub fn half_cut_entropy(&self, conv: EntropyConvention) -> Result<f64, GaussianError> {
        let sites: Vec<usize> = (0..self.l / 2).collect();
        self.entropy(&sites, conv)
    }

    /// S_AB + S_BC - S_B - S_ABC for disjoint site sets A, B, C.
    pub fn tee_regions(&self, a: &[usize], b: &[usize], c: &[usize], conv: EntropyConvention) -> Result<f64, GaussianError> {
        let join = |parts: &[&[usize]]| -> Vec<usize> { parts.iter().flat_map(|p| p.iter().copied()).collect() };
        let s_ab = self.entropy(&join(&[a, b]), conv)?;
        let s_bc = self.entropy(&join(&[b, c]), conv)?;
        let s_b = self.entropy(b, conv)?;
        let s_abc = self.entropy(&join(&[a, b, c]), conv)?;
        Ok(s_ab + s_bc - s_b - s_abc)
    }

    /// Topological entanglement entropy on four equal quarters Q1..Q4 of the
    /// chain with A = Q1, B = Q2, C = Q4: the conditional mutual information
    /// I(Q1 : Q4 | Q2) between the two chain ends.
    pub fn tee(&self, conv: EntropyConvention) -> Result<f64, GaussianError> {
        if self.l % 4 != 0 {
            return Err(GaussianError::BadLength { len: self.l, reason: "TEE needs L divisible by 4" });
        }
        let q = self.l / 4;
        let a: Vec<usize> = (0..q).collect();
        let b: Vec<usize> = (q..2 * q).collect();
        let c: Vec<usize> = (3 * q..4 * q).collect();
        self.tee_regions(&a, &b, &c, conv)
    }

    /// Applies exp(M) to [U; V] and re-orthonormalizes by gauge-fixed QR.
    pub fn evolve(&self, generator: &SparseMat, bound: f64) -> Result<GaussianState, GaussianError> {
        let y = generator.expm_action(&self.x, 1e-15)?;
        self.finish_evolution(y, bound)
    }

    /// Same as `evolve` with a dense exponential of the generator.
    pub fn evolve_dense(&self, generator: &CMat, bound: f64) -> Result<GaussianState, GaussianError> {
        let e = expm(generator)?;
        let peak = crate::linalg::max_abs(&e);
        if peak > bound {
            return Err(GaussianError::NumericalBlowup { value: peak, bound });
        }
        self.finish_evolution(e * &self.x, bound)
    }

    fn finish_evolution(&self, y: CMat, bound: f64) -> Result<GaussianState, GaussianError> {
        let peak = crate::linalg::max_abs(&y);
        if !(peak <= bound) {
            return Err(GaussianError::NumericalBlowup { value: peak, bound });
        }
        Ok(GaussianState { l: self.l, x: qr_gauge(&y)? })
    }

    /// Block-diagonal product of two independent chains (sites of `other`
    /// are appended after those of `self`).
    pub fn direct_sum(&self, other: &GaussianState) -> GaussianState {
        let (l1, l2) = (self.l, other.l);
        let l = l1 + l2;
        let mut x = CMat::zeros(2 * l, l);
        for r in 0..l1 {
            for n in 0..l1 {
                x[(r, n)] = self.x[(r, n)];
                x[(l + r, n)] = self.x[(l1 + r, n)];
            }
        }
        for r in 0..l2 {
            for n in 0..l2 {
                x[(l1 + r, l1 + n)] = other.x[(r, n)];
                x[(l + l1 + r, l1 + n)] = other.x[(l2 + r, n)];
            }
        }
        GaussianState { l, x }
    }
}

impl NambuGreen {
    pub fn spectrum(&self) -> Result<Vec<f64>, GaussianError> {
        check_spectrum(&hermitian_eigenvalues(&self.g))
    }

    pub fn entropy_vn(&self, conv: EntropyConvention) -> Result<f64, GaussianError> {
        spectrum_entropy(&self.spectrum()?, conv)
    }

    pub fn entropy_renyi(&self, n: f64, conv: EntropyConvention) -> Result<f64, GaussianError> {
        spectrum_renyi(&self.spectrum()?, n, conv)
    }
}

/// -l log2 l - (1-l) log2(1-l) with 0 log 0 = 0.
pub fn binary_entropy(l: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    h(l) + h(1.0 - l)
}

fn check_spectrum(spectrum: &[f64]) -> Result<Vec<f64>, GaussianError> {
    spectrum
        .iter()
        .map(|&e| {
            if e < -SPECTRUM_TOL || e > 1.0 + SPECTRUM_TOL || !e.is_finite() {
                Err(GaussianError::SpectrumOutOfRange(e))
            } else {
                Ok(e.clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// Von Neumann entropy (bits) from a Nambu spectrum.
pub fn spectrum_entropy(spectrum: &[f64], conv: EntropyConvention) -> Result<f64, GaussianError> {
    let ev = check_spectrum(spectrum)?;
    Ok(conv.weight() * ev.iter().map(|&l| binary_entropy(l)).sum::<f64>())
}

/// Renyi entropy of order n > 1 (bits) from a Nambu spectrum.
pub fn spectrum_renyi(spectrum: &[f64], n: f64, conv: EntropyConvention) -> Result<f64, GaussianError> {
    if !(n > 1.0) || !n.is_finite() {
        return Err(GaussianError::RenyiOrder(n));
    }
    let ev = check_spectrum(spectrum)?;
    let s: f64 = ev.iter().map(|&l| (l.powf(n) + (1.0 - l).powf(n)).log2()).sum();
    Ok(conv.weight() * s / (1.0 - n))
}

/// Quadratic form psi^dag h psi written as (row, col, coefficient) entries of
/// the 2L x 2L matrix h.
pub type QuadraticForm = Vec<(usize, usize, f64)>;

/// 1 - 2 c_j^dag c_j
pub fn onsite_form(l: usize, j: usize) -> QuadraticForm {
    vec![(j, j, -1.0), (l + j, l + j, 1.0)]
}

/// (c_j^dag - c_j)(c_{j+1}^dag + c_{j+1})
pub fn bond_form(l: usize, j: usize) -> QuadraticForm {
    let k = j + 1;
    vec![
        (j, k, 0.5),
        (k, j, 0.5),
        (l + j, l + k, -0.5),
        (l + k, l + j, -0.5),
        (j, l + k, 0.5),
        (k, l + j, -0.5),
        (l + j, k, -0.5),
        (l + k, j, 0.5),
    ]
}

/// Dense 2L x 2L matrix of a quadratic form.
pub fn form_matrix(l: usize, form: &QuadraticForm) -> CMat {
    let mut h = CMat::zeros(2 * l, 2 * l);
    for &(r, c, v) in form {
        h[(r, c)] += Complex64::new(v, 0.0);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_parities() {
        let s = GaussianState::vacuum(8).unwrap();
        assert!(s.onsite_parity().iter().all(|&g| (g - 1.0).abs() < 1e-15));
        assert!(s.bond_parity().iter().all(|&a| a.abs() < 1e-15));
        assert!(GaussianState::vacuum(7).is_err());
    }

    #[test]
    fn binary_entropy_maximum() {
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
    }
}
