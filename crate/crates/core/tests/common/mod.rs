#![allow(dead_code)]

use num_complex::Complex64;
use pps_sse::gaussian::{bond_form, onsite_form, QuadraticForm};
use pps_sse::linalg::{expm, hermitian_eigenvalues, CMat};
use pps_sse::trajectory::{NoiseDraw, TrajectoryConfig};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense Fock space of L modes, occupation bit j = mode j, Jordan-Wigner
/// ordering by site index.
pub struct Fock {
    pub l: usize,
    pub annihilators: Vec<CMat>,
}

impl Fock {
    pub fn new(l: usize) -> Self {
        let dim = 1usize << l;
        let annihilators = (0..l)
            .map(|j| {
                let mut m = CMat::zeros(dim, dim);
                for n in 0..dim {
                    if n >> j & 1 == 1 {
                        let sign = if (n & ((1 << j) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        m[(n ^ (1 << j), n)] = c(sign);
                    }
                }
                m
            })
            .collect();
        Fock { l, annihilators }
    }

    pub fn dim(&self) -> usize {
        1 << self.l
    }

    /// Nambu component psi_r: c_r for r < L, c_{r-L}^dag otherwise.
    fn psi(&self, r: usize) -> CMat {
        if r < self.l {
            self.annihilators[r].clone()
        } else {
            self.annihilators[r - self.l].adjoint()
        }
    }

    /// Many-body operator psi^dag h psi of a quadratic form.
    pub fn operator(&self, form: &QuadraticForm) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        for &(r, col, v) in form {
            out += self.psi(r).adjoint() * self.psi(col) * c(v);
        }
        out
    }

    pub fn onsite(&self) -> Vec<CMat> {
        (0..self.l).map(|j| self.operator(&onsite_form(self.l, j))).collect()
    }

    pub fn bonds(&self) -> Vec<CMat> {
        (0..self.l - 1).map(|j| self.operator(&bond_form(self.l, j))).collect()
    }

    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![c(0.0); self.dim()];
        v[0] = c(1.0);
        v
    }
}

pub fn apply(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|k| m[(i, k)] * v[k]).sum()).collect()
}

pub fn normalize(v: &mut [Complex64]) {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in v.iter_mut() {
        *a /= n;
    }
}

pub fn expectation(op: &CMat, v: &[Complex64]) -> f64 {
    let w = apply(op, v);
    v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

/// Reduced density matrix of the first `k` modes (the low occupation bits).
pub fn reduced_density(v: &[Complex64], l: usize, k: usize) -> CMat {
    let da = 1usize << k;
    let db = 1usize << (l - k);
    let mut rho = CMat::zeros(da, da);
    for a in 0..da {
        for a2 in 0..da {
            let mut acc = c(0.0);
            for b in 0..db {
                acc += v[a | (b << k)] * v[a2 | (b << k)].conj();
            }
            rho[(a, a2)] = acc;
        }
    }
    rho
}

pub fn von_neumann_bits(rho: &CMat) -> f64 {
    hermitian_eigenvalues(rho)
        .into_iter()
        .filter(|&p| p > 1e-14)
        .map(|p| -p * p.log2())
        .sum()
}

/// One step of exp(sum theta_k O_k) on a Fock vector, with the exponent
/// coefficients built from the vector's own expectation values.
pub fn fock_sse_step(
    fock: &Fock,
    ops: &(Vec<CMat>, Vec<CMat>),
    cfg: &TrajectoryConfig,
    draw: &NoiseDraw,
    v: &[Complex64],
) -> Vec<Complex64> {
    let dt = cfg.dt;
    let mut gen = CMat::zeros(fock.dim(), fock.dim());
    for (j, o) in ops.0.iter().enumerate() {
        let e = expectation(o, v);
        let theta = Complex64::new(draw.dw_gamma[j] + 2.0 * cfg.gamma * e * dt + cfg.b_gamma * dt, -draw.dxi1[j]);
        gen += o * theta;
    }
    for (j, o) in ops.1.iter().enumerate() {
        let e = expectation(o, v);
        let theta = Complex64::new(draw.dw_alpha[j] + 2.0 * cfg.alpha * e * dt + cfg.b_alpha * dt, -draw.dxi2[j]);
        gen += o * theta;
    }
    let mut w = apply(&expm(&gen).unwrap(), v);
    normalize(&mut w);
    w
}

/// Majorana pairing state on 2L Majoranas (gamma_{2j}, gamma_{2j+1} belong
/// to site j): the exact stabilizer state under projective parity
/// measurements.
#[derive(Debug, Clone)]
pub struct Pairing {
    partner: Vec<usize>,
}

impl Pairing {
    /// Vacuum: every site's two Majoranas paired.
    pub fn vacuum(l: usize) -> Self {
        Pairing { partner: (0..2 * l).map(|m| m ^ 1).collect() }
    }

    pub fn measure(&mut self, a: usize, b: usize) {
        let (pa, pb) = (self.partner[a], self.partner[b]);
        if pa == b {
            return;
        }
        self.partner[a] = b;
        self.partner[b] = a;
        self.partner[pa] = pb;
        self.partner[pb] = pa;
    }

    pub fn measure_site(&mut self, j: usize) {
        self.measure(2 * j, 2 * j + 1);
    }

    pub fn measure_bond(&mut self, j: usize) {
        self.measure(2 * j + 1, 2 * j + 2);
    }

    /// Entropy in bits: half a bit per pair cut by the region boundary.
    pub fn entropy(&self, sites: &[usize]) -> f64 {
        let mut inside = vec![false; self.partner.len()];
        for &s in sites {
            inside[2 * s] = true;
            inside[2 * s + 1] = true;
        }
        let cut = (0..self.partner.len()).filter(|&m| inside[m] && !inside[self.partner[m]]).count();
        0.5 * cut as f64
    }

    pub fn tee(&self, l: usize) -> f64 {
        let q = l / 4;
        let r = |a: usize, b: usize| -> Vec<usize> { (a..b).collect() };
        let join = |x: Vec<usize>, y: Vec<usize>| -> Vec<usize> { x.into_iter().chain(y).collect() };
        let (a, b, cc) = (r(0, q), r(q, 2 * q), r(3 * q, 4 * q));
        self.entropy(&join(a.clone(), b.clone())) + self.entropy(&join(b.clone(), cc.clone()))
            - self.entropy(&b)
            - self.entropy(&join(join(a, b), cc))
    }
}
