//! Dense complex linear algebra on qubit registers.
//!
//! Qubit ordering: site 1 is the most significant tensor factor. In a
//! register of `n` qubits, site `s` (1-based) is bit `n - s` of the basis
//! index, so `|b_1 b_2 ... b_n>` has index `b_1 2^(n-1) + ... + b_n`.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{QstError, Result};

pub type C64 = Complex64;
pub type Operator = DMatrix<C64>;
pub type Ket = DVector<C64>;
pub type Qubit2 = Matrix2<C64>;

/// Hard ceiling for dense registers, independent of any model-level limit.
pub const MAX_DENSE_QUBITS: usize = 14;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Number of qubits for a power-of-two dimension.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

/// Bit position (from the least significant end) of a 1-based site.
#[inline]
pub fn site_bit(n_qubits: usize, site: usize) -> usize {
    n_qubits - site
}

pub fn check_site(n_qubits: usize, site: usize) -> Result<()> {
    if site == 0 || site > n_qubits {
        return Err(QstError::invalid(format!(
            "site {site} outside register of {n_qubits} qubits"
        )));
    }
    Ok(())
}

/// Tensor product with the default ceiling of [`MAX_DENSE_QUBITS`].
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    kron_limited(a, b, MAX_DENSE_QUBITS)
}

/// Tensor product `a ⊗ b`, rejecting results wider than `max_qubits`.
pub fn kron_limited(a: &Operator, b: &Operator, max_qubits: usize) -> Result<Operator> {
    if !a.is_square() || !b.is_square() {
        return Err(QstError::invalid("kron operands must be square"));
    }
    let dim = a.nrows().checked_mul(b.nrows()).ok_or(QstError::ResourceLimit {
        qubits: usize::MAX,
        max: max_qubits,
    })?;
    let qubits = (dim as f64).log2().ceil() as usize;
    if qubits > max_qubits {
        return Err(QstError::ResourceLimit { qubits, max: max_qubits });
    }
    Ok(a.kronecker(b))
}

pub fn kron_ket(a: &Ket, b: &Ket) -> Ket {
    a.kronecker(b)
}

/// Largest absolute entry.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn hermiticity_residual(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(a: &Operator) -> C64 {
    a.diagonal().iter().sum()
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    matmul(a, b) - matmul(b, a)
}

fn split(a: &Operator) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

/// Complex matrix product routed through real GEMM for large operands.
pub fn matmul(a: &Operator, b: &Operator) -> Operator {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    if a.nrows() < 32 || b.ncols() < 32 {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// `u * m * u^†`.
pub fn conjugate_by(u: &Operator, m: &Operator) -> Operator {
    matmul(&matmul(u, m), &u.adjoint())
}

/// `u^† * m * u`.
pub fn conjugate_by_adjoint(u: &Operator, m: &Operator) -> Operator {
    matmul(&matmul(&u.adjoint(), m), u)
}

/// Apply a single-qubit gate to one site of a register ket.
pub fn apply_site_ket(psi: &Ket, n_qubits: usize, site: usize, g: &Qubit2) -> Ket {
    let bit = 1usize << site_bit(n_qubits, site);
    let mut out = psi.clone();
    for idx in 0..psi.len() {
        if idx & bit == 0 {
            let j = idx | bit;
            let (a0, a1) = (psi[idx], psi[j]);
            out[idx] = g[(0, 0)] * a0 + g[(0, 1)] * a1;
            out[j] = g[(1, 0)] * a0 + g[(1, 1)] * a1;
        }
    }
    out
}

/// `g_site * m`, acting on row indices.
pub fn apply_site_left(m: &Operator, n_qubits: usize, site: usize, g: &Qubit2) -> Operator {
    let bit = 1usize << site_bit(n_qubits, site);
    let mut out = m.clone();
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if row & bit == 0 {
                let r1 = row | bit;
                let (a0, a1) = (m[(row, col)], m[(r1, col)]);
                out[(row, col)] = g[(0, 0)] * a0 + g[(0, 1)] * a1;
                out[(r1, col)] = g[(1, 0)] * a0 + g[(1, 1)] * a1;
            }
        }
    }
    out
}

/// `g_site * m * g_site^†`.
pub fn conjugate_site(m: &Operator, n_qubits: usize, site: usize, g: &Qubit2) -> Operator {
    let left = apply_site_left(m, n_qubits, site, g);
    // g A g† = (g (g A)†)†
    apply_site_left(&left.adjoint(), n_qubits, site, g).adjoint()
}

/// Embed a single-qubit operator at `site` of an `n_qubits` register.
pub fn embed_site(g: &Qubit2, n_qubits: usize, site: usize) -> Operator {
    let dim = 1usize << n_qubits;
    apply_site_left(&Operator::identity(dim, dim), n_qubits, site, g)
}

pub fn qubit_to_operator(g: &Qubit2) -> Operator {
    Operator::from_fn(2, 2, |i, j| g[(i, j)])
}

pub fn operator_to_qubit(m: &Operator) -> Qubit2 {
    assert_eq!(m.shape(), (2, 2));
    Qubit2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Haar-random orthogonal matrix from the QR factorisation of a Gaussian one.
fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q()
}

/// Eigendecomposition of a Hermitian operator, `H = V diag(values) V^†`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: Operator,
}

impl HermitianSpectrum {
    pub fn new(h: &Operator) -> Result<Self> {
        if !h.is_square() {
            return Err(QstError::invalid("eigendecomposition needs a square matrix"));
        }
        let scale = max_abs(h).max(1.0);
        let herm = hermiticity_residual(h);
        if herm > 1e-10 * scale {
            return Err(QstError::invalid(format!(
                "matrix is not Hermitian (residual {herm:.3e})"
            )));
        }
        let n = h.nrows();
        let max_iter = 100 * n.max(10);
        let is_real = h.iter().all(|z| z.im.abs() <= 1e-15 * scale);
        if let Some(s) = Self::solve(h, is_real, max_iter).filter(|s| s.is_accurate(h, scale)) {
            return Ok(s);
        }
        // nalgebra's tridiagonalisation can break down on structurally sparse
        // input. A fixed random rotation makes the matrix dense; the spectrum
        // is unchanged and the eigenvectors rotate back.
        for seed in 0..3u64 {
            let q = random_orthogonal(n, seed).map(|x| c(x, 0.0));
            let rotated = matmul(&matmul(&q, h), &q.transpose());
            let rotated = (&rotated + rotated.adjoint()) * c(0.5, 0.0);
            if let Some(mut s) = Self::solve(&rotated, is_real, max_iter) {
                s.vectors = matmul(&q.transpose(), &s.vectors);
                if s.is_accurate(h, scale) {
                    return Ok(s);
                }
            }
        }
        Err(QstError::Numerical("Hermitian eigensolver failed".into()))
    }

    fn solve(h: &Operator, is_real: bool, max_iter: usize) -> Option<Self> {
        if is_real {
            let eig = SymmetricEigen::try_new(h.map(|z| z.re), f64::EPSILON, max_iter)?;
            Some(Self {
                values: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors.map(|x| C64::new(x, 0.0)),
            })
        } else {
            let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, max_iter)?;
            Some(Self { values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
        }
    }

    /// Finite output that reproduces `h x` for two fixed probe vectors.
    fn is_accurate(&self, h: &Operator, scale: f64) -> bool {
        if self.values.iter().any(|v| !v.is_finite()) || self.vectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return false;
        }
        let n = h.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        (0..2).all(|_| {
            let x = Ket::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let x = &x / c(x.norm(), 0.0);
            let mut y = self.vectors.adjoint() * &x;
            for (k, &l) in self.values.iter().enumerate() {
                y[k] *= l;
            }
            (h * &x - &self.vectors * y).norm() <= 1e-10 * scale * (n as f64).max(1.0)
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) V^†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let w = f(l);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= w;
            }
        }
        matmul(&scaled, &self.vectors.adjoint())
    }

    /// `exp(-i H t)`.
    pub fn unitary(&self, t: f64) -> Operator {
        self.map(|l| (-I * l * t).exp())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Operator {
        Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn z() -> Operator {
        Operator::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    fn basis(dim: usize, k: usize) -> Ket {
        let mut v = Ket::zeros(dim);
        v[k] = ONE;
        v
    }

    #[test]
    fn degenerate_complex_spectrum_is_finite() {
        // A rank-2 block embedded in a 256-dimensional register.
        let (a, d) = (0.33444356300060596, 0.665556436999394);
        let (re, im) = (0.1625873345314513, 0.011974027563031937);
        let mut m = Operator::from_row_slice(2, 2, &[c(a, 0.0), c(re, im), c(re, -im), c(d, 0.0)]);
        for b in [1usize, 1, 0, 1, 0, 0, 0] {
            let mut p = Operator::zeros(2, 2);
            p[(b, b)] = ONE;
            m = kron(&m, &p).unwrap();
        }
        let s = HermitianSpectrum::new(&m).unwrap();
        assert!(s.values.iter().all(|v| v.is_finite()));
        assert!(max_abs_diff(&s.map(|l| c(l, 0.0)), &m) < 1e-12);
        let vv = matmul(&s.vectors.adjoint(), &s.vectors);
        assert!(max_abs_diff(&vv, &Operator::identity(256, 256)) < 1e-12);
        let sum: f64 = s.values.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_real_spectrum_is_finite() {
        let mut m = Operator::zeros(32, 32);
        for (i, j, v) in [
            (0, 0, 1.5000000000000002e-1),
            (0, 16, 1.5e-1),
            (16, 0, 1.5e-1),
            (16, 16, 1.4999999999999997e-1),
            (1, 1, 3.5000000000000003e-1),
            (1, 17, 3.5e-1),
            (17, 1, 3.5e-1),
            (17, 17, 3.499999999999999e-1),
        ] {
            m[(i, j)] = c(v, 0.0);
        }
        let s = HermitianSpectrum::new(&m).unwrap();
        assert!(max_abs_diff(&s.map(|l| c(l, 0.0)), &m) < 1e-12);
        let mut values = s.values.clone();
        values.sort_by(f64::total_cmp);
        assert!((values[31] - 0.7).abs() < 1e-12 && (values[30] - 0.3).abs() < 1e-12);
        assert!(values[..30].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn kron_identity() {
        let i2 = Operator::identity(2, 2);
        assert_eq!(kron(&i2, &i2).unwrap(), Operator::identity(4, 4));
    }

    #[test]
    fn kron_xx_flips_both_bits() {
        let xx = kron(&x(), &x()).unwrap();
        assert_eq!(&xx * basis(4, 0b00), basis(4, 0b11));
    }

    #[test]
    fn kron_z_on_first_site() {
        let zi = kron(&z(), &Operator::identity(2, 2)).unwrap();
        assert_eq!(&zi * basis(4, 0b10), -basis(4, 0b10));
    }

    #[test]
    fn kron_rejects_oversized_registers() {
        let big = Operator::identity(8, 8);
        let err = kron_limited(&big, &big, 5).unwrap_err();
        assert!(matches!(err, QstError::ResourceLimit { qubits: 6, max: 5 }));
        assert!(kron(&x(), &Operator::zeros(2, 3)).is_err());
    }

    #[test]
    fn fast_matmul_matches_naive() {
        let a = Operator::from_fn(40, 40, |i, j| {
            c((i * 3 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02)
        });
        let b = Operator::from_fn(40, 40, |i, j| c(((i + 2 * j) % 7) as f64, 0.5 * (i % 3) as f64));
        assert!(max_abs_diff(&matmul(&a, &b), &(&a * &b)) < 1e-10);
    }

    #[test]
    fn site_application_matches_embedding() {
        let g = Qubit2::new(c(0.3, 0.1), c(-0.2, 0.7), c(0.5, 0.0), c(0.1, -0.4));
        let n = 3;
        let m = Operator::from_fn(8, 8, |i, j| c((i + j) as f64, (i as f64) - 2.0 * j as f64));
        for site in 1..=n {
            let full = embed_site(&g, n, site);
            let gi = qubit_to_operator(&g);
            let mut expect = Operator::identity(1, 1);
            for s in 1..=n {
                let f = if s == site { gi.clone() } else { Operator::identity(2, 2) };
                expect = kron(&expect, &f).unwrap();
            }
            assert!(max_abs_diff(&full, &expect) < 1e-15);
            let direct = &full * &m * full.adjoint();
            assert!(max_abs_diff(&conjugate_site(&m, n, site, &g), &direct) < 1e-12);
        }
    }

    #[test]
    fn spectrum_reconstructs_complex_hermitian() {
        let a = Operator::from_fn(6, 6, |i, j| {
            c((i * j) as f64 * 0.1 + 0.3, (i as f64 - j as f64) * 0.2)
        });
        let h = &a + a.adjoint();
        let s = HermitianSpectrum::new(&h).unwrap();
        assert!(max_abs_diff(&s.map(|l| c(l, 0.0)), &h) < 1e-12);
        let u = s.unitary(0.7);
        assert!(max_abs_diff(&(u.adjoint() * &u), &Operator::identity(6, 6)) < 1e-12);
    }

    #[test]
    fn spectrum_rejects_non_hermitian() {
        let a = Operator::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, 0.0));
        assert!(HermitianSpectrum::new(&a).is_err());
    }
}
