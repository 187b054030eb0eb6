//! Pure and mixed register states, reductions and distance measures.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linalg::{
    c, hermiticity_residual, kron_ket, matmul, max_abs, qubits_for_dim, trace, HermitianSpectrum, Ket,
    Operator, Qubit2, C64, MAX_DENSE_QUBITS, ONE, ZERO,
};
use super::pauli::Pauli;
use crate::error::{QstError, Result};

pub const NORM_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

static CLIPPED_EIGENVALUES: AtomicUsize = AtomicUsize::new(0);

/// Number of density matrices whose slightly negative eigenvalues were
/// clipped to zero since process start.
pub fn clipped_eigenvalue_count() -> usize {
    CLIPPED_EIGENVALUES.load(Ordering::Relaxed)
}

/// The generator behind every stochastic routine: ChaCha8 from
/// `rand_chacha`, initialised with `SeedableRng::seed_from_u64`.
pub type QstRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> QstRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalised pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Ket,
}

impl StateVector {
    pub fn new(amps: Ket) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())
            .ok_or_else(|| QstError::state(format!("length {} is not a power of two", amps.len())))?;
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(QstError::state(format!("squared norm {norm2} differs from 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescale to unit norm; rejects the zero vector.
    pub fn normalized(amps: Ket) -> Result<Self> {
        let norm = amps.norm();
        if norm < 1e-300 {
            return Err(QstError::state("cannot normalise the zero vector"));
        }
        Self::new(amps / C64::new(norm, 0.0))
    }

    pub(crate) fn from_trusted(amps: Ket) -> Self {
        let n_qubits = qubits_for_dim(amps.len()).expect("power-of-two register");
        Self { n_qubits, amps }
    }

    /// Computational basis state; `bits[0]` is site 1.
    pub fn basis(bits: &[u8]) -> Self {
        let n = bits.len();
        let mut idx = 0usize;
        for &b in bits {
            idx = (idx << 1) | usize::from(b & 1);
        }
        let mut amps = Ket::zeros(1 << n);
        amps[idx] = ONE;
        Self { n_qubits: n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &Ket {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Ket {
        self.amps
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amps: kron_ket(&self.amps, &other.amps),
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            matrix: &self.amps * self.amps.adjoint(),
        }
    }

    /// Reduced density matrix on the kept sites (1-based, any order; output
    /// keeps ascending site order).
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let layout = TraceLayout::new(self.n_qubits, keep)?;
        let kd = layout.kept.len();
        let mut m = Operator::zeros(kd, kd);
        for &t in &layout.traced {
            for (r, &kr) in layout.kept.iter().enumerate() {
                let a = self.amps[kr | t];
                if a == ZERO {
                    continue;
                }
                for (col, &kc) in layout.kept.iter().enumerate() {
                    m[(r, col)] += a * self.amps[kc | t].conj();
                }
            }
        }
        DensityMatrix::new(m)
    }
}

/// Hermitian, unit-trace, positive semidefinite register state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: Operator,
}

impl DensityMatrix {
    /// Validate and wrap. Eigenvalues in `[-1e-9, 0)` are clipped to zero and
    /// the result renormalised; anything more negative is rejected.
    pub fn new(matrix: Operator) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QstError::state("density matrix must be square"));
        }
        let n_qubits = qubits_for_dim(matrix.nrows())
            .ok_or_else(|| QstError::state("dimension is not a power of two"))?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QstError::Numerical("density matrix has non-finite entries".into()));
        }
        let herm = hermiticity_residual(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(QstError::state(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = trace(&matrix);
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(QstError::state(format!("trace {tr} differs from 1")));
        }
        // Symmetrise so the eigensolver sees an exactly Hermitian input.
        let sym = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let spec = HermitianSpectrum::new(&sym)?;
        let min = spec.min_value();
        if min < -PSD_TOL {
            return Err(QstError::state(format!("negative eigenvalue {min:.3e}")));
        }
        if min < 0.0 {
            CLIPPED_EIGENVALUES.fetch_add(1, Ordering::Relaxed);
            let total: f64 = spec.values.iter().map(|&l| l.max(0.0)).sum();
            let clipped = spec.map(|l| c(l.max(0.0) / total, 0.0));
            return Ok(Self { n_qubits, matrix: clipped });
        }
        Ok(Self { n_qubits, matrix: sym })
    }

    /// Wrap an operator known to be a valid state (e.g. a unitary image of one).
    pub(crate) fn from_trusted(matrix: Operator) -> Self {
        let n_qubits = qubits_for_dim(matrix.nrows()).expect("power-of-two register");
        Self { n_qubits, matrix }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self {
            n_qubits,
            matrix: Operator::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn into_matrix(self) -> Operator {
        self.matrix
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        trace(&matmul(&self.matrix, op))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(HermitianSpectrum::new(&self.matrix)?.values)
    }
}

/// Index bookkeeping for tracing out part of a register.
struct TraceLayout {
    kept: Vec<usize>,
    traced: Vec<usize>,
}

impl TraceLayout {
    fn new(n_qubits: usize, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(QstError::invalid("partial trace needs a nonempty keep-set"));
        }
        let mut sites = keep.to_vec();
        sites.sort_unstable();
        sites.dedup();
        if sites.len() != keep.len() {
            return Err(QstError::invalid("duplicate site in keep-set"));
        }
        if sites[0] == 0 || *sites.last().unwrap() > n_qubits {
            return Err(QstError::invalid(format!(
                "keep-set {keep:?} outside register of {n_qubits} qubits"
            )));
        }
        let kept_bits: Vec<usize> = sites.iter().map(|&s| n_qubits - s).collect();
        let traced_bits: Vec<usize> = (1..=n_qubits)
            .filter(|s| !sites.contains(s))
            .map(|s| n_qubits - s)
            .collect();
        Ok(Self {
            kept: scatter(&kept_bits),
            traced: scatter(&traced_bits),
        })
    }
}

/// For every value of the compact index over `bits` (most significant first),
/// the full-register index with those bits placed and all others zero.
fn scatter(bits: &[usize]) -> Vec<usize> {
    let k = bits.len();
    (0..1usize << k)
        .map(|compact| {
            bits.iter()
                .enumerate()
                .filter(|(j, _)| compact >> (k - 1 - j) & 1 == 1)
                .fold(0usize, |acc, (_, &b)| acc | (1 << b))
        })
        .collect()
}

/// Reduced state on `keep` (1-based sites), output in ascending site order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = TraceLayout::new(rho.n_qubits, keep)?;
    let kd = layout.kept.len();
    let m = &rho.matrix;
    let out = Operator::from_fn(kd, kd, |r, col| {
        let (kr, kc) = (layout.kept[r], layout.kept[col]);
        layout.traced.iter().map(|&t| m[(kr | t, kc | t)]).sum()
    });
    DensityMatrix::new(out)
}

/// Single-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleQubitState {
    matrix: Qubit2,
}

impl SingleQubitState {
    pub fn new(matrix: Qubit2) -> Result<Self> {
        let op = Operator::from_fn(2, 2, |i, j| matrix[(i, j)]);
        let dm = DensityMatrix::new(op)?;
        Ok(Self::from_density(&dm).expect("validated qubit"))
    }

    pub fn from_density(dm: &DensityMatrix) -> Result<Self> {
        if dm.n_qubits != 1 {
            return Err(QstError::state(format!("expected 1 qubit, got {}", dm.n_qubits)));
        }
        let m = dm.matrix();
        Ok(Self {
            matrix: Qubit2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]),
        })
    }

    /// `(alpha|0> + beta|1>)`, normalised.
    pub fn pure(alpha: C64, beta: C64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if norm < 1e-300 {
            return Err(QstError::state("zero amplitude vector"));
        }
        let v = Vector2::new(alpha / norm, beta / norm);
        Ok(Self::from_ket(&v))
    }

    pub fn from_ket(v: &Vector2<C64>) -> Self {
        Self { matrix: v * v.adjoint() }
    }

    /// `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>`.
    pub fn from_bloch_angles(theta: f64, phi: f64) -> Self {
        let v = Vector2::new(
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi),
        );
        Self::from_ket(&v)
    }

    /// `(I + r·σ)/2` for a Bloch vector with `|r| <= 1`.
    pub fn from_bloch_vector(r: [f64; 3]) -> Result<Self> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if len > 1.0 + 1e-12 {
            return Err(QstError::state(format!("Bloch vector length {len} exceeds 1")));
        }
        let m = (Pauli::I.matrix()
            + Pauli::X.matrix() * c(r[0], 0.0)
            + Pauli::Y.matrix() * c(r[1], 0.0)
            + Pauli::Z.matrix() * c(r[2], 0.0))
            * c(0.5, 0.0);
        Ok(Self { matrix: m })
    }

    pub fn zero() -> Self {
        Self::from_ket(&Vector2::new(ONE, ZERO))
    }

    pub fn one() -> Self {
        Self::from_ket(&Vector2::new(ZERO, ONE))
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_ket(&Vector2::new(c(h, 0.0), c(h, 0.0)))
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_ket(&Vector2::new(c(h, 0.0), c(-h, 0.0)))
    }

    pub fn maximally_mixed() -> Self {
        Self { matrix: Pauli::I.matrix() * c(0.5, 0.0) }
    }

    pub fn matrix(&self) -> &Qubit2 {
        &self.matrix
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(Operator::from_fn(2, 2, |i, j| self.matrix[(i, j)]))
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_pure(&self) -> bool {
        (self.purity() - 1.0).abs() < 1e-10
    }

    /// Dominant eigenvector; for a pure state this is the state ket (up to phase).
    pub fn dominant_ket(&self) -> Vector2<C64> {
        let m = &self.matrix;
        // Column with the larger diagonal weight is a nonzero multiple of the
        // dominant eigenvector when the state is pure.
        let eig = nalgebra::SymmetricEigen::new(*m);
        let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(k).into_owned();
        // Fix the gauge: first nonzero component real positive.
        let pivot = if v[0].norm() > 1e-12 { v[0] } else { v[1] };
        let phase = pivot.conj() / pivot.norm();
        v * phase
    }

    pub fn pure_ket(&self) -> Option<Vector2<C64>> {
        self.is_pure().then(|| self.dominant_ket())
    }

    pub fn expectation(&self, p: Pauli) -> f64 {
        (self.matrix * p.matrix()).trace().re
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        [
            self.expectation(Pauli::X),
            self.expectation(Pauli::Y),
            self.expectation(Pauli::Z),
        ]
    }

    /// `u ρ u^†`.
    pub fn conjugated(&self, u: &Qubit2) -> Self {
        Self { matrix: u * self.matrix * u.adjoint() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitMatrixRepr {
    re: [[f64; 2]; 2],
    im: [[f64; 2]; 2],
}

impl Serialize for SingleQubitState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.matrix;
        QubitMatrixRepr {
            re: [[m[(0, 0)].re, m[(0, 1)].re], [m[(1, 0)].re, m[(1, 1)].re]],
            im: [[m[(0, 0)].im, m[(0, 1)].im], [m[(1, 0)].im, m[(1, 1)].im]],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SingleQubitState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = QubitMatrixRepr::deserialize(d)?;
        let m = Qubit2::new(
            c(r.re[0][0], r.im[0][0]),
            c(r.re[0][1], r.im[0][1]),
            c(r.re[1][0], r.im[1][0]),
            c(r.re[1][1], r.im[1][1]),
        );
        SingleQubitState::new(m).map_err(serde::de::Error::custom)
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_DENSE_QUBITS {
        return Err(QstError::ResourceLimit { qubits: n_qubits, max: MAX_DENSE_QUBITS });
    }
    Ok(())
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state drawn with the given generator.
pub fn random_pure_state_with(n_qubits: usize, rng: &mut impl Rng) -> Result<StateVector> {
    check_register(n_qubits)?;
    let amps = Ket::from_fn(1 << n_qubits, |_, _| gaussian(rng));
    StateVector::normalized(amps)
}

pub fn random_pure_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    random_pure_state_with(n_qubits, &mut seeded_rng(seed))
}

/// `G G^† / Tr` for a complex Gaussian `G` of shape `2^n × rank`.
pub fn random_mixed_state_with(n_qubits: usize, rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    check_register(n_qubits)?;
    if rank == 0 {
        return Err(QstError::invalid("rank must be at least 1"));
    }
    let d = 1usize << n_qubits;
    let g = Operator::from_fn(d, rank, |_, _| gaussian(rng));
    let mut m = matmul(&g, &g.adjoint());
    let tr = trace(&m).re;
    m /= C64::new(tr, 0.0);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(m)
}

pub fn random_mixed_state(n_qubits: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    random_mixed_state_with(n_qubits, rank, &mut seeded_rng(seed))
}

/// `exp(-βH)/Z`.
pub fn thermal_state(hamiltonian: &Operator, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(QstError::invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let spec = HermitianSpectrum::new(hamiltonian)?;
    let e0 = spec.min_value();
    let z: f64 = spec.values.iter().map(|&l| (-beta * (l - e0)).exp()).sum();
    let m = spec.map(|l| c((-beta * (l - e0)).exp() / z, 0.0));
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(m)
}

/// `F = <ψ|ρ|ψ>`.
pub fn pure_fidelity(psi: &Vector2<C64>, rho: &SingleQubitState) -> f64 {
    (psi.adjoint() * rho.matrix() * psi)[(0, 0)].re
}

fn psd_sqrt(m: &Operator) -> Result<Operator> {
    let spec = HermitianSpectrum::new(m)?;
    if spec.min_value() < -PSD_TOL * max_abs(m).max(1.0) {
        return Err(QstError::state(format!("non-PSD input (eigenvalue {:.3e})", spec.min_value())));
    }
    Ok(spec.map(|l| c(l.max(0.0).sqrt(), 0.0)))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(QstError::invalid("fidelity between registers of different size"));
    }
    let sa = psd_sqrt(a.matrix())?;
    let inner = matmul(&matmul(&sa, b.matrix()), &sa);
    let inner = (&inner + inner.adjoint()) * c(0.5, 0.0);
    let spec = HermitianSpectrum::new(&inner)?;
    let s: f64 = spec.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(s * s)
}

/// Fidelity between qubit states: `<ψ|a|ψ>` when `b = |ψ><ψ|` is pure,
/// the Uhlmann fidelity otherwise.
pub fn state_fidelity(a: &SingleQubitState, b: &SingleQubitState) -> Result<f64> {
    match b.pure_ket() {
        Some(psi) => Ok(pure_fidelity(&psi, a)),
        None => uhlmann_fidelity(&a.to_density(), &b.to_density()),
    }
}

/// `½ Σ |λ_k(a - b)|`.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    let d = a - b;
    let d = (&d + d.adjoint()) * c(0.5, 0.0);
    Ok(0.5 * HermitianSpectrum::new(&d)?.values.iter().map(|l| l.abs()).sum::<f64>())
}

/// Von Neumann entropy in bits.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    let values = rho.eigenvalues()?;
    if let Some(&min) = values.iter().find(|&&l| l < -PSD_TOL) {
        return Err(QstError::state(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(entropy_of_spectrum(&values))
}

pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `h(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of_spectrum(&[p, 1.0 - p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::max_abs_diff;

    fn bell() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(Ket::from_vec(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)])).unwrap()
    }

    #[test]
    fn bell_reduces_to_maximally_mixed() {
        let rho = bell().to_density();
        let red = partial_trace(&rho, &[1]).unwrap();
        assert!(max_abs_diff(red.matrix(), DensityMatrix::maximally_mixed(1).matrix()) < 1e-15);
        let red2 = bell().reduced(&[2]).unwrap();
        assert!(max_abs_diff(red2.matrix(), DensityMatrix::maximally_mixed(1).matrix()) < 1e-15);
    }

    #[test]
    fn product_state_factorizes() {
        let a = random_mixed_state(1, 2, 3).unwrap();
        let b = random_mixed_state(2, 3, 4).unwrap();
        let ab = a.tensor(&b);
        assert!(max_abs_diff(partial_trace(&ab, &[1]).unwrap().matrix(), a.matrix()) < 1e-12);
        assert!(max_abs_diff(partial_trace(&ab, &[2, 3]).unwrap().matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_keep_sets() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[3]).is_err());
        assert!(partial_trace(&rho, &[1, 1]).is_err());
    }

    #[test]
    fn state_vector_invariants() {
        assert!(StateVector::new(Ket::from_vec(vec![ONE, ONE])).is_err());
        assert!(StateVector::new(Ket::from_vec(vec![ONE, ZERO, ZERO])).is_err());
        let s = StateVector::basis(&[1, 0]);
        assert_eq!(s.amplitudes()[2], ONE);
    }

    #[test]
    fn density_validation() {
        let bad_trace = Operator::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let not_herm = Operator::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(not_herm).is_err());
        let negative = Operator::from_row_slice(2, 2, &[c(1.2, 0.0), ZERO, ZERO, c(-0.2, 0.0)]);
        assert!(DensityMatrix::new(negative).is_err());
    }

    #[test]
    fn tiny_negative_eigenvalues_are_clipped() {
        let before = clipped_eigenvalue_count();
        let m = Operator::from_row_slice(2, 2, &[c(1.0 + 5e-10, 0.0), ZERO, ZERO, c(-5e-10, 0.0)]);
        let dm = DensityMatrix::new(m).unwrap();
        assert!(dm.eigenvalues().unwrap().iter().all(|&l| l >= 0.0));
        assert!((trace(dm.matrix()).re - 1.0).abs() < 1e-15);
        assert!(clipped_eigenvalue_count() > before);
    }

    #[test]
    fn thermal_at_infinite_temperature_is_maximally_mixed() {
        let h = Operator::from_fn(4, 4, |i, j| c(((i + j) % 3) as f64, 0.0));
        let h = &h + h.transpose();
        let rho = thermal_state(&h, 0.0).unwrap();
        assert!(max_abs_diff(rho.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-12);
        let cold = thermal_state(&h, 3.0).unwrap();
        assert!((trace(cold.matrix()).re - 1.0).abs() < 1e-12);
        assert!(thermal_state(&h, -1.0).is_err());
    }

    #[test]
    fn random_pure_is_normalized_and_reproducible() {
        let a = random_pure_state(4, 11).unwrap();
        let b = random_pure_state(4, 11).unwrap();
        assert!((a.amplitudes().norm() - 1.0).abs() < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, random_pure_state(4, 12).unwrap());
    }

    #[test]
    fn random_mixed_rank_is_respected() {
        let rho = random_mixed_state(3, 2, 5).unwrap();
        let nonzero = rho.eigenvalues().unwrap().iter().filter(|&&l| l > 1e-10).count();
        assert_eq!(nonzero, 2);
        assert!(random_mixed_state(2, 0, 1).is_err());
    }

    #[test]
    fn fidelity_basics() {
        let z = SingleQubitState::zero();
        let o = SingleQubitState::one();
        assert!((state_fidelity(&z, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(state_fidelity(&z, &o).unwrap().abs() < 1e-15);
        let psi = SingleQubitState::from_bloch_angles(0.7, 1.9);
        assert!((state_fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uhlmann_matches_qubit_closed_form() {
        // For qubits F = Tr(ab) + 2 sqrt(det a det b).
        let a = SingleQubitState::from_bloch_vector([0.3, -0.2, 0.5]).unwrap();
        let b = SingleQubitState::from_bloch_vector([-0.1, 0.6, 0.2]).unwrap();
        let closed = (a.matrix() * b.matrix()).trace().re
            + 2.0 * (a.matrix().determinant().re * b.matrix().determinant().re).sqrt();
        let f = uhlmann_fidelity(&a.to_density(), &b.to_density()).unwrap();
        assert!((f - closed).abs() < 1e-12);
        assert!((state_fidelity(&a, &b).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_maximally_mixed_qubit_is_one_bit() {
        assert!((entropy(&DensityMatrix::maximally_mixed(1)).unwrap() - 1.0).abs() < 1e-12);
        assert!(entropy(&random_pure_state(3, 2).unwrap().to_density()).unwrap() < 1e-9);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qubit_state_serde_round_trip() {
        let s = SingleQubitState::from_bloch_angles(1.1, -0.4);
        let json = serde_json::to_string(&s).unwrap();
        let back: SingleQubitState = serde_json::from_str(&json).unwrap();
        assert!((back.matrix() - s.matrix()).norm() < 1e-15);
        assert!(serde_json::from_str::<SingleQubitState>(r#"{"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#).is_err());
    }

    #[test]
    fn dominant_ket_recovers_pure_state() {
        let v = Vector2::new(c(0.6, 0.0), c(0.0, 0.8));
        let s = SingleQubitState::from_ket(&v);
        let k = s.pure_ket().unwrap();
        assert!((k.dotc(&v).norm() - 1.0).abs() < 1e-12);
        assert!(SingleQubitState::maximally_mixed().pure_ket().is_none());
    }
}
