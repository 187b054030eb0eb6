//! Exact dense evolution of a chain, operator-swap identity checks and the
//! single-site triplet condition.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_hamiltonian_limited, critical_time, ChainSpec, ModelKind, DEFAULT_DENSE_LIMIT};
use crate::error::{QstError, Result};
use crate::quantum::linalg::{
    conjugate_by, conjugate_by_adjoint, embed_site, matmul, max_abs, max_abs_diff, Operator, Qubit2, C64,
};
use crate::quantum::pauli::{t_power, Pauli, PauliString};
use crate::quantum::state::{DensityMatrix, StateVector};

/// Residual threshold for the swap identities and triplet conditions.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Direction of the Heisenberg map for `U = exp(-iHt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeisenbergConvention {
    /// `O(t) = U† O U`.
    AdjointFirst,
    /// `O(t) = U O U†`.
    AdjointLast,
}

impl HeisenbergConvention {
    pub const CANDIDATES: [HeisenbergConvention; 2] =
        [HeisenbergConvention::AdjointFirst, HeisenbergConvention::AdjointLast];

    pub fn apply(self, u: &Operator, op: &Operator) -> Operator {
        match self {
            HeisenbergConvention::AdjointFirst => conjugate_by_adjoint(u, op),
            HeisenbergConvention::AdjointLast => conjugate_by(u, op),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HeisenbergConvention::AdjointFirst => "U^dag O U",
            HeisenbergConvention::AdjointLast => "U O U^dag",
        }
    }
}

impl fmt::Display for HeisenbergConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of trying both conventions on the two-site Ising chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionSelection {
    pub chosen: HeisenbergConvention,
    /// Worst Ising identity residual at `N = 2` for each candidate, in
    /// [`HeisenbergConvention::CANDIDATES`] order.
    pub residuals: [f64; 2],
}

impl ConventionSelection {
    /// Whether the other convention also passes.
    pub fn is_ambiguous(&self) -> bool {
        self.residuals.iter().all(|&r| r < IDENTITY_TOL)
    }
}

/// Try both conventions on the `N = 2` Ising identities and keep the first
/// that passes.
pub fn select_convention() -> Result<ConventionSelection> {
    let engine = DenseEngine::new(ChainSpec::ising(2)?)?;
    let u = engine.propagator(engine.critical_time()?)?;
    let mut residuals = [0.0; 2];
    for (slot, conv) in HeisenbergConvention::CANDIDATES.iter().enumerate() {
        residuals[slot] = swap_reports(&engine, &u, *conv)?
            .iter()
            .map(|r| r.residual)
            .fold(0.0, f64::max);
    }
    let chosen = HeisenbergConvention::CANDIDATES
        .iter()
        .zip(residuals)
        .find(|(_, r)| *r < IDENTITY_TOL)
        .map(|(c, _)| *c)
        .ok_or_else(|| QstError::Numerical(format!("no Heisenberg convention satisfies the N=2 identities: {residuals:?}")))?;
    Ok(ConventionSelection { chosen, residuals })
}

/// Convention fixed for every report: the first candidate that satisfies the
/// two-site Ising identities.
pub const FROZEN_CONVENTION: HeisenbergConvention = HeisenbergConvention::AdjointFirst;

/// `exp(-iHt)` together with its generating chain and time.
#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: Operator,
    time: f64,
    spec: ChainSpec,
}

impl Propagator {
    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    /// `max |U†U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let uu = matmul(&self.matrix.adjoint(), &self.matrix);
        max_abs_diff(&uu, &Operator::identity(uu.nrows(), uu.ncols()))
    }

    pub fn heisenberg(&self, op: &Operator, conv: HeisenbergConvention) -> Operator {
        conv.apply(&self.matrix, op)
    }
}

/// Things a propagator can act on.
pub trait Evolve: Sized {
    fn evolve_with(&self, u: &Propagator) -> Result<Self>;
}

impl Evolve for StateVector {
    fn evolve_with(&self, u: &Propagator) -> Result<Self> {
        check_width(self.n_qubits(), u)?;
        StateVector::normalized(u.matrix() * self.amplitudes())
    }
}

impl Evolve for DensityMatrix {
    fn evolve_with(&self, u: &Propagator) -> Result<Self> {
        check_width(self.n_qubits(), u)?;
        let m = conjugate_by(u.matrix(), self.matrix());
        Ok(DensityMatrix::from_trusted((&m + m.adjoint()) * C64::new(0.5, 0.0)))
    }
}

fn check_width(n: usize, u: &Propagator) -> Result<()> {
    if n != u.spec.n_sites() {
        return Err(QstError::invalid(format!(
            "state has {n} qubits but the chain has {} sites",
            u.spec.n_sites()
        )));
    }
    Ok(())
}

/// Dense Hamiltonian with a cached spectrum; all propagators reuse it.
#[derive(Debug, Clone)]
pub struct DenseEngine {
    spec: ChainSpec,
    hamiltonian: Operator,
    spectrum: crate::quantum::linalg::HermitianSpectrum,
}

impl DenseEngine {
    pub fn new(spec: ChainSpec) -> Result<Self> {
        Self::with_limit(spec, DEFAULT_DENSE_LIMIT)
    }

    pub fn with_limit(spec: ChainSpec, max_qubits: usize) -> Result<Self> {
        let hamiltonian = build_hamiltonian_limited(&spec, max_qubits)?;
        let spectrum = crate::quantum::linalg::HermitianSpectrum::new(&hamiltonian)?;
        Ok(Self { spec, hamiltonian, spectrum })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values.as_slice()
    }

    pub fn critical_time(&self) -> Result<f64> {
        critical_time(&self.spec)
    }

    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !t.is_finite() {
            return Err(QstError::invalid(format!("evolution time must be finite, got {t}")));
        }
        Ok(Propagator { matrix: self.spectrum.unitary(t), time: t, spec: self.spec })
    }

    pub fn evolve<S: Evolve>(&self, t: f64, state: &S) -> Result<S> {
        state.evolve_with(&self.propagator(t)?)
    }

    pub fn heisenberg_evolve(&self, t: f64, op: &PauliString) -> Result<Operator> {
        if op.n_sites() != self.n_sites() {
            return Err(QstError::invalid("Pauli string length does not match the chain"));
        }
        Ok(self.propagator(t)?.heisenberg(&op.to_matrix(), FROZEN_CONVENTION))
    }
}

pub fn propagator(spec: &ChainSpec, t: f64) -> Result<Propagator> {
    DenseEngine::new(*spec)?.propagator(t)
}

/// `O(t)` under the frozen convention.
pub fn heisenberg_evolve(spec: &ChainSpec, t: f64, op: &PauliString) -> Result<Operator> {
    DenseEngine::new(*spec)?.heisenberg_evolve(t, op)
}

pub fn evolve<S: Evolve>(spec: &ChainSpec, t: f64, state: &S) -> Result<S> {
    DenseEngine::new(*spec)?.evolve(t, state)
}

/// `A_i B_m (t) = sign · C_i D_m` for the mirror pair `(i, m = N-i+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapIdentity {
    pub source: (Pauli, Pauli),
    pub target: (Pauli, Pauli),
    pub negated: bool,
}

impl SwapIdentity {
    const fn new(source: (Pauli, Pauli), target: (Pauli, Pauli)) -> Self {
        Self { source, target, negated: false }
    }

    pub fn source_label(&self) -> String {
        format!("{}{}", self.source.0.symbol(), self.source.1.symbol())
    }

    pub fn target_label(&self) -> String {
        let sign = if self.negated { "-" } else { "" };
        format!("{sign}{}{}", self.target.0.symbol(), self.target.1.symbol())
    }
}

/// Identities each engineered model satisfies at its transfer time.
pub fn identity_set(model: ModelKind, n_sites: usize) -> Result<Vec<SwapIdentity>> {
    use Pauli::*;
    match model {
        ModelKind::IsingEngineered => Ok(vec![
            SwapIdentity::new((I, X), (X, I)),
            SwapIdentity::new((Z, Y), (Y, Z)),
            SwapIdentity::new((Z, Z), (Z, Z)),
        ]),
        ModelKind::XxEngineered if n_sites.is_multiple_of(2) => Ok(vec![
            SwapIdentity::new((I, Z), (Z, I)),
            SwapIdentity::new((X, X), (X, X)),
            SwapIdentity::new((X, Y), (Y, X)),
        ]),
        ModelKind::XxEngineered => Ok(vec![
            SwapIdentity::new((I, Z), (Z, I)),
            SwapIdentity::new((X, X), (Y, Y)),
            SwapIdentity { source: (X, Y), target: (X, Y), negated: true },
        ]),
        ModelKind::XxHomogeneous => Err(QstError::UnsupportedModel(
            "swap identities apply to engineered chains only".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheckReport {
    pub model: ModelKind,
    pub n_sites: usize,
    pub site: usize,
    pub mirror_site: usize,
    pub source: String,
    pub target: String,
    pub residual: f64,
    pub convention: HeisenbergConvention,
}

impl IdentityCheckReport {
    pub fn passed(&self) -> bool {
        self.residual < IDENTITY_TOL
    }
}

fn two_site(n: usize, i: usize, m: usize, pair: (Pauli, Pauli)) -> Operator {
    PauliString::on_sites(n, &[(i, pair.0), (m, pair.1)])
        .expect("mirror pair within chain")
        .to_matrix()
}

fn mirror_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..=n / 2).map(|i| (i, n + 1 - i)).collect()
}

fn check_identities(
    engine: &DenseEngine,
    u: &Propagator,
    conv: HeisenbergConvention,
    identities: &[SwapIdentity],
) -> Vec<IdentityCheckReport> {
    let n = engine.n_sites();
    let jobs: Vec<_> = mirror_pairs(n)
        .into_iter()
        .flat_map(|p| identities.iter().map(move |id| (p, *id)))
        .collect();
    jobs.into_par_iter()
        .map(|((i, m), id)| {
            let evolved = u.heisenberg(&two_site(n, i, m, id.source), conv);
            let mut target = two_site(n, i, m, id.target);
            if id.negated {
                target = -target;
            }
            IdentityCheckReport {
                model: engine.spec.model(),
                n_sites: n,
                site: i,
                mirror_site: m,
                source: id.source_label(),
                target: id.target_label(),
                residual: max_abs_diff(&evolved, &target),
                convention: conv,
            }
        })
        .collect()
}

fn swap_reports(engine: &DenseEngine, u: &Propagator, conv: HeisenbergConvention) -> Result<Vec<IdentityCheckReport>> {
    let ids = identity_set(engine.spec.model(), engine.n_sites())?;
    Ok(check_identities(engine, u, conv, &ids))
}

/// Every identity of the model's set for every mirror pair, at `t*`.
pub fn check_swap_identities(spec: &ChainSpec) -> Result<Vec<IdentityCheckReport>> {
    let engine = DenseEngine::new(*spec)?;
    check_swap_identities_with(&engine, FROZEN_CONVENTION)
}

pub fn check_swap_identities_with(engine: &DenseEngine, conv: HeisenbergConvention) -> Result<Vec<IdentityCheckReport>> {
    let u = engine.propagator(engine.critical_time()?)?;
    swap_reports(engine, &u, conv)
}

/// The odd-length XX identity `X_i Y_m (t*) = +X_i Y_m`, checked with the
/// positive sign for diagnostics. It fails by a residual of 2.
pub fn check_unsigned_odd_xy(spec: &ChainSpec) -> Result<Vec<IdentityCheckReport>> {
    if spec.model() != ModelKind::XxEngineered || spec.n_sites().is_multiple_of(2) {
        return Err(QstError::UnsupportedModel("diagnostic applies to odd-length XX chains".into()));
    }
    let engine = DenseEngine::new(*spec)?;
    let u = engine.propagator(engine.critical_time()?)?;
    let id = SwapIdentity::new((Pauli::X, Pauli::Y), (Pauli::X, Pauli::Y));
    Ok(check_identities(&engine, &u, FROZEN_CONVENTION, &[id]))
}

/// Largest commutator of `op` with single-site Paulis away from `support`.
pub fn leakage_outside(op: &Operator, n_sites: usize, support: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in (1..=n_sites).filter(|s| !support.contains(s)) {
        for p in Pauli::NON_TRIVIAL {
            let g = embed_site(&p.matrix(), n_sites, s);
            let comm = matmul(op, &g) - matmul(&g, op);
            worst = worst.max(max_abs(&comm));
        }
    }
    worst
}

/// Un-evolved single-site gate in the triplet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteGate {
    I,
    X,
    Y,
    Z,
    T,
    TDagger,
    T2,
    T3,
}

impl SiteGate {
    pub const CANDIDATES: [SiteGate; 8] =
        [SiteGate::I, SiteGate::X, SiteGate::Y, SiteGate::Z, SiteGate::T, SiteGate::TDagger, SiteGate::T2, SiteGate::T3];

    pub fn matrix(self) -> Qubit2 {
        match self {
            SiteGate::I => Pauli::I.matrix(),
            SiteGate::X => Pauli::X.matrix(),
            SiteGate::Y => Pauli::Y.matrix(),
            SiteGate::Z => Pauli::Z.matrix(),
            SiteGate::T => t_power(1),
            SiteGate::TDagger => t_power(-1),
            SiteGate::T2 => t_power(2),
            SiteGate::T3 => t_power(3),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SiteGate::I => "I",
            SiteGate::X => "X",
            SiteGate::Y => "Y",
            SiteGate::Z => "Z",
            SiteGate::T => "T",
            SiteGate::TDagger => "T^dag",
            SiteGate::T2 => "T^2",
            SiteGate::T3 => "T^3",
        }
    }
}

/// `B`, `C`, `D` and the per-observable exponents `(j_O, k_O)` for
/// `O = X, Y, Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub b: Pauli,
    pub c: SiteGate,
    pub d: Pauli,
    pub exponents: [(u8, u8); 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletResidual {
    pub observable: Pauli,
    pub site: usize,
    pub residual: f64,
}

/// Heisenberg-evolved single-site Paulis, indexed by `[site-1][letter]`.
struct EvolvedSingles {
    evolved: Vec<[Operator; 3]>,
    bare: Vec<[Operator; 3]>,
}

fn letter_index(p: Pauli) -> usize {
    match p {
        Pauli::X => 0,
        Pauli::Y => 1,
        Pauli::Z => 2,
        Pauli::I => unreachable!("identity is not an observable"),
    }
}

impl EvolvedSingles {
    fn new(u: &Propagator, n: usize) -> Self {
        let sites: Vec<usize> = (1..=n).collect();
        let bare: Vec<[Operator; 3]> = sites
            .iter()
            .map(|&s| Pauli::NON_TRIVIAL.map(|p| embed_site(&p.matrix(), n, s)))
            .collect();
        let evolved = bare
            .par_iter()
            .map(|ops| [0, 1, 2].map(|k| u.heisenberg(&ops[k], FROZEN_CONVENTION)))
            .collect();
        Self { evolved, bare }
    }
}

fn triplet_residuals(singles: &EvolvedSingles, n: usize, t: &Triplet) -> Vec<TripletResidual> {
    let dim = 1usize << n;
    let id = Operator::identity(dim, dim);
    let c_gate = t.c.matrix();
    let mut out = Vec::new();
    for (oi, o) in Pauli::NON_TRIVIAL.iter().enumerate() {
        let (j, k) = t.exponents[oi];
        for (i, m) in mirror_pairs(n) {
            let b_t = if j == 1 { &singles.evolved[i - 1][letter_index(t.b)] } else { &id };
            let lhs = matmul(b_t, &matmul(&embed_site(&c_gate, n, m), &singles.evolved[m - 1][oi]));
            let d = if k == 1 { &singles.bare[m - 1][letter_index(t.d)] } else { &id };
            let rhs = matmul(&singles.bare[i - 1][oi], d);
            out.push(TripletResidual { observable: *o, site: i, residual: max_abs_diff(&lhs, &rhs) });
        }
    }
    out
}

/// Residuals of `B_i^j(t) C_m O_m(t) = O_i D_m^k` for every observable and
/// mirror pair `i < m`.
pub fn check_triplet_condition(engine: &DenseEngine, t: f64, triplet: &Triplet) -> Result<Vec<TripletResidual>> {
    if triplet.exponents.iter().any(|&(j, k)| j > 1 || k > 1) {
        return Err(QstError::invalid("triplet exponents must be 0 or 1"));
    }
    for p in [triplet.b, triplet.d] {
        if p == Pauli::I {
            return Err(QstError::invalid("B and D must be non-trivial Paulis"));
        }
    }
    let u = engine.propagator(t)?;
    let singles = EvolvedSingles::new(&u, engine.n_sites());
    Ok(triplet_residuals(&singles, engine.n_sites(), triplet))
}

/// A `(B, C, D)` choice together with every exponent pair that works for
/// each observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletSolution {
    pub b: Pauli,
    pub c: SiteGate,
    pub d: Pauli,
    pub admissible: [Vec<(u8, u8)>; 3],
}

impl TripletSolution {
    /// The solution with the first admissible exponent pair per observable.
    pub fn representative(&self) -> Triplet {
        Triplet { b: self.b, c: self.c, d: self.d, exponents: self.admissible.clone().map(|v| v[0]) }
    }
}

/// Exhaustive search over `B, D ∈ {X,Y,Z}`, `C ∈` [`SiteGate::CANDIDATES`].
pub fn search_triplets(engine: &DenseEngine, t: f64) -> Result<Vec<TripletSolution>> {
    let n = engine.n_sites();
    let u = engine.propagator(t)?;
    let singles = EvolvedSingles::new(&u, n);
    let mut combos = Vec::new();
    for b in Pauli::NON_TRIVIAL {
        for c in SiteGate::CANDIDATES {
            for d in Pauli::NON_TRIVIAL {
                combos.push((b, c, d));
            }
        }
    }
    let exps = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let found = combos
        .into_par_iter()
        .filter_map(|(b, c, d)| {
            let mut admissible: [Vec<(u8, u8)>; 3] = Default::default();
            for (oi, slot) in admissible.iter_mut().enumerate() {
                for &e in &exps {
                    let mut exponents = [(0, 0); 3];
                    exponents[oi] = e;
                    let trial = Triplet { b, c, d, exponents };
                    let ok = triplet_residuals(&singles, n, &trial)
                        .iter()
                        .filter(|r| r.observable == Pauli::NON_TRIVIAL[oi])
                        .all(|r| r.residual < IDENTITY_TOL);
                    if ok {
                        slot.push(e);
                    }
                }
                if slot.is_empty() {
                    return None;
                }
            }
            Some(TripletSolution { b, c, d, admissible })
        })
        .collect();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::{c, ONE};
    use crate::quantum::state::state_fidelity;
    use crate::quantum::SingleQubitState;

    fn ising(n: usize) -> DenseEngine {
        DenseEngine::new(ChainSpec::ising(n).unwrap()).unwrap()
    }

    #[test]
    fn propagator_is_identity_at_zero() {
        let e = ising(3);
        let u = e.propagator(0.0).unwrap();
        assert!(max_abs_diff(u.matrix(), &Operator::identity(8, 8)) < 1e-12);
    }

    #[test]
    fn propagator_group_law() {
        let e = DenseEngine::new(ChainSpec::xx(4).unwrap()).unwrap();
        let (a, b) = (0.37, 1.21);
        let prod = e.propagator(a).unwrap().matrix() * e.propagator(b).unwrap().matrix();
        assert!(max_abs_diff(&prod, e.propagator(a + b).unwrap().matrix()) < 1e-10);
        let back = e.propagator(a).unwrap().matrix() * e.propagator(-a).unwrap().matrix();
        assert!(max_abs_diff(&back, &Operator::identity(16, 16)) < 1e-10);
        assert!(e.propagator(a).unwrap().unitarity_residual() < 1e-9);
    }

    #[test]
    fn non_finite_time_is_rejected() {
        assert!(ising(2).propagator(f64::NAN).is_err());
    }

    #[test]
    fn n2_selection_is_recorded() {
        let sel = select_convention().unwrap();
        assert_eq!(sel.chosen, FROZEN_CONVENTION);
        assert!(sel.residuals[0] < IDENTITY_TOL);
    }

    #[test]
    fn zz_pair_is_self_swapped() {
        let spec = ChainSpec::ising(4).unwrap();
        let t = critical_time(&spec).unwrap();
        let op = PauliString::parse("ZIIZ").unwrap();
        let ev = heisenberg_evolve(&spec, t, &op).unwrap();
        assert!(max_abs_diff(&ev, &op.to_matrix()) < 1e-8);
    }

    #[test]
    fn magnetisation_is_conserved_under_xx() {
        let spec = ChainSpec::xx(5).unwrap();
        let e = DenseEngine::new(spec).unwrap();
        let mut mz = Operator::zeros(32, 32);
        for s in 1..=5 {
            mz += embed_site(&Pauli::Z.matrix(), 5, s);
        }
        let u = e.propagator(0.9).unwrap();
        assert!(max_abs_diff(&u.heisenberg(&mz, FROZEN_CONVENTION), &mz) < 1e-10);
    }

    #[test]
    fn odd_xy_unsigned_target_fails() {
        let reps = check_unsigned_odd_xy(&ChainSpec::xx(5).unwrap()).unwrap();
        assert!(reps.iter().all(|r| (r.residual - 2.0).abs() < 1e-8));
    }

    #[test]
    fn evolved_pairs_are_local() {
        let e = ising(5);
        let u = e.propagator(e.critical_time().unwrap()).unwrap();
        let op = PauliString::parse("ZIIIY").unwrap().to_matrix();
        let ev = u.heisenberg(&op, FROZEN_CONVENTION);
        assert!(leakage_outside(&ev, 5, &[1, 5]) < 1e-8);
    }

    #[test]
    fn maximally_mixed_is_stationary() {
        let e = ising(3);
        let rho = DensityMatrix::maximally_mixed(3);
        let out = e.evolve(0.8, &rho).unwrap();
        assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn ising_x_eigenstate_reaches_last_site() {
        // |+>|00> evolves so that site 3 holds |+> up to a Pauli X correction.
        let e = ising(3);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(nalgebra::DVector::from_vec(vec![c(h, 0.0), c(h, 0.0)])).unwrap();
        let psi = plus.tensor(&StateVector::basis(&[0, 0]));
        let out = e.evolve(e.critical_time().unwrap(), &psi).unwrap();
        let last = SingleQubitState::from_density(&out.reduced(&[3]).unwrap()).unwrap();
        let f = state_fidelity(&last, &SingleQubitState::plus()).unwrap();
        let f_flipped = state_fidelity(&last.conjugated(&Pauli::X.matrix()), &SingleQubitState::plus()).unwrap();
        assert!((f.max(f_flipped) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let e = DenseEngine::new(ChainSpec::xx(3).unwrap()).unwrap();
        // |000> has no excitations and is an eigenstate of the XX chain.
        let psi = StateVector::basis(&[0, 0, 0]);
        let out = e.evolve(1.3, &psi).unwrap();
        assert!((out.overlap(&psi) - 1.0).abs() < 1e-10);
        assert!((out.amplitudes()[0].norm() - ONE.re).abs() < 1e-12);
    }

    #[test]
    fn triplet_exponents_are_validated() {
        let e = ising(2);
        let bad = Triplet { b: Pauli::Z, c: SiteGate::I, d: Pauli::Z, exponents: [(2, 0), (0, 0), (0, 0)] };
        assert!(check_triplet_condition(&e, 0.1, &bad).is_err());
    }
}
