//! The transfer protocol: prepare the last spin, evolve once, measure the
//! first spin and apply a single-qubit correction to the last spin.
//!
//! Also provides closed-form final states of the engineered chains, used as
//! independent checks of the dense evolution.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::chain::{assemble, restricted_terms, ChainSpec, ModelKind};
use crate::dense::{DenseEngine, Evolve, Propagator, FROZEN_CONVENTION};
use crate::error::{QstError, Result};
use crate::quantum::linalg::{c, kron, Operator, Qubit2, C64, I, ONE, ZERO};
use crate::quantum::measure::{projective_measure, MeasurementBasis, Outcome, OutcomeChoice, MIN_FORCED_PROBABILITY};
use crate::quantum::pauli::{t_power, Pauli, PauliString};
use crate::quantum::state::{
    partial_trace, random_mixed_state, random_pure_state, seeded_rng, state_fidelity, thermal_state, DensityMatrix,
    SingleQubitState, StateVector,
};

/// Initial state of the medium, sites `2..=N-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumSpec {
    /// Computational basis product; `bits[0]` is site 2.
    ProductZ { bits: Vec<u8> },
    ProductStates { states: Vec<SingleQubitState> },
    /// `|+>` for `+1`, `|->` for `-1`.
    XEigenstates { signs: Vec<i8> },
    /// Gibbs state of the chain Hamiltonian restricted to the medium.
    Thermal { beta: f64 },
    MaximallyMixed,
    RandomPure { seed: u64 },
    RandomMixed { seed: u64, rank: usize },
}

impl MediumSpec {
    pub fn label(&self) -> String {
        match self {
            MediumSpec::ProductZ { bits } => format!("product_z:{}", bits.iter().map(|b| b.to_string()).collect::<String>()),
            MediumSpec::ProductStates { states } => format!("product_states:{}", states.len()),
            MediumSpec::XEigenstates { signs } => format!(
                "x_eigenstates:{}",
                signs.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect::<String>()
            ),
            MediumSpec::Thermal { beta } => format!("thermal:{beta}"),
            MediumSpec::MaximallyMixed => "maximally_mixed".into(),
            MediumSpec::RandomPure { seed } => format!("random_pure:{seed}"),
            MediumSpec::RandomMixed { seed, rank } => format!("random_mixed:{seed}:{rank}"),
        }
    }

    fn check_len(&self, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(QstError::invalid(format!(
                "medium {} has {got} sites but the chain has {want} medium sites",
                self.label()
            )));
        }
        Ok(())
    }

    /// Register state of the `N - 2` medium sites.
    pub fn build(&self, spec: &ChainSpec) -> Result<Register> {
        let n = spec.medium_len();
        let trivial = || Register::Pure(StateVector::basis(&[]));
        match self {
            MediumSpec::ProductZ { bits } => {
                self.check_len(bits.len(), n)?;
                if let Some(b) = bits.iter().find(|&&b| b > 1) {
                    return Err(QstError::invalid(format!("medium bit {b} is not 0 or 1")));
                }
                Ok(Register::Pure(StateVector::basis(bits)))
            }
            MediumSpec::ProductStates { states } => {
                self.check_len(states.len(), n)?;
                let mut reg = trivial();
                for s in states {
                    reg = reg.tensor(&Register::from_qubit(s))?;
                }
                Ok(reg)
            }
            MediumSpec::XEigenstates { signs } => {
                self.check_len(signs.len(), n)?;
                let mut reg = trivial();
                for &s in signs {
                    let q = match s {
                        1 => SingleQubitState::plus(),
                        -1 => SingleQubitState::minus(),
                        _ => return Err(QstError::invalid(format!("X-eigenstate sign must be +1 or -1, got {s}"))),
                    };
                    reg = reg.tensor(&Register::from_qubit(&q))?;
                }
                Ok(reg)
            }
            _ if n == 0 => {
                if let MediumSpec::RandomMixed { rank: 0, .. } = self {
                    return Err(QstError::invalid("rank must be at least 1"));
                }
                Ok(trivial())
            }
            MediumSpec::Thermal { beta } => {
                let h = assemble(&restricted_terms(spec, 2, spec.n_sites() - 1), n);
                Ok(Register::Mixed(thermal_state(&h, *beta)?))
            }
            MediumSpec::MaximallyMixed => Ok(Register::Mixed(DensityMatrix::maximally_mixed(n))),
            MediumSpec::RandomPure { seed } => Ok(Register::Pure(random_pure_state(n, *seed)?)),
            MediumSpec::RandomMixed { seed, rank } => {
                if *rank == 0 || *rank > 1 << n {
                    return Err(QstError::invalid(format!("rank {rank} outside 1..={}", 1usize << n)));
                }
                Ok(Register::Mixed(random_mixed_state(n, *rank, *seed)?))
            }
        }
    }
}

/// Pure or mixed register state. Pure states stay as kets as long as possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Register {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Register {
    pub fn from_qubit(q: &SingleQubitState) -> Register {
        match q.pure_ket() {
            Some(v) => Register::Pure(ket_state(&v)),
            None => Register::Mixed(q.to_density()),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Register::Pure(s) => s.n_qubits(),
            Register::Mixed(d) => d.n_qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            Register::Pure(s) => s.to_density(),
            Register::Mixed(d) => d.clone(),
        }
    }

    pub fn tensor(&self, other: &Register) -> Result<Register> {
        match (self, other) {
            (Register::Pure(a), Register::Pure(b)) => Ok(Register::Pure(a.tensor(b))),
            _ => {
                let m = kron(self.to_density().matrix(), other.to_density().matrix())?;
                Ok(Register::Mixed(DensityMatrix::new(m)?))
            }
        }
    }

    pub fn evolve_with(&self, u: &Propagator) -> Result<Register> {
        Ok(match self {
            Register::Pure(s) => Register::Pure(s.evolve_with(u)?),
            Register::Mixed(d) => Register::Mixed(d.evolve_with(u)?),
        })
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        match self {
            Register::Pure(s) => s.reduced(keep),
            Register::Mixed(d) => partial_trace(d, keep),
        }
    }

    pub fn reduced_qubit(&self, site: usize) -> Result<SingleQubitState> {
        SingleQubitState::from_density(&self.reduced(&[site])?)
    }
}

fn ket_state(v: &Vector2<C64>) -> StateVector {
    StateVector::normalized(DVector::from_column_slice(v.as_slice())).expect("unit qubit ket")
}

/// Correction applied to the last spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Identity,
    X,
    /// `T^k`, `k` mod 4, with `T = diag(1, i)`.
    TPower(u8),
}

impl Correction {
    pub fn matrix(self) -> Qubit2 {
        match self {
            Correction::Identity => Pauli::I.matrix(),
            Correction::X => Pauli::X.matrix(),
            Correction::TPower(k) => t_power(i64::from(k)),
        }
    }

    pub fn label(self) -> String {
        match self {
            Correction::Identity => "I".into(),
            Correction::X => "X".into(),
            Correction::TPower(k) => format!("T^{k}"),
        }
    }
}

/// Correction for each value of the outcome product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRule {
    pub model: ModelKind,
    pub plus: Correction,
    pub minus: Correction,
}

impl CorrectionRule {
    /// Ising: `+1 → I`, `-1 → X`. XX (either profile): `+1 → T^N`,
    /// `-1 → T^(N+2) = Z T^N`.
    pub fn for_spec(spec: &ChainSpec) -> Result<Self> {
        let n = spec.n_sites();
        match spec.model() {
            ModelKind::IsingEngineered => Ok(Self { model: spec.model(), plus: Correction::Identity, minus: Correction::X }),
            ModelKind::XxEngineered | ModelKind::XxHomogeneous => Ok(Self {
                model: spec.model(),
                plus: Correction::TPower((n % 4) as u8),
                minus: Correction::TPower(((n + 2) % 4) as u8),
            }),
        }
    }

    /// XX rule with `(T^N)†` for the `-1` product. Agrees with
    /// [`CorrectionRule::for_spec`] only for odd `N`.
    pub fn xx_adjoint_variant(n_sites: usize) -> Self {
        Self {
            model: ModelKind::XxEngineered,
            plus: Correction::TPower((n_sites % 4) as u8),
            minus: Correction::TPower(((4 - n_sites % 4) % 4) as u8),
        }
    }

    pub fn for_product(&self, product: Outcome) -> Correction {
        match product {
            Outcome::Plus => self.plus,
            Outcome::Minus => self.minus,
        }
    }

    pub fn describe(&self) -> String {
        format!("+1 -> {}, -1 -> {}", self.plus.label(), self.minus.label())
    }
}

fn unsupported_protocol() -> QstError {
    QstError::UnsupportedModel("the protocol needs an engineered chain".into())
}

/// Pre-measurement state of the last spin for outcome `n`.
///
/// Ising: `|0>` for `+1`, `|1>` for `-1`. XX: `(|0> ± e^{iNπ/2}|1>)/√2`.
pub fn last_spin_state(spec: &ChainSpec, outcome: Outcome) -> Result<Vector2<C64>> {
    match spec.model() {
        ModelKind::IsingEngineered => Ok(match outcome {
            Outcome::Plus => Vector2::new(ONE, ZERO),
            Outcome::Minus => Vector2::new(ZERO, ONE),
        }),
        ModelKind::XxEngineered | ModelKind::XxHomogeneous => {
            let phase = C64::from_polar(f64::from(outcome.value()), spec.n_sites() as f64 * PI / 2.0);
            let h = c(FRAC_1_SQRT_2, 0.0);
            Ok(Vector2::new(h, phase * h))
        }
    }
}

/// Basis for the first-spin measurement: `Z` for Ising, `X` for XX.
pub fn first_spin_basis(model: ModelKind) -> MeasurementBasis {
    if model.is_xx() {
        MeasurementBasis::X
    } else {
        MeasurementBasis::Z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub spec: ChainSpec,
    pub input: SingleQubitState,
    pub medium: MediumSpec,
    pub seed: u64,
    pub evolution_time: f64,
    pub n_projection_outcome: Outcome,
    pub n_projection_probability: f64,
    pub first_spin_outcome: Outcome,
    pub first_spin_probability: f64,
    pub outcome_product: Outcome,
    pub correction_applied: String,
    pub pre_correction: SingleQubitState,
    pub output: SingleQubitState,
    pub fidelity: f64,
}

/// JSON record of a run with the conventions it was produced under.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRecord<'a> {
    pub library_version: &'static str,
    pub heisenberg_convention: &'static str,
    pub time_direction: TimeDirection,
    pub last_spin_phase: &'static str,
    pub correction_rule: String,
    #[serde(flatten)]
    pub run: &'a ProtocolRun,
}

impl ProtocolRun {
    pub fn record(&self) -> Result<ProtocolRecord<'_>> {
        Ok(ProtocolRecord {
            library_version: env!("CARGO_PKG_VERSION"),
            heisenberg_convention: FROZEN_CONVENTION.label(),
            time_direction: TimeDirection::Forward,
            last_spin_phase: "exp(i N pi / 2)",
            correction_rule: CorrectionRule::for_spec(&self.spec)?.describe(),
            run: self,
        })
    }
}

/// Dense engine plus the propagator for one protocol time.
#[derive(Debug, Clone)]
pub struct ProtocolEngine {
    dense: DenseEngine,
    propagator: Propagator,
    rule: CorrectionRule,
    last_spin_prior: SingleQubitState,
}

impl ProtocolEngine {
    pub fn new(spec: ChainSpec) -> Result<Self> {
        let dense = DenseEngine::new(spec)?;
        let t = dense.critical_time().map_err(|_| unsupported_protocol())?;
        Self::from_engine(dense, t)
    }

    /// Protocol evolved for an arbitrary time instead of `t*`.
    pub fn from_engine(dense: DenseEngine, time: f64) -> Result<Self> {
        let rule = CorrectionRule::for_spec(dense.spec())?;
        let propagator = dense.propagator(time)?;
        Ok(Self { dense, propagator, rule, last_spin_prior: SingleQubitState::maximally_mixed() })
    }

    /// State of the last spin before it is projected; sets the sampling
    /// weights of the projection outcome. Defaults to `I/2`.
    pub fn with_last_spin_prior(mut self, prior: SingleQubitState) -> Self {
        self.last_spin_prior = prior;
        self
    }

    pub fn spec(&self) -> &ChainSpec {
        self.dense.spec()
    }

    pub fn dense(&self) -> &DenseEngine {
        &self.dense
    }

    pub fn rule(&self) -> &CorrectionRule {
        &self.rule
    }

    pub fn time(&self) -> f64 {
        self.propagator.time()
    }

    /// `input ⊗ medium ⊗ last`.
    pub fn prepare(&self, input: &SingleQubitState, medium: &MediumSpec, last: &SingleQubitState) -> Result<Register> {
        Register::from_qubit(input)
            .tensor(&medium.build(self.spec())?)?
            .tensor(&Register::from_qubit(last))
    }

    pub fn evolve(&self, reg: &Register) -> Result<Register> {
        reg.evolve_with(&self.propagator)
    }

    /// Evolved register with the last spin prepared for outcome `n`, before
    /// any measurement.
    pub fn evolved_register(&self, input: &SingleQubitState, medium: &MediumSpec, n: Outcome) -> Result<Register> {
        let last = SingleQubitState::from_ket(&last_spin_state(self.spec(), n)?);
        self.evolve(&self.prepare(input, medium, &last)?)
    }

    fn measure_first(&self, reg: &Register, choice: OutcomeChoice, rng: &mut crate::quantum::state::QstRng) -> Result<(Outcome, f64, Register)> {
        let basis = first_spin_basis(self.spec().model());
        Ok(match reg {
            Register::Pure(s) => {
                let m = projective_measure(s, 1, &basis, choice, rng)?;
                (m.outcome, m.probability, Register::Pure(m.post_state))
            }
            Register::Mixed(d) => {
                let m = projective_measure(d, 1, &basis, choice, rng)?;
                (m.outcome, m.probability, Register::Mixed(m.post_state))
            }
        })
    }

    fn projection_probability(&self, n: Outcome) -> Result<f64> {
        Ok(crate::quantum::state::pure_fidelity(&last_spin_state(self.spec(), n)?, &self.last_spin_prior))
    }

    pub fn run(
        &self,
        input: &SingleQubitState,
        medium: &MediumSpec,
        n_choice: OutcomeChoice,
        m1_choice: OutcomeChoice,
        seed: u64,
    ) -> Result<ProtocolRun> {
        let mut rng = seeded_rng(seed);
        let (p_plus, p_minus) = (self.projection_probability(Outcome::Plus)?, self.projection_probability(Outcome::Minus)?);
        let n_outcome = match n_choice {
            OutcomeChoice::Force(o) => o,
            OutcomeChoice::Sample => {
                let u: f64 = rand::Rng::random(&mut rng);
                if u * (p_plus + p_minus) < p_plus {
                    Outcome::Plus
                } else {
                    Outcome::Minus
                }
            }
        };
        let n_probability = if n_outcome == Outcome::Plus { p_plus } else { p_minus };
        if n_probability < MIN_FORCED_PROBABILITY {
            return Err(QstError::ZeroProbability { outcome: n_outcome.value(), probability: n_probability });
        }
        let evolved = self.evolved_register(input, medium, n_outcome)?;
        self.finish(input, medium, seed, (n_outcome, n_probability), &evolved, m1_choice, &mut rng)
    }

    /// The four forced `(n, m1)` combinations, evolving once per `n`.
    pub fn run_all_outcomes(&self, input: &SingleQubitState, medium: &MediumSpec, seed: u64) -> Result<Vec<ProtocolRun>> {
        let mut rng = seeded_rng(seed);
        let mut runs = Vec::with_capacity(4);
        for n in [Outcome::Plus, Outcome::Minus] {
            let p = self.projection_probability(n)?;
            let evolved = self.evolved_register(input, medium, n)?;
            for m in [Outcome::Plus, Outcome::Minus] {
                runs.push(self.finish(input, medium, seed, (n, p), &evolved, OutcomeChoice::Force(m), &mut rng)?);
            }
        }
        Ok(runs)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        input: &SingleQubitState,
        medium: &MediumSpec,
        seed: u64,
        (n_outcome, n_probability): (Outcome, f64),
        evolved: &Register,
        m1_choice: OutcomeChoice,
        rng: &mut crate::quantum::state::QstRng,
    ) -> Result<ProtocolRun> {
        let spec = *self.spec();
        let (m1, p1, post) = self.measure_first(evolved, m1_choice, rng)?;
        let pre_correction = post.reduced_qubit(spec.n_sites())?;
        let product = n_outcome.product(m1);
        let correction = self.rule.for_product(product);
        let output = pre_correction.conjugated(&correction.matrix());
        let fidelity = state_fidelity(&output, input)?;
        Ok(ProtocolRun {
            spec,
            input: input.clone(),
            medium: medium.clone(),
            seed,
            evolution_time: self.time(),
            n_projection_outcome: n_outcome,
            n_projection_probability: n_probability,
            first_spin_outcome: m1,
            first_spin_probability: p1,
            outcome_product: product,
            correction_applied: correction.label(),
            pre_correction,
            output,
            fidelity,
        })
    }

    /// Last spin starts in `last` with no projection; the correction uses
    /// the first-spin outcome alone, as if the projection had given `+1`.
    pub fn run_unprojected(
        &self,
        input: &SingleQubitState,
        medium: &MediumSpec,
        last: &SingleQubitState,
        m1_choice: OutcomeChoice,
        seed: u64,
    ) -> Result<UnprojectedRun> {
        let mut rng = seeded_rng(seed);
        let evolved = self.evolve(&self.prepare(input, medium, last)?)?;
        let (m1, p1, post) = self.measure_first(&evolved, m1_choice, &mut rng)?;
        let correction = self.rule.for_product(m1);
        let output = post.reduced_qubit(self.spec().n_sites())?.conjugated(&correction.matrix());
        let fidelity = state_fidelity(&output, input)?;
        Ok(UnprojectedRun {
            first_spin_outcome: m1,
            first_spin_probability: p1,
            correction_applied: correction.label(),
            output,
            fidelity,
        })
    }

    /// Reduced state of the mirror partner of medium site `site` after
    /// evolution, last spin prepared for outcome `+1`.
    pub fn mirror_partner_state(&self, input: &SingleQubitState, medium: &MediumSpec, site: usize) -> Result<SingleQubitState> {
        let n = self.spec().n_sites();
        if !(2..n).contains(&site) {
            return Err(QstError::invalid(format!("site {site} is not a medium site")));
        }
        self.evolved_register(input, medium, Outcome::Plus)?.reduced_qubit(self.spec().mirror(site))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnprojectedRun {
    pub first_spin_outcome: Outcome,
    pub first_spin_probability: f64,
    pub correction_applied: String,
    pub output: SingleQubitState,
    pub fidelity: f64,
}

pub fn run_protocol(
    spec: &ChainSpec,
    input: &SingleQubitState,
    medium: &MediumSpec,
    n_choice: OutcomeChoice,
    m1_choice: OutcomeChoice,
    seed: u64,
) -> Result<ProtocolRun> {
    ProtocolEngine::new(*spec)?.run(input, medium, n_choice, m1_choice, seed)
}

pub fn run_unprojected_n(
    spec: &ChainSpec,
    input: &SingleQubitState,
    medium: &MediumSpec,
    last: &SingleQubitState,
    m1_choice: OutcomeChoice,
    seed: u64,
) -> Result<UnprojectedRun> {
    if spec.model() != ModelKind::IsingEngineered {
        return Err(QstError::UnsupportedModel("unprojected runs are defined for the Ising chain".into()));
    }
    ProtocolEngine::new(*spec)?.run_unprojected(input, medium, last, m1_choice, seed)
}

fn reverse_bits(x: usize, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS as usize - n)
    }
}

/// Reverse the site order of a register.
pub fn mirror_inversion(rho: &DensityMatrix) -> DensityMatrix {
    let n = rho.n_qubits();
    let d = 1usize << n;
    let m = rho.matrix();
    DensityMatrix::from_trusted(Operator::from_fn(d, d, |r, col| m[(reverse_bits(r, n), reverse_bits(col, n))]))
}

pub fn mirror_inversion_ket(psi: &StateVector) -> StateVector {
    let n = psi.n_qubits();
    let a = psi.amplitudes();
    StateVector::from_trusted(DVector::from_fn(a.len(), |r, _| a[reverse_bits(r, n)]))
}

/// Which way the closed forms run. The physical protocol always evolves
/// forward with `exp(-iHt*)`; `Reversed` corresponds to `exp(+iHt*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Forward,
    Reversed,
}

impl TimeDirection {
    pub fn sign(self) -> f64 {
        match self {
            TimeDirection::Forward => 1.0,
            TimeDirection::Reversed => -1.0,
        }
    }
}

/// Final Ising state for a pure input and a Z-product medium, last spin in
/// `|0>`:
/// `(|0>|ā>|ψ> ∓ i|1>|ā⊥>X|ψ>)/√2`, `ā` the reversed medium bits;
/// `-i` forward, `+i` reversed. Equal to the dense result up to a global
/// phase.
pub fn closed_form_pure(spec: &ChainSpec, psi: &Vector2<C64>, bits: &[u8], dir: TimeDirection) -> Result<StateVector> {
    if spec.model() != ModelKind::IsingEngineered {
        return Err(QstError::UnsupportedModel("pure closed form is for the Ising chain".into()));
    }
    MediumSpec::ProductZ { bits: bits.to_vec() }.build(spec)?;
    let rev: Vec<u8> = bits.iter().rev().copied().collect();
    let flipped: Vec<u8> = rev.iter().map(|b| 1 - b).collect();
    let x_psi = Pauli::X.matrix() * psi;
    let first = StateVector::basis(&[0]).tensor(&StateVector::basis(&rev)).tensor(&ket_state(psi));
    let second = StateVector::basis(&[1]).tensor(&StateVector::basis(&flipped)).tensor(&ket_state(&x_psi));
    let kappa = -I * dir.sign();
    StateVector::normalized(first.amplitudes() + second.amplitudes() * kappa)
}

fn kron3(a: &Operator, b: &Operator, d: &Operator) -> Result<Operator> {
    kron(&kron(a, b)?, d)
}

fn q(m: Qubit2) -> Operator {
    crate::quantum::linalg::qubit_to_operator(&m)
}

/// Final state for an arbitrary input and medium, as the four-block sum
/// over the first spin.
///
/// Ising, last spin `|0>`:
/// `½[|0><0|⊗ρ⊗σ + |1><1|⊗PρP⊗XσX + (κ|0><1|⊗ρP⊗σX + h.c.)]`,
/// `P` the product of `X` over the medium, `ρ` the mirrored medium,
/// `κ = +i` forward and `-i` reversed.
///
/// XX, last spin `|+_N>`: the same shape in the `|±>` basis with `P` the
/// product of `Z`, `ρ → A†ρA`, `σ → (T^N)†σT^N`, `A = ⊗T^N`, and
/// `κ = +i` forward, `-i(-1)^N` reversed.
pub fn closed_form_mixed(
    spec: &ChainSpec,
    input: &SingleQubitState,
    medium: &DensityMatrix,
    dir: TimeDirection,
) -> Result<DensityMatrix> {
    let n = spec.n_sites();
    if medium.n_qubits() != spec.medium_len() {
        return Err(QstError::invalid("medium size does not match the chain"));
    }
    let m = medium.n_qubits();
    let rho = mirror_inversion(medium).into_matrix();
    let sigma = q(*input.matrix());
    let h = c(0.5, 0.0);
    let (proj0, proj1, coh, string, local, rho, sigma, kappa) = match spec.model() {
        ModelKind::IsingEngineered => {
            let p = PauliString::new(crate::quantum::Phase::One, vec![Pauli::X; m]).to_matrix();
            let kappa = I * dir.sign();
            let proj0 = q(Qubit2::new(ONE, ZERO, ZERO, ZERO));
            let proj1 = q(Qubit2::new(ZERO, ZERO, ZERO, ONE));
            let coh = q(Qubit2::new(ZERO, ONE, ZERO, ZERO));
            (proj0, proj1, coh, p, q(Pauli::X.matrix()), rho, sigma, kappa)
        }
        ModelKind::XxEngineered => {
            let p = PauliString::new(crate::quantum::Phase::One, vec![Pauli::Z; m]).to_matrix();
            let tn = q(t_power(n as i64));
            let mut a = Operator::identity(1, 1);
            for _ in 0..m {
                a = kron(&a, &tn)?;
            }
            let rho_t = a.adjoint() * &rho * &a;
            let sigma_t = tn.adjoint() * &sigma * &tn;
            let kappa = match dir {
                TimeDirection::Forward => I,
                TimeDirection::Reversed => -I * if n.is_multiple_of(2) { 1.0 } else { -1.0 },
            };
            let pp = q(Qubit2::new(h, h, h, h));
            let mm = q(Qubit2::new(h, -h, -h, h));
            let pm = q(Qubit2::new(h, -h, h, -h));
            (pp, mm, pm, p, q(Pauli::Z.matrix()), rho_t, sigma_t, kappa)
        }
        ModelKind::XxHomogeneous => return Err(unsupported_protocol()),
    };
    let diag0 = kron3(&proj0, &rho, &sigma)?;
    let diag1 = kron3(&proj1, &(&string * &rho * &string), &(&local * &sigma * &local))?;
    let off = kron3(&coh, &(&rho * &string), &(&sigma * &local))? * kappa;
    let total = (diag0 + diag1 + &off + off.adjoint()) * h;
    DensityMatrix::new(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::state::{random_pure_state_with, trace_distance};

    fn sq(alpha: C64, beta: C64) -> SingleQubitState {
        SingleQubitState::pure(alpha, beta).unwrap()
    }

    #[test]
    fn ising_example_all_outcomes() {
        let spec = ChainSpec::ising(5).unwrap();
        let engine = ProtocolEngine::new(spec).unwrap();
        let input = sq(ONE, I);
        let medium = MediumSpec::ProductZ { bits: vec![0, 0, 0] };
        for n in [Outcome::Plus, Outcome::Minus] {
            for m in [Outcome::Plus, Outcome::Minus] {
                let run = engine.run(&input, &medium, OutcomeChoice::Force(n), OutcomeChoice::Force(m), 0).unwrap();
                assert!((run.fidelity - 1.0).abs() < 1e-9, "{n} {m}");
                assert_eq!(run.outcome_product, n.product(m));
            }
        }
    }

    #[test]
    fn ising_negative_product_leaves_x_conjugate() {
        let engine = ProtocolEngine::new(ChainSpec::ising(4).unwrap()).unwrap();
        let input = SingleQubitState::from_bloch_angles(0.7, 1.9);
        let run = engine
            .run(&input, &MediumSpec::ProductZ { bits: vec![1, 0] }, OutcomeChoice::Force(Outcome::Plus), OutcomeChoice::Force(Outcome::Minus), 0)
            .unwrap();
        let expect = input.conjugated(&Pauli::X.matrix());
        assert!((run.pre_correction.matrix() - expect.matrix()).norm() < 1e-9);
        assert_eq!(run.correction_applied, "X");
    }

    #[test]
    fn xx_rule_labels() {
        let r = CorrectionRule::for_spec(&ChainSpec::xx(5).unwrap()).unwrap();
        assert_eq!((r.plus, r.minus), (Correction::TPower(1), Correction::TPower(3)));
        assert_eq!(CorrectionRule::xx_adjoint_variant(5), r);
        let r = CorrectionRule::for_spec(&ChainSpec::xx(4).unwrap()).unwrap();
        assert_eq!((r.plus, r.minus), (Correction::TPower(0), Correction::TPower(2)));
        assert_ne!(CorrectionRule::xx_adjoint_variant(4), r);
    }

    #[test]
    fn xx_adjoint_variant_fails_for_even_lengths() {
        let spec = ChainSpec::xx(4).unwrap();
        let engine = ProtocolEngine::new(spec).unwrap();
        let input = SingleQubitState::from_bloch_angles(1.1, 0.4);
        let run = engine
            .run(&input, &MediumSpec::MaximallyMixed, OutcomeChoice::Force(Outcome::Plus), OutcomeChoice::Force(Outcome::Minus), 0)
            .unwrap();
        let alt = CorrectionRule::xx_adjoint_variant(4).for_product(Outcome::Minus);
        let f = state_fidelity(&run.pre_correction.conjugated(&alt.matrix()), &input).unwrap();
        assert!(f < 0.99);
        assert!((run.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn xx_maximally_mixed_medium_random_inputs() {
        let mut rng = seeded_rng(3);
        for n in [4, 5] {
            let engine = ProtocolEngine::new(ChainSpec::xx(n).unwrap()).unwrap();
            for k in 0..50 {
                let psi = random_pure_state_with(1, &mut rng).unwrap();
                let input = SingleQubitState::from_density(&psi.to_density()).unwrap();
                let run = engine.run(&input, &MediumSpec::MaximallyMixed, OutcomeChoice::Sample, OutcomeChoice::Sample, k).unwrap();
                assert!((run.fidelity - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampled_runs_replay() {
        let spec = ChainSpec::ising(4).unwrap();
        let input = SingleQubitState::plus();
        let medium = MediumSpec::RandomMixed { seed: 1, rank: 2 };
        let a = run_protocol(&spec, &input, &medium, OutcomeChoice::Sample, OutcomeChoice::Sample, 77).unwrap();
        let b = run_protocol(&spec, &input, &medium, OutcomeChoice::Sample, OutcomeChoice::Sample, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_site_chain_has_empty_medium() {
        for spec in [ChainSpec::ising(2).unwrap(), ChainSpec::xx(2).unwrap()] {
            let input = SingleQubitState::from_bloch_angles(0.4, 2.2);
            for medium in [MediumSpec::MaximallyMixed, MediumSpec::Thermal { beta: 1.0 }, MediumSpec::ProductZ { bits: vec![] }] {
                let run = run_protocol(&spec, &input, &medium, OutcomeChoice::Force(Outcome::Minus), OutcomeChoice::Force(Outcome::Plus), 0).unwrap();
                assert!((run.fidelity - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn medium_length_is_checked() {
        let spec = ChainSpec::ising(5).unwrap();
        let r = run_protocol(&spec, &SingleQubitState::zero(), &MediumSpec::ProductZ { bits: vec![0] }, OutcomeChoice::Sample, OutcomeChoice::Sample, 0);
        assert!(matches!(r, Err(QstError::InvalidArgument(_))));
        assert!(MediumSpec::RandomMixed { seed: 0, rank: 9 }.build(&spec).is_err());
        assert!(MediumSpec::XEigenstates { signs: vec![1, 0, 1] }.build(&spec).is_err());
    }

    #[test]
    fn forced_impossible_projection_is_rejected() {
        let engine = ProtocolEngine::new(ChainSpec::ising(3).unwrap()).unwrap().with_last_spin_prior(SingleQubitState::zero());
        let r = engine.run(&SingleQubitState::zero(), &MediumSpec::MaximallyMixed, OutcomeChoice::Force(Outcome::Minus), OutcomeChoice::Sample, 0);
        assert!(matches!(r, Err(QstError::ZeroProbability { outcome: -1, .. })));
    }

    #[test]
    fn zero_probability_first_spin_is_rejected() {
        // Input |0>, medium |0>, last |0> at N = 3: the first spin is not
        // certain, so force a basis state on a trivially certain case instead.
        let engine = ProtocolEngine::from_engine(DenseEngine::new(ChainSpec::ising(3).unwrap()).unwrap(), 0.0).unwrap();
        let r = engine.run(&SingleQubitState::zero(), &MediumSpec::ProductZ { bits: vec![0] }, OutcomeChoice::Force(Outcome::Plus), OutcomeChoice::Force(Outcome::Minus), 0);
        assert!(matches!(r, Err(QstError::ZeroProbability { .. })));
    }

    #[test]
    fn mirror_inversion_examples() {
        let psi = StateVector::basis(&[0, 1]);
        assert_eq!(mirror_inversion_ket(&psi), StateVector::basis(&[1, 0]));
        let pal = StateVector::basis(&[1, 0, 1]);
        assert_eq!(mirror_inversion_ket(&pal), pal);
        let rho = random_mixed_state(3, 3, 4).unwrap();
        assert_eq!(mirror_inversion(&mirror_inversion(&rho)), rho);
    }

    #[test]
    fn pure_closed_form_matches_dense() {
        let spec = ChainSpec::ising(4).unwrap();
        let engine = ProtocolEngine::new(spec).unwrap();
        let psi = Vector2::new(c(0.6, 0.0), c(0.0, 0.8));
        let input = SingleQubitState::from_ket(&psi);
        let medium = MediumSpec::ProductZ { bits: vec![0, 1] };
        let Register::Pure(out) = engine.evolved_register(&input, &medium, Outcome::Plus).unwrap() else {
            panic!("pure evolution expected");
        };
        let f = closed_form_pure(&spec, &psi, &[0, 1], TimeDirection::Forward).unwrap();
        assert!((out.overlap(&f) - 1.0).abs() < 1e-9);
        let r = closed_form_pure(&spec, &psi, &[0, 1], TimeDirection::Reversed).unwrap();
        let back = engine.dense().evolve(-engine.time(), &ket_state(&psi).tensor(&StateVector::basis(&[0, 1, 0]))).unwrap();
        assert!((back.overlap(&r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mixed_closed_form_matches_dense_both_directions() {
        for spec in [ChainSpec::ising(4).unwrap(), ChainSpec::xx(5).unwrap()] {
            let engine = ProtocolEngine::new(spec).unwrap();
            let input = SingleQubitState::from_bloch_vector([0.3, -0.2, 0.5]).unwrap();
            let medium = random_mixed_state(spec.medium_len(), 3, 8).unwrap();
            let last = SingleQubitState::from_ket(&last_spin_state(&spec, Outcome::Plus).unwrap());
            let reg = Register::from_qubit(&input).tensor(&Register::Mixed(medium.clone())).unwrap().tensor(&Register::from_qubit(&last)).unwrap();
            let rho0 = reg.to_density();
            for dir in [TimeDirection::Forward, TimeDirection::Reversed] {
                let evolved = engine.dense().evolve(dir.sign() * engine.time(), &rho0).unwrap();
                let f = closed_form_mixed(&spec, &input, &medium, dir).unwrap();
                assert!(trace_distance(evolved.matrix(), f.matrix()).unwrap() < 1e-9, "{:?} {dir:?}", spec.model());
            }
        }
    }

    #[test]
    fn record_carries_conventions() {
        let run = run_protocol(&ChainSpec::xx(3).unwrap(), &SingleQubitState::plus(), &MediumSpec::MaximallyMixed, OutcomeChoice::Force(Outcome::Plus), OutcomeChoice::Force(Outcome::Plus), 5).unwrap();
        let v = serde_json::to_value(run.record().unwrap()).unwrap();
        assert_eq!(v["heisenberg_convention"], "U^dag O U");
        assert_eq!(v["time_direction"], "forward");
        assert_eq!(v["outcome_product"], 1);
        assert_eq!(v["medium"]["kind"], "maximally_mixed");
        assert!(v["library_version"].is_string());
    }

    #[test]
    fn medium_spec_serde() {
        let m: MediumSpec = serde_json::from_str(r#"{"kind":"random_mixed","seed":3,"rank":2}"#).unwrap();
        assert_eq!(m, MediumSpec::RandomMixed { seed: 3, rank: 2 });
        assert!(serde_json::from_str::<MediumSpec>(r#"{"kind":"thermal","beta":1,"x":2}"#).is_err());
    }
}
