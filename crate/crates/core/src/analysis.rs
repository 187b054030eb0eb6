//! Experiment aggregation: fidelity against last-spin purity, robustness over
//! medium states and the entanglement of the final chain state.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, ModelKind};
use crate::dense::DenseEngine;
use crate::error::{QstError, Result};
use crate::fermion::{FermionEngine, DEFAULT_GRID_POINTS, DEFAULT_T_MAX};
use crate::protocol::{closed_form_pure, MediumSpec, ProtocolEngine, Register, TimeDirection};
use crate::quantum::linalg::{c, Qubit2, C64};
use crate::quantum::measure::{Outcome, OutcomeChoice};
use crate::quantum::state::{entropy, random_mixed_state_with, random_pure_state_with, seeded_rng, SingleQubitState, StateVector};
use crate::quantum::Pauli;

/// Separation required to name a winner between the two purity laws.
pub const CANDIDATE_MARGIN: f64 = 1e-3;

/// `cos θ |0> + sin θ |1>`.
pub fn real_input(theta: f64) -> SingleQubitState {
    SingleQubitState::from_ket(&Vector2::new(c(theta.cos(), 0.0), c(theta.sin(), 0.0)))
}

/// Diagonal weight `p00` and coherence `γ` of the last spin's initial state.
pub fn last_spin_mixture(p00: f64, gamma: C64) -> Result<SingleQubitState> {
    if !(0.0..=1.0).contains(&p00) {
        return Err(QstError::invalid(format!("p00 = {p00} outside [0, 1]")));
    }
    SingleQubitState::new(Qubit2::new(c(p00, 0.0), gamma, gamma.conj(), c(1.0 - p00, 0.0)))
}

/// Linear law `p00 + (1 - p00) <X>`.
pub fn linear_candidate(p00: f64, x: f64) -> f64 {
    p00 + (1.0 - p00) * x
}

/// Squared law `p00 + (1 - p00) <X>²`.
pub fn squared_candidate(p00: f64, x: f64) -> f64 {
    p00 + (1.0 - p00) * x * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityLaw {
    Linear,
    Squared,
    Indistinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P00Row {
    pub input: String,
    pub x_expectation: f64,
    pub p00: f64,
    pub simulated: f64,
    /// `|F(m1 = +1) - F(m1 = -1)|`.
    pub outcome_spread: f64,
    pub linear: f64,
    pub squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P00SweepReport {
    pub n_sites: usize,
    pub medium: MediumSpec,
    pub rows: Vec<P00Row>,
    pub deviation_linear: f64,
    pub deviation_squared: f64,
    /// Largest `|linear - squared|` over the grid.
    pub discrimination: f64,
    pub winner: PurityLaw,
}

impl P00SweepReport {
    fn from_rows(n_sites: usize, medium: MediumSpec, rows: Vec<P00Row>) -> Self {
        let dev = |f: fn(&P00Row) -> f64| rows.iter().map(|r| (r.simulated - f(r)).abs()).fold(0.0, f64::max);
        let deviation_linear = dev(|r| r.linear);
        let deviation_squared = dev(|r| r.squared);
        let discrimination = rows.iter().map(|r| (r.linear - r.squared).abs()).fold(0.0, f64::max);
        let winner = if (deviation_linear - deviation_squared).abs() < CANDIDATE_MARGIN {
            PurityLaw::Indistinguishable
        } else if deviation_linear < deviation_squared {
            PurityLaw::Linear
        } else {
            PurityLaw::Squared
        };
        Self { n_sites, medium, rows, deviation_linear, deviation_squared, discrimination, winner }
    }

    pub fn winner_deviation(&self) -> Option<(f64, f64)> {
        match self.winner {
            PurityLaw::Linear => Some((self.deviation_linear, self.deviation_squared)),
            PurityLaw::Squared => Some((self.deviation_squared, self.deviation_linear)),
            PurityLaw::Indistinguishable => None,
        }
    }
}

fn unprojected_fidelity(engine: &ProtocolEngine, input: &SingleQubitState, medium: &MediumSpec, last: &SingleQubitState) -> Result<(f64, f64)> {
    let run = |o| engine.run_unprojected(input, medium, last, OutcomeChoice::Force(o), 0).map(|r| r.fidelity);
    let (fp, fm) = (run(Outcome::Plus)?, run(Outcome::Minus)?);
    Ok((fp, (fp - fm).abs()))
}

fn sweep_rows(
    engine: &ProtocolEngine,
    inputs: &[(String, SingleQubitState)],
    medium: &MediumSpec,
    grid: &[f64],
) -> Result<Vec<P00Row>> {
    if let Some(p) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(QstError::invalid(format!("p00 grid value {p} outside [0, 1]")));
    }
    let jobs: Vec<_> = inputs.iter().flat_map(|i| grid.iter().map(move |&p| (i, p))).collect();
    jobs.into_par_iter()
        .map(|((label, input), p00)| {
            let x = input.expectation(Pauli::X);
            let last = last_spin_mixture(p00, c(0.0, 0.0))?;
            let (simulated, outcome_spread) = unprojected_fidelity(engine, input, medium, &last)?;
            Ok(P00Row {
                input: label.clone(),
                x_expectation: x,
                p00,
                simulated,
                outcome_spread,
                linear: linear_candidate(p00, x),
                squared: squared_candidate(p00, x),
            })
        })
        .collect()
}

fn ising_engine(spec: &ChainSpec) -> Result<ProtocolEngine> {
    if spec.model() != ModelKind::IsingEngineered {
        return Err(QstError::UnsupportedModel("purity sweeps use the Ising chain".into()));
    }
    ProtocolEngine::new(*spec)
}

fn zero_medium(spec: &ChainSpec) -> MediumSpec {
    MediumSpec::ProductZ { bits: vec![0; spec.medium_len()] }
}

/// Fidelity against `p00` for one input, last spin diagonal.
pub fn p00_sweep(spec: &ChainSpec, input: &SingleQubitState, grid: &[f64]) -> Result<P00SweepReport> {
    let engine = ising_engine(spec)?;
    let medium = zero_medium(spec);
    let rows = sweep_rows(&engine, &[("input".into(), input.clone())], &medium, grid)?;
    Ok(P00SweepReport::from_rows(spec.n_sites(), medium, rows))
}

/// `θ_k = k π / (2 (n - 1))`, covering `<X> = sin 2θ` from 0 up to 1 and back.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / (2.0 * (n.max(2) - 1) as f64)).collect()
}

pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n.max(2) - 1) as f64).collect()
}

/// Fidelity against `p00` for real inputs `cos θ|0> + sin θ|1>` over a θ grid.
pub fn purity_law_sweep(spec: &ChainSpec, thetas: &[f64], grid: &[f64]) -> Result<P00SweepReport> {
    let engine = ising_engine(spec)?;
    let medium = zero_medium(spec);
    let inputs: Vec<_> = thetas.iter().map(|&t| (format!("theta={t:.16e}"), real_input(t))).collect();
    let rows = sweep_rows(&engine, &inputs, &medium, grid)?;
    Ok(P00SweepReport::from_rows(spec.n_sites(), medium, rows))
}

/// Fidelities at fixed `p00` for coherences `γ = k/(n-1) · sqrt(p00 (1-p00)) · e^{iφ}`
/// (`k = 0..n`), i.e. from zero up to the largest value allowed.
pub fn coherence_scan(spec: &ChainSpec, input: &SingleQubitState, p00: f64, phase: f64, n: usize) -> Result<Vec<f64>> {
    let engine = ising_engine(spec)?;
    let medium = zero_medium(spec);
    let g_max = (p00 * (1.0 - p00)).max(0.0).sqrt();
    (0..n)
        .map(|k| {
            let g = C64::from_polar(g_max * k as f64 / (n.max(2) - 1) as f64, phase);
            let last = last_spin_mixture(p00, g)?;
            Ok(unprojected_fidelity(&engine, input, &medium, &last)?.0)
        })
        .collect()
}

/// Medium family for robustness sweeps; random members are redrawn per input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumFamily {
    RandomProductZ,
    RandomXEigenstates,
    Thermal { beta: f64 },
    MaximallyMixed,
    RandomPure,
    RandomMixed { rank: usize },
}

impl MediumFamily {
    /// The families of the standard robustness matrix.
    pub fn standard() -> Vec<MediumFamily> {
        vec![
            MediumFamily::RandomProductZ,
            MediumFamily::RandomXEigenstates,
            MediumFamily::Thermal { beta: 0.0 },
            MediumFamily::Thermal { beta: 0.5 },
            MediumFamily::Thermal { beta: 2.0 },
            MediumFamily::MaximallyMixed,
            MediumFamily::RandomPure,
            MediumFamily::RandomMixed { rank: 2 },
        ]
    }

    pub fn label(&self) -> String {
        match self {
            MediumFamily::RandomProductZ => "random_product_z".into(),
            MediumFamily::RandomXEigenstates => "random_x_eigenstates".into(),
            MediumFamily::Thermal { beta } => format!("thermal_beta_{beta}"),
            MediumFamily::MaximallyMixed => "maximally_mixed".into(),
            MediumFamily::RandomPure => "random_pure".into(),
            MediumFamily::RandomMixed { rank } => format!("random_mixed_rank_{rank}"),
        }
    }

    pub fn draw(&self, n_medium: usize, rng: &mut impl Rng) -> MediumSpec {
        match *self {
            MediumFamily::RandomProductZ => MediumSpec::ProductZ { bits: (0..n_medium).map(|_| rng.random_range(0..=1)).collect() },
            MediumFamily::RandomXEigenstates => MediumSpec::XEigenstates {
                signs: (0..n_medium).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
            },
            MediumFamily::Thermal { beta } => MediumSpec::Thermal { beta },
            MediumFamily::MaximallyMixed => MediumSpec::MaximallyMixed,
            MediumFamily::RandomPure => MediumSpec::RandomPure { seed: rng.random() },
            MediumFamily::RandomMixed { rank } => MediumSpec::RandomMixed { seed: rng.random(), rank: rank.min(1 << n_medium) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSweepConfig {
    pub model: ModelKind,
    pub n_sites: Vec<usize>,
    #[serde(default = "default_j")]
    pub j_scale: f64,
    /// Only for the homogeneous model.
    #[serde(default)]
    pub end_coupling_ratio: Option<f64>,
    #[serde(default = "MediumFamily::standard")]
    pub media: Vec<MediumFamily>,
    #[serde(default = "default_pure_inputs")]
    pub pure_inputs: usize,
    #[serde(default = "default_mixed_inputs")]
    pub mixed_inputs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_j() -> f64 {
    1.0
}

fn default_pure_inputs() -> usize {
    20
}

fn default_mixed_inputs() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediumCell {
    pub model: ModelKind,
    pub n_sites: usize,
    pub medium: String,
    pub evolution_time: f64,
    pub runs: usize,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
    pub mean_fidelity: f64,
    /// Largest output difference between runs sharing an outcome product.
    pub product_spread: f64,
}

/// SplitMix64 finaliser; spreads correlated integers into independent seeds.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(p.wrapping_add(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Protocol engine for one chain; the homogeneous chain runs at the time
/// that maximises its end-to-end amplitude.
pub fn protocol_engine(spec: &ChainSpec) -> Result<ProtocolEngine> {
    if spec.model().is_engineered() {
        return ProtocolEngine::new(*spec);
    }
    let opt = FermionEngine::new(spec)?.optimize(DEFAULT_T_MAX / spec.j_scale(), DEFAULT_GRID_POINTS)?;
    ProtocolEngine::from_engine(DenseEngine::new(*spec)?, opt.t_opt)
}

fn random_mixed_qubit(rng: &mut impl Rng) -> Result<SingleQubitState> {
    SingleQubitState::from_density(&random_mixed_state_with(1, 2, rng)?)
}

fn sweep_cell(engine: &ProtocolEngine, family: MediumFamily, cfg: &MediumSweepConfig, seed: u64) -> Result<MediumCell> {
    let spec = engine.spec();
    let mut rng = seeded_rng(seed);
    let mut fids = Vec::new();
    let mut spread: f64 = 0.0;
    for k in 0..cfg.pure_inputs + cfg.mixed_inputs {
        let input = if k < cfg.pure_inputs {
            SingleQubitState::from_density(&random_pure_state_with(1, &mut rng)?.to_density())?
        } else {
            random_mixed_qubit(&mut rng)?
        };
        let medium = family.draw(spec.medium_len(), &mut rng);
        let runs = engine.run_all_outcomes(&input, &medium, k as u64)?;
        // runs: (+,+), (+,-), (-,+), (-,-)
        for (a, b) in [(0, 3), (1, 2)] {
            spread = spread.max((runs[a].output.matrix() - runs[b].output.matrix()).norm());
        }
        fids.extend(runs.iter().map(|r| r.fidelity));
    }
    let min_fidelity = fids.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_fidelity = fids.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean_fidelity = fids.iter().sum::<f64>() / fids.len().max(1) as f64;
    Ok(MediumCell {
        model: spec.model(),
        n_sites: spec.n_sites(),
        medium: family.label(),
        evolution_time: engine.time(),
        runs: fids.len(),
        min_fidelity,
        max_fidelity,
        mean_fidelity,
        product_spread: spread,
    })
}

/// Minimum and mean post-correction fidelity for every `(N, medium)` cell.
/// Each cell has its own seed, so results do not depend on scheduling.
pub fn medium_sweep(cfg: &MediumSweepConfig) -> Result<Vec<MediumCell>> {
    let engines = cfg
        .n_sites
        .iter()
        .map(|&n| protocol_engine(&ChainSpec::new(cfg.model, n, cfg.j_scale, cfg.end_coupling_ratio)?))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<_> = engines
        .iter()
        .flat_map(|e| cfg.media.iter().enumerate().map(move |(mi, f)| (e, mi, *f)))
        .collect();
    jobs.into_par_iter()
        .map(|(e, mi, family)| {
            let seed = mix_seed(cfg.seed, &[e.spec().n_sites() as u64, mi as u64]);
            sweep_cell(e, family, cfg, seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEntropy {
    pub first: usize,
    pub last: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub n_sites: usize,
    pub medium: MediumSpec,
    pub x_expectation: f64,
    /// Entropy of sites `1..=k` for `k = 1..N-1`.
    pub cut_entropies: Vec<f64>,
    /// Entropy of each single site.
    pub site_entropies: Vec<f64>,
    pub first_spin_entropy: f64,
    pub last_spin_entropy: f64,
    /// Operational GHZ proxy: entropy of the last spin, set by `<X>` alone.
    pub ghz_proxy: f64,
    pub intervals: Vec<IntervalEntropy>,
    /// Largest violation of `S(AB) <= S(A) + S(B)` and `|S(A) - S(B)| <= S(AB)`
    /// over adjacent interval pairs; negative when all hold.
    pub subadditivity_violation: f64,
}

/// Entropy structure of the final Ising state before any measurement.
///
/// A Z-product medium uses the closed form; other pure media use dense
/// evolution.
pub fn entanglement_report(spec: &ChainSpec, input: &Vector2<C64>, medium: &MediumSpec) -> Result<EntanglementReport> {
    if spec.model() != ModelKind::IsingEngineered {
        return Err(QstError::UnsupportedModel("entanglement reports use the Ising chain".into()));
    }
    let input_state = SingleQubitState::from_ket(input);
    let psi = match medium {
        MediumSpec::ProductZ { bits } => closed_form_pure(spec, input, bits, TimeDirection::Forward)?,
        _ => match ProtocolEngine::new(*spec)?.evolved_register(&input_state, medium, Outcome::Plus)? {
            Register::Pure(s) => s,
            Register::Mixed(_) => return Err(QstError::invalid("entanglement report needs a pure medium")),
        },
    };
    report_from_state(spec, &psi, input_state.expectation(Pauli::X), medium)
}

fn report_from_state(spec: &ChainSpec, psi: &StateVector, x: f64, medium: &MediumSpec) -> Result<EntanglementReport> {
    let n = spec.n_sites();
    let s = |first: usize, last: usize| -> Result<f64> {
        let keep: Vec<usize> = (first..=last).collect();
        entropy(&psi.reduced(&keep)?)
    };
    let mut intervals = Vec::new();
    for first in 1..=n {
        for last in first..=n {
            intervals.push(IntervalEntropy { first, last, entropy: s(first, last)? });
        }
    }
    let lookup = |a: usize, b: usize| intervals.iter().find(|i| i.first == a && i.last == b).map(|i| i.entropy).unwrap();
    let mut violation = f64::NEG_INFINITY;
    for a in 1..=n {
        for mid in a..n {
            for b in mid + 1..=n {
                let (sa, sb, sab) = (lookup(a, mid), lookup(mid + 1, b), lookup(a, b));
                violation = violation.max(sab - sa - sb).max((sa - sb).abs() - sab);
            }
        }
    }
    let site_entropies: Vec<f64> = (1..=n).map(|k| lookup(k, k)).collect();
    let cut_entropies: Vec<f64> = (1..n).map(|k| lookup(1, k)).collect();
    Ok(EntanglementReport {
        n_sites: n,
        medium: medium.clone(),
        x_expectation: x,
        first_spin_entropy: site_entropies[0],
        last_spin_entropy: site_entropies[n - 1],
        ghz_proxy: site_entropies[n - 1],
        cut_entropies,
        site_entropies,
        intervals,
        subadditivity_violation: violation,
    })
}
