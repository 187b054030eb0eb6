//! Chain Hamiltonians: an engineered transverse-field Ising chain, an
//! engineered XX chain and a homogeneous XX chain with weakened end bonds.
//!
//! Energies are in units of the scale `J` and times in units of `1/J`
//! (`ħ = 1`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::quantum::linalg::{c, Operator};
use crate::quantum::{Pauli, PauliString};

/// Default cap on dense register width for Hamiltonian construction.
pub const DEFAULT_DENSE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `Σ J_i Z_i Z_{i+1} + Σ B_i X_i`.
    IsingEngineered,
    /// `Σ K_i (X_i X_{i+1} + Y_i Y_{i+1})`.
    XxEngineered,
    /// XX chain with uniform bulk coupling and modified end bonds.
    XxHomogeneous,
}

impl ModelKind {
    pub fn is_engineered(self) -> bool {
        matches!(self, ModelKind::IsingEngineered | ModelKind::XxEngineered)
    }

    pub fn is_xx(self) -> bool {
        matches!(self, ModelKind::XxEngineered | ModelKind::XxHomogeneous)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::IsingEngineered => "ising_engineered",
            ModelKind::XxEngineered => "xx_engineered",
            ModelKind::XxHomogeneous => "xx_homogeneous",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainSpec {
    model: ModelKind,
    n_sites: usize,
    #[serde(default = "default_j")]
    j_scale: f64,
    #[serde(default)]
    end_coupling_ratio: Option<f64>,
}

fn default_j() -> f64 {
    1.0
}

/// Model, chain length and energy scale; fully determines a Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChainSpec")]
pub struct ChainSpec {
    model: ModelKind,
    n_sites: usize,
    j_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    end_coupling_ratio: Option<f64>,
}

impl TryFrom<RawChainSpec> for ChainSpec {
    type Error = QstError;
    fn try_from(r: RawChainSpec) -> Result<Self> {
        ChainSpec::new(r.model, r.n_sites, r.j_scale, r.end_coupling_ratio)
    }
}

impl ChainSpec {
    pub fn new(model: ModelKind, n_sites: usize, j_scale: f64, end_coupling_ratio: Option<f64>) -> Result<Self> {
        if n_sites < 2 {
            return Err(QstError::invalid(format!("chain needs at least 2 sites, got {n_sites}")));
        }
        if !(j_scale > 0.0) || !j_scale.is_finite() {
            return Err(QstError::invalid(format!("energy scale must be positive, got {j_scale}")));
        }
        match (model, end_coupling_ratio) {
            (ModelKind::XxHomogeneous, Some(r)) if r > 0.0 && r.is_finite() => {}
            (ModelKind::XxHomogeneous, Some(r)) => {
                return Err(QstError::invalid(format!("end coupling ratio must be positive, got {r}")))
            }
            (ModelKind::XxHomogeneous, None) => {
                return Err(QstError::invalid("xx_homogeneous requires end_coupling_ratio"))
            }
            (_, Some(_)) => {
                return Err(QstError::invalid("end_coupling_ratio only applies to xx_homogeneous"))
            }
            (_, None) => {}
        }
        Ok(Self { model, n_sites, j_scale, end_coupling_ratio })
    }

    pub fn ising(n_sites: usize) -> Result<Self> {
        Self::new(ModelKind::IsingEngineered, n_sites, 1.0, None)
    }

    pub fn xx(n_sites: usize) -> Result<Self> {
        Self::new(ModelKind::XxEngineered, n_sites, 1.0, None)
    }

    pub fn xx_homogeneous(n_sites: usize, ratio: f64) -> Result<Self> {
        Self::new(ModelKind::XxHomogeneous, n_sites, 1.0, Some(ratio))
    }

    pub fn with_scale(self, j_scale: f64) -> Result<Self> {
        Self::new(self.model, self.n_sites, j_scale, self.end_coupling_ratio)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn j_scale(&self) -> f64 {
        self.j_scale
    }

    pub fn end_coupling_ratio(&self) -> Option<f64> {
        self.end_coupling_ratio
    }

    /// Sites `2..=N-1`.
    pub fn medium_len(&self) -> usize {
        self.n_sites - 2
    }

    /// Mirror partner `N - i + 1` of site `i`.
    pub fn mirror(&self, site: usize) -> usize {
        self.n_sites + 1 - site
    }
}

/// Bond couplings (`N-1` entries) and local fields (`N` entries, empty for
/// XX models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub couplings: Vec<f64>,
    pub fields: Vec<f64>,
}

impl CouplingProfile {
    pub fn is_mirror_symmetric(&self) -> bool {
        let sym = |v: &[f64]| v.iter().zip(v.iter().rev()).all(|(a, b)| a == b);
        sym(&self.couplings) && sym(&self.fields)
    }
}

// Integer radicands keep the mirror-image entries bit-identical.
fn sqrt_int(v: u64) -> f64 {
    (v as f64).sqrt()
}

pub fn coupling_profile(spec: &ChainSpec) -> CouplingProfile {
    let n = spec.n_sites as u64;
    let j = spec.j_scale;
    match spec.model {
        ModelKind::IsingEngineered => CouplingProfile {
            couplings: (1..n).map(|i| j * sqrt_int(4 * i * (n - i))).collect(),
            fields: (1..=n).map(|i| j * sqrt_int((2 * i - 1) * (2 * n - 2 * i + 1))).collect(),
        },
        ModelKind::XxEngineered => CouplingProfile {
            couplings: (1..n).map(|i| j * sqrt_int(i * (n - i))).collect(),
            fields: Vec::new(),
        },
        ModelKind::XxHomogeneous => {
            let ratio = spec.end_coupling_ratio.expect("validated homogeneous spec");
            let bonds = spec.n_sites - 1;
            let couplings = (0..bonds)
                .map(|b| if b == 0 || b == bonds - 1 { ratio * j } else { j })
                .collect();
            CouplingProfile { couplings, fields: Vec::new() }
        }
    }
}

/// One weighted Pauli term of a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub coefficient: f64,
    pub op: PauliString,
}

pub fn hamiltonian_terms(spec: &ChainSpec) -> Vec<HamiltonianTerm> {
    let n = spec.n_sites;
    let profile = coupling_profile(spec);
    let term = |coefficient, ops: &[(usize, Pauli)]| HamiltonianTerm {
        coefficient,
        op: PauliString::on_sites(n, ops).expect("sites within chain"),
    };
    let mut terms = Vec::new();
    for (b, &k) in profile.couplings.iter().enumerate() {
        let (i, j) = (b + 1, b + 2);
        if spec.model.is_xx() {
            terms.push(term(k, &[(i, Pauli::X), (j, Pauli::X)]));
            terms.push(term(k, &[(i, Pauli::Y), (j, Pauli::Y)]));
        } else {
            terms.push(term(k, &[(i, Pauli::Z), (j, Pauli::Z)]));
        }
    }
    for (s, &b) in profile.fields.iter().enumerate() {
        terms.push(term(b, &[(s + 1, Pauli::X)]));
    }
    terms
}

/// Terms supported entirely on sites `first..=last`, restricted to that block.
pub fn restricted_terms(spec: &ChainSpec, first: usize, last: usize) -> Vec<HamiltonianTerm> {
    hamiltonian_terms(spec)
        .into_iter()
        .filter(|t| {
            t.op.letters
                .iter()
                .enumerate()
                .all(|(k, &p)| p == Pauli::I || (first..=last).contains(&(k + 1)))
        })
        .map(|t| HamiltonianTerm {
            coefficient: t.coefficient,
            op: PauliString::new(t.op.phase, t.op.letters[first - 1..last].to_vec()),
        })
        .collect()
}

pub fn assemble(terms: &[HamiltonianTerm], n_qubits: usize) -> Operator {
    let dim = 1usize << n_qubits;
    let mut h = Operator::zeros(dim, dim);
    for t in terms {
        t.op.accumulate_into(&mut h, c(t.coefficient, 0.0));
    }
    h
}

pub fn build_hamiltonian(spec: &ChainSpec) -> Result<Operator> {
    build_hamiltonian_limited(spec, DEFAULT_DENSE_LIMIT)
}

pub fn build_hamiltonian_limited(spec: &ChainSpec, max_qubits: usize) -> Result<Operator> {
    if spec.n_sites > max_qubits {
        return Err(QstError::ResourceLimit { qubits: spec.n_sites, max: max_qubits });
    }
    Ok(assemble(&hamiltonian_terms(spec), spec.n_sites))
}

/// `t* = π / (4J)` for the engineered models.
pub fn critical_time(spec: &ChainSpec) -> Result<f64> {
    if !spec.model.is_engineered() {
        return Err(QstError::UnsupportedModel(format!(
            "{} has no closed-form transfer time",
            spec.model
        )));
    }
    Ok(PI / (4.0 * spec.j_scale))
}
