//! Run configuration: one JSON document, command defaults underneath and
//! dotted `key.path=value` overrides on top.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::MediumFamily;
use crate::chain::ChainSpec;
use crate::dense::{SiteGate, IDENTITY_TOL};
use crate::error::{QstError, Result};
use crate::fermion::{DEFAULT_GRID_POINTS, DEFAULT_T_MAX};
use crate::protocol::MediumSpec;
use crate::quantum::linalg::c;
use crate::quantum::measure::{Outcome, OutcomeChoice};
use crate::quantum::{Pauli, SingleQubitState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    VerifyIdentities,
    Run,
    SweepMedium,
    P00Sweep,
    Homogeneous,
    Entangle,
    TripletCheck,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::VerifyIdentities => "verify-identities",
            CommandName::Run => "run",
            CommandName::SweepMedium => "sweep-medium",
            CommandName::P00Sweep => "p00-sweep",
            CommandName::Homogeneous => "homogeneous",
            CommandName::Entangle => "entangle",
            CommandName::TripletCheck => "triplet-check",
        }
    }
}

/// Input qubit to transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>`.
    Bloch { theta: f64, phi: f64 },
    BlochVector { r: [f64; 3] },
    /// One of `zero`, `one`, `plus`, `minus`, `plus_i`, `minus_i`, `mixed`.
    Named { name: String },
    Matrix { state: SingleQubitState },
}

impl InputSpec {
    pub fn state(&self) -> Result<SingleQubitState> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            InputSpec::Bloch { theta, phi } => Ok(SingleQubitState::from_bloch_angles(*theta, *phi)),
            InputSpec::BlochVector { r } => SingleQubitState::from_bloch_vector(*r),
            InputSpec::Matrix { state } => Ok(state.clone()),
            InputSpec::Named { name } => match name.as_str() {
                "zero" => Ok(SingleQubitState::zero()),
                "one" => Ok(SingleQubitState::one()),
                "plus" => Ok(SingleQubitState::plus()),
                "minus" => Ok(SingleQubitState::minus()),
                "plus_i" => SingleQubitState::pure(c(h, 0.0), c(0.0, h)),
                "minus_i" => SingleQubitState::pure(c(h, 0.0), c(0.0, -h)),
                "mixed" => Ok(SingleQubitState::maximally_mixed()),
                other => Err(QstError::invalid(format!("unknown named input '{other}'"))),
            },
        }
    }
}

/// `"sample"`, `1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeSetting(pub OutcomeChoice);

impl Serialize for OutcomeSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            OutcomeChoice::Sample => s.serialize_str("sample"),
            OutcomeChoice::Force(o) => s.serialize_i8(o.value()),
        }
    }
}

impl<'de> Deserialize<'de> for OutcomeSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        let bad = |v: &dyn std::fmt::Display| serde::de::Error::custom(format!("outcome must be \"sample\", 1 or -1, got {v}"));
        match Raw::deserialize(d)? {
            Raw::Int(1) => Ok(Self(OutcomeChoice::Force(Outcome::Plus))),
            Raw::Int(-1) => Ok(Self(OutcomeChoice::Force(Outcome::Minus))),
            Raw::Int(v) => Err(bad(&v)),
            Raw::Str(s) => match s.as_str() {
                "sample" => Ok(Self(OutcomeChoice::Sample)),
                "+1" | "1" => Ok(Self(OutcomeChoice::Force(Outcome::Plus))),
                "-1" => Ok(Self(OutcomeChoice::Force(Outcome::Minus))),
                _ => Err(bad(&s)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeConfig {
    /// Projection of the last spin before evolution.
    pub last: OutcomeSetting,
    /// Measurement of the first spin after evolution.
    pub first: OutcomeSetting,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        Self { last: OutcomeSetting(OutcomeChoice::Sample), first: OutcomeSetting(OutcomeChoice::Sample) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Scan window for the transfer time, units of `1/J`.
    pub t_max: f64,
    pub time_points: usize,
    pub p00_points: usize,
    pub theta_points: usize,
    pub gamma_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_max: DEFAULT_T_MAX, time_points: DEFAULT_GRID_POINTS, p00_points: 11, theta_points: 9, gamma_points: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_sites: Vec<usize>,
    pub media: Vec<MediumFamily>,
    pub pure_inputs: usize,
    pub mixed_inputs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_sites: (3..=8).collect(), media: MediumFamily::standard(), pure_inputs: 20, mixed_inputs: 5 }
    }
}

/// A fixed triplet to check instead of searching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletConfig {
    pub b: Pauli,
    pub c: SiteGate,
    pub d: Pauli,
    /// `(j, k)` for `X`, `Y`, `Z`.
    pub exponents: [(u8, u8); 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// File name stem; defaults to the command name.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandName,
    pub chain: ChainSpec,
    /// Absent means the command's own default medium.
    #[serde(default)]
    pub medium: Option<MediumSpec>,
    #[serde(default = "default_input")]
    pub input: InputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outcomes: OutcomeConfig,
    /// Evolution time override, units of `1/J`.
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub triplet: Option<TripletConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_input() -> InputSpec {
    InputSpec::Named { name: "plus_i".into() }
}

fn default_threshold() -> f64 {
    IDENTITY_TOL
}

impl RunConfig {
    pub fn default_for(command: CommandName) -> Self {
        let chain = match command {
            CommandName::Homogeneous => ChainSpec::xx_homogeneous(100, 0.7),
            _ => ChainSpec::ising(5),
        }
        .expect("valid default chain");
        Self {
            command,
            chain,
            medium: None,
            input: default_input(),
            seed: 0,
            outcomes: OutcomeConfig::default(),
            time: None,
            threshold: default_threshold(),
            grid: GridConfig::default(),
            sweep: SweepConfig::default(),
            triplet: None,
            output: OutputConfig::default(),
        }
    }

    /// Defaults for `command`, then `file` merged over them, then overrides.
    pub fn resolve(command: CommandName, file: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(Self::default_for(command)).map_err(json_err)?;
        if let Some(text) = file {
            let user: Value =
                serde_json::from_str(text).map_err(|e| QstError::invalid(format!("config is not valid JSON: {e}")))?;
            if let Some(name) = user.get("command") {
                if name != command.as_str() {
                    return Err(QstError::invalid(format!(
                        "config is for command {name} but {} was invoked",
                        command.as_str()
                    )));
                }
            }
            // A new chain model replaces, rather than merges with, the default chain.
            if let (Some(chain), Some(obj)) = (user.get("chain"), doc.as_object_mut()) {
                if chain.get("model").is_some() {
                    obj.insert("chain".into(), Value::Object(Default::default()));
                }
            }
            merge(&mut doc, user);
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| QstError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(QstError::invalid("threshold must be positive"));
        }
        if let Some(t) = self.time {
            if !t.is_finite() {
                return Err(QstError::invalid("time must be finite"));
            }
        }
        if !(self.grid.t_max > 0.0) || self.grid.time_points < 2 {
            return Err(QstError::invalid("grid needs t_max > 0 and at least 2 time points"));
        }
        if self.grid.p00_points < 2 || self.grid.theta_points < 2 || self.grid.gamma_points < 2 {
            return Err(QstError::invalid("p00, theta and gamma grids need at least 2 points"));
        }
        if let Some(stem) = &self.output.stem {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                return Err(QstError::invalid("output stem must be a plain file name"));
            }
        }
        self.input.state()?;
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| self.command.as_str().to_string())
    }
}

fn json_err(e: serde_json::Error) -> QstError {
    QstError::invalid(format!("config serialisation: {e}"))
}

/// Recursive object merge; non-objects in `top` replace whatever is below,
/// as does a tagged object whose `kind` differs from the one below.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if t.get("kind").is_none_or(|k| b.get("kind") == Some(k)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is parsed as JSON when possible, else taken as a
/// string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| QstError::invalid(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(QstError::invalid(format!("override path '{path}' has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    for k in &keys {
        if !slot.is_object() {
            *slot = Value::Object(Default::default());
        }
        slot = slot.as_object_mut().expect("object").entry(k.to_string()).or_insert(Value::Null);
    }
    *slot = value;
    Ok(())
}
