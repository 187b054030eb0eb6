//! Projective single-site measurements with Born-rule sampling.

use std::fmt;

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{apply_site_ket, c, check_site, conjugate_site, trace, Qubit2, C64, ONE, ZERO};
use super::state::{DensityMatrix, StateVector};
use crate::error::{QstError, Result};

/// Forcing an outcome below this probability is an error.
pub const MIN_FORCED_PROBABILITY: f64 = 1e-12;

/// Measurement result: `+1` for the first basis vector, `-1` for the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_sign(v: i8) -> Option<Outcome> {
        match v {
            1 => Some(Outcome::Plus),
            -1 => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn flip(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn product(self, other: Outcome) -> Outcome {
        if self == other {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        Outcome::from_sign(v).ok_or_else(|| format!("outcome must be +1 or -1, got {v}"))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

/// Either draw the outcome from the Born rule or post-select one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeChoice {
    Sample,
    Force(Outcome),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementBasis {
    Z,
    X,
    /// Orthonormal pair; outcome `+1` is `plus`.
    Custom { plus: Vector2<C64>, minus: Vector2<C64> },
}

impl MeasurementBasis {
    pub fn custom(plus: Vector2<C64>, minus: Vector2<C64>) -> Result<Self> {
        let basis = MeasurementBasis::Custom { plus, minus };
        basis.vectors()?;
        Ok(basis)
    }

    pub fn vectors(&self) -> Result<(Vector2<C64>, Vector2<C64>)> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            MeasurementBasis::Z => Ok((Vector2::new(ONE, ZERO), Vector2::new(ZERO, ONE))),
            MeasurementBasis::X => Ok((
                Vector2::new(c(h, 0.0), c(h, 0.0)),
                Vector2::new(c(h, 0.0), c(-h, 0.0)),
            )),
            MeasurementBasis::Custom { plus, minus } => {
                let err = (plus.norm_squared() - 1.0)
                    .abs()
                    .max((minus.norm_squared() - 1.0).abs())
                    .max(plus.dotc(minus).norm());
                if err > 1e-10 {
                    return Err(QstError::invalid(format!(
                        "custom basis is not orthonormal (error {err:.3e})"
                    )));
                }
                Ok((*plus, *minus))
            }
        }
    }

    pub fn vector(&self, outcome: Outcome) -> Result<Vector2<C64>> {
        let (p, m) = self.vectors()?;
        Ok(match outcome {
            Outcome::Plus => p,
            Outcome::Minus => m,
        })
    }

    pub fn projector(&self, outcome: Outcome) -> Result<Qubit2> {
        let v = self.vector(outcome)?;
        Ok(v * v.adjoint())
    }
}

#[derive(Debug, Clone)]
pub struct Measurement<S> {
    pub outcome: Outcome,
    pub probability: f64,
    pub post_state: S,
}

/// States that support single-site projection.
pub trait Measurable: Sized {
    fn register_size(&self) -> usize;
    /// Unnormalised projection and its Born weight.
    fn project(&self, site: usize, projector: &Qubit2) -> (f64, Self);
    fn rescale(self, probability: f64) -> Self;
}

impl Measurable for StateVector {
    fn register_size(&self) -> usize {
        self.n_qubits()
    }

    fn project(&self, site: usize, projector: &Qubit2) -> (f64, Self) {
        let out = apply_site_ket(self.amplitudes(), self.n_qubits(), site, projector);
        let p = out.norm_squared();
        (p, StateVector::from_trusted(out))
    }

    fn rescale(self, probability: f64) -> Self {
        let s = C64::new(1.0 / probability.sqrt(), 0.0);
        StateVector::from_trusted(self.into_amplitudes() * s)
    }
}

impl Measurable for DensityMatrix {
    fn register_size(&self) -> usize {
        self.n_qubits()
    }

    fn project(&self, site: usize, projector: &Qubit2) -> (f64, Self) {
        let out = conjugate_site(self.matrix(), self.n_qubits(), site, projector);
        let p = trace(&out).re;
        (p, DensityMatrix::from_trusted(out))
    }

    fn rescale(self, probability: f64) -> Self {
        let s = C64::new(1.0 / probability, 0.0);
        DensityMatrix::from_trusted(self.into_matrix() * s)
    }
}

/// Measure `site` (1-based) in `basis`.
pub fn projective_measure<S: Measurable>(
    state: &S,
    site: usize,
    basis: &MeasurementBasis,
    choice: OutcomeChoice,
    rng: &mut impl Rng,
) -> Result<Measurement<S>> {
    check_site(state.register_size(), site)?;
    let (p_plus, post_plus) = state.project(site, &basis.projector(Outcome::Plus)?);
    let (p_minus, post_minus) = state.project(site, &basis.projector(Outcome::Minus)?);
    let outcome = match choice {
        OutcomeChoice::Force(o) => o,
        OutcomeChoice::Sample => {
            let u: f64 = rng.random();
            if u * (p_plus + p_minus) < p_plus {
                Outcome::Plus
            } else {
                Outcome::Minus
            }
        }
    };
    let (probability, post) = match outcome {
        Outcome::Plus => (p_plus, post_plus),
        Outcome::Minus => (p_minus, post_minus),
    };
    if probability < MIN_FORCED_PROBABILITY {
        return Err(QstError::ZeroProbability { outcome: outcome.value(), probability });
    }
    Ok(Measurement {
        outcome,
        probability,
        post_state: post.rescale(probability),
    })
}
