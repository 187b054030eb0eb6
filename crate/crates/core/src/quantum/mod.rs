//! Qubit-register primitives: dense algebra, Pauli strings, states and
//! measurements.

pub mod linalg;
pub mod measure;
pub mod pauli;
pub mod state;

pub use linalg::{kron, kron_limited, HermitianSpectrum, Ket, Operator, Qubit2, C64};
pub use measure::{projective_measure, Measurable, Measurement, MeasurementBasis, Outcome, OutcomeChoice};
pub use pauli::{t_gate, t_power, Pauli, PauliString, Phase};
pub use state::{
    binary_entropy, entropy, partial_trace, random_mixed_state, random_pure_state, seeded_rng,
    state_fidelity, thermal_state, trace_distance, uhlmann_fidelity, DensityMatrix, SingleQubitState,
    StateVector,
};
