//! Perfect quantum state transfer across engineered spin chains whose
//! interior spins may start in any unknown, possibly mixed, state.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: dense register algebra, Pauli strings, states, measurement.
//! - [`chain`]: the engineered Ising and XX Hamiltonians and their profiles.
//! - [`dense`]: exact propagators, Heisenberg evolution and the two-site
//!   operator swap identities.
//! - [`fermion`]: single-excitation propagators for long XX chains.
//! - [`protocol`]: the measure-evolve-measure-correct transfer protocol and
//!   closed-form output states.
//! - [`analysis`]: sweeps and entanglement reports.
//! - [`cli`]: configuration and report emission behind the `qst` binary.

// `!(x < tol)` rejects NaN as well as large values; keep that form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chain;
pub mod cli;
pub mod dense;
pub mod error;
pub mod fermion;
pub mod protocol;
pub mod quantum;

pub use error::{QstError, Result};
