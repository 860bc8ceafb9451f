//! Simulation of three-qubit gates built from simultaneous two-qubit
//! interactions on chains of transmons: analytic gate families, effective
//! Hamiltonians, state preparation, pulse-level device models and
//! calibration sweeps.

pub mod error;
pub mod qudit;
pub mod gates;
pub mod effective;
pub mod state_prep;
pub mod pulse;
pub mod sweeps;
pub mod config;

pub use error::{AlgebraError, ConfigError, GateError, SimError};
pub use num_complex::Complex64 as C64;
