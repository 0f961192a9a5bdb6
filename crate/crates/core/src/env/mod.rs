//! Hamiltonian families and stationary ergodic environments.

pub mod family;
pub mod field;
pub mod hypotheses;

pub use family::HamiltonianFamily;
pub use field::{EnvSpec, Environment, FieldKind, ValueRange};
pub use hypotheses::{hypothesis_report, perturbation_tolerance, validate_hypotheses, HypothesisCheck, HypothesisReport};
