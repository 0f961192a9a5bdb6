//! Effective Hamiltonians of level-set convex, coercive, stationary-ergodic
//! Hamilton-Jacobi equations.
//!
//! The pipeline: [`env`] evaluates `H(p, y, ω)`; [`convexgeom`] turns its
//! sublevel sets into support functions; [`metric`] solves the metric
//! problem as a Finsler shortest path; [`shape`] estimates the limit shape
//! `m̄_μ`; [`effective`] inverts the sublevel-set duality to recover `H̄`;
//! [`macroscopic`] cross-validates through the discounted cell problem.

pub mod config;
pub mod convexgeom;
pub mod effective;
pub mod env;
pub mod error;
pub mod io;
pub mod macroscopic;
pub mod metric;
pub mod shape;
pub mod stats;
pub mod vec2;

pub use config::RunConfig;
pub use convexgeom::{Fan, GeometryCache, SublevelGeometry};
pub use effective::{EffectiveTable, TableEntry};
pub use env::{EnvSpec, Environment, FieldKind, HamiltonianFamily, ValueRange};
pub use error::{Error, ErrorClass, Result};
pub use macroscopic::MacroSolution;
pub use metric::{Direction, Lattice, MetricField, Stencil};
pub use shape::ShapeEstimate;
pub use vec2::Vec2;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
