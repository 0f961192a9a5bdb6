//! Discrete metric problem: `m_μ(·, x, ω)` as a Finsler shortest-path
//! distance over a stencil graph, and the reversed twin `n_μ`.

pub mod checks;
pub mod lattice;
pub mod solver;

pub use checks::{
    check_duality, check_maximality_affine, check_mu_monotonicity, check_subadditivity,
    check_subadditivity_triples, mu_continuity_ladder, AffineReport, IdentityReport, MonotonicityReport,
};
pub use lattice::{Lattice, Stencil};
pub use solver::{
    edge_cost, solve_metric, CostModel, Direction, MetricField, MetricOptions, MetricProblem, MetricSummary, SupportSource,
};
