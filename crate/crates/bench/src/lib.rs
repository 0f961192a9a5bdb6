//! Shared fixtures for the kernel benchmarks.

use homog_core::{EnvSpec, Environment, FieldKind, HamiltonianFamily, Lattice, Stencil};

/// Two-valued random checkerboard with unit cells.
pub fn checkerboard(seed: u64, dim: usize) -> Environment {
    Environment::new(EnvSpec {
        kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: None },
        seed,
        dim,
    })
    .expect("valid checkerboard")
}

pub fn linear_power() -> HamiltonianFamily {
    HamiltonianFamily::Power { gamma: 1.0 }
}

/// Square lattice with `side` nodes per axis and spacing 1.
pub fn square(side: i64, radius: u32) -> Lattice {
    Lattice::centered(1.0, side / 2, Stencil::new(radius, 2).expect("valid stencil")).expect("valid lattice")
}
