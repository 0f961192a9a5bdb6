//! The lattice metric of a constant medium against a brute-force search
//! over two-offset decompositions of each displacement.

use homog_core::metric::MetricProblem;
use homog_core::{EnvSpec, Environment, FieldKind, HamiltonianFamily, Lattice, Stencil, Vec2};

/// `min a|u| + b|v|` over offset pairs with `a u + b v = y`, `a, b ≥ 0`.
fn decomposition_cost(offsets: &[(i64, i64)], y: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for &(ux, uy) in offsets {
        let u = Vec2::new(ux as f64, uy as f64);
        // a single offset
        let cross = u.x * y.y - u.y * y.x;
        if cross.abs() < 1e-12 && u.dot(y) > 0.0 {
            best = best.min(y.norm());
        }
        for &(vx, vy) in offsets {
            let v = Vec2::new(vx as f64, vy as f64);
            let det = u.x * v.y - u.y * v.x;
            if det.abs() < 1e-12 {
                continue;
            }
            let a = (y.x * v.y - y.y * v.x) / det;
            let b = (u.x * y.y - u.y * y.x) / det;
            if a >= -1e-12 && b >= -1e-12 {
                best = best.min(a.max(0.0) * u.norm() + b.max(0.0) * v.norm());
            }
        }
    }
    best
}

fn constant() -> Environment {
    Environment::new(EnvSpec {
        kind: FieldKind::Checkerboard { cell: 1.0, values: vec![1.0], mollify: None },
        seed: 0,
        dim: 2,
    })
    .unwrap()
}

#[test]
fn lattice_metric_equals_best_decomposition() {
    let env = constant();
    for radius in 1..=3 {
        let lattice = Lattice::centered(1.0, 20, Stencil::new(radius, 2).unwrap()).unwrap();
        let field =
            MetricProblem::new(&lattice, &HamiltonianFamily::Eikonal, &env, 1.0).solve(lattice.index(0, 0).unwrap()).unwrap();
        for n in 0..lattice.len() {
            let y = lattice.position(n);
            if y.norm() == 0.0 {
                continue;
            }
            let brute = decomposition_cost(lattice.stencil().offsets(), y);
            assert!((field.values[n] - brute).abs() <= 1e-12 * brute, "radius {radius} at {y:?}: {} vs {brute}", field.values[n]);
        }
    }
}

#[test]
fn certified_factor_is_the_worst_decomposition_ratio() {
    for (radius, rounded) in [(1u32, 1.082), (2, 1.027), (3, 1.013)] {
        let s = Stencil::new(radius, 2).unwrap();
        let mut worst: f64 = 1.0;
        let n = 200_000;
        for k in 0..n {
            let e = Vec2::from_angle(std::f64::consts::TAU * k as f64 / n as f64);
            worst = worst.max(decomposition_cost(s.offsets(), e));
        }
        assert!((worst - s.anisotropy_factor()).abs() < 1e-6, "radius {radius}: {worst} vs {}", s.anisotropy_factor());
        assert!((s.anisotropy_factor() - rounded).abs() < 5e-4);
    }
}
