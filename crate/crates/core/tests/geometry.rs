//! Fan-sampled sublevel geometry against the closed-form support functions.

use homog_core::metric::{MetricProblem, SupportSource};
use homog_core::{EnvSpec, Environment, Fan, FieldKind, HamiltonianFamily, Lattice, Stencil, SublevelGeometry, Vec2, ValueRange};

fn families() -> Vec<HamiltonianFamily> {
    vec![
        HamiltonianFamily::Eikonal,
        HamiltonianFamily::Power { gamma: 0.5 },
        HamiltonianFamily::Power { gamma: 2.0 },
        HamiltonianFamily::Drift { drift: Vec2::new(0.3, -0.2), modulation: 0.5 },
        HamiltonianFamily::Aniso { kappa: 2.0 },
    ]
}

#[test]
fn sampled_support_matches_closed_form() {
    let range = ValueRange { min: 0.5, max: 2.0 };
    for family in families() {
        for v in [0.5, 1.0, 2.0] {
            for mu in [0.3, 1.0] {
                let fan = Fan::uniform(256, 2);
                let g = SublevelGeometry::build_for_value(&family, v, range, mu, &fan).unwrap();
                assert!(g.boundary_error() < 1e-7, "{family:?}: boundary error {}", g.boundary_error());
                assert!(g.midpoint_excess() < 1e-7);
                for &e in fan.directions() {
                    let exact = family.analytic_support(v, mu, e).unwrap();
                    assert!((g.support(e) - exact).abs() < 1e-6 * exact.max(1.0), "{family:?} at {e:?}");
                }
                for k in 0..97 {
                    let q = Vec2::from_angle(0.123 + k as f64 * 0.0647);
                    let exact = family.analytic_support(v, mu, q).unwrap();
                    let got = g.support(q);
                    assert!(got <= exact + 1e-6 * exact.max(1.0));
                    assert!(got >= exact - 2e-3 * exact.max(1.0), "{family:?} at {q:?}: {got} vs {exact}");
                }
                let r = g.reversed();
                for k in 0..16 {
                    let q = Vec2::from_angle(0.4 * k as f64);
                    assert_eq!(r.support(q), g.support(-q));
                }
            }
        }
    }
}

#[test]
fn one_dimensional_geometry_is_exact() {
    let range = ValueRange { min: 0.0, max: 1.0 };
    let family = HamiltonianFamily::Drift { drift: Vec2::on_axis(0.3), modulation: 0.5 };
    let g = SublevelGeometry::build_for_value(&family, 1.0, range, 0.2, &Fan::uniform(2, 1)).unwrap();
    for s in [1.0, -1.0] {
        let exact = family.analytic_support(1.0, 0.2, Vec2::on_axis(s)).unwrap();
        assert!((g.support(Vec2::on_axis(s)) - exact).abs() < 1e-8);
    }
}

#[test]
fn fan_metric_agrees_with_closed_form_metric() {
    let env = Environment::new(EnvSpec {
        kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: None },
        seed: 11,
        dim: 2,
    })
    .unwrap();
    for family in [HamiltonianFamily::Power { gamma: 1.0 }, HamiltonianFamily::Drift { drift: Vec2::new(0.3, 0.0), modulation: 0.5 }] {
        let lattice = Lattice::centered(0.5, 16, Stencil::new(2, 2).unwrap()).unwrap();
        let source = lattice.index(0, 0).unwrap();
        let analytic = MetricProblem::new(&lattice, &family, &env, 1.0).solve(source).unwrap();
        let fan = MetricProblem::new(&lattice, &family, &env, 1.0).with_support(SupportSource::Fan { dirs: 48 }).solve(source).unwrap();
        for n in 0..lattice.len() {
            let (a, b) = (analytic.values[n], fan.values[n]);
            assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{family:?} node {n}: {a} vs {b}");
        }
    }
}
