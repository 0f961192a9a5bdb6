use approx::assert_relative_eq;
use proptest::prelude::*;

use homog_core::metric::MetricProblem;
use homog_core::stats::summarize;
use homog_core::{Direction, EnvSpec, Environment, FieldKind, HamiltonianFamily, Lattice, Stencil, Vec2};

fn family() -> impl Strategy<Value = HamiltonianFamily> {
    prop_oneof![
        Just(HamiltonianFamily::Eikonal),
        (0.3f64..3.0).prop_map(|gamma| HamiltonianFamily::Power { gamma }),
        ((-0.5f64..0.5), (-0.5f64..0.5), (0.0f64..1.0))
            .prop_map(|(x, y, modulation)| HamiltonianFamily::Drift { drift: Vec2::new(x, y), modulation }),
        (0.5f64..3.0).prop_map(|kappa| HamiltonianFamily::Aniso { kappa }),
    ]
}

fn vec2(r: f64) -> impl Strategy<Value = Vec2> {
    ((-r..r), (-r..r)).prop_map(|(x, y)| Vec2::new(x, y))
}

fn board(seed: u64, dim: usize) -> Environment {
    Environment::new(EnvSpec {
        kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.5, 1.0, 2.0], mollify: None },
        seed,
        dim,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hamiltonians_are_quasiconvex(f in family(), p in vec2(3.0), q in vec2(3.0), t in 0.0f64..1.0, v in 0.5f64..2.0) {
        let mid = f.h(p * (1.0 - t) + q * t, v);
        prop_assert!(mid <= f.h(p, v).max(f.h(q, v)) + 1e-12);
    }

    #[test]
    fn support_functions_are_sublinear(f in family(), q in vec2(2.0), r in vec2(2.0), s in 0.0f64..5.0, v in 0.5f64..2.0, mu in 0.1f64..2.0) {
        let sig = |x: Vec2| f.analytic_support(v, mu, x).unwrap();
        assert_relative_eq!(sig(q * s), s * sig(q), epsilon = 1e-12, max_relative = 1e-12);
        prop_assert!(sig(q + r) <= sig(q) + sig(r) + 1e-12);
    }

    #[test]
    fn support_bounds_the_sublevel_set(f in family(), p in vec2(3.0), q in vec2(1.0), v in 0.5f64..2.0, mu in 0.1f64..2.0) {
        // every p in {H ≤ μ} satisfies p·q ≤ σ(q)
        if f.h(p, v) <= mu {
            prop_assert!(p.dot(q) <= f.analytic_support(v, mu, q).unwrap() + 1e-12);
        }
    }

    #[test]
    fn cell_values_belong_to_the_value_set(seed in any::<u64>(), y in vec2(1e4)) {
        let v = board(seed, 2).value(y);
        prop_assert!([0.5, 1.0, 2.0].contains(&v));
    }

    #[test]
    fn metric_is_subadditive_and_reverses(seed in 0u64..1000, f in family(), a in 0usize..169, b in 0usize..169) {
        let env = board(seed, 2);
        let lattice = Lattice::centered(0.5, 6, Stencil::new(2, 2).unwrap()).unwrap();
        let mu = 1.0;
        let fwd = |s| MetricProblem::new(&lattice, &f, &env, mu).solve(s).unwrap();
        let (from_a, from_b) = (fwd(a), fwd(b));
        for z in 0..lattice.len() {
            let rhs = from_a.values[b] + from_b.values[z];
            prop_assert!(from_a.values[z] <= rhs * (1.0 + 1e-12) + 1e-12);
        }
        let back = MetricProblem::new(&lattice, &f, &env, mu).with_direction(Direction::Reversed).solve(a).unwrap();
        assert_relative_eq!(back.values[b], from_b.values[a], max_relative = 1e-12, epsilon = 1e-12);
    }

    #[test]
    fn metric_grows_with_the_level(seed in 0u64..1000, f in family(), above in 0.0f64..1.0, gap in 0.0f64..1.0) {
        let env = board(seed, 2);
        // levels start at the admissible floor sup H(0, ·)
        let lo = [0.5, 1.0, 2.0].iter().map(|&v| f.h(Vec2::ZERO, v)).fold(0.0, f64::max) + 1e-3 + above;
        let lattice = Lattice::centered(0.5, 5, Stencil::new(1, 2).unwrap()).unwrap();
        let s = lattice.index(0, 0).unwrap();
        let a = MetricProblem::new(&lattice, &f, &env, lo).solve(s).unwrap();
        let b = MetricProblem::new(&lattice, &f, &env, lo + gap).solve(s).unwrap();
        for n in 0..lattice.len() {
            prop_assert!(a.values[n] <= b.values[n] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn summary_interval_contains_the_mean(xs in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let s = summarize(&xs);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-12 && s.mean <= hi + 1e-12);
        prop_assert!(s.stderr >= 0.0 && s.ci >= s.stderr);
        prop_assert!(s.stderr <= (hi - lo) + 1e-12);
    }
}
