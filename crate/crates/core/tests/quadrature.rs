//! 1-D metric against exact cell-by-cell integration of the support function.

use homog_core::env::field::cell_hash;
use homog_core::metric::MetricProblem;
use homog_core::{Direction, EnvSpec, Environment, FieldKind, HamiltonianFamily, Lattice, Stencil, Vec2};

const VALUES: [f64; 3] = [0.0, 0.5, 2.0];

/// `∫₀ˣ σ(V(s), sign)` using the unit cells `[k − o, k + 1 − o)`.
fn exact(seed: u64, origin: f64, x: f64, sigma: &dyn Fn(f64, f64) -> f64) -> f64 {
    let sign = x.signum();
    let (a, b) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
    let mut total = 0.0;
    let mut k = (a + origin).floor();
    while k - origin < b {
        let lo = (k - origin).max(a);
        let hi = (k + 1.0 - origin).min(b);
        let v = VALUES[(cell_hash(seed, k as i64, 0) % VALUES.len() as u64) as usize];
        total += (hi - lo) * sigma(v, sign);
        k += 1.0;
    }
    total
}

fn check(family: HamiltonianFamily, mu: f64, sigma: &dyn Fn(f64, f64) -> f64) {
    for seed in [1u64, 77, 4242] {
        let env = Environment::new(EnvSpec {
            kind: FieldKind::Checkerboard { cell: 1.0, values: VALUES.to_vec(), mollify: None },
            seed,
            dim: 1,
        })
        .unwrap();
        let lattice = Lattice::centered(0.3, 400, Stencil::new(1, 1).unwrap()).unwrap();
        let source = lattice.index(0, 0).unwrap();
        for direction in [Direction::Forward, Direction::Reversed] {
            let field = MetricProblem::new(&lattice, &family, &env, mu).with_direction(direction).solve(source).unwrap();
            let flip = if direction == Direction::Reversed { -1.0 } else { 1.0 };
            for n in (0..lattice.len()).step_by(7) {
                let x = lattice.position(n).x;
                let want = exact(seed, env.origin().x, x, &|v, s| sigma(v, flip * s));
                let got = field.values[n];
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{family:?} seed {seed} x {x}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn power_family_integrates_exactly() {
    for gamma in [0.5, 1.0, 2.0] {
        let mu = 0.4;
        check(HamiltonianFamily::Power { gamma }, mu, &|v, _| (mu + v).powf(1.0 / gamma));
    }
}

#[test]
fn drift_family_integrates_exactly_in_both_directions() {
    let (b, m, mu) = (0.3, 0.5, 0.6);
    check(HamiltonianFamily::Drift { drift: Vec2::on_axis(b), modulation: m }, mu, &|v, s| {
        s * b * (1.0 + m * v) + (mu + v)
    });
}

#[test]
fn eikonal_family_integrates_exactly() {
    // zero speed would make every cost infinite
    let mu = 1.3;
    let family = HamiltonianFamily::Eikonal;
    for seed in [3u64, 9] {
        let values = [0.5, 1.0, 2.5];
        let env = Environment::new(EnvSpec {
            kind: FieldKind::Checkerboard { cell: 1.0, values: values.to_vec(), mollify: None },
            seed,
            dim: 1,
        })
        .unwrap();
        let lattice = Lattice::centered(0.25, 300, Stencil::new(1, 1).unwrap()).unwrap();
        let field = MetricProblem::new(&lattice, &family, &env, mu).solve(lattice.index(0, 0).unwrap()).unwrap();
        let o = env.origin().x;
        for n in (0..lattice.len()).step_by(5) {
            let x = lattice.position(n).x;
            let (a, b) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
            let mut want = 0.0;
            let mut k = (a + o).floor();
            while k - o < b {
                let c = values[(cell_hash(seed, k as i64, 0) % 3) as usize];
                want += ((k + 1.0 - o).min(b) - (k - o).max(a)) * mu / c;
                k += 1.0;
            }
            assert!((field.values[n] - want).abs() <= 1e-12 * want.max(1.0));
        }
    }
}
