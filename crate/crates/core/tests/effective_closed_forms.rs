use homog_core::effective::{reconstruct_table, EffectiveOptions};
use homog_core::{Direction, EnvSpec, FieldKind, HamiltonianFamily, Vec2};

/// Root of `½(√μ + √(μ + 2)) = |p|` by bisection; zero on the flat part.
fn quadratic_oracle(p: f64) -> f64 {
    let mean = |mu: f64| 0.5 * (mu.sqrt() + (mu + 2.0).sqrt());
    if p.abs() <= mean(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, p * p);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < p.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn oracle_reproduces_hand_values() {
    assert!((quadratic_oracle(1.5) - 49.0 / 36.0).abs() < 1e-12);
    assert!((quadratic_oracle(1.0) - 0.25).abs() < 1e-12);
    assert_eq!(quadratic_oracle(0.7), 0.0);
}

#[test]
fn quadratic_power_on_a_random_checkerboard() {
    let family = HamiltonianFamily::Power { gamma: 2.0 };
    let spec = EnvSpec { kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 2.0], mollify: None }, seed: 0, dim: 1 };
    let seeds: Vec<u64> = (0..32).collect();
    let grid: Vec<Vec2> = [0.0, 0.5, 0.9, 1.0, 1.5, -1.5].iter().map(|&p| Vec2::on_axis(p)).collect();
    let table = reconstruct_table(&family, &spec, &seeds, &grid, Direction::Forward, &EffectiveOptions::default()).unwrap();
    for e in &table.entries {
        let want = quadratic_oracle(e.p.x);
        assert!((e.mid() - want).abs() <= (0.05 * want).max(0.03), "p = {}: [{}, {}] vs {want}", e.p.x, e.mu_lo, e.mu_hi);
    }
}

#[test]
fn constant_anisotropic_medium_is_its_own_limit() {
    let family = HamiltonianFamily::Aniso { kappa: 2.0 };
    let spec = EnvSpec { kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.5], mollify: None }, seed: 0, dim: 2 };
    let mut opts = EffectiveOptions::default();
    opts.shape.fan_dirs = 32;
    opts.shape.ladder = vec![8.0, 16.0];
    let grid = vec![Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.5), Vec2::new(-0.3, 0.8), Vec2::new(0.0, -1.0)];
    let table = reconstruct_table(&family, &spec, &[1, 2], &grid, Direction::Forward, &opts).unwrap();
    for e in &table.entries {
        let want = family.h(e.p, 0.5);
        let slack = table.step + 1e-9;
        assert!(e.mu_lo - slack <= want && want <= e.mu_hi_certified + slack, "p = {:?}: [{}, {}] vs {want}", e.p, e.mu_lo, e.mu_hi_certified);
    }
}
