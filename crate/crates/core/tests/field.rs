use homog_core::env::field::{cell_hash, splitmix64};
use homog_core::{EnvSpec, Environment, FieldKind, Vec2};

fn board(values: Vec<f64>, dim: usize, seed: u64) -> Environment {
    Environment::new(EnvSpec { kind: FieldKind::Checkerboard { cell: 1.0, values, mollify: None }, seed, dim }).unwrap()
}

#[test]
fn splitmix_matches_reference_outputs() {
    // reference generator: state += 0x9E3779B97F4A7C15, then the output mix
    assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    let mut state: u64 = 1_234_567;
    let expected = [6_457_827_717_110_365_317u64, 3_203_168_211_198_807_973, 9_817_491_932_198_370_423];
    for e in expected {
        assert_eq!(splitmix64(state), e);
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    }
}

#[test]
fn checkerboard_values_come_from_the_cell_hash() {
    let values = vec![0.0, 0.25, 1.0];
    let env = board(values.clone(), 2, 42);
    let o = env.origin();
    assert!((0.0..1.0).contains(&o.x) && (0.0..1.0).contains(&o.y));
    for i in -20..20 {
        for j in -20..20 {
            let y = Vec2::new(i as f64 + 0.37, j as f64 + 0.61);
            let (ci, cj) = ((y.x + o.x).floor() as i64, (y.y + o.y).floor() as i64);
            let expected = values[(cell_hash(42, ci, cj) % 3) as usize];
            assert_eq!(env.value(y), expected);
        }
    }
}

#[test]
fn cell_values_are_balanced_and_uncorrelated() {
    let env = board(vec![0.0, 1.0], 1, 9);
    let n = 40_000;
    let xs: Vec<f64> = (0..n).map(|i| env.value(Vec2::on_axis(i as f64 + 0.5 - env.origin().x))).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    let lag: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(lag.abs() < 0.01, "lag-one covariance {lag}");
}

#[test]
fn translation_shifts_the_field() {
    let env = board(vec![0.0, 1.0, 3.0], 2, 5);
    let z = Vec2::new(3.3, -7.9);
    let moved = env.translated(z);
    for k in 0..200 {
        let y = Vec2::new(0.13 * k as f64 - 11.0, 0.071 * k as f64 - 5.0);
        assert_eq!(moved.value(y), env.value(y + z));
    }
}

#[test]
fn breakpoints_split_segments_into_constant_pieces() {
    let env = board(vec![0.0, 1.0], 2, 3);
    let (a, b) = (Vec2::new(-3.2, 1.7), Vec2::new(4.9, -2.6));
    let mut ts = Vec::new();
    env.breakpoints(a, b, &mut ts);
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
    let o = env.origin();
    let faces = |s: f64, e: f64| ((s.max(e)).floor() - (s.min(e)).floor()) as usize;
    assert_eq!(ts.len(), faces(a.x + o.x, b.x + o.x) + faces(a.y + o.y, b.y + o.y));
    let mut knots = vec![0.0];
    knots.extend(&ts);
    knots.push(1.0);
    for w in knots.windows(2) {
        let at = |s: f64| env.value(a + (b - a) * (w[0] + s * (w[1] - w[0])));
        assert_eq!(at(0.1), at(0.5));
        assert_eq!(at(0.5), at(0.9));
    }
}

#[test]
fn smooth_fields_stay_in_range() {
    for kind in [
        FieldKind::PeriodicPhase { period: 3.0, range: [0.5, 2.0] },
        FieldKind::PoissonBumps { intensity: 0.3, radius: 1.5, range: [0.0, 1.0] },
        FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: Some(0.2) },
    ] {
        let env = Environment::new(EnvSpec { kind, seed: 4, dim: 2 }).unwrap();
        let r = env.value_range();
        for k in 0..2000 {
            let v = env.value(Vec2::new(0.37 * k as f64 - 300.0, 0.11 * k as f64));
            assert!(v >= r.min - 1e-12 && v <= r.max + 1e-12);
        }
    }
}
