//! Seeded stationary random fields.
//!
//! All randomness is derived from the 64-bit seed through SplitMix64, so a
//! realization is a pure function of `(seed, y)`. Stationarity comes from a
//! uniform random origin shift (checkerboard, periodic) or from a Poisson
//! cloud generated lazily per tile (bumps).
//!
//! Checkerboard cell `(i, j)` takes `values[cell_hash(seed, i, j) % n]` where
//!
//! ```text
//! cell_hash(seed, i, j) = splitmix64(splitmix64(seed ^ CELL_SALT)
//!                                    ^ (i as u64).wrapping_mul(0x9E3779B97F4A7C15)
//!                                    ^ (j as u64).wrapping_mul(0xC2B2AE3D27D4EB4F))
//! ```
//!
//! and cell indices are `floor((y + origin) / cell)` per axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub const CELL_SALT: u64 = 0x5EED_CE11_0000_0001;
pub const ORIGIN_SALT: u64 = 0x5EED_0FF5_E700_0002;
pub const TILE_SALT: u64 = 0x5EED_B0B5_0000_0003;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn cell_hash(seed: u64, i: i64, j: i64) -> u64 {
    splitmix64(
        splitmix64(seed ^ CELL_SALT)
            ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F),
    )
}

/// Uniform draw in `[0, 1)` from a hashed word.
#[inline]
pub fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    /// `n` evenly spaced values covering the range, endpoints included.
    pub fn grid(self, n: usize) -> Vec<f64> {
        if n < 2 || self.min == self.max {
            return vec![self.min, self.max];
        }
        (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FieldKind {
    /// I.i.d. cell values drawn uniformly from `values`. `mollify` is the
    /// width of a C¹ blend across cell faces (absent: piecewise constant).
    Checkerboard {
        cell: f64,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mollify: Option<f64>,
    },
    /// Poisson cloud of cubic bumps, saturated into `range`.
    PoissonBumps { intensity: f64, radius: f64, range: [f64; 2] },
    /// Sinusoid of period `period` with a uniformly random phase.
    PeriodicPhase { period: f64, range: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(flatten)]
    pub kind: FieldKind,
    pub seed: u64,
    pub dim: usize,
}

impl EnvSpec {
    pub fn with_seed(&self, seed: u64) -> EnvSpec {
        EnvSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::config(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        let range_ok = |r: &[f64; 2]| {
            if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
                Ok(())
            } else {
                Err(Error::config(format!("invalid value range {r:?}")))
            }
        };
        match &self.kind {
            FieldKind::Checkerboard { cell, values, mollify } => {
                positive("cell", *cell)?;
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("checkerboard values must be a non-empty list of finite numbers"));
                }
                if let Some(w) = mollify {
                    positive("mollify", *w)?;
                    if *w > *cell {
                        return Err(Error::config("mollify width must not exceed the cell size"));
                    }
                }
            }
            FieldKind::PoissonBumps { intensity, radius, range } => {
                positive("intensity", *intensity)?;
                positive("radius", *radius)?;
                range_ok(range)?;
            }
            FieldKind::PeriodicPhase { period, range } => {
                positive("period", *period)?;
                range_ok(range)?;
            }
        }
        Ok(())
    }
}

/// One realization `ω` of a stationary field. Immutable and `Sync`.
#[derive(Clone, Debug)]
pub struct Environment {
    spec: EnvSpec,
    origin: Vec2,
    range: ValueRange,
    poisson: Option<Poisson<f64>>,
}

impl Environment {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        let seed = spec.seed;
        let scale = match &spec.kind {
            FieldKind::Checkerboard { cell, .. } => *cell,
            FieldKind::PeriodicPhase { period, .. } => *period,
            FieldKind::PoissonBumps { radius, .. } => 2.0 * radius,
        };
        let ox = unit_interval(splitmix64(seed ^ ORIGIN_SALT)) * scale;
        let oy = if spec.dim == 2 {
            unit_interval(splitmix64(splitmix64(seed ^ ORIGIN_SALT))) * scale
        } else {
            0.0
        };
        let range = match &spec.kind {
            FieldKind::Checkerboard { values, .. } => ValueRange {
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
            FieldKind::PoissonBumps { range, .. } | FieldKind::PeriodicPhase { range, .. } => {
                ValueRange { min: range[0], max: range[1] }
            }
        };
        let poisson = match &spec.kind {
            FieldKind::PoissonBumps { intensity, radius, .. } => {
                let tile = 2.0 * radius;
                let mean = intensity * tile.powi(spec.dim as i32);
                Some(Poisson::new(mean).map_err(|e| Error::config(format!("poisson intensity: {e}")))?)
            }
            _ => None,
        };
        Ok(Environment { spec, origin: Vec2::new(ox, oy), range, poisson })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn value_range(&self) -> ValueRange {
        self.range
    }

    /// The realization `τ_z ω`: its field at `y` equals this field at `y + z`.
    pub fn translated(&self, z: Vec2) -> Environment {
        let z = if self.dim() == 1 { Vec2::on_axis(z.x) } else { z };
        Environment { origin: self.origin + z, ..self.clone() }
    }

    /// Distinct values the field can take, when that set is finite.
    pub fn distinct_values(&self) -> Option<Vec<f64>> {
        match &self.spec.kind {
            FieldKind::Checkerboard { values, mollify: None, .. } => {
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                Some(v)
            }
            _ => None,
        }
    }

    /// Whether the field is piecewise constant on an axis-aligned cell grid.
    pub fn piecewise_constant_cell(&self) -> Option<f64> {
        match &self.spec.kind {
            FieldKind::Checkerboard { cell, mollify: None, .. } => Some(*cell),
            _ => None,
        }
    }

    /// `V(y, ω)`.
    #[inline]
    pub fn value(&self, y: Vec2) -> f64 {
        let q = y + self.origin;
        match &self.spec.kind {
            FieldKind::Checkerboard { cell, values, mollify: None } => {
                let i = (q.x / cell).floor() as i64;
                let j = if self.spec.dim == 2 { (q.y / cell).floor() as i64 } else { 0 };
                values[(cell_hash(self.spec.seed, i, j) % values.len() as u64) as usize]
            }
            FieldKind::Checkerboard { cell, values, mollify: Some(w) } => {
                self.mollified_checkerboard(q, *cell, values, 0.5 * w)
            }
            FieldKind::PeriodicPhase { period, .. } => {
                let tau = std::f64::consts::TAU / period;
                let g = if self.spec.dim == 1 {
                    0.5 * (1.0 + (tau * q.x).sin())
                } else {
                    0.5 + 0.25 * ((tau * q.x).sin() + (tau * q.y).sin())
                };
                self.range.min + (self.range.max - self.range.min) * g
            }
            FieldKind::PoissonBumps { radius, .. } => {
                let s = self.bump_sum(q, *radius);
                self.range.min + (self.range.max - self.range.min) * (-(-s).exp_m1())
            }
        }
    }

    /// Parameters `t ∈ (0, 1)` at which the segment `a → b` crosses a cell
    /// face of a piecewise-constant field, sorted and deduplicated. Appends
    /// to `out`; no-op for other fields.
    pub fn breakpoints(&self, a: Vec2, b: Vec2, out: &mut Vec<f64>) {
        let Some(cell) = self.piecewise_constant_cell() else { return };
        let start = out.len();
        let (qa, qb) = (a + self.origin, b + self.origin);
        let axes: &[(f64, f64)] =
            if self.spec.dim == 2 { &[(qa.x, qb.x), (qa.y, qb.y)] } else { &[(qa.x, qb.x)] };
        for &(s, e) in axes {
            if s == e {
                continue;
            }
            let (lo, hi) = if s < e { (s, e) } else { (e, s) };
            let mut k = (lo / cell).floor() + 1.0;
            while k * cell < hi {
                let t = (k * cell - s) / (e - s);
                if t > 0.0 && t < 1.0 {
                    out.push(t);
                }
                k += 1.0;
            }
        }
        out[start..].sort_by(f64::total_cmp);
        let mut tail = out.split_off(start);
        tail.dedup();
        out.extend(tail);
    }

    fn mollified_checkerboard(&self, q: Vec2, cell: f64, values: &[f64], eps: f64) -> f64 {
        let weights = |coord: f64| -> (i64, [f64; 3]) {
            let k = (coord / cell).floor();
            let u = coord - k * cell;
            let step = |t: f64| t * t * (3.0 - 2.0 * t);
            let lower = if u < eps { 0.5 * (1.0 - step(u / eps)) } else { 0.0 };
            let upper = if u > cell - eps { 0.5 * (1.0 - step((cell - u) / eps)) } else { 0.0 };
            (k as i64, [lower, 1.0 - lower - upper, upper])
        };
        let n = values.len() as u64;
        let seed = self.spec.seed;
        let (i, wx) = weights(q.x);
        if self.spec.dim == 1 {
            return (0..3)
                .filter(|&a| wx[a] != 0.0)
                .map(|a| wx[a] * values[(cell_hash(seed, i + a as i64 - 1, 0) % n) as usize])
                .sum();
        }
        let (j, wy) = weights(q.y);
        let mut acc = 0.0;
        for a in 0..3 {
            if wx[a] == 0.0 {
                continue;
            }
            for b in 0..3 {
                if wy[b] == 0.0 {
                    continue;
                }
                let h = cell_hash(seed, i + a as i64 - 1, j + b as i64 - 1);
                acc += wx[a] * wy[b] * values[(h % n) as usize];
            }
        }
        acc
    }

    fn bump_sum(&self, q: Vec2, radius: f64) -> f64 {
        let tile = 2.0 * radius;
        let poisson = self.poisson.as_ref().expect("poisson field");
        let range = |c: f64| ((c - radius) / tile).floor() as i64..=((c + radius) / tile).floor() as i64;
        let ys = if self.spec.dim == 2 { range(q.y) } else { 0..=0 };
        let mut sum = 0.0;
        for ty in ys {
            for tx in range(q.x) {
                let mut rng = ChaCha8Rng::seed_from_u64(cell_hash(self.spec.seed ^ TILE_SALT, tx, ty));
                let count = poisson.sample(&mut rng) as usize;
                for _ in 0..count {
                    let px = (tx as f64 + rng.random::<f64>()) * tile;
                    let py = if self.spec.dim == 2 { (ty as f64 + rng.random::<f64>()) * tile } else { 0.0 };
                    let s = (q - Vec2::new(px, py)).norm() / radius;
                    if s < 1.0 {
                        sum += (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s);
                    }
                }
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(seed: u64, dim: usize) -> Environment {
        Environment::new(EnvSpec {
            kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: None },
            seed,
            dim,
        })
        .unwrap()
    }

    #[test]
    fn evaluation_is_pure() {
        let a = checkerboard(42, 2);
        let b = checkerboard(42, 2);
        for k in 0..200 {
            let y = Vec2::new(k as f64 * 0.37 - 30.0, k as f64 * -0.11 + 4.0);
            assert_eq!(a.value(y).to_bits(), b.value(y).to_bits());
        }
    }

    #[test]
    fn json_config_block_parses() {
        let spec: EnvSpec = serde_json::from_str(
            r#"{"kind":"CHECKERBOARD","seed":42,"cell":1.0,"values":[0.0,1.0],"dim":1}"#,
        )
        .unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.dim, 1);
        assert!(matches!(spec.kind, FieldKind::Checkerboard { .. }));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = checkerboard(1, 2).spec().clone();
        spec.dim = 3;
        assert!(matches!(Environment::new(spec), Err(Error::Config(_))));
        let spec = EnvSpec {
            kind: FieldKind::PeriodicPhase { period: -1.0, range: [0.0, 1.0] },
            seed: 1,
            dim: 1,
        };
        assert!(Environment::new(spec).is_err());
    }

    #[test]
    fn translation_shifts_the_field_exactly() {
        let env = checkerboard(7, 2);
        // Dyadic shifts keep the coordinate arithmetic exact.
        let z = Vec2::new(3.25, -1.5);
        let moved = env.translated(z);
        for k in 0..400 {
            let y = Vec2::new(k as f64 * 0.125 - 25.0, (k % 37) as f64 * 0.5 - 9.0);
            assert_eq!(moved.value(y), env.value(y + z));
        }
    }

    #[test]
    fn breakpoints_split_segments_at_cell_faces() {
        let env = checkerboard(3, 1);
        let a = Vec2::on_axis(0.0);
        let b = Vec2::on_axis(3.0);
        let mut out = Vec::new();
        env.breakpoints(a, b, &mut out);
        assert_eq!(out.len(), 3);
        for w in out.windows(2) {
            assert!(w[0] < w[1]);
        }
        // each piece lies inside one cell
        let mut knots = vec![0.0];
        knots.extend(&out);
        knots.push(1.0);
        for w in knots.windows(2) {
            let lo = env.value(a + (b - a) * (w[0] + 1e-9));
            let hi = env.value(a + (b - a) * (w[1] - 1e-9));
            assert_eq!(lo, hi);
        }
    }

    #[test]
    fn bumps_and_phase_stay_in_range() {
        for kind in [
            FieldKind::PoissonBumps { intensity: 0.5, radius: 1.5, range: [0.25, 1.0] },
            FieldKind::PeriodicPhase { period: 3.0, range: [0.25, 1.0] },
            FieldKind::Checkerboard { cell: 2.0, values: vec![0.25, 1.0, 0.5], mollify: Some(0.5) },
        ] {
            let env = Environment::new(EnvSpec { kind, seed: 11, dim: 2 }).unwrap();
            for k in 0..2000 {
                let y = Vec2::new((k as f64 * 0.731).sin() * 40.0, (k as f64 * 0.377).cos() * 40.0);
                let v = env.value(y);
                assert!((0.25..=1.0).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn mollified_checkerboard_is_continuous_across_faces() {
        let env = Environment::new(EnvSpec {
            kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: Some(0.2) },
            seed: 5,
            dim: 1,
        })
        .unwrap();
        let mut prev = env.value(Vec2::on_axis(-5.0));
        let step = 1e-4;
        let mut y = -5.0;
        while y < 5.0 {
            y += step;
            let v = env.value(Vec2::on_axis(y));
            assert!((v - prev).abs() < 0.01, "jump at {y}");
            prev = v;
        }
    }
}
