//! Sublevel-set geometry of `p ↦ H(p, y, ω)`.
//!
//! Quasiconvexity makes every sublevel set convex and star-shaped about any
//! interior point, so a set is described by an anchor (a minimizer) and the
//! boundary radius along each direction of a fan. Boundary samples are the
//! ray endpoints plus, in 2-D, the exact support point for each fan
//! direction. The support function is the maximum of `p·q` over the samples:
//! exact on fan directions and an inner approximation in between (within
//! the factor `sec(π/n)` for round sets).

use std::io::Write;
use std::sync::Arc;

use dashmap::DashMap;

use crate::env::{Environment, HamiltonianFamily, ValueRange};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Absolute bisection tolerance on boundary radii.
pub const RADIUS_TOL: f64 = 1e-9;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Unit directions, uniform in angle. The 1-D fan is `{+1, −1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fan {
    dim: usize,
    dirs: Vec<Vec2>,
}

impl Fan {
    pub fn uniform(n: usize, dim: usize) -> Fan {
        if dim == 1 {
            return Fan { dim, dirs: vec![Vec2::on_axis(1.0), Vec2::on_axis(-1.0)] };
        }
        let n = n.max(3);
        let dirs = (0..n).map(|k| Vec2::from_angle(std::f64::consts::TAU * k as f64 / n as f64)).collect();
        Fan { dim, dirs }
    }

    pub fn directions(&self) -> &[Vec2] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of `−e_k`, when the fan is closed under negation.
    pub fn negation_index(&self, k: usize) -> Option<usize> {
        let n = self.dirs.len();
        if self.dim == 1 {
            Some(1 - k)
        } else if n % 2 == 0 {
            Some((k + n / 2) % n)
        } else {
            None
        }
    }

    pub fn is_negation_closed(&self) -> bool {
        self.dim == 1 || self.dirs.len() % 2 == 0
    }

    /// `sec(π/n)`: worst ratio between the true support function and the
    /// fan-sampled one. Exactly 1 in 1-D.
    pub fn resolution_factor(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            1.0 / (std::f64::consts::PI / self.dirs.len() as f64).cos()
        }
    }

    /// The fan with `extra` unit directions appended (duplicates dropped).
    pub fn with_extra(&self, extra: &[Vec2]) -> Fan {
        let mut dirs = self.dirs.clone();
        for &e in extra {
            let e = e.normalized();
            if !dirs.iter().any(|d| (*d - e).norm() < 1e-15) {
                dirs.push(e);
            }
        }
        Fan { dim: self.dim, dirs }
    }

    /// Same directions, each negated, in matching order.
    pub fn negated(&self) -> Fan {
        Fan { dim: self.dim, dirs: self.dirs.iter().map(|&e| -e).collect() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MinOptions {
    /// Verification tolerance, multiplied by `max(1, |H(0)|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub starts: usize,
    pub verify_samples: usize,
}

impl Default for MinOptions {
    fn default() -> Self {
        MinOptions { tol: 1e-8, max_iter: 200, starts: 8, verify_samples: 256 }
    }
}

fn golden_line(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `f` over the plane (or line when `dim == 1`) by golden-section
/// coordinate descent from several starts, then a fan-direction pattern
/// search with halving steps.
fn minimize(f: &dyn Fn(Vec2) -> f64, dim: usize, scale: f64, opts: &MinOptions) -> Result<(Vec2, f64)> {
    let axes: &[Vec2] = if dim == 1 { &[Vec2::E1] } else { &[Vec2::E1, Vec2::E2] };
    let mut best = (Vec2::ZERO, f(Vec2::ZERO));
    for s in 0..opts.starts.max(1) {
        let mut x = if s == 0 {
            Vec2::ZERO
        } else if dim == 1 {
            Vec2::on_axis(if s % 2 == 0 { 0.5 } else { -0.5 } * scale * s as f64 / opts.starts as f64)
        } else {
            Vec2::from_angle(std::f64::consts::TAU * s as f64 / opts.starts as f64) * (0.5 * scale)
        };
        let mut fx = f(x);
        for _ in 0..opts.max_iter.min(32) {
            let before = fx;
            for &axis in axes {
                let line = |t: f64| f(x + axis * t);
                let (t, ft) = golden_line(&line, -scale, scale, 120);
                if ft < fx {
                    x = x + axis * t;
                    fx = ft;
                }
            }
            if before - fx <= 1e-15 * before.abs().max(1.0) {
                break;
            }
        }
        if fx < best.1 {
            best = (x, fx);
        }
    }

    // Pattern search over a fan; handles kinks where coordinate descent stalls.
    let fan = Fan::uniform(32, dim);
    let mut step = 0.25 * scale;
    let mut iters = 0;
    while step > 1e-13 * scale.max(1.0) {
        iters += 1;
        if iters > opts.max_iter * 64 {
            return Err(Error::OptimizationFailure { best: best.0, value: best.1 });
        }
        let mut improved = false;
        for &e in fan.directions() {
            let cand = best.0 + e * step;
            let fc = f(cand);
            if fc < best.1 {
                best = (cand, fc);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

fn search_scale(family: &HamiltonianFamily, v: f64, range: ValueRange) -> f64 {
    let h0 = family.h(Vec2::ZERO, v);
    family.coercivity_radius(h0.max(0.0) + 1.0, range).unwrap_or(4.0).max(1.0) * 2.0
}

/// A minimizer `p₀(y)` of `H(·, y, ω)` and the minimum value.
pub fn find_min(
    family: &HamiltonianFamily,
    env: &Environment,
    y: Vec2,
    opts: &MinOptions,
) -> Result<(Vec2, f64)> {
    find_min_value(family, env.value(y), env.dim(), env.value_range(), opts)
}

/// [`find_min`] for a given field value.
pub fn find_min_value(
    family: &HamiltonianFamily,
    v: f64,
    dim: usize,
    range: ValueRange,
    opts: &MinOptions,
) -> Result<(Vec2, f64)> {
    let f = |p: Vec2| family.h(p, v);
    let scale = search_scale(family, v, range);
    let (p0, m) = minimize(&f, dim, scale, opts)?;
    // verification sample: deterministic low-discrepancy points in the ball
    let tol = opts.tol * f(Vec2::ZERO).abs().max(1.0);
    let n = opts.verify_samples;
    for k in 0..n {
        let frac = (k as f64 + 0.5) / n as f64;
        let p = if dim == 1 {
            Vec2::on_axis((2.0 * frac - 1.0) * scale)
        } else {
            Vec2::from_angle(k as f64 * 2.399_963_229_728_653) * (scale * frac.sqrt())
        };
        if f(p) < m - tol {
            return Err(Error::OptimizationFailure { best: p0, value: m });
        }
    }
    Ok((p0, m))
}

/// `max{s ≥ 0 : H(p₀ + s e, y) ≤ μ}` by doubling then bisection.
pub fn ray_radius(
    family: &HamiltonianFamily,
    env: &Environment,
    y: Vec2,
    mu: f64,
    anchor: Vec2,
    e: Vec2,
) -> Result<f64> {
    ray_radius_value(family, env.value(y), env.value_range(), mu, anchor, e)
}

/// [`ray_radius`] for a given field value.
pub fn ray_radius_value(
    family: &HamiltonianFamily,
    v: f64,
    range: ValueRange,
    mu: f64,
    anchor: Vec2,
    e: Vec2,
) -> Result<f64> {
    let f = |s: f64| family.h(anchor + e * s, v);
    if f(0.0) > mu {
        return Err(Error::precondition(format!(
            "anchor outside the sublevel set: H(p0) = {} > mu = {mu}",
            f(0.0)
        )));
    }
    let cap = match family.coercivity_radius(mu, range) {
        Some(r) => r + anchor.norm(),
        None => 1e12,
    };
    let mut hi = 1.0f64.min(cap);
    while f(hi) <= mu {
        if hi >= cap {
            if family.coercivity_radius(mu, range).is_none() {
                return Err(Error::UnsupportedRegime(format!("unbounded sublevel set at mu = {mu}")));
            }
            return Ok(cap);
        }
        hi = (2.0 * hi).min(cap);
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Boundary point maximizing `p·e`, found by golden-section search over the
/// ray angle. Along a convex boundary the linear functional is unimodal on
/// the half-turn of rays facing `e`.
fn support_point(
    family: &HamiltonianFamily,
    v: f64,
    range: ValueRange,
    mu: f64,
    anchor: Vec2,
    e: Vec2,
) -> Result<Vec2> {
    let phi = e.angle();
    let half = 0.5 * std::f64::consts::PI;
    let mut err = None;
    let point = |theta: f64| -> Vec2 {
        let u = Vec2::from_angle(theta);
        match ray_radius_value(family, v, range, mu, anchor, u) {
            Ok(r) => anchor + u * r,
            Err(x) => {
                err.get_or_insert(x);
                anchor
            }
        }
    };
    let cell = std::cell::RefCell::new(point);
    let neg = |theta: f64| -(cell.borrow_mut())(theta).dot(e);
    let (theta, _) = golden_line(&neg, phi - half, phi + half, 200);
    let p = (cell.borrow_mut())(theta);
    drop(cell);
    match err {
        Some(x) => Err(x),
        None => Ok(p),
    }
}

/// Boundary samples of one sublevel set `{p : H(p, v) ≤ μ}`.
#[derive(Clone, Debug)]
pub struct SublevelGeometry {
    family: HamiltonianFamily,
    value: f64,
    mu: f64,
    anchor: Vec2,
    min: f64,
    fan: Fan,
    radii: Vec<f64>,
    points: Vec<Vec2>,
    reversed: bool,
}

impl SublevelGeometry {
    pub fn build(family: &HamiltonianFamily, env: &Environment, y: Vec2, mu: f64, fan: &Fan) -> Result<Self> {
        Self::build_for_value(family, env.value(y), env.value_range(), mu, fan)
    }

    pub fn build_for_value(
        family: &HamiltonianFamily,
        v: f64,
        range: ValueRange,
        mu: f64,
        fan: &Fan,
    ) -> Result<Self> {
        let (anchor, min) = find_min_value(family, v, fan.dim(), range, &MinOptions::default())?;
        if min > mu {
            return Err(Error::precondition(format!("mu = {mu} is below the minimum {min}")));
        }
        let radii = fan
            .directions()
            .iter()
            .map(|&e| ray_radius_value(family, v, range, mu, anchor, e))
            .collect::<Result<Vec<_>>>()?;
        let mut points: Vec<Vec2> = fan.directions().iter().zip(&radii).map(|(&e, &r)| anchor + e * r).collect();
        if fan.dim() == 2 {
            for &e in fan.directions() {
                points.push(support_point(family, v, range, mu, anchor, e)?);
            }
        }
        Ok(SublevelGeometry {
            family: family.clone(),
            value: v,
            mu,
            anchor,
            min,
            fan: fan.clone(),
            radii,
            points,
            reversed: false,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn anchor(&self) -> Vec2 {
        self.anchor
    }

    pub fn min_value(&self) -> f64 {
        self.min
    }

    pub fn field_value(&self) -> f64 {
        self.value
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn boundary(&self) -> &[Vec2] {
        &self.points
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// `σ(q) = max_k (p₀ + r_k e_k)·q`.
    #[inline]
    pub fn support(&self, q: Vec2) -> f64 {
        self.points.iter().fold(f64::NEG_INFINITY, |acc, b| acc.max(b.dot(q)))
    }

    /// Geometry of `G(p) = H(−p)`: every sample negated, so that
    /// `reversed.support(q) == self.support(−q)` bit for bit.
    pub fn reversed(&self) -> SublevelGeometry {
        SublevelGeometry {
            anchor: -self.anchor,
            fan: self.fan.negated(),
            points: self.points.iter().map(|&b| -b).collect(),
            reversed: !self.reversed,
            ..self.clone()
        }
    }

    fn h(&self, p: Vec2) -> f64 {
        let p = if self.reversed { -p } else { p };
        self.family.h(p, self.value)
    }

    /// Largest `H` excess over `μ` at midpoints of boundary-sample pairs;
    /// `≤ 0` (up to slack) for a convex sublevel set.
    pub fn midpoint_excess(&self) -> f64 {
        let n = self.points.len();
        let stride = (n / 16).max(1);
        let mut worst = f64::NEG_INFINITY;
        for a in (0..n).step_by(stride) {
            for b in (a + 1..n).step_by(stride) {
                worst = worst.max(self.h((self.points[a] + self.points[b]) * 0.5) - self.mu);
            }
        }
        worst
    }

    /// Largest `|H(boundary) − μ|` over the fan.
    pub fn boundary_error(&self) -> f64 {
        self.points.iter().map(|&b| (self.h(b) - self.mu).abs()).fold(0.0, f64::max)
    }

    /// Debug dump: `angle,radius,support`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["angle", "radius", "support"])?;
        for (k, &e) in self.fan.directions().iter().enumerate() {
            w.write_record([
                format!("{}", e.angle()),
                format!("{}", self.radii[k]),
                format!("{}", self.support(e)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Concurrent geometry cache keyed by `(field value, μ, reversed)` bits.
/// Insertion is idempotent: construction is deterministic, so a racing
/// duplicate build yields an identical value.
#[derive(Debug)]
pub struct GeometryCache {
    family: HamiltonianFamily,
    range: ValueRange,
    fan: Fan,
    map: DashMap<(u64, u64, bool), Arc<SublevelGeometry>>,
}

impl GeometryCache {
    pub fn new(family: &HamiltonianFamily, range: ValueRange, fan: Fan) -> Self {
        GeometryCache { family: family.clone(), range, fan, map: DashMap::new() }
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn get(&self, v: f64, mu: f64, reversed: bool) -> Result<Arc<SublevelGeometry>> {
        let key = (v.to_bits(), mu.to_bits(), reversed);
        if let Some(g) = self.map.get(&key) {
            return Ok(g.clone());
        }
        let forward = if reversed {
            self.get(v, mu, false)?
        } else {
            Arc::new(SublevelGeometry::build_for_value(&self.family, v, self.range, mu, &self.fan)?)
        };
        let built = if reversed { Arc::new(forward.reversed()) } else { forward };
        Ok(self.map.entry(key).or_insert(built).clone())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, FieldKind};

    fn range(v: f64) -> ValueRange {
        ValueRange { min: v, max: v }
    }

    #[test]
    fn quadratic_minimum_at_origin() {
        let (p, m) =
            find_min_value(&HamiltonianFamily::Power { gamma: 2.0 }, 0.0, 2, range(0.0), &MinOptions::default())
                .unwrap();
        assert!(p.norm() < 1e-6 && m.abs() < 1e-12);
    }

    #[test]
    fn drift_minimum_at_drift() {
        let fam = HamiltonianFamily::Drift { drift: Vec2::new(1.0, 0.0), modulation: 0.0 };
        let (p, m) = find_min_value(&fam, 0.0, 2, range(0.0), &MinOptions::default()).unwrap();
        assert!((p - Vec2::E1).norm() < 1e-9, "{p:?}");
        assert!(m.abs() < 1e-9);
    }

    #[test]
    fn anisotropic_box_minimum() {
        let fam = HamiltonianFamily::Aniso { kappa: 2.0 };
        let (p, m) = find_min_value(&fam, 0.5, 2, range(0.5), &MinOptions::default()).unwrap();
        assert!(p.norm() < 1e-9 && (m + 0.5).abs() < 1e-9);
    }

    #[test]
    fn ray_radius_examples() {
        let r = ray_radius_value(&HamiltonianFamily::Eikonal, 1.0, range(1.0), 2.0, Vec2::ZERO, Vec2::E2).unwrap();
        assert!((r - 2.0).abs() < RADIUS_TOL);
        let r = ray_radius_value(&HamiltonianFamily::Power { gamma: 0.5 }, 1.0, range(1.0), 0.5, Vec2::ZERO, Vec2::E1)
            .unwrap();
        assert!((r - 2.25).abs() < RADIUS_TOL);
        let r =
            ray_radius_value(&HamiltonianFamily::Aniso { kappa: 2.0 }, 0.0, range(0.0), 1.0, Vec2::ZERO, Vec2::E2)
                .unwrap();
        assert!((r - 0.5).abs() < RADIUS_TOL);
    }

    #[test]
    fn anchor_outside_is_precondition_error() {
        let err = ray_radius_value(&HamiltonianFamily::Eikonal, 1.0, range(1.0), 0.5, Vec2::E1, Vec2::E1);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn anisotropic_support_at_vertex() {
        let g = SublevelGeometry::build_for_value(
            &HamiltonianFamily::Aniso { kappa: 2.0 },
            0.0,
            range(0.0),
            1.0,
            &Fan::uniform(64, 2),
        )
        .unwrap();
        // (1, ½) lies on the diagonal-ish ray only approximately; the fan
        // sample reaches it within the resolution factor.
        let s = g.support(Vec2::new(1.0, 1.0));
        assert!(s <= 1.5 + 1e-9 && s >= 1.5 / Fan::uniform(64, 2).resolution_factor(), "{s}");
    }

    #[test]
    fn reversed_support_is_exact_negation() {
        let fam = HamiltonianFamily::Drift { drift: Vec2::new(1.0, 0.0), modulation: 0.0 };
        let g = SublevelGeometry::build_for_value(&fam, 0.0, range(0.0), 1.0, &Fan::uniform(64, 2)).unwrap();
        let r = g.reversed();
        for k in 0..50 {
            let q = Vec2::from_angle(k as f64 * 0.37) * (1.0 + k as f64 * 0.1);
            assert_eq!(r.support(q).to_bits(), g.support(-q).to_bits());
        }
        assert!(r.support(Vec2::E1).abs() < 1e-9);
    }

    #[test]
    fn cache_is_idempotent() {
        let env = Environment::new(EnvSpec {
            kind: FieldKind::Checkerboard { cell: 1.0, values: vec![0.0, 1.0], mollify: None },
            seed: 3,
            dim: 2,
        })
        .unwrap();
        let cache = GeometryCache::new(&HamiltonianFamily::Power { gamma: 1.0 }, env.value_range(), Fan::uniform(16, 2));
        let a = cache.get(1.0, 0.5, false).unwrap();
        let b = cache.get(1.0, 0.5, false).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let rev = cache.get(1.0, 0.5, true).unwrap();
        assert_eq!(rev.support(Vec2::E1), a.support(-Vec2::E1));
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn csv_dump_has_one_row_per_direction() {
        let g = SublevelGeometry::build_for_value(&HamiltonianFamily::Eikonal, 1.0, range(1.0), 1.0, &Fan::uniform(8, 2))
            .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
    }
}
