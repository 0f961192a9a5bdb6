//! Reconstruction of `H̄` from limit shapes through the sublevel-set duality
//! `m̄_μ(y) = max{p·y : H̄(p) ≤ μ}`.
//!
//! `H̄(p) ≤ μ` iff `p·e ≤ m̄_μ(e)` for every direction `e`, and membership is
//! monotone in `μ`, so `H̄(p)` is found by bisection over `μ`. Probe levels
//! live on a global integer grid `μ_k = floor + k·step` so that every grid
//! point shares the cached shape estimates.

use std::io::Write;
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexgeom::{find_min_value, MinOptions};
use crate::env::{EnvSpec, Environment, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::metric::Direction;
use crate::shape::{estimate_shape, ShapeEstimate, ShapeOptions};
use crate::vec2::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveOptions {
    pub shape: ShapeOptions,
    /// Bisection tolerance as a fraction of `max_p (ceiling − floor)`.
    pub tol_fraction: f64,
    /// Global multiplier on every tolerance.
    pub tol_scale: f64,
    /// Property tolerance in units of the combined confidence interval.
    pub ci_multiplier: f64,
    pub max_ceiling_expansions: usize,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        EffectiveOptions {
            shape: ShapeOptions::default(),
            tol_fraction: 1e-2,
            tol_scale: 1.0,
            ci_multiplier: 3.0,
            max_ceiling_expansions: 16,
        }
    }
}

/// Result of testing `p ∈ K_μ` against a shape estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// `min_e (m̄_μ(e) − p·e)`.
    pub margin: f64,
    /// Direction attaining the margin.
    pub binding: usize,
}

pub fn member_k(p: Vec2, shape: &ShapeEstimate) -> Membership {
    let mut margin = f64::INFINITY;
    let mut binding = 0;
    for (k, &e) in shape.fan.iter().enumerate() {
        let m = shape.value(k) - p.dot(e);
        if m < margin {
            margin = m;
            binding = k;
        }
    }
    Membership { member: margin >= 0.0, margin, binding }
}

/// Field values over which suprema and infima in `y` are sampled.
pub fn sampled_values(spec: &EnvSpec) -> Result<Vec<f64>> {
    let env = Environment::new(spec.clone())?;
    Ok(match env.distinct_values() {
        Some(v) => v,
        None => env.value_range().grid(65),
    })
}

/// `sup_y H(p, y)` over the sampled field values.
pub fn sup_h(family: &HamiltonianFamily, values: &[f64], p: Vec2) -> f64 {
    values.iter().map(|&v| family.h(p, v)).fold(f64::NEG_INFINITY, f64::max)
}

/// `esssup_y inf_p H(p, y)`, the lower bound for `H̄_*`.
pub fn hstar_lower_bound(family: &HamiltonianFamily, spec: &EnvSpec) -> Result<f64> {
    let env = Environment::new(spec.clone())?;
    let values = sampled_values(spec)?;
    let mut lb = f64::NEG_INFINITY;
    for &v in &values {
        let (_, m) = find_min_value(family, v, spec.dim, env.value_range(), &MinOptions::default())?;
        lb = lb.max(m);
    }
    Ok(lb)
}

/// Cached shape estimates on the global probe grid.
pub struct ShapeProvider<'a> {
    family: &'a HamiltonianFamily,
    spec: &'a EnvSpec,
    seeds: &'a [u64],
    direction: Direction,
    opts: &'a ShapeOptions,
    origin: f64,
    step: f64,
    cache: DashMap<i64, Arc<ShapeEstimate>>,
}

impl<'a> ShapeProvider<'a> {
    pub fn new(
        family: &'a HamiltonianFamily,
        spec: &'a EnvSpec,
        seeds: &'a [u64],
        direction: Direction,
        opts: &'a ShapeOptions,
        origin: f64,
        step: f64,
    ) -> Self {
        ShapeProvider { family, spec, seeds, direction, opts, origin, step, cache: DashMap::new() }
    }

    pub fn mu(&self, key: i64) -> f64 {
        self.origin + key as f64 * self.step
    }

    /// Computed outside the map lock (the estimate itself runs in parallel);
    /// a racing duplicate is identical and the first insert wins.
    pub fn get(&self, key: i64) -> Result<Arc<ShapeEstimate>> {
        if let Some(s) = self.cache.get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(estimate_shape(self.family, self.spec, self.mu(key), self.seeds, self.direction, self.opts)?);
        Ok(self.cache.entry(key).or_insert(s).clone())
    }

    pub fn probes(&self) -> usize {
        self.cache.len()
    }

    /// Estimates in key order.
    pub fn estimates(&self) -> Vec<(i64, Arc<ShapeEstimate>)> {
        let mut v: Vec<_> = self.cache.iter().map(|e| (*e.key(), e.value().clone())).collect();
        v.sort_by_key(|e| e.0);
        v
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub p: Vec2,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Upper end widened for the fan resolution (equals `mu_hi` in 1-D).
    pub mu_hi_certified: f64,
    /// Shape CI converted to `μ` units through the local slope of `m̄_μ`.
    pub ci: f64,
    /// `p ∈ K` already at the admissibility floor: `H̄(p) ∈ [lower bound, floor]`.
    pub floor_limited: bool,
    pub ceiling: f64,
    pub probes: usize,
}

impl TableEntry {
    pub fn mid(&self) -> f64 {
        0.5 * (self.mu_lo + self.mu_hi)
    }

    pub fn width(&self) -> f64 {
        self.mu_hi - self.mu_lo
    }
}

/// Distance between the intervals `[a.lo, a.hi]` and `[b.lo, b.hi]`.
fn gap(a: &TableEntry, b: &TableEntry) -> f64 {
    (b.mu_lo - a.mu_hi).max(a.mu_lo - b.mu_hi).max(0.0)
}

fn reconstruct_with(
    provider: &ShapeProvider<'_>,
    p: Vec2,
    ceiling: f64,
    lower_bound: f64,
    fan_factor: f64,
    max_expansions: usize,
) -> Result<TableEntry> {
    let mut probes: Vec<(i64, Membership)> = Vec::new();
    let mut probe = |k: i64, q: Vec2| -> Result<Membership> {
        let m = member_k(q, &*provider.get(k)?);
        if q == p {
            probes.push((k, m));
        }
        Ok(m)
    };
    let slope_ci = |k_lo: i64, k_hi: i64, binding: usize| -> Result<f64> {
        let (lo, hi) = (provider.get(k_lo)?, provider.get(k_hi)?);
        let ci_m = lo.ci(binding).max(hi.ci(binding));
        let slope = (hi.value(binding) - lo.value(binding)) / (provider.mu(k_hi) - provider.mu(k_lo));
        Ok(if slope > 0.0 { ci_m / slope } else { provider.step })
    };

    let at_floor = probe(0, p)?;
    if at_floor.member {
        let ci = slope_ci(0, 1, at_floor.binding)?;
        return Ok(TableEntry {
            p,
            mu_lo: lower_bound.min(provider.mu(0)),
            mu_hi: provider.mu(0),
            mu_hi_certified: provider.mu(0),
            ci,
            floor_limited: true,
            ceiling,
            probes: 1,
        });
    }

    let mut k_hi = (((ceiling - provider.origin) / provider.step).ceil() as i64).max(1);
    let mut expansions = 0;
    while !probe(k_hi, p)?.member {
        expansions += 1;
        if expansions > max_expansions {
            return Err(Error::StatisticsInconsistency(format!(
                "p = ({}, {}) is not a member even at mu = {} above the ceiling {ceiling}",
                p.x,
                p.y,
                provider.mu(k_hi)
            )));
        }
        k_hi += (k_hi / 4).max(1);
    }
    let mut k_lo = 0;
    while k_hi - k_lo > 1 {
        let mid = k_lo + (k_hi - k_lo) / 2;
        if probe(mid, p)?.member {
            k_hi = mid;
        } else {
            k_lo = mid;
        }
    }

    // certified upper end: membership of the dilated point p·sec(π/n)
    let mut k_cert = k_hi;
    if fan_factor > 1.0 {
        let q = p * fan_factor;
        let mut top = k_hi;
        let mut grow = 0;
        while !probe(top, q)?.member {
            grow += 1;
            if grow > 4 * max_expansions {
                return Err(Error::StatisticsInconsistency("dilated point never becomes a member".into()));
            }
            top += (top / 4).max(1);
        }
        let mut bottom = k_hi - 1;
        while top - bottom > 1 {
            let mid = bottom + (top - bottom) / 2;
            if probe(mid, q)?.member {
                top = mid;
            } else {
                bottom = mid;
            }
        }
        k_cert = top;
    }

    // membership margins must be monotone in μ up to the shape CI
    probes.sort_by_key(|x| x.0);
    for w in probes.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ci = provider.get(b.0)?.ci(b.1.binding);
        if a.1.member && !b.1.member && b.1.margin < -ci {
            return Err(Error::StatisticsInconsistency(format!(
                "membership of p = ({}, {}) lost between mu = {} and mu = {}",
                p.x,
                p.y,
                provider.mu(a.0),
                provider.mu(b.0)
            )));
        }
    }
    let binding = member_k(p, &*provider.get(k_hi)?).binding;
    let ci = slope_ci(k_lo, k_hi, binding)?;
    Ok(TableEntry {
        p,
        mu_lo: provider.mu(k_lo),
        mu_hi: provider.mu(k_hi),
        mu_hi_certified: provider.mu(k_cert),
        ci,
        floor_limited: false,
        ceiling,
        probes: probes.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveTable {
    pub family: String,
    pub dim: usize,
    pub direction: Direction,
    pub entries: Vec<TableEntry>,
    /// Admissibility floor `max(sup_y H(0, y), lower bound)`: the probe origin.
    pub floor: f64,
    /// `esssup_y inf_p H(p, y)`.
    pub lower_bound: f64,
    /// Probe-grid step, which is also the bisection tolerance.
    pub step: f64,
    pub fan_factor: f64,
    pub probes: usize,
    pub seeds: Vec<u64>,
}

/// `H̄` on a list of momenta. For [`Direction::Reversed`] the entry at `p`
/// is the reconstruction of `−p` from the reversed shapes `n̄_μ`, which
/// equals `H̄(p)` when the reversal identity holds.
pub fn reconstruct_table(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    seeds: &[u64],
    p_grid: &[Vec2],
    direction: Direction,
    opts: &EffectiveOptions,
) -> Result<EffectiveTable> {
    if p_grid.is_empty() {
        return Err(Error::config("empty p-grid"));
    }
    if !(opts.tol_fraction > 0.0 && opts.tol_scale > 0.0) {
        return Err(Error::config("tolerances must be positive"));
    }
    let values = sampled_values(spec)?;
    let lower_bound = hstar_lower_bound(family, spec)?;
    let floor = sup_h(family, &values, Vec2::ZERO).max(lower_bound);
    let sign = if direction == Direction::Reversed { -1.0 } else { 1.0 };
    let ceilings: Vec<f64> = p_grid.iter().map(|&p| sup_h(family, &values, p * sign)).collect();
    let spread = ceilings.iter().map(|c| c - floor).fold(0.0, f64::max);
    let base = if spread > 0.0 { spread } else { floor.abs().max(1.0) };
    let step = opts.tol_fraction * opts.tol_scale * base;
    let provider = ShapeProvider::new(family, spec, seeds, direction, &opts.shape, floor, step);
    let fan_factor = crate::convexgeom::Fan::uniform(opts.shape.fan_dirs, spec.dim).resolution_factor();
    let entries = p_grid
        .par_iter()
        .zip(&ceilings)
        .map(|(&p, &c)| {
            let mut e = reconstruct_with(&provider, p * sign, c, lower_bound, fan_factor, opts.max_ceiling_expansions)?;
            e.p = p;
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectiveTable {
        family: family.label(),
        dim: spec.dim,
        direction,
        entries,
        floor,
        lower_bound,
        step,
        fan_factor,
        probes: provider.probes(),
        seeds: seeds.to_vec(),
    })
}

/// Bracket of `H̄(p)` at a single momentum.
pub fn reconstruct_hbar(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    seeds: &[u64],
    p: Vec2,
    opts: &EffectiveOptions,
) -> Result<TableEntry> {
    let t = reconstruct_table(family, spec, seeds, &[p], Direction::Forward, opts)?;
    Ok(t.entries.into_iter().next().unwrap())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HstarEstimate {
    /// `min_p` of the bracket tops over the grid.
    pub min_based: f64,
    /// `esssup_y inf_p H`.
    pub lower_bound: f64,
    pub consistent: bool,
}

pub fn estimate_hstar(table: &EffectiveTable) -> HstarEstimate {
    let min_based = table.entries.iter().map(|e| e.mu_hi).fold(f64::INFINITY, f64::min);
    HstarEstimate {
        min_based,
        lower_bound: table.lower_bound,
        consistent: table.lower_bound <= min_based + table.step + 1e-12,
    }
}

impl EffectiveTable {
    pub fn entry_at(&self, p: Vec2) -> Option<&TableEntry> {
        self.entries.iter().find(|e| (e.p - p).norm() <= 1e-9)
    }

    pub fn hstar(&self) -> HstarEstimate {
        estimate_hstar(self)
    }

    /// CSV rows `p1[,p2],mu_lo,mu_hi,mu_hi_certified,ci,floor_limited`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let two = self.dim == 2;
        let mut header = vec!["p1"];
        if two {
            header.push("p2");
        }
        header.extend(["mu_lo", "mu_hi", "mu_hi_certified", "ci", "floor_limited"]);
        w.write_record(&header)?;
        for e in &self.entries {
            let mut row = vec![e.p.x.to_string()];
            if two {
                row.push(e.p.y.to_string());
            }
            row.extend([
                e.mu_lo.to_string(),
                e.mu_hi.to_string(),
                e.mu_hi_certified.to_string(),
                e.ci.to_string(),
                e.floor_limited.to_string(),
            ]);
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plot-ready samples `p1,p2,hbar` (bracket midpoints).
    pub fn write_level_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p1", "p2", "hbar"])?;
        for e in &self.entries {
            w.write_record([e.p.x.to_string(), e.p.y.to_string(), e.mid().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Whether the property is expected to hold for this family; a failing
    /// unexpected property is informational.
    pub expected: bool,
    pub checked: usize,
    pub worst_excess: f64,
}

impl Verdict {
    fn new(name: &str, expected: bool, excesses: impl IntoIterator<Item = f64>) -> Self {
        let mut checked = 0;
        let mut worst = f64::NEG_INFINITY;
        for e in excesses {
            checked += 1;
            worst = worst.max(e);
        }
        Verdict { name: name.into(), passed: worst <= 0.0, expected, checked, worst_excess: worst }
    }

    /// Verdict matches expectation.
    pub fn ok(&self) -> bool {
        self.passed || !self.expected
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatSpot {
    pub level: f64,
    pub points: usize,
    /// Extent (1-D) or convex-hull area (2-D) of the grid points at the minimum.
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyVerdicts {
    pub evenness: Verdict,
    pub quasiconvexity: Verdict,
    pub lambda_modulus: Verdict,
    pub duality: Verdict,
    pub hstar_order: Verdict,
    pub bracket_chain: Verdict,
    pub thin_level_sets: Verdict,
    pub flat_spot: FlatSpot,
    pub hstar: HstarEstimate,
}

impl PropertyVerdicts {
    pub fn all(&self) -> [&Verdict; 7] {
        [
            &self.evenness,
            &self.quasiconvexity,
            &self.lambda_modulus,
            &self.duality,
            &self.hstar_order,
            &self.bracket_chain,
            &self.thin_level_sets,
        ]
    }

    /// Every expected property passed.
    pub fn ok(&self) -> bool {
        self.all().iter().all(|v| v.ok())
    }
}

fn find(t: &EffectiveTable, p: Vec2) -> Option<&TableEntry> {
    t.entry_at(p)
}

fn hull_area(mut pts: Vec<Vec2>) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Vec2> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n).map(|i| hull[i].x * hull[(i + 1) % n].y - hull[(i + 1) % n].x * hull[i].y).sum::<f64>().abs() * 0.5
}

/// The qualitative property suite on a forward table and its reversed twin.
pub fn property_suite(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    table: &EffectiveTable,
    reversed: &EffectiveTable,
    opts: &EffectiveOptions,
) -> Result<PropertyVerdicts> {
    let env = Environment::new(spec.clone())?;
    let range = env.value_range();
    let k = opts.ci_multiplier * opts.tol_scale;
    let es = &table.entries;
    let fp = |x: f64| 1e-12 * x.abs().max(1.0);

    let evenness = Verdict::new(
        "evenness",
        family.is_even(),
        es.iter().filter_map(|a| find(table, -a.p).map(|b| gap(a, b) - k * (a.ci + b.ci) - fp(a.mu_hi))),
    );

    let mut quasi = Vec::new();
    let mut lambda = Vec::new();
    for (i, a) in es.iter().enumerate() {
        for b in &es[i + 1..] {
            let Some(m) = find(table, (a.p + b.p) * 0.5) else { continue };
            let tol = k * (m.ci + a.ci + b.ci) + fp(m.mu_lo);
            quasi.push(m.mu_lo - a.mu_hi.max(b.mu_hi) - tol);
            lambda.push(m.mu_lo - family.lambda(a.mu_hi, b.mu_hi, range) - tol);
        }
    }
    let quasiconvexity = Verdict::new("quasiconvexity", true, quasi);
    let lambda_modulus = Verdict::new("lambda-modulus", true, lambda);

    let duality = Verdict::new(
        "duality",
        true,
        es.iter().filter_map(|a| find(reversed, a.p).map(|b| gap(a, b) - k * (a.ci + b.ci) - fp(a.mu_hi))),
    );

    let hstar = estimate_hstar(table);
    let hstar_order =
        Verdict::new("hstar-order", true, [hstar.lower_bound - hstar.min_based - table.step - fp(hstar.min_based)]);

    let bracket_chain = Verdict::new(
        "bracket-chain",
        true,
        es.iter().map(|e| {
            let tol = k * e.ci + fp(e.ceiling);
            (table.lower_bound - e.mu_hi - tol).max(e.mu_lo - e.ceiling - tol)
        }),
    );

    // Flat spot: grid points whose bracket reaches the minimum level.
    let level = hstar.min_based;
    let flat_tol = |e: &TableEntry| table.step + k * e.ci + fp(level);
    let flat: Vec<Vec2> = es.iter().filter(|e| e.mu_lo <= level + flat_tol(e)).map(|e| e.p).collect();
    let measure = if table.dim == 1 {
        let xs = flat.iter().map(|p| p.x);
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if flat.is_empty() {
            0.0
        } else {
            hi - lo
        }
    } else {
        hull_area(flat.clone())
    };
    let flat_spot = FlatSpot { level, points: flat.len(), measure };

    // Level sets above the flat spot have empty interior: no grid cell whose
    // corners all sit on one level above H̄_* + tol.
    let spacing = grid_spacing(es, table.dim);
    let mut thin = Vec::new();
    if let Some(h) = spacing {
        let corners: Vec<Vec2> = if table.dim == 1 {
            vec![Vec2::ZERO, Vec2::E1 * h, Vec2::E1 * (2.0 * h)]
        } else {
            vec![Vec2::ZERO, Vec2::E1 * h, Vec2::E2 * h, Vec2::new(h, h)]
        };
        for a in es {
            let cell: Option<Vec<&TableEntry>> = corners.iter().map(|&c| find(table, a.p + c)).collect();
            let Some(cell) = cell else { continue };
            let lo = cell.iter().map(|e| e.mu_lo).fold(f64::INFINITY, f64::min);
            let hi = cell.iter().map(|e| e.mu_hi).fold(f64::NEG_INFINITY, f64::max);
            let tol = table.step + k * cell.iter().map(|e| e.ci).fold(0.0, f64::max);
            if lo > level + tol {
                // positive when the whole cell is flat within tolerance
                thin.push(tol - (hi - lo));
            }
        }
    }
    let thin_level_sets = Verdict::new("thin-level-sets", true, thin);

    Ok(PropertyVerdicts {
        evenness,
        quasiconvexity,
        lambda_modulus,
        duality,
        hstar_order,
        bracket_chain,
        thin_level_sets,
        flat_spot,
        hstar,
    })
}

fn grid_spacing(es: &[TableEntry], dim: usize) -> Option<f64> {
    let mut h = f64::INFINITY;
    for (i, a) in es.iter().enumerate() {
        for b in &es[i + 1..] {
            let d = b.p - a.p;
            let along = if dim == 1 { d.x.abs() } else if d.y == 0.0 { d.x.abs() } else { f64::INFINITY };
            if along > 1e-12 {
                h = h.min(along);
            }
        }
    }
    h.is_finite().then_some(h)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Recheck {
    pub upper_member: bool,
    pub lower_excluded: bool,
    pub upper_margin: f64,
    pub lower_margin: f64,
}

/// Re-tests a bracket with fresh realizations: the top must still be a
/// member and the bottom a non-member, each up to the fresh shape CI.
pub fn recheck_bracket(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    fresh_seeds: &[u64],
    entry: &TableEntry,
    opts: &EffectiveOptions,
) -> Result<Recheck> {
    let hi = estimate_shape(family, spec, entry.mu_hi, fresh_seeds, Direction::Forward, &opts.shape)?;
    let up = member_k(entry.p, &hi);
    let upper_member = up.margin >= -opts.ci_multiplier * hi.ci(up.binding);
    let (lower_excluded, lower_margin) = if entry.floor_limited {
        (true, f64::NAN)
    } else {
        let lo = estimate_shape(family, spec, entry.mu_lo, fresh_seeds, Direction::Forward, &opts.shape)?;
        let down = member_k(entry.p, &lo);
        (down.margin <= opts.ci_multiplier * lo.ci(down.binding), down.margin)
    };
    Ok(Recheck { upper_member, lower_excluded, upper_margin: up.margin, lower_margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_area_of_unit_square() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0), Vec2::new(0.5, 0.5)];
        assert!((hull_area(pts) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_gap_is_interval_distance() {
        let e = |lo: f64, hi: f64| TableEntry {
            p: Vec2::ZERO,
            mu_lo: lo,
            mu_hi: hi,
            mu_hi_certified: hi,
            ci: 0.0,
            floor_limited: false,
            ceiling: 1.0,
            probes: 0,
        };
        assert_eq!(gap(&e(0.0, 1.0), &e(0.5, 2.0)), 0.0);
        assert_eq!(gap(&e(0.0, 1.0), &e(1.5, 2.0)), 0.5);
        assert_eq!(gap(&e(1.5, 2.0), &e(0.0, 1.0)), 0.5);
    }
}
