//! Exact discrete identities of the metric problem, checked on solved fields.

use serde::Serialize;

use crate::env::{Environment, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::metric::solver::{Direction, MetricField, MetricProblem};
use crate::vec2::Vec2;

/// Accumulation slack for identities that are exact up to rounding.
pub const EXACT_TOL: f64 = 1e-12;

fn slack(scale: f64) -> f64 {
    EXACT_TOL * scale.abs().max(1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub instances: usize,
    /// Largest excess of the inequality, after subtracting slack.
    pub worst_excess: f64,
    pub passed: bool,
}

fn require(report: IdentityReport) -> Result<IdentityReport> {
    if report.passed {
        Ok(report)
    } else {
        Err(Error::SolverBug(format!("{} violated by {:.3e}", report.name, report.worst_excess)))
    }
}

/// `m(z, x) ≤ m(y, x) + m(z, y)` for every ordered pair of sources `(x, y)`
/// among `fields` and every node `z` in `nodes`.
pub fn check_subadditivity(fields: &[&MetricField], nodes: &[usize]) -> Result<IdentityReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for fx in fields {
        for fy in fields {
            let m_yx = fx.values[fy.source];
            for &z in nodes {
                let (m_zx, m_zy) = (fx.values[z], fy.values[z]);
                if !(m_zx.is_finite() && m_yx.is_finite() && m_zy.is_finite()) {
                    continue;
                }
                count += 1;
                let rhs = m_yx + m_zy;
                worst = worst.max(m_zx - rhs - slack(rhs));
            }
        }
    }
    require(IdentityReport { name: "subadditivity".into(), instances: count, worst_excess: worst, passed: worst <= 0.0 })
}

/// Subadditivity on explicit triples `(x, y, z)` of source indices into
/// `fields` and target nodes: `fields[x]` must be solved from node `x`, etc.
pub fn check_subadditivity_triples(
    fields: &[MetricField],
    triples: &[(usize, usize, usize)],
) -> Result<IdentityReport> {
    let by_source = |n: usize| fields.iter().find(|f| f.source == n);
    let mut worst = f64::NEG_INFINITY;
    for &(x, y, z) in triples {
        let (Some(fx), Some(fy)) = (by_source(x), by_source(y)) else {
            return Err(Error::precondition("triple source without a solved field"));
        };
        let rhs = fx.values[y] + fy.values[z];
        worst = worst.max(fx.values[z] - rhs - slack(rhs));
    }
    require(IdentityReport {
        name: "subadditivity".into(),
        instances: triples.len(),
        worst_excess: worst,
        passed: worst <= 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AffineReport {
    pub p: [f64; 2],
    /// `sup_y H(p, y)` over the scan, compared against `μ`.
    pub sup_h: f64,
    pub worst_excess: f64,
    pub worst_node: [f64; 2],
    pub slack: f64,
    /// `false` signals a discretization-resolution warning, not an error.
    pub passed: bool,
}

/// Domination of the affine subsolution `w(y) = p·y`:
/// `p·(y − x) ≤ m_μ(y, x) + slack` at every settled node.
pub fn check_maximality_affine(
    field: &MetricField,
    family: &HamiltonianFamily,
    env: &Environment,
    p: Vec2,
    slack_abs: f64,
) -> Result<AffineReport> {
    // the precondition: w is a subsolution, i.e. sup_y H(p, y) ≤ μ
    let values = match env.distinct_values() {
        Some(v) => v,
        None => {
            let mut v: Vec<f64> = (0..field.lattice.len()).map(|n| env.value(field.lattice.position(n))).collect();
            v.extend(env.value_range().grid(33));
            v
        }
    };
    let sup_h = values.iter().map(|&v| family.h(p, v)).fold(f64::NEG_INFINITY, f64::max);
    if sup_h > field.mu + slack(field.mu) {
        return Err(Error::precondition(format!(
            "affine function is not a subsolution: sup H(p, y) = {sup_h} > mu = {}",
            field.mu
        )));
    }
    let x = field.source_position();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_node = x;
    for (n, &m) in field.values.iter().enumerate() {
        if !m.is_finite() {
            continue;
        }
        let y = field.lattice.position(n);
        let e = p.dot(y - x) - m - slack(m);
        if e > worst {
            worst = e;
            worst_node = y;
        }
    }
    Ok(AffineReport {
        p: [p.x, p.y],
        sup_h,
        worst_excess: worst,
        worst_node: [worst_node.x, worst_node.y],
        slack: slack_abs,
        passed: worst <= slack_abs,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub mu: f64,
    pub nu: f64,
    pub nodes: usize,
    /// `min (m_ν − m_μ)`; must be nonnegative.
    pub min_gap: f64,
    /// Empirical strict-growth constant `min (m_ν − m_μ) / |y − x|` over `y ≠ x`.
    pub growth_constant: f64,
}

/// `m_ν ≥ m_μ` exactly for `μ ≤ ν` (costs are nested edge by edge).
pub fn check_mu_monotonicity(lower: &MetricField, upper: &MetricField) -> Result<MonotonicityReport> {
    if lower.lattice != upper.lattice || lower.source != upper.source {
        return Err(Error::precondition("fields must share lattice and source"));
    }
    if lower.mu > upper.mu {
        return Err(Error::precondition("first field must have the smaller level"));
    }
    let x = lower.source_position();
    let mut min_gap = f64::INFINITY;
    let mut growth = f64::INFINITY;
    let mut nodes = 0;
    for n in 0..lower.values.len() {
        let (a, b) = (lower.values[n], upper.values[n]);
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        nodes += 1;
        min_gap = min_gap.min(b - a);
        let d = (lower.lattice.position(n) - x).norm();
        if d > 0.0 {
            growth = growth.min((b - a) / d);
        }
    }
    if min_gap < 0.0 {
        return Err(Error::SolverBug(format!(
            "metric decreased from mu = {} to nu = {}: gap {min_gap:.3e}",
            lower.mu, upper.mu
        )));
    }
    Ok(MonotonicityReport { mu: lower.mu, nu: upper.mu, nodes, min_gap, growth_constant: growth })
}

/// `sup |m_{μ+2^{−j}} − m_μ|` over the lattice for `j = 1..=levels`; the
/// sequence shrinks to zero when the metric is continuous in `μ`.
pub fn mu_continuity_ladder(problem: &MetricProblem<'_>, source: usize, levels: u32) -> Result<Vec<(f64, f64)>> {
    let base = problem.solve(source)?;
    (1..=levels)
        .map(|j| {
            let step = 0.5f64.powi(j as i32);
            let f = MetricProblem { mu: problem.mu + step, ..*problem }.solve(source)?;
            let sup = base
                .values
                .iter()
                .zip(&f.values)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            Ok((step, sup))
        })
        .collect()
}

/// `n_μ(y, x) = m_μ(x, y)`: the reversed field from `x` against forward
/// fields solved from each sampled `y`.
pub fn check_duality(
    problem: &MetricProblem<'_>,
    reversed_from_x: &MetricField,
    samples: &[usize],
) -> Result<IdentityReport> {
    if reversed_from_x.direction != Direction::Reversed {
        return Err(Error::precondition("duality check needs a reversed field"));
    }
    let x = reversed_from_x.source;
    let forward = MetricProblem { direction: Direction::Forward, ..*problem };
    let mut worst = f64::NEG_INFINITY;
    for &y in samples {
        let from_y = forward.solve_until(y, Some(&[x]))?;
        let (a, b) = (reversed_from_x.values[y], from_y.values[x]);
        worst = worst.max((a - b).abs() - slack(a.max(b)));
    }
    require(IdentityReport { name: "reversal identity".into(), instances: samples.len(), worst_excess: worst, passed: worst <= 0.0 })
}
