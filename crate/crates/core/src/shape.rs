//! Limit-shape estimation: `m̄_μ(e) = lim t⁻¹ m_μ(t e, 0, ω)` from scale
//! ladders over realization ensembles.
//!
//! The largest ladder rung is the estimate. Subadditivity plus stationarity
//! make the expected ladder means nonincreasing (the Fekete diagnostic), so
//! the estimate is an upper bound up to noise. No extrapolation model is fit.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexgeom::Fan;
use crate::env::{EnvSpec, Environment, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::metric::{Direction, MetricOptions, MetricProblem};
use crate::stats::{self, Summary};
use crate::vec2::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeOptions {
    /// Number of fan directions in 2-D (the 1-D fan is `{±1}`).
    pub fan_dirs: usize,
    /// Scale ladder `t_j`, in length units, increasing.
    pub ladder: Vec<f64>,
    pub metric: MetricOptions,
    /// Fekete violations beyond this many combined standard errors are errors.
    pub fekete_sigma: f64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions {
            fan_dirs: 16,
            ladder: vec![64.0, 128.0, 256.0, 512.0],
            metric: MetricOptions::default(),
            fekete_sigma: 3.0,
        }
    }
}

impl ShapeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::config("shape ladder must be a non-empty list of positive lengths"));
        }
        if self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("shape ladder must be increasing"));
        }
        if self.fan_dirs < 4 {
            return Err(Error::config("shape fan needs at least 4 directions"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FeketeDiagnostic {
    /// Largest `(mean_{j+1} − mean_j) / combined stderr` over the ladder.
    pub worst_z: f64,
    pub worst_direction: usize,
    pub worst_step: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub mu: f64,
    pub direction: Direction,
    pub dim: usize,
    pub fan: Vec<Vec2>,
    pub ladder: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `stats[k][j]`: ensemble summary of `t_j⁻¹ m_μ(t_j e_k, 0, ω)`.
    pub stats: Vec<Vec<Summary>>,
    /// `top[k][i]`: the largest-rung ratio for realization `i` (seed order).
    pub top: Vec<Vec<f64>>,
    pub fekete: FeketeDiagnostic,
    /// `sec(π/n)` of the target fan; 1 in 1-D.
    pub fan_factor: f64,
}

impl ShapeEstimate {
    pub fn len(&self) -> usize {
        self.fan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fan.is_empty()
    }

    /// Extrapolated `m̄_μ(e_k)`: the largest-rung mean.
    pub fn value(&self, k: usize) -> f64 {
        self.stats[k].last().map_or(f64::NAN, |s| s.mean)
    }

    /// 95% half-width at the largest rung.
    pub fn ci(&self, k: usize) -> f64 {
        self.stats[k].last().map_or(f64::INFINITY, |s| s.ci)
    }

    pub fn fan(&self) -> Fan {
        Fan::uniform(self.fan.len(), self.dim)
    }

    /// Index of `−e_k` in the fan.
    pub fn negation_index(&self, k: usize) -> Option<usize> {
        self.fan().negation_index(k)
    }

    /// CSV rows `k,angle,t,mean,stderr,ci`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "angle", "t", "mean", "stderr", "ci"])?;
        for (k, row) in self.stats.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    self.fan[k].angle().to_string(),
                    self.ladder[j].to_string(),
                    s.mean.to_string(),
                    s.stderr.to_string(),
                    s.ci.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Ratios `t_j⁻¹ m_μ(t_j e, 0, ω)` for one realization and direction, from a
/// single early-terminated solve.
pub fn ladder_ratios(
    family: &HamiltonianFamily,
    env: &Environment,
    mu: f64,
    e: Vec2,
    ladder: &[f64],
    direction: Direction,
    metric: &MetricOptions,
) -> Result<Vec<f64>> {
    let targets: Vec<Vec2> = ladder.iter().map(|&t| e * t).collect();
    let lattice = metric.lattice_for(env.dim(), Vec2::ZERO, &targets)?;
    let source = lattice.node_near(Vec2::ZERO).expect("origin inside the lattice");
    let stencils = targets
        .iter()
        .map(|&y| lattice.interpolation(y).ok_or_else(|| Error::SolverBug("target outside the lattice".into())))
        .collect::<Result<Vec<_>>>()?;
    let nodes: Vec<usize> = stencils.iter().flatten().map(|&(n, _)| n).collect();
    let field = MetricProblem::new(&lattice, family, env, mu)
        .with_direction(direction)
        .with_support(metric.support)
        .solve_until(source, Some(&nodes))?;
    Ok(stencils
        .iter()
        .zip(ladder)
        .map(|(st, &t)| st.iter().map(|&(n, w)| w * field.values[n]).sum::<f64>() / t)
        .collect())
}

/// Estimates `m̄_μ` (or `n̄_μ` for [`Direction::Reversed`]) on a uniform fan.
///
/// Realizations are `spec.with_seed(s)` for `s` in `seeds`; reusing the
/// same seeds across levels gives common random numbers.
pub fn estimate_shape(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    mu: f64,
    seeds: &[u64],
    direction: Direction,
    opts: &ShapeOptions,
) -> Result<ShapeEstimate> {
    opts.validate()?;
    if seeds.len() < 2 {
        return Err(Error::config("shape estimation needs at least two realizations"));
    }
    let fan = Fan::uniform(opts.fan_dirs, spec.dim);
    let dirs = fan.directions().to_vec();
    let jobs: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|i| (0..dirs.len()).map(move |k| (i, k))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let env = Environment::new(spec.with_seed(seeds[i]))?;
            ladder_ratios(family, &env, mu, dirs[k], &opts.ladder, direction, &opts.metric)
        })
        .collect::<Result<_>>()?;

    let n_dirs = dirs.len();
    let mut stats_k = Vec::with_capacity(n_dirs);
    let mut top = Vec::with_capacity(n_dirs);
    for k in 0..n_dirs {
        let per_seed: Vec<&Vec<f64>> = (0..seeds.len()).map(|i| &results[i * n_dirs + k]).collect();
        let row: Vec<Summary> = (0..opts.ladder.len())
            .map(|j| stats::summarize(&per_seed.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        top.push(per_seed.iter().map(|r| *r.last().unwrap()).collect());
        stats_k.push(row);
    }

    let mut fekete = FeketeDiagnostic { worst_z: f64::NEG_INFINITY, worst_direction: 0, worst_step: 0 };
    for (k, row) in stats_k.iter().enumerate() {
        for j in 0..row.len().saturating_sub(1) {
            // rounding-level rises count as flat
            let rise = row[j + 1].mean - row[j].mean - 1e-12 * row[j].mean.abs().max(1.0);
            let se = stats::combined(row[j].stderr, row[j + 1].stderr);
            let z = if rise <= 0.0 {
                0.0
            } else if se > 0.0 {
                rise / se
            } else {
                f64::INFINITY
            };
            if z > fekete.worst_z {
                fekete = FeketeDiagnostic { worst_z: z, worst_direction: k, worst_step: j };
            }
        }
    }
    if fekete.worst_z > opts.fekete_sigma {
        return Err(Error::StatisticsInconsistency(format!(
            "ladder mean rose by {:.2} standard errors (direction {}, step {})",
            fekete.worst_z, fekete.worst_direction, fekete.worst_step
        )));
    }
    Ok(ShapeEstimate {
        mu,
        direction,
        dim: spec.dim,
        fan: dirs,
        ladder: opts.ladder.clone(),
        seeds: seeds.to_vec(),
        stats: stats_k,
        top,
        fekete,
        fan_factor: fan.resolution_factor(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub name: String,
    /// Per direction: the statistic compared against its tolerance.
    pub excess: Vec<f64>,
    pub passed: bool,
}

impl ComparisonReport {
    fn new(name: &str, excess: Vec<f64>) -> Self {
        let passed = excess.iter().all(|e| *e <= 0.0);
        ComparisonReport { name: name.into(), excess, passed }
    }

    pub fn worst(&self) -> f64 {
        self.excess.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn same_layout(a: &ShapeEstimate, b: &ShapeEstimate) -> Result<()> {
    if a.fan.len() != b.fan.len() || a.dim != b.dim {
        return Err(Error::precondition("shape estimates must share the direction fan"));
    }
    Ok(())
}

/// `|n̄_μ(e) − m̄_μ(−e)| ≤ combined CI` for every fan direction.
pub fn check_reversal_identity(forward: &ShapeEstimate, reversed: &ShapeEstimate) -> Result<ComparisonReport> {
    same_layout(forward, reversed)?;
    if forward.direction != Direction::Forward || reversed.direction != Direction::Reversed {
        return Err(Error::precondition("expected a forward and a reversed estimate"));
    }
    if forward.mu != reversed.mu {
        return Err(Error::precondition("estimates must share the level"));
    }
    let excess = (0..forward.len())
        .map(|k| {
            let m = forward.negation_index(k).ok_or_else(|| Error::precondition("fan not closed under negation"))?;
            let tol = forward.ci(m) + reversed.ci(k) + 1e-12 * forward.value(m).abs().max(1.0);
            Ok((reversed.value(k) - forward.value(m)).abs() - tol)
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport::new("reversal identity", excess))
}

/// Strict growth in `μ`: the CI of `m̄_ν(e)` lies strictly above that of
/// `m̄_μ(e)` in every direction.
pub fn check_mu_separation(lower: &ShapeEstimate, upper: &ShapeEstimate) -> Result<ComparisonReport> {
    same_layout(lower, upper)?;
    if lower.mu >= upper.mu {
        return Err(Error::precondition("first estimate must have the smaller level"));
    }
    let excess =
        (0..lower.len()).map(|k| (lower.value(k) + lower.ci(k)) - (upper.value(k) - upper.ci(k))).collect();
    Ok(ComparisonReport::new("strict mu-monotonicity", excess))
}

/// Two ensembles agree within the sum of their CI half-widths.
pub fn check_ensemble_agreement(a: &ShapeEstimate, b: &ShapeEstimate) -> Result<ComparisonReport> {
    same_layout(a, b)?;
    let excess = (0..a.len()).map(|k| (a.value(k) - b.value(k)).abs() - (a.ci(k) + b.ci(k))).collect();
    Ok(ComparisonReport::new("ensemble agreement", excess))
}

/// Convexity across directions. With uniform spacing `Δ`,
/// `e_{k−1} + e_{k+1} = 2 cos Δ · e_k`, so positive homogeneity and
/// convexity give `m̄(e_k) ≤ (m̄(e_{k−1}) + m̄(e_{k+1})) / (2 cos Δ)`.
/// In 1-D the only content is `m̄(1) + m̄(−1) ≥ 0`.
pub fn check_convexity(shape: &ShapeEstimate) -> ComparisonReport {
    if shape.dim == 1 {
        let tol = shape.ci(0) + shape.ci(1);
        return ComparisonReport::new("convexity", vec![-(shape.value(0) + shape.value(1)) - tol]);
    }
    let n = shape.len();
    let c = 2.0 * (std::f64::consts::TAU / n as f64).cos();
    let excess = (0..n)
        .map(|k| {
            let (a, b) = ((k + n - 1) % n, (k + 1) % n);
            let rhs = (shape.value(a) + shape.value(b)) / c;
            let tol = shape.ci(k) + (shape.ci(a) + shape.ci(b)) / c;
            shape.value(k) - rhs - tol
        })
        .collect();
    ComparisonReport::new("convexity", excess)
}

/// Fekete monotonicity at `sigma` combined standard errors.
pub fn check_fekete(shape: &ShapeEstimate, sigma: f64) -> ComparisonReport {
    let mut excess = Vec::new();
    for row in &shape.stats {
        for j in 0..row.len().saturating_sub(1) {
            let se = stats::combined(row[j].stderr, row[j + 1].stderr);
            excess.push(row[j + 1].mean - row[j].mean - sigma * se - 1e-12 * row[j].mean.abs().max(1.0));
        }
    }
    ComparisonReport::new("fekete monotonicity", excess)
}

#[derive(Clone, Debug, Serialize)]
pub struct SublinearityReport {
    pub radii: Vec<f64>,
    /// `sup_{|y| = R} |w(y)| / R` per radius.
    pub profile: Vec<f64>,
    /// Log-log slope of the profile.
    pub slope: f64,
    pub decreasing: bool,
}

/// Profile of `sup_{|y|=R} |w(y)|/R` over a radius ladder. `w` returns
/// `None` outside its domain, which is a precondition error.
pub fn sublinearity_check(
    w: impl Fn(Vec2) -> Option<f64>,
    radii: &[f64],
    dim: usize,
    angles: usize,
) -> Result<SublinearityReport> {
    let dirs = Fan::uniform(angles.max(4), dim);
    let profile = radii
        .iter()
        .map(|&r| {
            let mut sup: f64 = 0.0;
            for &e in dirs.directions() {
                let v = w(e * r).ok_or_else(|| Error::precondition(format!("radius {r} outside the domain")))?;
                sup = sup.max(v.abs());
            }
            Ok(sup / r)
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = profile.windows(2).all(|p| p[1] <= p[0]);
    Ok(SublinearityReport { radii: radii.to_vec(), slope: stats::log_log_slope(radii, &profile), profile, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FieldKind;

    fn checkerboard(values: Vec<f64>, dim: usize) -> EnvSpec {
        EnvSpec { kind: FieldKind::Checkerboard { cell: 1.0, values, mollify: None }, seed: 0, dim }
    }

    #[test]
    fn unit_eikonal_has_unit_shape_along_axes() {
        let opts = ShapeOptions { ladder: vec![8.0, 16.0], ..Default::default() };
        let s = estimate_shape(
            &HamiltonianFamily::Eikonal,
            &checkerboard(vec![1.0], 2),
            1.0,
            &[1, 2, 3],
            Direction::Forward,
            &opts,
        )
        .unwrap();
        assert!((s.value(0) - 1.0).abs() < 1e-12);
        assert_eq!(s.ci(0), 0.0);
        for k in 0..s.len() {
            assert!(s.value(k) >= 1.0 - 1e-12 && s.value(k) <= 1.028, "{k}: {}", s.value(k));
        }
    }

    #[test]
    fn zero_increment_field_is_sublinear() {
        let r = sublinearity_check(|_| Some(0.0), &[10.0, 20.0], 2, 16).unwrap();
        assert!(r.profile.iter().all(|&p| p == 0.0));
        assert!(r.decreasing);
    }

    #[test]
    fn bounded_field_decays_like_inverse_radius() {
        let r = sublinearity_check(|y| Some(y.x.sin()), &[10.0, 20.0, 40.0, 80.0], 1, 2).unwrap();
        assert!(r.decreasing);
        assert!(r.slope < -0.5);
    }
}
