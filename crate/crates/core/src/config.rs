//! JSON run configuration shared by the CLI, the tests, and the benches.

use serde::{Deserialize, Serialize};

use crate::effective::EffectiveOptions;
use crate::env::{EnvSpec, FieldKind, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::macroscopic::{CorrectorOptions, MacroOptions};
use crate::metric::MetricOptions;
use crate::shape::ShapeOptions;
use crate::vec2::Vec2;

/// Realization seeds: an explicit list or a contiguous range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: usize },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (0..*count as u64).map(|k| start + k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SeedSpec::List(v) => v.len(),
            SeedSpec::Range { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The field law without a seed; realizations take theirs from [`SeedSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(flatten)]
    pub kind: FieldKind,
    pub dim: usize,
}

impl EnvConfig {
    pub fn spec(&self, seed: u64) -> EnvSpec {
        EnvSpec { kind: self.kind.clone(), seed, dim: self.dim }
    }
}

/// Momentum grid: explicit vectors, or a symmetric box sampled `n` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PGrid {
    List(Vec<Vec<f64>>),
    Box { min: f64, max: f64, n: usize },
}

impl Default for PGrid {
    fn default() -> Self {
        PGrid::Box { min: -1.0, max: 1.0, n: 9 }
    }
}

impl PGrid {
    pub fn points(&self, dim: usize) -> Result<Vec<Vec2>> {
        match self {
            PGrid::List(v) => v
                .iter()
                .map(|c| {
                    if c.len() != dim {
                        return Err(Error::config(format!("p-grid vector {c:?} does not have dimension {dim}")));
                    }
                    Vec2::from_slice(c).filter(|p| p.is_finite()).ok_or_else(|| Error::config("non-finite p-grid entry"))
                })
                .collect(),
            &PGrid::Box { min, max, n } => {
                if n < 2 || !(min < max) || !min.is_finite() || !max.is_finite() {
                    return Err(Error::config("p-grid box needs min < max and n >= 2"));
                }
                let axis: Vec<f64> = (0..n).map(|k| min + (max - min) * k as f64 / (n - 1) as f64).collect();
                Ok(if dim == 1 {
                    axis.iter().map(|&x| Vec2::on_axis(x)).collect()
                } else {
                    axis.iter().flat_map(|&y| axis.iter().map(move |&x| Vec2::new(x, y))).collect()
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveConfig {
    pub p_grid: PGrid,
    pub tol_fraction: f64,
    pub ci_multiplier: f64,
    pub max_ceiling_expansions: usize,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        let d = EffectiveOptions::default();
        EffectiveConfig {
            p_grid: PGrid::default(),
            tol_fraction: d.tol_fraction,
            ci_multiplier: d.ci_multiplier,
            max_ceiling_expansions: d.max_ceiling_expansions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroConfig {
    /// Momenta for the macroscopic runs; empty means the unit vector `e₁`.
    pub p: Vec<Vec<f64>>,
    /// Strictly decreasing discount ladder.
    pub deltas: Vec<f64>,
    pub solver: MacroOptions,
    pub ball_radii: Vec<f64>,
    pub corrector: CorrectorOptions,
    /// Allowance for the discretization error in the agreement test.
    pub scheme_error: f64,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            p: Vec::new(),
            deltas: vec![0.05, 0.025, 0.0125],
            solver: MacroOptions::default(),
            ball_radii: vec![0.25, 0.5, 1.0],
            corrector: CorrectorOptions::default(),
            scheme_error: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricRun {
    /// Physical half-width of the lattice box around the source.
    pub half_width: f64,
}

impl Default for MetricRun {
    fn default() -> Self {
        MetricRun { half_width: 32.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Snapshot {
    pub half_width: f64,
    pub h: f64,
}

impl Default for Snapshot {
    fn default() -> Self {
        Snapshot { half_width: 8.0, h: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub hypothesis_budget: usize,
    /// Random instances per exact discrete identity.
    pub identity_instances: usize,
    /// `ν − μ` for the strict-monotonicity check of the shape.
    pub mu_gap: f64,
    pub macro_checks: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { hypothesis_budget: 4096, identity_instances: 100, mu_gap: 0.25, macro_checks: true }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: HamiltonianFamily,
    pub env: EnvConfig,
    pub seeds: SeedSpec,
    /// Independent seeds for re-checks and ensemble comparisons; default:
    /// the same count starting one million past the largest seed.
    #[serde(default)]
    pub fresh_seeds: Option<SeedSpec>,
    /// Level for the `metric` and `shape` subcommands.
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub tol_scale: f64,
    #[serde(default)]
    pub metric: MetricOptions,
    #[serde(default)]
    pub metric_run: MetricRun,
    #[serde(default)]
    pub shape: ShapeOptions,
    #[serde(default)]
    pub effective: EffectiveConfig,
    #[serde(default, rename = "macro")]
    pub macro_: MacroConfig,
    #[serde(default)]
    pub snapshot: Snapshot,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env.spec(0);
        spec.validate()?;
        match self.family {
            HamiltonianFamily::Power { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                return Err(Error::config(format!("power exponent must be positive, got {gamma}")));
            }
            HamiltonianFamily::Aniso { kappa } if !(kappa >= 0.0 && kappa.is_finite()) => {
                return Err(Error::config(format!("anisotropy kappa must be nonnegative, got {kappa}")));
            }
            _ => {}
        }
        if self.seeds.len() < 2 {
            return Err(Error::config("at least two realization seeds are required"));
        }
        if let Some(f) = &self.fresh_seeds {
            if f.len() < 2 {
                return Err(Error::config("at least two fresh seeds are required"));
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::config("mu must be finite"));
        }
        if !(self.tol_scale > 0.0 && self.tol_scale.is_finite()) {
            return Err(Error::config(format!("tol_scale must be positive, got {}", self.tol_scale)));
        }
        if !(self.metric.h > 0.0 && self.metric.margin >= 1.0) {
            return Err(Error::config("metric spacing must be positive and margin at least 1"));
        }
        self.metric.stencil(self.env.dim)?;
        self.shape.validate()?;
        self.effective.p_grid.points(self.env.dim)?;
        if !(self.effective.tol_fraction > 0.0 && self.effective.ci_multiplier >= 0.0) {
            return Err(Error::config("effective tolerances must be positive"));
        }
        let m = &self.macro_;
        if m.deltas.is_empty() || m.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::config(format!("discount ladder must be positive, got {:?}", m.deltas)));
        }
        if m.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("discount ladder must be strictly decreasing"));
        }
        m.solver.validate()?;
        for p in &m.p {
            if p.len() != self.env.dim || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("macro momentum {p:?} does not match dimension {}", self.env.dim)));
            }
        }
        if m.ball_radii.iter().any(|r| !(*r > 0.0)) || !(m.scheme_error >= 0.0) {
            return Err(Error::config("ball radii and scheme error must be positive"));
        }
        if !(self.metric_run.half_width > 0.0 && self.snapshot.half_width > 0.0 && self.snapshot.h > 0.0) {
            return Err(Error::config("metric and snapshot extents must be positive"));
        }
        if self.verify.hypothesis_budget < 1000 {
            return Err(Error::config("hypothesis budget must be at least 1000"));
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.seeds()
    }

    pub fn fresh_seed_list(&self) -> Vec<u64> {
        match &self.fresh_seeds {
            Some(s) => s.seeds(),
            None => {
                let seeds = self.seed_list();
                let base = seeds.iter().copied().max().unwrap_or(0) + 1_000_000;
                (0..seeds.len() as u64).map(|k| base + k).collect()
            }
        }
    }

    /// Replaces the seed list by `count` consecutive seeds from `start`.
    pub fn override_seeds(&mut self, start: u64) {
        self.seeds = SeedSpec::Range { start, count: self.seeds.len() };
    }

    pub fn effective_options(&self) -> EffectiveOptions {
        EffectiveOptions {
            shape: self.shape.clone(),
            tol_fraction: self.effective.tol_fraction,
            tol_scale: self.tol_scale,
            ci_multiplier: self.effective.ci_multiplier,
            max_ceiling_expansions: self.effective.max_ceiling_expansions,
        }
    }

    pub fn p_grid(&self) -> Result<Vec<Vec2>> {
        self.effective.p_grid.points(self.env.dim)
    }

    pub fn macro_momenta(&self) -> Vec<Vec2> {
        if self.macro_.p.is_empty() {
            return vec![Vec2::on_axis(1.0)];
        }
        self.macro_.p.iter().filter_map(|c| Vec2::from_slice(c)).collect()
    }
}
