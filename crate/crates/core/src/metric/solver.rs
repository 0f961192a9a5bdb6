use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::convexgeom::{Fan, GeometryCache};
use crate::env::{Environment, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::metric::lattice::{Lattice, Stencil};
use crate::vec2::Vec2;

/// Which metric is solved: `m_μ(·, x)` or its reversed twin `n_μ(·, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Forward,
    Reversed,
}

/// How the support function in the edge integrand is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupportSource {
    /// Closed-form support function of the shipped families.
    Analytic,
    /// Fan-sampled sublevel geometry (any quasiconvex family).
    Fan { dirs: usize },
}

impl Default for SupportSource {
    fn default() -> Self {
        SupportSource::Analytic
    }
}

/// Edge-cost evaluator for one `(family, ω, μ, direction)`.
pub struct CostModel<'a> {
    family: &'a HamiltonianFamily,
    env: &'a Environment,
    mu: f64,
    direction: Direction,
    cache: Option<GeometryCache>,
    constant: Option<f64>,
}

impl<'a> CostModel<'a> {
    pub fn new(
        family: &'a HamiltonianFamily,
        env: &'a Environment,
        mu: f64,
        direction: Direction,
        source: SupportSource,
        stencil: Option<&Stencil>,
    ) -> Self {
        let cache = match source {
            SupportSource::Analytic => None,
            SupportSource::Fan { dirs } => {
                let fan = Fan::uniform(dirs, env.dim());
                let fan = match stencil {
                    Some(s) if env.dim() == 2 => fan.with_extra(&s.unit_directions()),
                    _ => fan,
                };
                Some(GeometryCache::new(family, env.value_range(), fan))
            }
        };
        let constant = match env.distinct_values() {
            Some(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        };
        CostModel { family, env, mu, direction, cache, constant }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `σ_μ(v, u)` per unit length.
    #[inline]
    pub fn sigma(&self, value: f64, u: Vec2) -> Result<f64> {
        let s = match &self.cache {
            None => self.family.analytic_support(value, self.mu, u).ok_or_else(|| {
                Error::UnsupportedRegime(format!("empty sublevel set at mu = {} for field value {value}", self.mu))
            })?,
            Some(cache) => cache.get(value, self.mu, false)?.support(u),
        };
        if !(s >= 0.0) || s.is_infinite() {
            return Err(Error::UnsupportedRegime(format!(
                "support value {s} at mu = {}, field value {value}: edge costs must be finite and nonnegative",
                self.mu
            )));
        }
        Ok(s)
    }

    /// Cost of the lattice edge `a → a + v`.
    ///
    /// The segment is traversed from its lexicographically smaller endpoint
    /// so that an edge and its reversal share the same floating-point pieces.
    /// Piecewise-constant fields are split at cell faces; otherwise the
    /// midpoint rule applies.
    pub fn edge(&self, lattice: &Lattice, a: usize, v: (i64, i64), buf: &mut Vec<f64>) -> Result<f64> {
        let (i, j) = lattice.coords(a);
        let b = lattice.index(i + v.0, j + v.1);
        let pa = lattice.position(a);
        let pb = match b {
            Some(b) => lattice.position(b),
            None => Vec2::new(lattice.h() * (i + v.0) as f64, lattice.h() * (j + v.1) as f64),
        };
        let norm = ((v.0 * v.0 + v.1 * v.1) as f64).sqrt();
        let mut u = Vec2::new(v.0 as f64 / norm, v.1 as f64 / norm);
        if self.direction == Direction::Reversed {
            u = -u;
        }
        let len = lattice.h() * norm;
        if let Some(c) = self.constant {
            return Ok(len * self.sigma(c, u)?);
        }
        let (s, e) = if (pa.x, pa.y) <= (pb.x, pb.y) { (pa, pb) } else { (pb, pa) };
        buf.clear();
        self.env.breakpoints(s, e, buf);
        let d = e - s;
        let mut acc = 0.0;
        let mut t0 = 0.0;
        for k in 0..=buf.len() {
            let t1 = if k < buf.len() { buf[k] } else { 1.0 };
            let mid = s + d * (0.5 * (t0 + t1));
            acc += (t1 - t0) * self.sigma(self.env.value(mid), u)?;
            t0 = t1;
        }
        Ok(len * acc)
    }
}

/// Cost of one edge, `h|v| σ_μ` integrated along the segment.
pub fn edge_cost(
    lattice: &Lattice,
    family: &HamiltonianFamily,
    env: &Environment,
    mu: f64,
    node: usize,
    offset: (i64, i64),
) -> Result<f64> {
    CostModel::new(family, env, mu, Direction::Forward, SupportSource::Analytic, None).edge(lattice, node, offset, &mut Vec::new())
}

/// Discrete maximal subsolution on a lattice.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub mu: f64,
    pub source: usize,
    pub direction: Direction,
    pub lattice: Lattice,
    /// `m_μ(node, x)`; `+∞` at nodes not settled by an early-terminated solve.
    pub values: Vec<f64>,
    /// Coercivity-witness radius, bounding the cost per unit length.
    pub lipschitz: f64,
    pub anisotropy: f64,
    pub complete: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricSummary {
    pub mu: f64,
    pub seed: u64,
    pub direction: Direction,
    pub h: f64,
    pub stencil_radius: u32,
    pub anisotropy_factor: f64,
    pub lipschitz_constant: f64,
    pub source: [f64; 2],
    pub nodes: usize,
    pub lipschitz_excess: f64,
}

impl MetricField {
    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn source_position(&self) -> Vec2 {
        self.lattice.position(self.source)
    }

    /// Interpolated value at an off-lattice point.
    pub fn interpolate(&self, y: Vec2) -> Option<f64> {
        let w = self.lattice.interpolation(y)?;
        Some(w.iter().map(|&(n, w)| w * self.values[n]).sum())
    }

    /// `max_y (values[y] − C_μ · anisotropy · |y − x|)` over settled nodes;
    /// nonpositive when the Lipschitz certificate holds.
    pub fn lipschitz_excess(&self) -> f64 {
        let x = self.source_position();
        let c = self.lipschitz * self.anisotropy;
        (0..self.values.len())
            .filter(|&n| self.values[n].is_finite())
            .map(|n| self.values[n] - c * (self.lattice.position(n) - x).norm() * (1.0 + 1e-12))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn summary(&self, seed: u64) -> MetricSummary {
        let x = self.source_position();
        MetricSummary {
            mu: self.mu,
            seed,
            direction: self.direction,
            h: self.lattice.h(),
            stencil_radius: self.lattice.stencil().radius(),
            anisotropy_factor: self.anisotropy,
            lipschitz_constant: self.lipschitz,
            source: [x.x, x.y],
            nodes: self.values.len(),
            lipschitz_excess: self.lipschitz_excess(),
        }
    }

    /// CSV rows `x[,y],value` for settled nodes, in node order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let two = self.lattice.dim() == 2;
        if two {
            w.write_record(["x", "y", "value"])?;
        } else {
            w.write_record(["x", "value"])?;
        }
        for (n, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let p = self.lattice.position(n);
            if two {
                w.write_record([p.x.to_string(), p.y.to_string(), v.to_string()])?;
            } else {
                w.write_record([p.x.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One metric problem: lattice, Hamiltonian, realization, level and direction.
#[derive(Clone, Copy)]
pub struct MetricProblem<'a> {
    pub lattice: &'a Lattice,
    pub family: &'a HamiltonianFamily,
    pub env: &'a Environment,
    pub mu: f64,
    pub direction: Direction,
    pub support: SupportSource,
}

impl<'a> MetricProblem<'a> {
    pub fn new(lattice: &'a Lattice, family: &'a HamiltonianFamily, env: &'a Environment, mu: f64) -> Self {
        MetricProblem { lattice, family, env, mu, direction: Direction::Forward, support: SupportSource::Analytic }
    }

    pub fn with_direction(self, direction: Direction) -> Self {
        MetricProblem { direction, ..self }
    }

    pub fn with_support(self, support: SupportSource) -> Self {
        MetricProblem { support, ..self }
    }

    pub fn cost_model(&self) -> CostModel<'a> {
        CostModel::new(self.family, self.env, self.mu, self.direction, self.support, Some(self.lattice.stencil()))
    }

    /// Rejects levels at which some edge would have negative cost.
    fn check_admissible(&self, costs: &CostModel<'_>) -> Result<()> {
        let values = match self.env.distinct_values() {
            Some(v) => v,
            None => self.env.value_range().grid(33),
        };
        for &v in &values {
            for &(a, b) in self.lattice.stencil().offsets() {
                let n = ((a * a + b * b) as f64).sqrt();
                costs.sigma(v, Vec2::new(a as f64 / n, b as f64 / n))?;
            }
        }
        Ok(())
    }

    /// Full single-source solve.
    pub fn solve(&self, source: usize) -> Result<MetricField> {
        self.solve_until(source, None)
    }

    /// Single-source solve that stops once every target is settled.
    pub fn solve_until(&self, source: usize, targets: Option<&[usize]>) -> Result<MetricField> {
        let lattice = self.lattice;
        if source >= lattice.len() {
            return Err(Error::precondition("source outside the lattice"));
        }
        let costs = self.cost_model();
        self.check_admissible(&costs)?;
        let n = lattice.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut settled = vec![false; n];
        let mut pending = vec![false; n];
        let mut remaining = match targets {
            Some(t) => {
                for &k in t {
                    if k >= n {
                        return Err(Error::precondition("target outside the lattice"));
                    }
                    pending[k] = true;
                }
                t.iter().filter(|&&k| k < n).collect::<std::collections::BTreeSet<_>>().len()
            }
            None => n,
        };
        let track = targets.is_some();
        let offsets = lattice.stencil().offsets();
        let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
        let mut buf = Vec::new();
        dist[source] = 0.0;
        heap.push(Reverse((0.0f64.to_bits(), source as u32)));
        while let Some(Reverse((bits, u))) = heap.pop() {
            let u = u as usize;
            if settled[u] {
                continue;
            }
            let d = f64::from_bits(bits);
            settled[u] = true;
            if track {
                if pending[u] {
                    pending[u] = false;
                    remaining -= 1;
                }
            } else {
                remaining -= 1;
            }
            if remaining == 0 {
                break;
            }
            let (i, j) = lattice.coords(u);
            for &(a, b) in offsets {
                let Some(w) = lattice.index(i + a, j + b) else { continue };
                if settled[w] {
                    continue;
                }
                let c = costs.edge(lattice, u, (a, b), &mut buf)?;
                let nd = d + c;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((nd.to_bits(), w as u32)));
                }
            }
        }
        if track {
            for (k, s) in settled.iter().enumerate() {
                if !s {
                    dist[k] = f64::INFINITY;
                }
            }
        }
        let lipschitz = self
            .family
            .coercivity_radius(self.mu, self.env.value_range())
            .ok_or_else(|| Error::DegenerateFamily("no coercivity bound".into()))?;
        Ok(MetricField {
            mu: self.mu,
            source,
            direction: self.direction,
            lattice: lattice.clone(),
            values: dist,
            lipschitz,
            anisotropy: lattice.stencil().anisotropy_factor(),
            complete: !track || settled.iter().all(|&s| s),
        })
    }

    /// Largest `values[b] − (values[a] + cost(a, b))` over settled edges;
    /// nonpositive when no edge can be relaxed.
    pub fn optimality_excess(&self, field: &MetricField) -> Result<f64> {
        let costs = self.cost_model();
        let mut buf = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for a in 0..self.lattice.len() {
            if !field.values[a].is_finite() {
                continue;
            }
            let (i, j) = self.lattice.coords(a);
            for &(da, db) in self.lattice.stencil().offsets() {
                let Some(b) = self.lattice.index(i + da, j + db) else { continue };
                if !field.values[b].is_finite() {
                    continue;
                }
                let c = costs.edge(self.lattice, a, (da, db), &mut buf)?;
                worst = worst.max(field.values[b] - (field.values[a] + c));
            }
        }
        Ok(worst)
    }
}

/// Full forward solve with closed-form supports.
pub fn solve_metric(
    lattice: &Lattice,
    family: &HamiltonianFamily,
    env: &Environment,
    mu: f64,
    source: usize,
    direction: Direction,
) -> Result<MetricField> {
    MetricProblem::new(lattice, family, env, mu).with_direction(direction).solve(source)
}

/// Discretization parameters shared by every metric solve of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub h: f64,
    pub stencil_radius: u32,
    pub support: SupportSource,
    /// Geometric margin of the truncated domain, in units of
    /// `anisotropy · (largest target distance)`.
    pub margin: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions { h: 1.0, stencil_radius: 2, support: SupportSource::Analytic, margin: 1.5 }
    }
}

impl MetricOptions {
    pub fn stencil(&self, dim: usize) -> Result<Stencil> {
        Stencil::new(self.stencil_radius, dim)
    }

    /// Truncated lattice around `source` that contains `targets`.
    pub fn lattice_for(&self, dim: usize, source: Vec2, targets: &[Vec2]) -> Result<Lattice> {
        Lattice::covering(self.h, self.stencil(dim)?, source, targets, self.margin)
    }
}
