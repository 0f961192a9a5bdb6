//! The discounted cell problem `δv + H(p + Dv, y, ω) = 0` on a box of
//! half-width `R/δ`, solved by a monotone Gauss-Seidel fixed point.
//!
//! `−δv^δ(0)` converges to `H̄(p)`; the module reports the finite-δ proxies,
//! ball statistics, and the corrector inequalities against the metric
//! pipeline.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::TableEntry;
use crate::env::{EnvSpec, Environment, HamiltonianFamily};
use crate::error::{Error, Result};
use crate::metric::{CostModel, Direction, Lattice, MetricProblem, Stencil, SupportSource};
use crate::stats::{summarize, Summary};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Godunov in 1-D, Lax-Friedrichs in 2-D.
    #[default]
    Auto,
    /// Upwind flux built from the monotone branches of `H(p + ·)`; 1-D only.
    Godunov,
    LaxFriedrichs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    /// `v = −H(p, y)/δ` node by node.
    #[default]
    Local,
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroOptions {
    pub h: f64,
    /// Domain radius `R` in units of the bound `C`; ignored when `radius` is set.
    pub radius_factor: f64,
    pub radius: Option<f64>,
    /// Stop when the fixed-point residual `max |δv + H_num|` is below `tol`,
    /// which bounds `max |δ(v − v*)|`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub scheme: Scheme,
    pub init: Init,
    pub max_nodes: usize,
}

impl Default for MacroOptions {
    fn default() -> Self {
        MacroOptions {
            h: 0.1,
            radius_factor: 8.0,
            radius: None,
            tol: 1e-10,
            max_sweeps: 20_000,
            scheme: Scheme::Auto,
            init: Init::Local,
            max_nodes: 40_000_000,
        }
    }
}

impl MacroOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config(format!("macro grid spacing must be positive, got {}", self.h)));
        }
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::config("macro tolerance and sweep budget must be positive"));
        }
        if !(self.radius_factor > 0.0) || self.radius.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::config("macro domain radius must be positive"));
        }
        Ok(())
    }

    fn resolved(&self, dim: usize) -> Result<Scheme> {
        match (self.scheme, dim) {
            (Scheme::Auto, 1) | (Scheme::Godunov, 1) => Ok(Scheme::Godunov),
            (Scheme::Godunov, _) => Err(Error::config("the Godunov scheme is only available in 1-D")),
            _ => Ok(Scheme::LaxFriedrichs),
        }
    }
}

/// A priori bounds for the discounted problem at momentum `p`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MacroBounds {
    /// `sup_y |H(p, y)|`, which bounds `|δv|`.
    pub sup_h: f64,
    /// Gradient bound `coercivity_radius(sup_h) + |p|`.
    pub gradient: f64,
    /// `C = max(sup_h, gradient)`.
    pub c: f64,
}

fn node_values(env: &Environment) -> Vec<f64> {
    env.distinct_values().unwrap_or_else(|| env.value_range().grid(33))
}

pub fn macro_bounds(family: &HamiltonianFamily, env: &Environment, p: Vec2) -> Result<MacroBounds> {
    let values = node_values(env);
    let sup_h = values.iter().map(|&v| family.h(p, v).abs()).fold(0.0, f64::max);
    let r = family
        .coercivity_radius(sup_h, env.value_range())
        .ok_or_else(|| Error::UnsupportedRegime(format!("{} is not coercive on this range", family.label())))?;
    let gradient = r + p.norm();
    Ok(MacroBounds { sup_h, gradient, c: sup_h.max(gradient) })
}

/// Dissipation `α ≥ sup |∂H/∂q_k|` over `|q| ≤ L + 1`, by central differences.
pub fn dissipation(family: &HamiltonianFamily, env: &Environment, p: Vec2, radius: f64) -> f64 {
    let values = node_values(env);
    let dim = env.dim();
    let n = if dim == 1 { 801 } else { 61 };
    let eps = 1e-6;
    let mut alpha: f64 = 0.0;
    let step = 2.0 * radius / (n - 1) as f64;
    for a in 0..n {
        for b in 0..(if dim == 1 { 1 } else { n }) {
            let q = if dim == 1 {
                Vec2::on_axis(-radius + a as f64 * step)
            } else {
                Vec2::new(-radius + a as f64 * step, -radius + b as f64 * step)
            };
            if q.norm() > radius {
                continue;
            }
            for &v in &values {
                for e in [Vec2::E1, Vec2::E2].iter().take(dim) {
                    let d = (family.h(p + q + *e * eps, v) - family.h(p + q - *e * eps, v)) / (2.0 * eps);
                    if d.is_finite() {
                        alpha = alpha.max(d.abs());
                    }
                }
            }
        }
    }
    alpha * (1.0 + 1e-6) + 1e-12
}

/// Root of an increasing `g` on `[a, b]` with `g(a) < 0 ≤ g(b)` (Illinois).
fn bracketed_root(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let (mut ga, mut gb) = (g(a), g(b));
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if gc < 0.0 {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    b
}

/// Per-node data of the 1-D Godunov flux: `H(p + q, v)` is nonincreasing for
/// `q ≤ m` and nondecreasing for `q ≥ m`, with minimum `hmin`.
#[derive(Clone, Copy, Debug)]
struct NodeFlux {
    v: f64,
    m: f64,
    hmin: f64,
}

impl NodeFlux {
    fn new(family: &HamiltonianFamily, p: Vec2, v: f64) -> Self {
        let (arg, hmin) = family.analytic_min(v);
        NodeFlux { v, m: arg.x - p.x, hmin }
    }

    /// `H_G(a, b) = max(H(p + max(a, m)), H(p + min(b, m)))`; a missing side is neutral.
    fn flux(&self, family: &HamiltonianFamily, p: Vec2, a: Option<f64>, b: Option<f64>) -> f64 {
        let hq = |q: f64| family.h(Vec2::on_axis(p.x + q), self.v);
        let l = a.map_or(self.hmin, |a| hq(a.max(self.m)));
        let r = b.map_or(self.hmin, |b| hq(b.min(self.m)));
        l.max(r)
    }

    fn hq(&self, family: &HamiltonianFamily, p: Vec2, q: f64) -> f64 {
        family.h(Vec2::on_axis(p.x + q), self.v)
    }

    /// Root of `δx + H(p + max((x − w)/h, m)) = 0` (information from the left).
    fn left_root(&self, family: &HamiltonianFamily, p: Vec2, delta: f64, h: f64, w: Option<f64>) -> f64 {
        let top = -self.hmin / delta;
        match w {
            Some(w) if top > w + h * self.m => bracketed_root(
                |x| delta * x + self.hq(family, p, ((x - w) / h).max(self.m)),
                w + h * self.m,
                top,
            ),
            _ => top,
        }
    }

    /// Root of `δx + H(p + min((e − x)/h, m)) = 0` (information from the right).
    fn right_root(&self, family: &HamiltonianFamily, p: Vec2, delta: f64, h: f64, e: Option<f64>) -> f64 {
        let top = -self.hmin / delta;
        match e {
            Some(e) if top > e - h * self.m => bracketed_root(
                |x| delta * x + self.hq(family, p, ((e - x) / h).min(self.m)),
                e - h * self.m,
                top,
            ),
            _ => top,
        }
    }

    /// Solves `δx + H_G((x − w)/h, (e − x)/h) = 0`; the left side is strictly
    /// increasing in `x`, so the root is the smaller of the two branch roots.
    fn update(&self, family: &HamiltonianFamily, p: Vec2, delta: f64, h: f64, w: Option<f64>, e: Option<f64>) -> f64 {
        self.left_root(family, p, delta, h, w).min(self.right_root(family, p, delta, h, e))
    }
}

/// Joint solution of an adjacent pair where node `a` looks right and node
/// `b = a + 1` looks left. With `s = (v_b − v_a)/h` both equations reduce to
/// the increasing scalar equation `δhs − H⁻_a(s) + H⁺_b(s) = 0`.
fn pair_root(family: &HamiltonianFamily, p: Vec2, delta: f64, h: f64, a: &NodeFlux, b: &NodeFlux) -> (f64, f64) {
    let down = |s: f64| a.hq(family, p, s.min(a.m));
    let up = |s: f64| b.hq(family, p, s.max(b.m));
    let g = |s: f64| delta * h * s - down(s) + up(s);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) >= 0.0 {
        lo *= 2.0;
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let s = bracketed_root(g, lo, hi);
    (-down(s) / delta, -up(s) / delta)
}

/// Regular grid `y = h·(i, j)`, `|i|, |j| ≤ half`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroGrid {
    pub dim: usize,
    pub h: f64,
    pub half: i64,
}

impl MacroGrid {
    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.side()
        } else {
            self.side() * self.side()
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        if i.abs() > self.half || j.abs() > self.half || (self.dim == 1 && j != 0) {
            return None;
        }
        let n = self.side() as i64;
        Some(((i + self.half) + if self.dim == 1 { 0 } else { (j + self.half) * n }) as usize)
    }

    pub fn coords(&self, idx: usize) -> (i64, i64) {
        let n = self.side();
        if self.dim == 1 {
            (idx as i64 - self.half, 0)
        } else {
            ((idx % n) as i64 - self.half, (idx / n) as i64 - self.half)
        }
    }

    pub fn position(&self, idx: usize) -> Vec2 {
        let (i, j) = self.coords(idx);
        Vec2::new(self.h * i as f64, self.h * j as f64)
    }

    pub fn center(&self) -> usize {
        self.index(0, 0).unwrap()
    }

    /// Physical half-width.
    pub fn extent(&self) -> f64 {
        self.h * self.half as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallStat {
    pub r: f64,
    /// `sup` of `−δv` over `B_{r/δ}`.
    pub sup: f64,
    pub inf: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacroSolution {
    pub p: Vec2,
    pub delta: f64,
    pub seed: u64,
    pub grid: MacroGrid,
    pub scheme: Scheme,
    /// Lax-Friedrichs dissipation actually used.
    pub alpha: Option<f64>,
    pub bounds: MacroBounds,
    /// Domain radius `R`; the box has half-width `R/δ`.
    pub radius: f64,
    pub values: Vec<f64>,
    /// `max |δv + H_num|` at the fixed point.
    pub residual: f64,
    /// Policy iterations (1-D Godunov) or Gauss-Seidel sweeps.
    pub sweeps: usize,
    /// `max |δv|` and the largest one-sided difference quotient.
    pub sup_delta_v: f64,
    pub sup_gradient: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacroSummary {
    pub p: Vec2,
    pub delta: f64,
    pub seed: u64,
    pub center: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub ball: Vec<BallStat>,
}

impl MacroSolution {
    /// `−δv^δ(0)`.
    pub fn center(&self) -> f64 {
        -self.delta * self.values[self.grid.center()]
    }

    pub fn value_at(&self, y: Vec2) -> Option<f64> {
        let g = &self.grid;
        let (fx, fy) = (y.x / g.h, y.y / g.h);
        let (i0, j0) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        if g.dim == 1 {
            let a = self.values[g.index(i0, 0)?];
            if tx == 0.0 {
                return Some(a);
            }
            return Some(a + tx * (self.values[g.index(i0 + 1, 0)?] - a));
        }
        let v = |i: i64, j: i64| g.index(i, j).map(|k| self.values[k]);
        Some(
            (1.0 - tx) * (1.0 - ty) * v(i0, j0)?
                + tx * (1.0 - ty) * v(i0 + 1, j0)?
                + (1.0 - tx) * ty * v(i0, j0 + 1)?
                + tx * ty * v(i0 + 1, j0 + 1)?,
        )
    }

    /// Approximate corrector `w^δ(y) = v^δ(y) − v^δ(0)`.
    pub fn corrector(&self, y: Vec2) -> Option<f64> {
        Some(self.value_at(y)? - self.values[self.grid.center()])
    }

    pub fn ball_stat(&self, r: f64) -> Result<BallStat> {
        let rad = r / self.delta;
        if !(r > 0.0) || rad > self.grid.extent() {
            return Err(Error::precondition(format!(
                "ball radius {r}/delta = {rad} exceeds the domain half-width {}",
                self.grid.extent()
            )));
        }
        let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if self.grid.position(k).norm() <= rad {
                sup = sup.max(-self.delta * v);
                inf = inf.min(-self.delta * v);
            }
        }
        Ok(BallStat { r, sup, inf })
    }

    pub fn summary(&self, radii: &[f64]) -> Result<MacroSummary> {
        Ok(MacroSummary {
            p: self.p,
            delta: self.delta,
            seed: self.seed,
            center: self.center(),
            residual: self.residual,
            sweeps: self.sweeps,
            ball: radii.iter().map(|&r| self.ball_stat(r)).collect::<Result<_>>()?,
        })
    }

    /// Excess of the discrete solution over the a priori bounds `|δv| ≤ C`, `|Dv| ≤ C`.
    pub fn bound_excess(&self) -> f64 {
        (self.sup_delta_v - self.bounds.c).max(self.sup_gradient - self.bounds.c)
    }

    /// CSV rows `x,y,v,minus_delta_v` along the `x` axis through the origin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "v", "minus_delta_v"])?;
        for i in -self.grid.half..=self.grid.half {
            let k = self.grid.index(i, 0).unwrap();
            let y = self.grid.position(k);
            let v = self.values[k];
            w.write_record([y.x.to_string(), y.y.to_string(), v.to_string(), (-self.delta * v).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Relaxation<'a> {
    family: &'a HamiltonianFamily,
    p: Vec2,
    delta: f64,
    grid: MacroGrid,
    fields: Vec<f64>,
    flux: Vec<NodeFlux>,
}

impl Relaxation<'_> {
    fn neighbor(&self, v: &[f64], k: usize, di: i64, dj: i64) -> Option<f64> {
        let (i, j) = self.grid.coords(k);
        self.grid.index(i + di, j + dj).map(|n| v[n])
    }

    fn godunov(&self, v: &[f64], k: usize) -> f64 {
        let (w, e) = (self.neighbor(v, k, -1, 0), self.neighbor(v, k, 1, 0));
        self.flux[k].update(self.family, self.p, self.delta, self.grid.h, w, e)
    }

    /// Neighbors along each axis with reflection at the boundary.
    fn lf_pairs(&self, v: &[f64], k: usize) -> [(f64, f64); 2] {
        let mut out = [(0.0, 0.0); 2];
        for (axis, o) in out.iter_mut().enumerate().take(self.grid.dim) {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            let plus = self.neighbor(v, k, di, dj);
            let minus = self.neighbor(v, k, -di, -dj);
            *o = match (plus, minus) {
                (Some(a), Some(b)) => (a, b),
                (Some(a), None) => (a, a),
                (None, Some(b)) => (b, b),
                (None, None) => (v[k], v[k]),
            };
        }
        out
    }

    fn lax_friedrichs(&self, v: &[f64], k: usize, alpha: f64) -> f64 {
        let h = self.grid.h;
        let pairs = self.lf_pairs(v, k);
        let d = self.grid.dim;
        let mut q = Vec2::ZERO;
        let mut sum = 0.0;
        for (axis, &(a, b)) in pairs.iter().enumerate().take(d) {
            let g = (a - b) / (2.0 * h);
            if axis == 0 {
                q.x = g;
            } else {
                q.y = g;
            }
            sum += a + b;
        }
        let hv = self.family.h(self.p + q, self.fields[k]);
        (alpha / (2.0 * h) * sum - hv) / (self.delta + d as f64 * alpha / h)
    }

    fn update(&self, v: &[f64], k: usize, alpha: Option<f64>) -> f64 {
        match alpha {
            None => self.godunov(v, k),
            Some(a) => self.lax_friedrichs(v, k, a),
        }
    }

    fn residual_at(&self, v: &[f64], k: usize, alpha: Option<f64>) -> f64 {
        let h = self.grid.h;
        let num = match alpha {
            None => {
                let a = self.neighbor(v, k, -1, 0).map(|w| (v[k] - w) / h);
                let b = self.neighbor(v, k, 1, 0).map(|e| (e - v[k]) / h);
                self.flux[k].flux(self.family, self.p, a, b)
            }
            Some(alpha) => {
                let pairs = self.lf_pairs(v, k);
                let mut q = Vec2::ZERO;
                let mut lap = 0.0;
                for (axis, &(a, b)) in pairs.iter().enumerate().take(self.grid.dim) {
                    let g = (a - b) / (2.0 * h);
                    if axis == 0 {
                        q.x = g;
                    } else {
                        q.y = g;
                    }
                    lap += a - 2.0 * v[k] + b;
                }
                self.family.h(self.p + q, self.fields[k]) - alpha / (2.0 * h) * lap
            }
        };
        self.delta * v[k] + num
    }

    fn orders(&self) -> Vec<Vec<usize>> {
        let n = self.grid.side();
        if self.grid.dim == 1 {
            let f: Vec<usize> = (0..n).collect();
            let b: Vec<usize> = (0..n).rev().collect();
            return vec![f, b];
        }
        let mut out = Vec::new();
        for (ri, rj) in [(false, false), (true, false), (true, true), (false, true)] {
            let is: Vec<usize> = if ri { (0..n).rev().collect() } else { (0..n).collect() };
            let js: Vec<usize> = if rj { (0..n).rev().collect() } else { (0..n).collect() };
            out.push(js.iter().flat_map(|&j| is.iter().map(move |&i| j * n + i)).collect());
        }
        out
    }

    fn max_residual(&self, v: &[f64], alpha: Option<f64>) -> f64 {
        (0..v.len()).map(|k| self.residual_at(v, k, alpha).abs()).fold(0.0, f64::max)
    }

    /// Gauss-Seidel sweeps in alternating orders until the residual is below
    /// `tol`; monotonicity with the strict `δ` term gives `|δ(v − v*)| ≤ residual`.
    fn run(&self, init: &[f64], alpha: Option<f64>, opts: &MacroOptions) -> Option<(Vec<f64>, usize)> {
        let mut v = init.to_vec();
        let orders = self.orders();
        for sweep in 0..opts.max_sweeps {
            for &k in &orders[sweep % orders.len()] {
                v[k] = self.update(&v, k, alpha);
            }
            let r = self.max_residual(&v, alpha);
            if !r.is_finite() {
                return None;
            }
            if r <= opts.tol {
                return Some((v, sweep + 1));
            }
        }
        None
    }

    /// Values of the 1-D Godunov system under a fixed branch policy
    /// (`true`: node `k` takes its information from `k − 1`). Dependencies
    /// form chains rooted at the boundary or at adjacent right/left pairs,
    /// so every node is solved exactly once.
    fn evaluate_policy(&self, left: &[bool]) -> Vec<f64> {
        let n = left.len();
        let (fam, p, d, h) = (self.family, self.p, self.delta, self.grid.h);
        let mut v = vec![f64::NAN; n];
        for k in 0..n.saturating_sub(1) {
            if !left[k] && left[k + 1] {
                (v[k], v[k + 1]) = pair_root(fam, p, d, h, &self.flux[k], &self.flux[k + 1]);
            }
        }
        for k in 0..n {
            if left[k] && v[k].is_nan() {
                v[k] = self.flux[k].left_root(fam, p, d, h, (k > 0).then(|| v[k - 1]));
            }
        }
        for k in (0..n).rev() {
            if !left[k] && v[k].is_nan() {
                v[k] = self.flux[k].right_root(fam, p, d, h, (k + 1 < n).then(|| v[k + 1]));
            }
        }
        v
    }

    /// Active branch of each node at `v`; ties keep the previous choice.
    fn improve(&self, v: &[f64], left: &mut [bool]) -> bool {
        let h = self.grid.h;
        let n = v.len();
        let mut changed = false;
        for k in 0..n {
            let f = &self.flux[k];
            let l = if k > 0 { f.hq(self.family, self.p, ((v[k] - v[k - 1]) / h).max(f.m)) } else { f.hmin };
            let r = if k + 1 < n { f.hq(self.family, self.p, ((v[k + 1] - v[k]) / h).min(f.m)) } else { f.hmin };
            let want = if l > r { true } else if r > l { false } else { left[k] };
            if want != left[k] {
                left[k] = want;
                changed = true;
            }
        }
        changed
    }

    /// Howard policy iteration on the 1-D Godunov system, with one
    /// Gauss-Seidel sweep each way between evaluations. Exits only on a
    /// stable policy whose residual is below `tol`.
    fn policy_iteration(&self, init: &[f64], opts: &MacroOptions) -> Option<(Vec<f64>, usize)> {
        let mut left = vec![true; init.len()];
        self.improve(init, &mut left);
        for it in 1..=opts.max_sweeps.min(1000) {
            let mut v = self.evaluate_policy(&left);
            if !self.improve(&v, &mut left) {
                return (self.max_residual(&v, None) <= opts.tol).then_some((v, it));
            }
            // one sweep each way carries policy fronts across the whole line
            for k in (0..v.len()).chain((0..v.len()).rev()) {
                v[k] = self.godunov(&v, k);
            }
            self.improve(&v, &mut left);
        }
        None
    }
}

/// `−δv^δ` on the box of half-width `R/δ` for one realization.
pub fn solve_macro(
    family: &HamiltonianFamily,
    env: &Environment,
    p: Vec2,
    delta: f64,
    opts: &MacroOptions,
) -> Result<MacroSolution> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("discount delta must be positive, got {delta}")));
    }
    opts.validate()?;
    let dim = env.dim();
    let scheme = opts.resolved(dim)?;
    let bounds = macro_bounds(family, env, p)?;
    let radius = opts.radius.unwrap_or(opts.radius_factor * bounds.c);
    if radius < 4.0 * bounds.c {
        return Err(Error::precondition(format!("domain radius {radius} is below 4C = {}", 4.0 * bounds.c)));
    }
    let half = (radius / (delta * opts.h)).ceil() as i64;
    let grid = MacroGrid { dim, h: opts.h, half };
    let side = grid.side() as f64;
    if side.powi(dim as i32) > opts.max_nodes as f64 {
        return Err(Error::precondition(format!(
            "macro grid of {side}^{dim} nodes exceeds the budget of {}",
            opts.max_nodes
        )));
    }
    let fields: Vec<f64> = (0..grid.len()).map(|k| env.value(grid.position(k))).collect();
    let flux = if scheme == Scheme::Godunov {
        fields.iter().map(|&v| NodeFlux::new(family, p, v)).collect()
    } else {
        Vec::new()
    };
    let relax = Relaxation { family, p, delta, grid, fields, flux };
    let init: Vec<f64> = match opts.init {
        Init::Local => relax.fields.iter().map(|&v| -family.h(p, v) / delta).collect(),
        Init::Constant { value } => vec![value; grid.len()],
    };

    let mut alpha = (scheme == Scheme::LaxFriedrichs).then(|| dissipation(family, env, p, bounds.gradient + 1.0));
    let mut outcome = match scheme {
        Scheme::Godunov => relax.policy_iteration(&init, opts).or_else(|| relax.run(&init, None, opts)),
        _ => relax.run(&init, alpha, opts),
    };
    if outcome.is_none() {
        if let Some(a) = alpha {
            // stagnation: one retry with doubled dissipation
            alpha = Some(2.0 * a);
            outcome = relax.run(&init, alpha, opts);
        }
    }
    let Some((values, sweeps)) = outcome else {
        return Err(Error::SolverFailure(format!(
            "macroscopic relaxation did not reach tol {} within {} sweeps (delta = {delta})",
            opts.tol, opts.max_sweeps
        )));
    };
    let residual = (0..grid.len()).map(|k| relax.residual_at(&values, k, alpha).abs()).fold(0.0, f64::max);
    let sup_delta_v = values.iter().map(|v| (delta * v).abs()).fold(0.0, f64::max);
    let mut sup_gradient: f64 = 0.0;
    for k in 0..grid.len() {
        let (i, j) = grid.coords(k);
        for (di, dj) in [(1, 0), (0, 1)].into_iter().take(dim) {
            if let Some(n) = grid.index(i + di, j + dj) {
                sup_gradient = sup_gradient.max((values[n] - values[k]).abs() / grid.h);
            }
        }
    }
    Ok(MacroSolution {
        p,
        delta,
        seed: env.seed(),
        grid,
        scheme,
        alpha,
        bounds,
        radius,
        values,
        residual,
        sweeps,
        sup_delta_v,
        sup_gradient,
    })
}

/// Solutions for every `(δ, seed)`, δ-major in ladder order, seeds in input order.
pub fn solve_ensemble(
    family: &HamiltonianFamily,
    spec: &EnvSpec,
    p: Vec2,
    deltas: &[f64],
    seeds: &[u64],
    opts: &MacroOptions,
) -> Result<Vec<Vec<MacroSolution>>> {
    if deltas.is_empty() || seeds.is_empty() {
        return Err(Error::config("delta ladder and seed list must be nonempty"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("delta ladder must be strictly decreasing"));
    }
    let jobs: Vec<(usize, u64)> = (0..deltas.len()).flat_map(|d| seeds.iter().map(move |&s| (d, s))).collect();
    let flat = jobs
        .par_iter()
        .map(|&(d, s)| {
            let env = Environment::new(spec.with_seed(s))?;
            solve_macro(family, &env, p, deltas[d], opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = flat.into_iter();
    Ok(deltas.iter().map(|_| it.by_ref().take(seeds.len()).collect()).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaStats {
    pub delta: f64,
    pub centers: Vec<f64>,
    pub summary: Summary,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HEstimate {
    pub p: Vec2,
    pub per_delta: Vec<DeltaStats>,
    /// `h_*` proxy: min of `−δv^δ(0)` over the two smallest δ and all realizations.
    pub h_lower: f64,
    /// `h^*` proxy: the matching max.
    pub h_upper: f64,
    /// Realization mean at the smallest δ.
    pub finest: Summary,
    /// The realization spread grew as δ decreased.
    pub spread_growing: bool,
}

impl HEstimate {
    pub fn spread(&self) -> f64 {
        self.h_upper - self.h_lower
    }
}

pub fn estimate_h(ensemble: &[Vec<MacroSolution>]) -> Result<HEstimate> {
    if ensemble.is_empty() || ensemble.iter().any(|g| g.is_empty()) {
        return Err(Error::precondition("empty macro ensemble"));
    }
    let per_delta: Vec<DeltaStats> = ensemble
        .iter()
        .map(|g| {
            let centers: Vec<f64> = g.iter().map(|s| s.center()).collect();
            DeltaStats {
                delta: g[0].delta,
                summary: summarize(&centers),
                min: centers.iter().copied().fold(f64::INFINITY, f64::min),
                max: centers.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                centers,
            }
        })
        .collect();
    let tail = &per_delta[per_delta.len().saturating_sub(2)..];
    let h_lower = tail.iter().map(|d| d.min).fold(f64::INFINITY, f64::min);
    let h_upper = tail.iter().map(|d| d.max).fold(f64::NEG_INFINITY, f64::max);
    let spreads: Vec<f64> = per_delta.iter().map(|d| d.max - d.min).collect();
    let spread_growing = spreads.len() >= 2 && spreads.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    Ok(HEstimate {
        p: ensemble[0][0].p,
        finest: per_delta.last().unwrap().summary,
        per_delta,
        h_lower,
        h_upper,
        spread_growing,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallRow {
    pub delta: f64,
    pub r: f64,
    /// Realization means of the ball sup and inf of `−δv`.
    pub sup: f64,
    pub inf: f64,
    /// Mean and max over realizations of `sup − inf`.
    pub mean_deviation: f64,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallReport {
    pub rows: Vec<BallRow>,
    pub max_deviation: f64,
    /// Per radius: the mean deviation decreased along the δ ladder.
    pub shrinking: Vec<(f64, bool)>,
}

pub fn ball_uniform_check(ensemble: &[Vec<MacroSolution>], radii: &[f64]) -> Result<BallReport> {
    if ensemble.iter().any(|g| g.len() < 8) {
        return Err(Error::precondition("ball statistics need at least 8 realizations per delta"));
    }
    let mut rows = Vec::new();
    for g in ensemble {
        for &r in radii {
            let stats = g.iter().map(|s| s.ball_stat(r)).collect::<Result<Vec<_>>>()?;
            let n = stats.len() as f64;
            let devs: Vec<f64> = stats.iter().map(|b| b.sup - b.inf).collect();
            rows.push(BallRow {
                delta: g[0].delta,
                r,
                sup: stats.iter().map(|b| b.sup).sum::<f64>() / n,
                inf: stats.iter().map(|b| b.inf).sum::<f64>() / n,
                mean_deviation: devs.iter().sum::<f64>() / n,
                max_deviation: devs.iter().copied().fold(0.0, f64::max),
            });
        }
    }
    let max_deviation = rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let shrinking = radii
        .iter()
        .map(|&r| {
            let d: Vec<f64> = rows.iter().filter(|row| row.r == r).map(|row| row.mean_deviation).collect();
            (r, d.windows(2).all(|w| w[1] <= w[0] + 1e-12))
        })
        .collect();
    Ok(BallReport { rows, max_deviation, shrinking })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectorOptions {
    pub sources: usize,
    pub targets_per_source: usize,
    /// Pairs are drawn from `|y| ≤ fraction · R/δ`.
    pub sample_fraction: f64,
    /// Pairs at least this fraction of the sampling diameter apart count as far.
    pub far_fraction: f64,
    pub sublinear_radii: Vec<f64>,
    pub seed: u64,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions {
            sources: 10,
            targets_per_source: 100,
            sample_fraction: 0.25,
            far_fraction: 0.25,
            sublinear_radii: vec![10.0, 20.0, 40.0, 80.0],
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectorReport {
    pub mu: f64,
    pub pairs: usize,
    pub violations: usize,
    pub far_pairs: usize,
    pub far_violations: usize,
    /// Largest `w(y) − w(x) + p·(y−x) − m_μ(y, x) − slack`.
    pub worst_excess: f64,
    /// `μ ≥ sup(−δv)` over the sampled region, which makes the slack rigorous.
    pub mu_covers_region: bool,
    pub domination_passed: bool,
    /// `max (−δv) − h^*` over the sampled region, against `δ · max |v|`.
    pub residual_excess: f64,
    pub residual_bound: f64,
    pub residual_passed: bool,
}

/// Domination of `y ↦ w^δ(y) + p·y` by the metric `m_μ` on sampled pairs,
/// and the approximate-subsolution residual.
///
/// Slack: in 1-D the Godunov fixed point gives, on every edge, an increment
/// bounded by `h·σ_μ` at one endpoint whenever `−δv ≤ μ` there, so the slack
/// of a pair is the exact sum of `h·max(σ at endpoints) − edge cost` along
/// the segment. In 2-D the slack is `h·(σ_max − σ_min)·(faces crossed + 1)`.
pub fn corrector_checks(
    solution: &MacroSolution,
    family: &HamiltonianFamily,
    env: &Environment,
    mu: f64,
    h_upper: f64,
    opts: &CorrectorOptions,
) -> Result<CorrectorReport> {
    let g = &solution.grid;
    let reach = ((opts.sample_fraction * g.half as f64).floor() as i64).max(1);
    let dim = g.dim;
    let stencil = Stencil::new(if dim == 1 { 1 } else { 2 }, dim)?;
    let lattice = Lattice::centered(g.h, reach, stencil)?;
    let problem = MetricProblem::new(&lattice, family, env, mu);
    let model = CostModel::new(family, env, mu, Direction::Forward, SupportSource::Analytic, None);
    let u = |y: Vec2| -> f64 {
        let k = g.index((y.x / g.h).round() as i64, (y.y / g.h).round() as i64).unwrap();
        solution.values[k] + solution.p.dot(y)
    };

    let mut region_sup = f64::NEG_INFINITY;
    for k in 0..lattice.len() {
        let (i, j) = lattice.coords(k);
        region_sup = region_sup.max(-solution.delta * solution.values[g.index(i, j).unwrap()]);
    }

    // prefix sums of the per-edge slack along the axis (1-D)
    let mut prefix = [Vec::new(), Vec::new()];
    if dim == 1 {
        let mut buf = Vec::new();
        for (s, sign) in [(0usize, 1i64), (1, -1)] {
            let e = Vec2::on_axis(sign as f64);
            let mut acc = vec![0.0; lattice.len()];
            for k in 0..lattice.len() - 1 {
                let (a, b) = if sign > 0 { (k, k + 1) } else { (k + 1, k) };
                let cost = model.edge(&lattice, a, (sign, 0), &mut buf)?;
                let sa = model.sigma(env.value(lattice.position(a)), e)?;
                let sb = model.sigma(env.value(lattice.position(b)), e)?;
                acc[k + 1] = acc[k] + (g.h * sa.max(sb) - cost);
            }
            prefix[s] = acc;
        }
    }
    let face_slack = if dim == 2 {
        let values = node_values(env);
        let mut smax: f64 = 0.0;
        let mut smin = f64::INFINITY;
        for k in 0..64 {
            let e = Vec2::from_angle(std::f64::consts::TAU * k as f64 / 64.0);
            for &v in &values {
                let s = model.sigma(v, e)?;
                smax = smax.max(s);
                smin = smin.min(s);
            }
        }
        g.h * (smax - smin)
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ solution.seed);
    let far = opts.far_fraction * 2.0 * reach as f64 * g.h;
    let pick = |rng: &mut ChaCha8Rng| -> usize { rng.random_range(0..lattice.len()) };
    let sources: Vec<usize> = (0..opts.sources).map(|_| pick(&mut rng)).collect();
    let targets: Vec<Vec<usize>> =
        sources.iter().map(|_| (0..opts.targets_per_source).map(|_| pick(&mut rng)).collect()).collect();
    let fields = sources
        .par_iter()
        .zip(&targets)
        .map(|(&x, ts)| problem.solve_until(x, Some(ts)))
        .collect::<Result<Vec<_>>>()?;

    let (mut pairs, mut violations, mut far_pairs, mut far_violations) = (0, 0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    for ((&x, ts), field) in sources.iter().zip(&targets).zip(&fields) {
        let px = lattice.position(x);
        for &y in ts {
            let py = lattice.position(y);
            let m = field.values[y];
            if !m.is_finite() {
                return Err(Error::SolverBug("metric target left unsettled".into()));
            }
            let slack = if dim == 1 {
                let s = if y >= x { &prefix[0] } else { &prefix[1] };
                (s[y] - s[x]).abs()
            } else {
                let mut buf = Vec::new();
                env.breakpoints(px, py, &mut buf);
                face_slack * (buf.len() + 1) as f64
            };
            let lhs = u(py) - u(px);
            let excess = lhs - m - slack - 1e-9 * m.abs().max(lhs.abs()).max(1.0);
            pairs += 1;
            let is_far = (py - px).norm() >= far;
            if is_far {
                far_pairs += 1;
            }
            if excess > 0.0 {
                violations += 1;
                if is_far {
                    far_violations += 1;
                }
            }
            worst = worst.max(excess);
        }
    }

    let residual_excess = region_sup - h_upper;
    let residual_bound = solution.sup_delta_v;
    Ok(CorrectorReport {
        mu,
        pairs,
        violations,
        far_pairs,
        far_violations,
        worst_excess: worst,
        mu_covers_region: mu >= region_sup,
        domination_passed: violations == 0,
        residual_excess,
        residual_bound,
        residual_passed: residual_excess <= residual_bound,
    })
}

/// Level for the domination check: bracket top plus the property tolerance
/// plus any overshoot of `−δv` above the top on the sampled region.
pub fn domination_level(solution: &MacroSolution, entry: &TableEntry, ci_multiplier: f64, sample_fraction: f64) -> f64 {
    let g = &solution.grid;
    let reach = ((sample_fraction * g.half as f64).floor() as i64).max(1);
    let mut sup = f64::NEG_INFINITY;
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        if i.abs() <= reach && j.abs() <= reach {
            sup = sup.max(-solution.delta * solution.values[k]);
        }
    }
    let tol = ci_multiplier * entry.ci + (sup - entry.mu_hi).max(0.0);
    entry.mu_hi + tol
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SublinearityProfile {
    pub radii: Vec<f64>,
    /// Ensemble mean of `sup_{|y|=R} |w^δ(y)| / R`.
    pub profile: Vec<f64>,
    /// `profile[0] / profile[last]`.
    pub decay: f64,
}

pub fn ensemble_sublinearity(solutions: &[MacroSolution], radii: &[f64]) -> Result<SublinearityProfile> {
    if solutions.is_empty() || radii.is_empty() {
        return Err(Error::precondition("sublinearity needs solutions and radii"));
    }
    let mut profile = vec![0.0; radii.len()];
    for s in solutions {
        for (k, &r) in radii.iter().enumerate() {
            let angles = if s.grid.dim == 1 { 2 } else { 64 };
            let mut sup: f64 = 0.0;
            for a in 0..angles {
                let e = if s.grid.dim == 1 {
                    Vec2::on_axis(if a == 0 { 1.0 } else { -1.0 })
                } else {
                    Vec2::from_angle(std::f64::consts::TAU * a as f64 / angles as f64)
                };
                let w = s.corrector(e * r).ok_or_else(|| {
                    Error::precondition(format!("sublinearity radius {r} exceeds the macro domain"))
                })?;
                sup = sup.max(w.abs());
            }
            profile[k] += sup / r / solutions.len() as f64;
        }
    }
    let decay = profile[0] / profile[profile.len() - 1];
    Ok(SublinearityProfile { radii: radii.to_vec(), profile, decay })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeCheck {
    pub scheme: Scheme,
    pub alpha: Option<f64>,
    pub samples: usize,
    /// Most negative change of the node update under a neighbor increase.
    pub worst_decrease: f64,
    pub passed: bool,
}

/// Sampled monotonicity of the node update: raising any neighbor never lowers it.
pub fn check_scheme_monotonicity(
    family: &HamiltonianFamily,
    env: &Environment,
    p: Vec2,
    delta: f64,
    opts: &MacroOptions,
    samples: usize,
) -> Result<SchemeCheck> {
    let dim = env.dim();
    let scheme = opts.resolved(dim)?;
    let bounds = macro_bounds(family, env, p)?;
    let alpha = (scheme == Scheme::LaxFriedrichs).then(|| dissipation(family, env, p, bounds.gradient + 1.0));
    let grid = MacroGrid { dim, h: opts.h, half: 1 };
    let values = node_values(env);
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed() ^ 0x6d6f6e6f);
    let mut worst: f64 = 0.0;
    let scale = bounds.c / delta;
    for s in 0..samples {
        let v = values[s % values.len()];
        let relax = Relaxation {
            family,
            p,
            delta,
            grid,
            fields: vec![v; grid.len()],
            flux: vec![NodeFlux::new(family, p, v); grid.len()],
        };
        let base: Vec<f64> = (0..grid.len()).map(|_| -scale + rng.random::<f64>() * opts.h * bounds.c * 4.0).collect();
        let c = grid.center();
        let u0 = relax.update(&base, c, alpha);
        for k in 0..grid.len() {
            if k == c {
                continue;
            }
            let mut bumped = base.clone();
            bumped[k] += rng.random::<f64>() * opts.h * bounds.c;
            let u1 = relax.update(&bumped, c, alpha);
            worst = worst.min(u1 - u0);
        }
    }
    let tol = 1e-12 * scale.max(1.0);
    Ok(SchemeCheck { scheme, alpha, samples, worst_decrease: worst, passed: worst >= -tol })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub low_center: f64,
    pub high_center: f64,
    /// `δ · max |v_low − v_high|` after convergence.
    pub max_diff: f64,
    pub passed: bool,
}

/// Solves from the ordered constant initializations `∓(C + 1)/δ` and compares
/// the fixed points.
pub fn check_comparison(
    family: &HamiltonianFamily,
    env: &Environment,
    p: Vec2,
    delta: f64,
    opts: &MacroOptions,
) -> Result<ComparisonCheck> {
    let c = macro_bounds(family, env, p)?.c;
    let solve = |value: f64| {
        let o = MacroOptions { init: Init::Constant { value }, ..opts.clone() };
        solve_macro(family, env, p, delta, &o)
    };
    let (lo, hi) = (solve(-(c + 1.0) / delta)?, solve((c + 1.0) / delta)?);
    let max_diff = lo.values.iter().zip(&hi.values).map(|(a, b)| delta * (a - b).abs()).fold(0.0, f64::max);
    // each run stops within tol / (1 − contraction); allow a generous multiple
    let passed = max_diff <= 1e3 * opts.tol.max(lo.residual).max(hi.residual);
    Ok(ComparisonCheck { low_center: lo.center(), high_center: hi.center(), max_diff, passed })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Agreement {
    pub p: Vec2,
    pub macro_value: f64,
    pub macro_ci: f64,
    pub bracket: [f64; 2],
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|(−δv^δ(0)) − bracket midpoint| ≤ scheme error + bracket width + CI`.
pub fn agreement(estimate: &HEstimate, entry: &TableEntry, scheme_error: f64) -> Agreement {
    let macro_value = estimate.finest.mean;
    let macro_ci = if estimate.finest.ci.is_finite() { estimate.finest.ci } else { 0.0 };
    let difference = (macro_value - entry.mid()).abs();
    let tolerance = scheme_error + entry.width() + entry.ci + macro_ci;
    Agreement {
        p: entry.p,
        macro_value,
        macro_ci,
        bracket: [entry.mu_lo, entry.mu_hi],
        difference,
        tolerance,
        passed: difference <= tolerance,
    }
}
