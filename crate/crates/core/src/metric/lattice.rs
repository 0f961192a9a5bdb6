use serde::Serialize;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Integer edge offsets: every coprime `(a, b)` with `max(|a|, |b|) ≤ ρ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stencil {
    radius: u32,
    dim: usize,
    offsets: Vec<(i64, i64)>,
}

impl Stencil {
    pub fn new(radius: u32, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&radius) {
            return Err(Error::config(format!("stencil radius must be 1, 2 or 3, got {radius}")));
        }
        if dim == 1 {
            return Ok(Stencil { radius, dim, offsets: vec![(1, 0), (-1, 0)] });
        }
        let r = radius as i64;
        let mut offsets = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                if (a, b) != (0, 0) && gcd(a, b) == 1 {
                    offsets.push((a, b));
                }
            }
        }
        offsets.sort_by(|p, q| (p.1 as f64).atan2(p.0 as f64).total_cmp(&(q.1 as f64).atan2(q.0 as f64)));
        Ok(Stencil { radius, dim, offsets })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }

    /// Offsets as unit vectors, in stencil order.
    pub fn unit_directions(&self) -> Vec<Vec2> {
        self.offsets.iter().map(|&(a, b)| Vec2::new(a as f64, b as f64).normalized()).collect()
    }

    /// Largest angle between consecutive offset directions.
    pub fn max_angular_gap(&self) -> f64 {
        if self.dim == 1 {
            return 0.0;
        }
        let mut angles: Vec<f64> = self.offsets.iter().map(|&(a, b)| (b as f64).atan2(a as f64)).collect();
        angles.sort_by(f64::total_cmp);
        let wrap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
        angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
    }

    /// `sec(θ_max / 2)`: worst ratio between the stencil path length and
    /// the Euclidean distance.
    pub fn anisotropy_factor(&self) -> f64 {
        1.0 / (0.5 * self.max_angular_gap()).cos()
    }
}

/// Axis-aligned box of lattice nodes `y = h·(i, j)`, `lo ≤ (i, j) ≤ hi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lattice {
    h: f64,
    lo: [i64; 2],
    hi: [i64; 2],
    stencil: Stencil,
}

impl Lattice {
    pub fn new(h: f64, lo: [i64; 2], hi: [i64; 2], stencil: Stencil) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("lattice spacing must be positive, got {h}")));
        }
        let (lo, hi) = if stencil.dim() == 1 { ([lo[0], 0], [hi[0], 0]) } else { (lo, hi) };
        if lo[0] > hi[0] || lo[1] > hi[1] {
            return Err(Error::config("empty lattice"));
        }
        Ok(Lattice { h, lo, hi, stencil })
    }

    /// Nodes `−half ..= half` on every axis.
    pub fn centered(h: f64, half: i64, stencil: Stencil) -> Result<Self> {
        Lattice::new(h, [-half, -half], [half, half], stencil)
    }

    /// Smallest box around `source` that contains every target with the
    /// geodesic margin `margin · anisotropy · distance` (2-D), or the target
    /// hull plus a stencil-width pad (1-D, where geodesics are monotone).
    pub fn covering(h: f64, stencil: Stencil, source: Vec2, targets: &[Vec2], margin: f64) -> Result<Self> {
        let pad = stencil.radius() as i64 + 1;
        let idx = |x: f64| (x / h).round() as i64;
        if stencil.dim() == 1 {
            let (mut a, mut b) = (idx(source.x), idx(source.x));
            for t in targets {
                a = a.min((t.x / h).floor() as i64);
                b = b.max((t.x / h).ceil() as i64);
            }
            return Lattice::new(h, [a - pad, 0], [b + pad, 0], stencil);
        }
        let dist = targets.iter().map(|&t| (t - source).norm()).fold(0.0, f64::max);
        let half = (margin * stencil.anisotropy_factor() * dist / h).ceil() as i64 + pad;
        let (ci, cj) = (idx(source.x), idx(source.y));
        Lattice::new(h, [ci - half, cj - half], [ci + half, cj + half], stencil)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.stencil.dim()
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn lo(&self) -> [i64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [i64; 2] {
        self.hi
    }

    pub fn nx(&self) -> usize {
        (self.hi[0] - self.lo[0] + 1) as usize
    }

    pub fn ny(&self) -> usize {
        (self.hi[1] - self.lo[1] + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        if i < self.lo[0] || i > self.hi[0] || j < self.lo[1] || j > self.hi[1] {
            return None;
        }
        Some((i - self.lo[0]) as usize + (j - self.lo[1]) as usize * self.nx())
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (i64, i64) {
        let nx = self.nx();
        ((idx % nx) as i64 + self.lo[0], (idx / nx) as i64 + self.lo[1])
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec2 {
        let (i, j) = self.coords(idx);
        Vec2::new(self.h * i as f64, self.h * j as f64)
    }

    /// Node nearest to `y`, if inside the box.
    pub fn node_near(&self, y: Vec2) -> Option<usize> {
        self.index((y.x / self.h).round() as i64, (y.y / self.h).round() as i64)
    }

    /// Bilinear (1-D: linear) interpolation stencil of `y`: up to four
    /// `(node, weight)` pairs. `None` when a corner lies outside the box.
    pub fn interpolation(&self, y: Vec2) -> Option<Vec<(usize, f64)>> {
        let (fx, fy) = (y.x / self.h, y.y / self.h);
        let (i, j) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let mut out = Vec::with_capacity(4);
        let xs = [(i, 1.0 - tx), (i + 1, tx)];
        let ys: &[(i64, f64)] = if self.dim() == 1 { &[(0, 1.0)] } else { &[(j, 1.0 - ty), (j + 1, ty)] };
        for &(jj, wy) in ys {
            for &(ii, wx) in &xs {
                let w = wx * wy;
                if w != 0.0 {
                    out.push((self.index(ii, jj)?, w));
                }
            }
        }
        Some(out)
    }
}
