//! Hamiltonian families `H(p, y, ω)`.
//!
//! Every shipped family depends on the environment only through one scalar
//! field value `v = V(y, ω)` (a speed `c(y)` for the eikonal family, a
//! potential for the others). That is what lets the geometry layer cache one
//! sublevel set per distinct field value.

use serde::{Deserialize, Serialize};

use crate::env::field::{Environment, ValueRange};
use crate::error::{Error, Result};
use crate::vec2::{self, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum HamiltonianFamily {
    /// `c(y)|p|`, with the field supplying `c`.
    Eikonal,
    /// `|p|^γ − V(y)`.
    Power { gamma: f64 },
    /// `|p − b(y)| − V(y)` with `b(y) = drift · (1 + modulation · V(y))`.
    Drift {
        #[serde(with = "vec2::as_components")]
        drift: Vec2,
        #[serde(default)]
        modulation: f64,
    },
    /// `max(|p·e₁|, κ|p·e₂|) − V(y)`.
    Aniso { kappa: f64 },
}

impl HamiltonianFamily {
    /// `H` at momentum `p` and field value `v`.
    #[inline]
    pub fn h(&self, p: Vec2, v: f64) -> f64 {
        match *self {
            HamiltonianFamily::Eikonal => v * p.norm(),
            HamiltonianFamily::Power { gamma } => p.norm().powf(gamma) - v,
            HamiltonianFamily::Drift { drift, modulation } => {
                (p - drift * (1.0 + modulation * v)).norm() - v
            }
            HamiltonianFamily::Aniso { kappa } => p.x.abs().max(kappa * p.y.abs()) - v,
        }
    }

    /// `H(p, y, ω)` for the realization `env`.
    #[inline]
    pub fn hamiltonian(&self, env: &Environment, p: Vec2, y: Vec2) -> f64 {
        self.h(p, env.value(y))
    }

    /// Checked evaluation from raw coordinate slices.
    pub fn evaluate(&self, env: &Environment, p: &[f64], y: &[f64]) -> Result<f64> {
        let d = env.dim();
        if p.len() != d || y.len() != d {
            return Err(Error::config(format!(
                "dimension mismatch: environment is {d}-D, got |p| = {}, |y| = {}",
                p.len(),
                y.len()
            )));
        }
        let (p, y) = (Vec2::from_slice(p).unwrap(), Vec2::from_slice(y).unwrap());
        if !p.is_finite() || !y.is_finite() {
            return Err(Error::precondition("non-finite evaluation point"));
        }
        Ok(self.hamiltonian(env, p, y))
    }

    /// Radius `R` with `|p| > R ⇒ H(p, ·) > μ` for every field value in `range`.
    ///
    /// `None` when the parameters admit no such bound (non-coercive family).
    pub fn coercivity_radius(&self, mu: f64, range: ValueRange) -> Option<f64> {
        let slack = (mu + range.max).max(0.0);
        match *self {
            HamiltonianFamily::Eikonal => (range.min > 0.0).then(|| mu.max(0.0) / range.min),
            HamiltonianFamily::Power { gamma } => (gamma > 0.0).then(|| slack.powf(1.0 / gamma)),
            HamiltonianFamily::Drift { .. } => Some(slack + self.max_drift(range)),
            HamiltonianFamily::Aniso { kappa } => {
                (kappa > 0.0).then(|| std::f64::consts::SQRT_2 * slack / kappa.min(1.0))
            }
        }
    }

    fn max_drift(&self, range: ValueRange) -> f64 {
        match *self {
            HamiltonianFamily::Drift { drift, modulation } => {
                let n = drift.norm();
                (n * (1.0 + modulation * range.min)).abs().max((n * (1.0 + modulation * range.max)).abs())
            }
            _ => 0.0,
        }
    }

    /// The declared level-set convexity modulus `Λ`, valid uniformly over `range`.
    ///
    /// Convex members use the arithmetic mean. For the power family the bound
    /// `(½((a+V)^{1/γ} + (b+V)^{1/γ}))^γ − V` is maximized over admissible `V`.
    pub fn lambda(&self, a: f64, b: f64, range: ValueRange) -> f64 {
        match *self {
            HamiltonianFamily::Power { gamma } if gamma != 1.0 => {
                let r = 1.0 / gamma;
                let v = if r >= 1.0 {
                    range.min.max(-a.min(b)).min(range.max)
                } else {
                    range.max
                };
                power_mean(r, (a + v).max(0.0), (b + v).max(0.0)) - v
            }
            _ => 0.5 * (a + b),
        }
    }

    /// `Λ_λ` bounding `H(λp + (1−λ)q)` by `Λ_λ(H(p), H(q))`, built by
    /// repeated midpoint refinement of `Λ`; falls back to `max` once the
    /// dyadic expansion of `λ` is exhausted.
    pub fn lambda_weighted(&self, lambda: f64, a: f64, b: f64, range: ValueRange) -> f64 {
        self.lambda_weighted_rec(lambda, a, b, range, 40)
    }

    fn lambda_weighted_rec(&self, lambda: f64, a: f64, b: f64, range: ValueRange, depth: u32) -> f64 {
        if lambda <= 0.0 {
            return b;
        }
        if lambda >= 1.0 {
            return a;
        }
        if lambda == 0.5 {
            return self.lambda(a, b, range);
        }
        if depth == 0 {
            return a.max(b);
        }
        let mid = self.lambda(a, b, range);
        if lambda < 0.5 {
            self.lambda_weighted_rec(2.0 * lambda, mid, b, range, depth - 1)
        } else {
            self.lambda_weighted_rec(2.0 * lambda - 1.0, a, mid, range, depth - 1)
        }
    }

    /// Whether `p ↦ H(p, y, ω)` is even for every `(y, ω)`.
    pub fn is_even(&self) -> bool {
        match *self {
            HamiltonianFamily::Drift { drift, .. } => drift == Vec2::ZERO,
            _ => true,
        }
    }

    /// Closed-form support function of `{p : H(p, v) ≤ μ}` in direction `q`.
    ///
    /// `None` when the sublevel set is empty; `+∞` when it is unbounded.
    #[inline]
    pub fn analytic_support(&self, v: f64, mu: f64, q: Vec2) -> Option<f64> {
        match *self {
            HamiltonianFamily::Eikonal => {
                if mu < 0.0 {
                    None
                } else if v <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(mu / v * q.norm())
                }
            }
            HamiltonianFamily::Power { gamma } => {
                let s = mu + v;
                (s >= 0.0).then(|| s.powf(1.0 / gamma) * q.norm())
            }
            HamiltonianFamily::Drift { drift, modulation } => {
                let s = mu + v;
                (s >= 0.0).then(|| (drift * (1.0 + modulation * v)).dot(q) + s * q.norm())
            }
            HamiltonianFamily::Aniso { kappa } => {
                let s = mu + v;
                if s < 0.0 {
                    None
                } else if kappa <= 0.0 && q.y != 0.0 {
                    Some(f64::INFINITY)
                } else if q.y == 0.0 {
                    Some(s * q.x.abs())
                } else {
                    Some(s * (q.x.abs() + q.y.abs() / kappa))
                }
            }
        }
    }

    /// Closed-form minimizer and minimum of `H(·, v)`.
    pub fn analytic_min(&self, v: f64) -> (Vec2, f64) {
        match *self {
            HamiltonianFamily::Eikonal => (Vec2::ZERO, 0.0),
            HamiltonianFamily::Drift { drift, modulation } => (drift * (1.0 + modulation * v), -v),
            HamiltonianFamily::Power { .. } | HamiltonianFamily::Aniso { .. } => (Vec2::ZERO, -v),
        }
    }

    /// Short human-readable label used in reports.
    pub fn label(&self) -> String {
        match *self {
            HamiltonianFamily::Eikonal => "EIKONAL".into(),
            HamiltonianFamily::Power { gamma } => format!("POWER(gamma={gamma})"),
            HamiltonianFamily::Drift { drift, modulation } => {
                format!("DRIFT(b=({}, {}), modulation={modulation})", drift.x, drift.y)
            }
            HamiltonianFamily::Aniso { kappa } => format!("ANISO(kappa={kappa})"),
        }
    }
}

/// Two-point power mean `(½(x^r + y^r))^{1/r}` for `x, y ≥ 0`.
pub fn power_mean(r: f64, x: f64, y: f64) -> f64 {
    if r == 1.0 {
        0.5 * (x + y)
    } else {
        (0.5 * (x.powf(r) + y.powf(r))).powf(1.0 / r)
    }
}
