//! Sampled verification of the structural hypotheses on `H`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convexgeom::{find_min, ray_radius, Fan, MinOptions};
use crate::env::family::HamiltonianFamily;
use crate::env::field::Environment;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

const SAMPLING_SALT: u64 = 0x4859_504F_5448_0001;
/// Relative floating-point slack allowed in the sampled inequalities.
pub const FP_SLACK: f64 = 1e-10;
/// Half-width of the box from which sample points `y` are drawn.
const Y_BOX: f64 = 50.0;

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but never fail validation.
    pub informational: bool,
    /// Largest sampled excess of the inequality (`≤ 0` means satisfied).
    pub worst_violation: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub family: String,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn first_failure(&self) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| !c.passed && !c.informational)
    }
}

fn sample_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec2 {
    if dim == 1 {
        Vec2::on_axis(if rng.random::<bool>() { 1.0 } else { -1.0 })
    } else {
        Vec2::from_angle(rng.random::<f64>() * std::f64::consts::TAU)
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec2 {
    let r = if dim == 1 { rng.random::<f64>() } else { rng.random::<f64>().sqrt() };
    sample_unit(rng, dim) * (radius * r)
}

fn sample_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec2 {
    let x = (rng.random::<f64>() * 2.0 - 1.0) * Y_BOX;
    let y = if dim == 2 { (rng.random::<f64>() * 2.0 - 1.0) * Y_BOX } else { 0.0 };
    Vec2::new(x, y)
}

fn slack(scale: f64) -> f64 {
    FP_SLACK * scale.abs().max(1.0)
}

struct Tally {
    name: &'static str,
    informational: bool,
    worst: f64,
    samples: usize,
}

impl Tally {
    fn new(name: &'static str, informational: bool) -> Self {
        Tally { name, informational, worst: f64::NEG_INFINITY, samples: 0 }
    }

    fn record(&mut self, excess: f64) {
        self.samples += 1;
        if excess.is_nan() {
            self.worst = f64::INFINITY;
        } else {
            self.worst = self.worst.max(excess);
        }
    }

    fn finish(self, tolerance: f64) -> HypothesisCheck {
        HypothesisCheck {
            name: self.name.to_string(),
            passed: self.worst <= tolerance,
            informational: self.informational,
            worst_violation: self.worst,
            samples: self.samples,
        }
    }
}

/// Samples the quasiconvexity, `Λ`-modulus, coercivity and regularity
/// hypotheses. Returns the full report, or a hypothesis-violation error
/// naming the first required inequality that failed.
pub fn validate_hypotheses(
    family: &HamiltonianFamily,
    env: &Environment,
    sample_budget: usize,
) -> Result<HypothesisReport> {
    let report = hypothesis_report(family, env, sample_budget)?;
    match report.first_failure() {
        Some(c) => Err(Error::HypothesisViolation { inequality: c.name.clone(), magnitude: c.worst_violation }),
        None => Ok(report),
    }
}

/// Same sampling as [`validate_hypotheses`] but never fails on violations.
pub fn hypothesis_report(
    family: &HamiltonianFamily,
    env: &Environment,
    sample_budget: usize,
) -> Result<HypothesisReport> {
    if sample_budget < 1000 {
        return Err(Error::precondition(format!("sample budget must be at least 1000, got {sample_budget}")));
    }
    let dim = env.dim();
    let range = env.value_range();
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed() ^ SAMPLING_SALT);
    let sample_radius = family.coercivity_radius(2.0, range).unwrap_or(4.0) + 1.0;

    let mut quasi = Tally::new("quasiconvexity", false);
    let mut modulus = Tally::new("lambda-modulus", false);
    let mut weighted = Tally::new("weighted-lambda-modulus", false);
    let mut convex = Tally::new("midpoint-convexity", true);
    let mut bounded = Tally::new("bounded-on-balls", false);
    for k in 0..sample_budget {
        let y = sample_point(&mut rng, dim);
        let v = env.value(y);
        let p = sample_ball(&mut rng, dim, sample_radius);
        let q = sample_ball(&mut rng, dim, sample_radius);
        let (hp, hq) = (family.h(p, v), family.h(q, v));
        let hm = family.h((p + q) * 0.5, v);
        let top = hp.max(hq);
        quasi.record(hm - top - slack(top));
        let lam = family.lambda(hp, hq, range);
        modulus.record(hm - lam - slack(lam));
        convex.record(hm - 0.5 * (hp + hq) - slack(top));
        bounded.record(if hp.is_finite() { f64::NEG_INFINITY } else { f64::INFINITY });
        let t = [0.125, 0.25, 0.375, 0.75][k % 4];
        let ht = family.h(p * t + q * (1.0 - t), v);
        let lt = family.lambda_weighted(t, hp, hq, range);
        weighted.record(ht - lt - slack(lt));
    }

    // Coercivity: |p| = R(μ) + 1 must give H > μ.
    let mut coercive = Tally::new("coercivity", false);
    let ladder = [-0.5, 0.0, 0.5, 1.0, 2.0, 4.0];
    let per_level = (sample_budget / ladder.len()).max(1);
    for &mu in &ladder {
        match family.coercivity_radius(mu, range) {
            None => coercive.record(f64::INFINITY),
            Some(r) => {
                for _ in 0..per_level {
                    let y = sample_point(&mut rng, dim);
                    let p = sample_unit(&mut rng, dim) * (r + 1.0);
                    let h = family.hamiltonian(env, p, y);
                    // strict inequality H > μ
                    coercive.record(if h > mu { mu - h } else { (mu - h).max(f64::MIN_POSITIVE) });
                }
            }
        }
    }

    // Equicontinuity in p on a bounded ball: the sampled modulus of
    // continuity must shrink with the increment.
    let mut equi = Tally::new("equicontinuity", false);
    let increments = [1e-2, 1e-4, 1e-6];
    let mut moduli = [0.0f64; 3];
    for _ in 0..(sample_budget / 4).max(1) {
        let y = sample_point(&mut rng, dim);
        let v = env.value(y);
        let p = sample_ball(&mut rng, dim, sample_radius);
        let e = sample_unit(&mut rng, dim);
        let h = family.h(p, v);
        for (m, &eta) in moduli.iter_mut().zip(&increments) {
            *m = m.max((family.h(p + e * eta, v) - h).abs());
        }
    }
    let shrinking = moduli.windows(2).all(|w| w[1] <= w[0]) && moduli.iter().all(|m| m.is_finite());
    equi.record(if shrinking { moduli[2] - 1e-2 } else { f64::INFINITY });

    Ok(HypothesisReport {
        family: family.label(),
        checks: vec![
            quasi.finish(0.0),
            modulus.finish(0.0),
            weighted.finish(0.0),
            convex.finish(0.0),
            coercive.finish(0.0),
            bounded.finish(0.0),
            equi.finish(0.0),
        ],
    })
}

/// Largest `θ` such that every sampled `(p, y)` with `H(p, y) ≥ μ` keeps
/// `inf_{|q| ≤ θ} H(p + q, y) ≥ μ − α` (uniform continuity from below).
pub fn perturbation_tolerance(family: &HamiltonianFamily, env: &Environment, mu: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::precondition(format!("alpha must be positive, got {alpha}")));
    }
    let dim = env.dim();
    let range = env.value_range();
    let radius = family
        .coercivity_radius(mu, range)
        .ok_or_else(|| Error::DegenerateFamily("no coercivity bound".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(env.seed() ^ SAMPLING_SALT ^ 0xA1FA);

    // Sample points: the μ-level set above a few environment points, plus
    // random points of the super-level set.
    let fan = Fan::uniform(if dim == 1 { 2 } else { 48 }, dim);
    let mut samples: Vec<(Vec2, Vec2, f64)> = Vec::new();
    for _ in 0..12 {
        let y = sample_point(&mut rng, dim);
        let v = env.value(y);
        let (anchor, min) = find_min(family, env, y, &MinOptions::default())?;
        if min <= mu {
            for &e in fan.directions() {
                let r = ray_radius(family, env, y, mu, anchor, e)?;
                samples.push((anchor + e * r, anchor, v));
            }
        }
        for _ in 0..64 {
            let p = sample_ball(&mut rng, dim, 2.0 * radius + 1.0);
            if family.h(p, v) >= mu {
                samples.push((p, anchor, v));
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::DegenerateFamily(format!("no sampled point with H >= {mu}")));
    }

    let probe = Fan::uniform(if dim == 1 { 2 } else { 64 }, dim);
    let holds = |theta: f64| -> bool {
        samples.iter().all(|&(p, anchor, v)| {
            let floor = mu - alpha - slack(mu);
            let toward = anchor - p;
            if toward.norm() > 0.0 && family.h(p + toward.normalized() * theta, v) < floor {
                return false;
            }
            probe.directions().iter().all(|&e| {
                [0.25, 0.5, 0.75, 1.0].iter().all(|s| family.h(p + e * (theta * s), v) >= floor)
            })
        })
    };

    let mut hi = 2.0 * radius + 2.0;
    if holds(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    if lo <= 1e-12 {
        return Err(Error::DegenerateFamily(format!("no perturbation tolerance above resolution for mu = {mu}")));
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::field::{EnvSpec, FieldKind};

    fn env(values: Vec<f64>, dim: usize) -> Environment {
        Environment::new(EnvSpec { kind: FieldKind::Checkerboard { cell: 1.0, values, mollify: None }, seed: 9, dim })
            .unwrap()
    }

    #[test]
    fn eikonal_with_bounded_speed_passes_everything() {
        let report = validate_hypotheses(&HamiltonianFamily::Eikonal, &env(vec![0.5, 1.0, 2.0], 2), 4000).unwrap();
        assert!(report.checks.iter().all(|c| c.passed), "{report:#?}");
    }

    #[test]
    fn square_root_family_is_quasiconvex_but_not_convex() {
        let report =
            validate_hypotheses(&HamiltonianFamily::Power { gamma: 0.5 }, &env(vec![0.0, 1.0], 2), 4000).unwrap();
        assert!(report.check("quasiconvexity").unwrap().passed);
        assert!(report.check("lambda-modulus").unwrap().passed);
        let convex = report.check("midpoint-convexity").unwrap();
        assert!(!convex.passed && convex.informational);

        // |p|^½ is concave along rays: the pair (0, e₁) is a witness, while
        // the orthogonal pair (e₁, e₂) happens to satisfy the midpoint bound.
        let f = HamiltonianFamily::Power { gamma: 0.5 };
        let mid = |p: Vec2, q: Vec2| f.h((p + q) * 0.5, 0.0) - 0.5 * (f.h(p, 0.0) + f.h(q, 0.0));
        assert!(mid(Vec2::ZERO, Vec2::E1) > 0.0);
        assert!(mid(Vec2::E1, Vec2::E2) < 0.0);
    }

    #[test]
    fn degenerate_anisotropy_fails_coercivity() {
        let err =
            validate_hypotheses(&HamiltonianFamily::Aniso { kappa: 0.0 }, &env(vec![0.0], 2), 2000).unwrap_err();
        match err {
            Error::HypothesisViolation { inequality, .. } => assert_eq!(inequality, "coercivity"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn small_budget_is_rejected() {
        assert!(matches!(
            validate_hypotheses(&HamiltonianFamily::Eikonal, &env(vec![1.0], 1), 10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn eikonal_tolerance_is_alpha() {
        let theta = perturbation_tolerance(&HamiltonianFamily::Eikonal, &env(vec![1.0], 2), 1.0, 0.1).unwrap();
        assert!((theta - 0.1).abs() < 1e-6, "{theta}");
    }

    #[test]
    fn quadratic_tolerance_solves_critical_circle() {
        // inf over |q| ≤ θ of |p+q|² on |p| = 1 is (1 − θ)², so θ = 1 − √0.9.
        let theta =
            perturbation_tolerance(&HamiltonianFamily::Power { gamma: 2.0 }, &env(vec![0.0], 2), 1.0, 0.1).unwrap();
        let oracle = 1.0 - 0.9f64.sqrt();
        assert!((theta - oracle).abs() < 1e-6, "{theta} vs {oracle}");
    }

    #[test]
    fn zero_alpha_is_a_precondition_error() {
        assert!(matches!(
            perturbation_tolerance(&HamiltonianFamily::Eikonal, &env(vec![1.0], 2), 1.0, 0.0),
            Err(Error::Precondition(_))
        ));
    }
}
