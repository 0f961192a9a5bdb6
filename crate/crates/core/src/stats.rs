//! Sample statistics over realization ensembles.
//!
//! Sums run in input order, which the callers fix to seed order; results are
//! therefore independent of the parallel schedule that produced the inputs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Half-width of the two-sided 95% t-interval.
    pub ci: f64,
}

/// Two-sided `level` quantile of Student's t with `n − 1` degrees of freedom.
pub fn t_quantile(n: usize, level: f64) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    t.inverse_cdf(0.5 + 0.5 * level)
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, stderr: f64::INFINITY, ci: f64::INFINITY };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary { n, mean, stderr: f64::INFINITY, ci: f64::INFINITY };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt();
    Summary { n, mean, stderr, ci: t_quantile(n, 0.95) * stderr }
}

/// `sqrt(a² + b²)`, the standard error of a difference of independent means.
pub fn combined(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Least-squares slope of `ln y` against `ln x`, ignoring nonpositive pairs.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_zero_spread() {
        let s = summarize(&[2.0; 8]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(s.ci, 0.0);
    }

    #[test]
    fn t_quantile_matches_tables() {
        // tabulated t_{0.975}: 31 dof → 2.0395, 7 dof → 2.3646
        assert!((t_quantile(32, 0.95) - 2.0395).abs() < 1e-3);
        assert!((t_quantile(8, 0.95) - 2.3646).abs() < 1e-3);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}
