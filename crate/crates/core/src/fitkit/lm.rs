//! Box-clamped Levenberg–Marquardt with a forward-difference Jacobian,
//! used to polish Differential Evolution results.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when a step changes the sum of squares by less than this fraction.
    pub ftol: f64,
    pub xtol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { max_iterations: 100, ftol: 1e-15, xtol: 1e-15, fd_step: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], bounds: &[(f64, f64)], cfg: &LmConfig) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, bounds);
    let mut r = residuals(&x)?;
    let mut cost = sum_sq(&r);
    let mut evaluations = 1;
    let mut mu = -1.0;
    let mut iterations = 0;

    while iterations < cfg.max_iterations && cost > 0.0 {
        iterations += 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let (lo, hi) = bounds[k];
            let mut h = cfg.fd_step * x[k].abs().max(1.0);
            if x[k] + h > hi {
                h = -h;
            }
            if x[k] + h < lo {
                continue;
            }
            let mut xp = x.clone();
            xp[k] += h;
            let rp = residuals(&xp)?;
            evaluations += 1;
            for i in 0..m {
                jac[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let scale = (0..n).map(|k| a[(k, k)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if mu < 0.0 {
            mu = 1e-3;
        }

        let mut improved = false;
        while mu < 1e16 {
            let mut lhs = a.clone();
            for k in 0..n {
                lhs[(k, k)] += mu * a[(k, k)].max(1e-12 * scale);
            }
            let Some(delta) = lhs.lu().solve(&(-&g)) else {
                mu *= 4.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut xn, bounds);
            let rn = residuals(&xn)?;
            evaluations += 1;
            let cn = sum_sq(&rn);
            if cn < cost {
                let step: f64 = xn.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let size: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_drop = (cost - cn) / cost;
                x = xn;
                r = rn;
                cost = cn;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if rel_drop <= cfg.ftol || step <= cfg.xtol * (size + cfg.xtol) {
                    return Ok(LmResult { x, cost, iterations, evaluations });
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(LmResult { x, cost, iterations, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_residuals() {
        let f = |x: &[f64]| Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let r = levenberg_marquardt(f, &[-1.2, 1.0], &[(-5.0, 5.0), (-5.0, 5.0)], &LmConfig::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8, "{:?}", r);
    }

    #[test]
    fn exponential_fit() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.25).collect();
        let data: Vec<f64> = ts.iter().map(|t| 2.0 * (-0.7 * t).exp()).collect();
        let f = |p: &[f64]| Ok(ts.iter().zip(&data).map(|(t, d)| p[0] * (-p[1] * t).exp() - d).collect());
        let r = levenberg_marquardt(f, &[1.0, 0.1], &[(0.0, 10.0), (0.0, 10.0)], &LmConfig::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-8 && (r.x[1] - 0.7).abs() < 1e-8);
        assert!(r.cost < 1e-20);
    }

    #[test]
    fn underdetermined_and_bounded() {
        // one equation, two unknowns: lands somewhere on the circle
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0]);
        let r = levenberg_marquardt(f, &[0.3, 0.2], &[(0.0, 2.0), (0.0, 2.0)], &LmConfig::default()).unwrap();
        assert!(r.cost < 1e-24);
        // optimum outside the box stays on the boundary
        let g = |x: &[f64]| Ok(vec![x[0] - 3.0]);
        let r = levenberg_marquardt(g, &[0.5], &[(0.0, 1.0)], &LmConfig::default()).unwrap();
        assert_eq!(r.x, vec![1.0]);
    }
}
