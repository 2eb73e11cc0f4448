//! Explicit Runge–Kutta integrators for matrix-valued ODEs.
//!
//! Both integrators report the state at caller-supplied sample times. The
//! adaptive one uses the Dormand–Prince 5(4) pair with cubic Hermite dense
//! output between accepted steps.

use crate::error::{Error, Result};
use crate::matcore::{re, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on a single step.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig { rtol: 1e-8, atol: 1e-10, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl IntegrationStats {
    fn record_step(&mut self, h: f64) {
        if self.accepted == 0 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
        self.accepted += 1;
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Invalid("no sample times".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Invalid("sample times must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("sample times must be ascending".into()));
    }
    Ok(())
}

fn axpy(y: &CMatrix, h: f64, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = y.clone();
    for &(a, k) in terms {
        if a != 0.0 {
            out += k * re(h * a);
        }
    }
    out
}

/// Classic fixed-step RK4. Steps never exceed `dt` and land exactly on every
/// sample time; `times[0]` is the initial time.
pub fn rk4<F>(mut rhs: F, y0: &CMatrix, times: &[f64], dt: f64) -> Result<Vec<CMatrix>>
where
    F: FnMut(f64, &CMatrix) -> Result<CMatrix>,
{
    check_times(times)?;
    if !(dt > 0.0) {
        return Err(Error::Invalid("rk4 step must be positive".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.clone();
    let mut t = times[0];
    out.push(y.clone());
    for &target in &times[1..] {
        let span = target - t;
        if span > 0.0 {
            let n = (span / dt).ceil().max(1.0) as usize;
            let h = span / n as f64;
            if h <= f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            for _ in 0..n {
                let k1 = rhs(t, &y)?;
                let k2 = rhs(t + 0.5 * h, &axpy(&y, h, &[(0.5, &k1)]))?;
                let k3 = rhs(t + 0.5 * h, &axpy(&y, h, &[(0.5, &k2)]))?;
                let k4 = rhs(t + h, &axpy(&y, h, &[(1.0, &k3)]))?;
                y = axpy(&y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
                t += h;
            }
            t = target;
        }
        out.push(y.clone());
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn error_norm(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, cfg: &AdaptiveConfig) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let sc = cfg.atol + cfg.rtol * a.norm().max(b.norm());
        acc += e.norm_sqr() / (sc * sc);
    }
    (acc / err.len() as f64).sqrt()
}

/// Adaptive Dormand–Prince integration, stepping exactly onto each requested time.
///
/// `post` runs on every accepted state and may modify it in place (for
/// example to re-symmetrize); it returns `true` when it changed the state by
/// more than roundoff, in which case the derivative is re-evaluated.
pub fn dopri5<F, P>(
    mut rhs: F,
    mut post: P,
    y0: &CMatrix,
    times: &[f64],
    cfg: &AdaptiveConfig,
) -> Result<(Vec<CMatrix>, IntegrationStats)>
where
    F: FnMut(f64, &CMatrix) -> Result<CMatrix>,
    P: FnMut(f64, &mut CMatrix) -> Result<bool>,
{
    check_times(times)?;
    let mut stats = IntegrationStats::default();
    let mut out = Vec::with_capacity(times.len());
    let t_end = *times.last().expect("nonempty");
    let mut t = times[0];
    let mut y = y0.clone();
    out.push(y.clone());
    let mut next = 1;
    while next < times.len() && times[next] <= t {
        out.push(y.clone());
        next += 1;
    }
    if next == times.len() {
        return Ok((out, stats));
    }

    let mut f = rhs(t, &y)?;
    stats.rhs_evals += 1;

    let span = t_end - t;
    let mut h = {
        let d0 = y.norm();
        let d1 = f.norm();
        let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        guess.min(span).min(cfg.h_max)
    };

    while next < times.len() {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::Invalid(format!("exceeded {} integrator steps", cfg.max_steps)));
        }
        h = h.min(cfg.h_max);
        // steps land on every requested time, so samples carry the full step accuracy
        let to_sample = times[next] - t;
        let clamped = to_sample <= h * (1.0 + 1e-8);
        let proposal = h;
        if clamped {
            h = to_sample;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }

        let k1 = &f;
        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, k1)]))?;
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, k1), (A32, &k2)]))?;
        let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = rhs(t + C5 * h, &axpy(&y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = rhs(
            t + h,
            &axpy(&y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = axpy(&y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(t + h, &y_new)?;
        stats.rhs_evals += 6;

        let err = axpy(
            &CMatrix::zeros(y.nrows(), y.ncols()),
            h,
            &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let en = error_norm(&err, &y, &y_new, cfg);
        if !en.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if en > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            continue;
        }

        let t_new = if clamped { times[next] } else { t + h };
        let mut y_acc = y_new;
        let f_new = if post(t_new, &mut y_acc)? {
            stats.rhs_evals += 1;
            rhs(t_new, &y_acc)?
        } else {
            k7
        };
        stats.record_step(t_new - t);
        while next < times.len() && times[next] <= t_new {
            out.push(y_acc.clone());
            next += 1;
        }

        t = t_new;
        y = y_acc;
        f = f_new;
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = if clamped { (h * factor).max(proposal.min(h * 5.0)) } else { h * factor };
    }
    Ok((out, stats))
}
