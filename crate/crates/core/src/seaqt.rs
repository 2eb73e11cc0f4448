//! Steepest-entropy-ascent equation of motion for an isolated system,
//!
//! ```text
//! dρ/dt = −i[H, ρ] − (β / 2τ_D) {Δf, ρ},    f = H − β⁻¹ S,    β = σ_HS / σ_HH,
//! ```
//!
//! together with its nonequilibrium thermodynamic observables, Gibbs
//! equilibria and relaxation-time models.
//!
//! The dissipator is evaluated as `½{β ΔH − ΔS, ρ}`, which equals
//! `(β/2){Δf, ρ}` and stays finite when β → 0.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, c, herm_eig, hermitize, identity, re, CMatrix, HermEig, C64, SUPPORT_CUTOFF};
use crate::ode::{self, AdaptiveConfig, IntegrationStats};
use crate::qstate::{self, weighted_inner_unchecked, DensityOperator};

/// Below this energy variance β is undefined.
pub const MIN_ENERGY_VARIANCE: f64 = 1e-12;

/// Default mixing weight lifting rank-deficient initial states to full rank.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

/// Relaxation-time model τ_D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelaxationModel {
    Constant { tau: f64 },
    /// `τ_D(t) = w3 / (1 + exp(−(w4 + w5 t)))`.
    Logistic { w3: f64, w4: f64, w5: f64 },
    /// `τ_D = β²σ_FF / (d⟨S⟩/dt)`, a diagnostic only; it cannot drive an integration.
    FluctuationDiagnostic,
}

impl RelaxationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RelaxationModel::Constant { tau } if !(tau.abs() > 1e-12) || !tau.is_finite() => {
                Err(Error::ZeroTau)
            }
            RelaxationModel::Logistic { w3, w4, w5 }
                if !(w3.is_finite() && w4.is_finite() && w5.is_finite()) =>
            {
                Err(Error::Invalid("logistic parameters must be finite".into()))
            }
            RelaxationModel::Logistic { w3, .. } if w3.abs() <= 1e-12 => Err(Error::ZeroTau),
            _ => Ok(()),
        }
    }

    /// τ_D(t) for the state-independent models.
    pub fn at(&self, t: f64) -> Result<f64> {
        let tau = match *self {
            RelaxationModel::Constant { tau } => tau,
            RelaxationModel::Logistic { w3, w4, w5 } => w3 / (1.0 + (-(w4 + w5 * t)).exp()),
            RelaxationModel::FluctuationDiagnostic => {
                return Err(Error::Invalid(
                    "the fluctuation-ratio relaxation time needs an entropy rate".into(),
                ))
            }
        };
        if tau.abs() <= 1e-12 || !tau.is_finite() {
            return Err(Error::ZeroTau);
        }
        Ok(tau)
    }
}

/// Evaluates τ_D; the diagnostic form uses the state and an entropy-rate estimate.
pub fn tau_eval(
    model: &RelaxationModel,
    rho: &DensityOperator,
    hamiltonian: &CMatrix,
    t: f64,
    entropy_rate_estimate: f64,
) -> Result<f64> {
    match model {
        RelaxationModel::FluctuationDiagnostic => {
            if entropy_rate_estimate == 0.0 || !entropy_rate_estimate.is_finite() {
                return Err(Error::ZeroEntropyRate);
            }
            let obs = observables(rho, hamiltonian)?;
            let tau = obs.beta * obs.beta * obs.sigma_ff / entropy_rate_estimate;
            if tau.abs() <= 1e-12 {
                return Err(Error::ZeroTau);
            }
            Ok(tau)
        }
        other => other.at(t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeaqtModel {
    pub hamiltonian: CMatrix,
    pub relaxation: RelaxationModel,
}

impl SeaqtModel {
    pub fn new(hamiltonian: CMatrix, relaxation: RelaxationModel) -> Result<Self> {
        let residual = matcore::hermitian_residual(&hamiltonian);
        if hamiltonian.nrows() != hamiltonian.ncols() {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        if residual > 1e-12 * hamiltonian.norm().max(1.0) {
            return Err(Error::NotHermitian { residual });
        }
        relaxation.validate()?;
        if let RelaxationModel::Logistic { w3, .. } = relaxation {
            if w3 < 0.0 {
                warn!("negative logistic amplitude w3 = {w3}: tau_D < 0 drives entropy downwards");
            }
        }
        Ok(SeaqtModel { hamiltonian, relaxation })
    }
}

/// Snapshot of the nonequilibrium thermodynamic state (k_B = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoObservables {
    pub energy: f64,
    pub entropy: f64,
    /// σ_HS / σ_HH.
    pub beta: f64,
    pub sigma_hh: f64,
    pub sigma_hs: f64,
    pub sigma_ss: f64,
    /// Variance of the free-energy operator `f = H − S/β`.
    pub sigma_ff: f64,
    pub sigma_fs: f64,
    /// `β² σ_HH = σ_HS² / σ_HH`.
    pub heat_capacity: f64,
    /// `⟨f⟩ = ⟨H⟩ − ⟨S⟩/β`.
    pub free_energy: f64,
}

impl ThermoObservables {
    /// SEAQT order parameter Φ = σ_FF.
    pub fn phi_seaqt(&self) -> f64 {
        self.sigma_ff
    }

    /// `d⟨S⟩/dt = β² σ_FF / τ_D`.
    pub fn entropy_rate(&self, tau: f64) -> f64 {
        self.beta * self.beta * self.sigma_ff / tau
    }

    /// `⟨ΔM ΔM⟩` with `M = S − βH`, i.e. `σ_SS − 2βσ_HS + β²σ_HH`.
    pub fn delta_m_variance(&self) -> f64 {
        self.sigma_ss - 2.0 * self.beta * self.sigma_hs + self.beta * self.beta * self.sigma_hh
    }
}

struct Moments {
    entropy_op: CMatrix,
    energy: f64,
    entropy: f64,
    sigma_hh: f64,
    sigma_hs: f64,
}

fn moments(rho: &CMatrix, eig: &HermEig, h: &CMatrix) -> Moments {
    // eigenvalues at or below the cutoff (including roundoff negatives) are kernel
    let entropy_op = eig.map(|w| if w > SUPPORT_CUTOFF { -w.ln() } else { 0.0 });
    let energy = (rho * h).trace().re;
    let entropy = (rho * &entropy_op).trace().re;
    let sigma_hh = weighted_inner_unchecked(rho, h, h) - energy * energy;
    let sigma_hs = weighted_inner_unchecked(rho, h, &entropy_op) - energy * entropy;
    Moments { entropy_op, energy, entropy, sigma_hh, sigma_hs }
}

pub fn observables(rho: &DensityOperator, hamiltonian: &CMatrix) -> Result<ThermoObservables> {
    let d = rho.dim();
    if hamiltonian.shape() != (d, d) {
        return Err(Error::DimensionMismatch("Hamiltonian and state dimensions differ".into()));
    }
    let ctx = qstate::entropy_context(rho)?;
    let s = &ctx.entropy_operator;
    let energy = rho.expect(hamiltonian);
    let entropy = rho.expect(s);
    let sigma_hh = qstate::covariance(rho, hamiltonian, hamiltonian)?;
    if sigma_hh <= MIN_ENERGY_VARIANCE {
        return Err(Error::DegenerateVariance(sigma_hh));
    }
    let sigma_hs = qstate::covariance(rho, hamiltonian, s)?;
    let sigma_ss = qstate::covariance(rho, s, s)?;
    let beta = sigma_hs / sigma_hh;
    let (sigma_ff, sigma_fs, free_energy) = if beta == 0.0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let f = hamiltonian - s / re(beta);
        (
            qstate::covariance(rho, &f, &f)?,
            qstate::covariance(rho, &f, s)?,
            rho.expect(&f),
        )
    };
    Ok(ThermoObservables {
        energy,
        entropy,
        beta,
        sigma_hh,
        sigma_hs,
        sigma_ss,
        sigma_ff,
        sigma_fs,
        heat_capacity: beta * beta * sigma_hh,
        free_energy,
    })
}

/// `βΔH − ΔS` for the state with spectral decomposition `eig`.
fn driving_operator(rho: &CMatrix, eig: &HermEig, h: &CMatrix) -> Result<CMatrix> {
    let m = moments(rho, eig, h);
    if m.sigma_hh <= MIN_ENERGY_VARIANCE {
        return Err(Error::DegenerateVariance(m.sigma_hh));
    }
    let beta = m.sigma_hs / m.sigma_hh;
    let d = rho.nrows();
    let eye = identity(d);
    Ok((h - &eye * re(m.energy)) * re(beta) - (m.entropy_op - eye * re(m.entropy)))
}

/// `D = ½{βΔH − ΔS, ρ} = (β/2){Δf, ρ}`.
pub fn dissipation_operator(rho: &DensityOperator, hamiltonian: &CMatrix) -> Result<CMatrix> {
    if hamiltonian.shape() != (rho.dim(), rho.dim()) {
        return Err(Error::DimensionMismatch("Hamiltonian and state dimensions differ".into()));
    }
    let m = rho.matrix();
    let g = driving_operator(m, &rho.eig()?, hamiltonian)?;
    Ok((&g * m + m * &g) * re(0.5))
}

/// The same dissipator from the ratio of Gram determinants of the
/// generators `{ln ρ, I, H}` under `(F, G) = ½Tr(ρ{F, G})`:
///
/// ```text
///     | √ρ ln ρ    √ρ      √ρ H   |
/// D̃ = | (I,ln ρ)   (I,I)   (I,H)  |  /  | (I,I) (I,H) |
///     | (H,ln ρ)   (H,I)   (H,H)  |     | (H,I) (H,H) |
/// ```
///
/// and `D = ½[√ρ D̃ + (√ρ D̃)†]`, with `ln ρ` restricted to the support.
pub fn dissipation_operator_gram(rho: &DensityOperator, hamiltonian: &CMatrix) -> Result<CMatrix> {
    let ctx = qstate::entropy_context(rho)?;
    let log_rho = &ctx.log_rho_on_support;
    let sqrt_rho = matcore::support_map(&ctx.eig, f64::sqrt, SUPPORT_CUTOFF)?;
    let eye = identity(rho.dim());
    let h = hamiltonian;
    let ip = |f: &CMatrix, g: &CMatrix| qstate::weighted_inner(rho, f, g);

    let (i_l, i_i, i_h) = (ip(&eye, log_rho)?, ip(&eye, &eye)?, ip(&eye, h)?);
    let (h_l, h_i, h_h) = (ip(h, log_rho)?, ip(h, &eye)?, ip(h, h)?);
    let gram = i_i * h_h - i_h * h_i;
    if gram <= MIN_ENERGY_VARIANCE {
        return Err(Error::DegenerateVariance(gram));
    }
    // cofactor expansion along the operator-valued first row
    let cof_log = i_i * h_h - i_h * h_i;
    let cof_id = -(i_l * h_h - i_h * h_l);
    let cof_h = i_l * h_i - i_i * h_l;
    let tilde = (&sqrt_rho * log_rho * re(cof_log) + &sqrt_rho * re(cof_id) + &sqrt_rho * h * re(cof_h))
        / re(gram);
    let half = &sqrt_rho * tilde;
    Ok((&half + half.adjoint()) * re(0.5))
}

/// `dρ/dt` at time `t`. Eigenvalues of ρ at or below the support cutoff are
/// treated as kernel, so slightly non-positive stage states are tolerated.
pub fn eom_rhs(rho: &CMatrix, model: &SeaqtModel, t: f64) -> Result<CMatrix> {
    let tau = model.relaxation.at(t)?;
    rhs_with_tau(rho, &model.hamiltonian, tau)
}

fn rhs_with_tau(rho: &CMatrix, h: &CMatrix, tau: f64) -> Result<CMatrix> {
    let eig = herm_eig(&hermitize(rho))?;
    let g = driving_operator(rho, &eig, h)?;
    let unitary = (h * rho - rho * h) * c(0.0, -1.0);
    Ok(unitary - (&g * rho + rho * &g) * re(0.5 / tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaqtConfig {
    pub ode: AdaptiveConfig,
    /// Mixing weight η for rank-deficient initial states; 0 disables the lift.
    pub regularization: f64,
}

impl Default for SeaqtConfig {
    fn default() -> Self {
        SeaqtConfig { ode: AdaptiveConfig::default(), regularization: DEFAULT_REGULARIZATION }
    }
}

#[derive(Debug, Clone)]
pub struct SeaqtSample {
    pub t: f64,
    pub state: DensityOperator,
    pub observables: ThermoObservables,
    pub tau: f64,
}

/// Worst-case invariant residuals observed along one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub max_trace_drift: f64,
    pub max_energy_drift: f64,
    pub min_eigenvalue: f64,
    /// Sample-to-sample entropy decreases beyond 1e-9 while τ_D > 0.
    pub entropy_violations: usize,
    /// Samples where τ_D < 0, exempt from the monotonicity check.
    pub negative_tau_samples: usize,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        let mut n = self.entropy_violations;
        if self.max_trace_drift > 1e-9 {
            n += 1;
        }
        if self.max_energy_drift > 1e-6 {
            n += 1;
        }
        if self.min_eigenvalue < -1e-8 {
            n += 1;
        }
        n
    }
}

#[derive(Debug, Clone)]
pub struct SeaqtTrajectory {
    pub samples: Vec<SeaqtSample>,
    pub stats: IntegrationStats,
    /// Whether the initial state was lifted to full rank before integrating.
    pub regularized: bool,
    pub regularization: f64,
    pub report: InvariantReport,
}

impl SeaqtTrajectory {
    pub fn states(&self) -> impl Iterator<Item = &DensityOperator> {
        self.samples.iter().map(|s| &s.state)
    }

    pub fn last(&self) -> &SeaqtSample {
        self.samples.last().expect("trajectory has samples")
    }
}

/// Lifts a rank-deficient state to `(1 − η)ρ + η I/d`; full-rank states pass through.
pub fn regularize(rho: &DensityOperator, eta: f64) -> Result<(DensityOperator, bool)> {
    if eta <= 0.0 {
        return Ok((rho.clone(), false));
    }
    if rho.eig()?.min() > SUPPORT_CUTOFF {
        return Ok((rho.clone(), false));
    }
    Ok((rho.mixed_with_identity(eta), true))
}

pub fn integrate(model: &SeaqtModel, rho_in: &DensityOperator, times: &[f64]) -> Result<SeaqtTrajectory> {
    integrate_with(model, rho_in, times, &SeaqtConfig::default())
}

pub fn integrate_with(
    model: &SeaqtModel,
    rho_in: &DensityOperator,
    times: &[f64],
    cfg: &SeaqtConfig,
) -> Result<SeaqtTrajectory> {
    let h = &model.hamiltonian;
    if h.shape() != (rho_in.dim(), rho_in.dim()) {
        return Err(Error::DimensionMismatch("Hamiltonian and state dimensions differ".into()));
    }
    model.relaxation.validate()?;
    ode::check_times(times)?;
    let (start, regularized) = regularize(rho_in, cfg.regularization)?;

    // In the frame rotating with H the coherent term drops out, since the
    // driving operator G = βΔH − ΔS is covariant under e^{−iHt}. What is left,
    // ρ' = −{G, ρ}/2τ, is integrated as γ' = −Gγ/2τ for a factor ρ = γγ†:
    // positivity and rank hold by construction, errors on small eigenvalues
    // scale with their square roots, and Gibbs states are exactly stationary.
    let gamma0 = matcore::support_map(&start.eig()?, f64::sqrt, SUPPORT_CUTOFF)?;
    let rhs = |t: f64, gamma: &CMatrix| -> Result<CMatrix> {
        let tau = model.relaxation.at(t)?;
        let rho = gamma * gamma.adjoint();
        let g = driving_operator(&rho, &herm_eig(&hermitize(&rho))?, h)?;
        Ok(g * gamma * re(-0.5 / tau))
    };
    // renormalizing the trace moves γ by about the local error, so the
    // derivative from the step is kept
    let post = |_: f64, gamma: &mut CMatrix| -> Result<bool> {
        let tr = gamma.norm_squared();
        *gamma /= re(tr.sqrt());
        Ok(false)
    };
    // explicit steps must resolve the dissipative scale
    let tau_min = times
        .iter()
        .map(|&t| model.relaxation.at(t).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut ode_cfg = cfg.ode;
    ode_cfg.h_max = ode_cfg.h_max.min(0.5 * tau_min);
    let (factors, stats) = ode::dopri5(rhs, post, &gamma0, times, &ode_cfg)?;

    let levels = herm_eig(h)?;
    let rotation = |dt: f64| {
        let v = &levels.eigenvectors;
        let mut scaled = v.clone();
        for (k, &w) in levels.eigenvalues.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= C64::from_polar(1.0, -w * dt);
        }
        scaled * v.adjoint()
    };
    let states = times.iter().zip(&factors).map(|(&t, g)| {
        let u = rotation(t - times[0]);
        let ug = u * g;
        &ug * ug.adjoint()
    });

    let mut report = InvariantReport { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let e0 = start.expect(h);
    let mut samples: Vec<SeaqtSample> = Vec::with_capacity(states.len());
    for (&t, m) in times.iter().zip(states) {
        let state = DensityOperator::from_trusted(hermitize(&m));
        let eig = state.eig()?;
        report.min_eigenvalue = report.min_eigenvalue.min(eig.min());
        report.max_trace_drift = report.max_trace_drift.max((state.matrix().trace().re - 1.0).abs());
        report.max_energy_drift = report.max_energy_drift.max((state.expect(h) - e0).abs());
        let obs = observables(&state, h)?;
        let tau = model.relaxation.at(t)?;
        if tau < 0.0 {
            report.negative_tau_samples += 1;
        }
        if let Some(prev) = samples.last() {
            if prev.tau > 0.0 && tau > 0.0 && obs.entropy < prev.observables.entropy - 1e-9 {
                report.entropy_violations += 1;
            }
        }
        samples.push(SeaqtSample { t, state, observables: obs, tau });
    }
    Ok(SeaqtTrajectory {
        samples,
        stats,
        regularized,
        regularization: if regularized { cfg.regularization } else { 0.0 },
        report,
    })
}

/// Canonical state `e^{−βH}/Z` at a given β.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub beta_eq: f64,
    pub partition: f64,
    pub state: DensityOperator,
}

/// `ln Z(β) = ln Tr e^{−βH}`, computed from the spectrum with a shift.
pub fn ln_partition(hamiltonian: &CMatrix, beta: f64) -> Result<f64> {
    let levels = herm_eig(hamiltonian)?.eigenvalues;
    Ok(ln_partition_levels(&levels, beta))
}

/// `ln Z(β + δ) − ln Z(β) = ln ⟨e^{−δH}⟩_β`, accurate for small `δ` where
/// subtracting two partition functions would cancel.
pub fn ln_partition_shift(hamiltonian: &CMatrix, beta: f64, delta: f64) -> Result<f64> {
    let levels = herm_eig(hamiltonian)?.eigenvalues;
    let shift = levels.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &e in &levels {
        let w = (-beta * e - shift).exp();
        num += w * (-delta * e).exp_m1();
        den += w;
    }
    Ok((num / den).ln_1p())
}

fn ln_partition_levels(levels: &[f64], beta: f64) -> f64 {
    let shift = levels.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    shift + levels.iter().map(|&e| (-beta * e - shift).exp()).sum::<f64>().ln()
}

fn mean_energy(levels: &[f64], beta: f64) -> f64 {
    let shift = levels.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &e in levels {
        let w = (-beta * e - shift).exp();
        num += w * e;
        den += w;
    }
    num / den
}

fn energy_variance(levels: &[f64], beta: f64) -> f64 {
    let mean = mean_energy(levels, beta);
    let shift = levels.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &e in levels {
        let w = (-beta * e - shift).exp();
        num += w * (e - mean).powi(2);
        den += w;
    }
    num / den
}

pub fn gibbs_state(hamiltonian: &CMatrix, beta: f64) -> Result<GibbsState> {
    let eig = herm_eig(hamiltonian)?;
    let ln_z = ln_partition_levels(&eig.eigenvalues, beta);
    let m = eig.map(|e| (-beta * e - ln_z).exp());
    Ok(GibbsState { beta_eq: beta, partition: ln_z.exp(), state: DensityOperator::from_trusted(hermitize(&m)) })
}

/// Gibbs state whose mean energy equals `energy`; β may be negative.
pub fn equilibrium_state(hamiltonian: &CMatrix, energy: f64) -> Result<GibbsState> {
    let levels = herm_eig(hamiltonian)?.eigenvalues;
    let (min, max) = (levels[0], levels[levels.len() - 1]);
    let width = max - min;
    if !(energy > min + 1e-12 * width.max(1.0)) || !(energy < max - 1e-12 * width.max(1.0)) {
        return Err(Error::EnergyOutOfRange { energy, min, max });
    }
    let excess = |b: f64| mean_energy(&levels, b) - energy;
    // mean energy decreases with β
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expansions = 0;
    while excess(lo) < 0.0 || excess(hi) > 0.0 {
        if excess(lo) < 0.0 {
            lo *= 2.0;
        }
        if excess(hi) > 0.0 {
            hi *= 2.0;
        }
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoConvergence("equilibrium_state bracket"));
        }
    }
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..500 {
        let g = excess(beta);
        if g.abs() <= 1e-14 * width.max(1.0) {
            break;
        }
        if g > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let slope = -energy_variance(&levels, beta);
        let newton = beta - g / slope;
        beta = if slope < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * beta.abs().max(1.0) {
            break;
        }
    }
    if excess(beta).abs() > 1e-10 {
        return Err(Error::NoConvergence("equilibrium_state"));
    }
    gibbs_state(hamiltonian, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feshbach::{effective_hamiltonian, EffectiveParams};
    use crate::matcore::diag_real;
    use crate::qstate::{from_pure, hs_distance, PureStateSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h_eff() -> CMatrix {
        effective_hamiltonian(&EffectiveParams { w1: 2.53, w2: 0.026 }).unwrap()
    }

    fn random_full_rank(rng: &mut ChaCha8Rng) -> DensityOperator {
        let x = CMatrix::from_fn(3, 3, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        DensityOperator::normalized(&x * x.adjoint() + identity(3) * re(0.05)).unwrap()
    }

    #[test]
    fn relaxation_models() {
        let logistic = RelaxationModel::Logistic { w3: 5.7664, w4: 25.4405, w5: 0.9094 };
        let want = 5.7664 / (1.0 + (-25.4405f64).exp());
        assert!((logistic.at(0.0).unwrap() - want).abs() < 1e-15);
        assert!((logistic.at(0.0).unwrap() - 5.7664).abs() < 1e-9);
        let flat = RelaxationModel::Logistic { w3: 3.0, w4: 0.0, w5: 0.0 };
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(flat.at(t).unwrap(), 1.5);
        }
        assert_eq!(RelaxationModel::Constant { tau: 0.0 }.validate(), Err(Error::ZeroTau));
        assert!(RelaxationModel::FluctuationDiagnostic.at(0.0).is_err());
    }

    #[test]
    fn observables_of_mixed_and_gibbs_states() {
        let h = h_eff();
        let mixed = DensityOperator::maximally_mixed(3);
        let obs = observables(&mixed, &h).unwrap();
        assert!((obs.entropy - 3f64.ln()).abs() < 1e-12);
        assert!(obs.beta.abs() < 1e-12);

        let g = gibbs_state(&h, -0.7).unwrap();
        let obs = observables(&g.state, &h).unwrap();
        assert!((obs.beta + 0.7).abs() < 1e-6);
        assert!((obs.sigma_hs - obs.beta * obs.sigma_hh).abs() < 1e-8);
        assert!((obs.sigma_hs.powi(2) - obs.sigma_hh * obs.sigma_ss).abs() < 1e-8);
        assert!((obs.heat_capacity - obs.sigma_hs.powi(2) / obs.sigma_hh).abs() < 1e-12);

        let v = herm_eig(&h).unwrap().eigenvectors.column(0).into_owned();
        let eigenstate = DensityOperator::normalized(&v * v.adjoint()).unwrap();
        assert!(matches!(observables(&eigenstate, &h), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn fluctuation_chain_on_random_states() {
        let h = h_eff();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let rho = random_full_rank(&mut rng);
            let o = observables(&rho, &h).unwrap();
            let b2ff = o.beta * o.beta * o.sigma_ff;
            assert!((b2ff - (o.sigma_ss - o.beta * o.beta * o.sigma_hh)).abs() < 1e-8);
            assert!((b2ff + o.beta * o.sigma_fs).abs() < 1e-8);
            assert!((b2ff - o.delta_m_variance()).abs() < 1e-8);
            assert!(o.sigma_hh >= 0.0 && o.sigma_ss >= -1e-12 && o.sigma_ff >= -1e-12);
        }
    }

    #[test]
    fn dissipator_properties() {
        let h = h_eff();
        let g = gibbs_state(&h, 0.8).unwrap();
        assert!(dissipation_operator(&g.state, &h).unwrap().norm() < 1e-9);
        let mixed = DensityOperator::maximally_mixed(3);
        assert!(dissipation_operator(&mixed, &h).unwrap().norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..50 {
            let rho = random_full_rank(&mut rng);
            let d = dissipation_operator(&rho, &h).unwrap();
            assert!(matcore::hermitian_residual(&d) < 1e-12);
            assert!(d.trace().norm() < 1e-10);
            assert!((&d * &h).trace().norm() < 1e-9);
            let gram = dissipation_operator_gram(&rho, &h).unwrap();
            assert!((d - gram).norm() < 1e-8);
        }
    }

    #[test]
    fn rhs_examples() {
        let h = h_eff();
        let model = SeaqtModel::new(h.clone(), RelaxationModel::Constant { tau: 16.0783 }).unwrap();
        let g = gibbs_state(&h, -0.4).unwrap();
        assert!(eom_rhs(g.state.matrix(), &model, 0.0).unwrap().norm() < 1e-9);

        // diagonal in the energy eigenbasis: no unitary part
        let eig = herm_eig(&h).unwrap();
        let v = &eig.eigenvectors;
        let rho = v * diag_real(&[0.5, 0.3, 0.2]) * v.adjoint();
        let unitary = (&h * &rho - &rho * &h) * c(0.0, -1.0);
        assert!(unitary.norm() < 1e-12);

        let rho = from_pure(&PureStateSpec::real(&[0.96, 0.003, 0.03])).unwrap().mixed_with_identity(1e-3);
        let rhs = eom_rhs(rho.matrix(), &model, 0.0).unwrap();
        assert!(rhs.trace().norm() < 1e-12 && (&h * &rhs).trace().norm() < 1e-9);
        assert!(matcore::hermitian_residual(&rhs) < 1e-12);
        // d⟨S⟩/dt = −Tr(ρ̇ ln ρ) = β²σ_FF / τ
        let ctx = qstate::entropy_context(&rho).unwrap();
        let rate = (&rhs * &ctx.entropy_operator).trace().re;
        let o = observables(&rho, &h).unwrap();
        assert!((rate - o.entropy_rate(16.0783)).abs() < 1e-6 * o.entropy_rate(16.0783).abs().max(1e-12));
    }

    #[test]
    fn equilibrium_examples() {
        let h = h_eff();
        let mean = h.trace().re / 3.0;
        let g = equilibrium_state(&h, mean).unwrap();
        assert!(g.beta_eq.abs() < 1e-9);
        assert!(hs_distance(&g.state, &DensityOperator::maximally_mixed(3)).unwrap() < 1e-9);

        let top = herm_eig(&h).unwrap().max();
        let hot = equilibrium_state(&h, top - 1e-3).unwrap();
        assert!(hot.beta_eq < -5.0);

        let ket0 = from_pure(&PureStateSpec::real(&[0.96, 0.003, 0.03])).unwrap();
        let g = equilibrium_state(&h, ket0.expect(&h)).unwrap();
        assert!(g.beta_eq < 0.0);
        assert!((g.state.expect(&h) - ket0.expect(&h)).abs() < 1e-10);
        let o = observables(&g.state, &h).unwrap();
        let from_variances = (o.sigma_ss / o.sigma_hh).sqrt() * o.sigma_hs.signum();
        assert!((from_variances - g.beta_eq).abs() < 1e-6);

        assert!(matches!(equilibrium_state(&h, top + 1.0), Err(Error::EnergyOutOfRange { .. })));
    }

    #[test]
    fn partition_shift_matches_difference() {
        let h = h_eff();
        for (beta, delta) in [(0.7, 0.1), (-1.2, -0.3), (0.0, 2.0)] {
            let direct = ln_partition(&h, beta + delta).unwrap() - ln_partition(&h, beta).unwrap();
            assert!((ln_partition_shift(&h, beta, delta).unwrap() - direct).abs() < 1e-13);
        }
        // first-order term is −δ⟨H⟩_β
        let g = gibbs_state(&h, 0.5).unwrap();
        let small = ln_partition_shift(&h, 0.5, 1e-9).unwrap();
        assert!((small / 1e-9 + g.state.expect(&h)).abs() < 1e-8);
    }

    #[test]
    fn gibbs_input_stays_put() {
        let h = h_eff();
        let model = SeaqtModel::new(h.clone(), RelaxationModel::Constant { tau: 2.0 }).unwrap();
        let g = gibbs_state(&h, 0.6).unwrap();
        let traj = integrate(&model, &g.state, &[0.0, 5.0, 20.0]).unwrap();
        assert!(!traj.regularized);
        for s in &traj.samples {
            let dist = hs_distance(&s.state, &g.state).unwrap();
            assert!(dist < 1e-9, "t = {} distance {dist:.3e}", s.t);
        }
    }

    #[test]
    fn fluctuation_diagnostic_recovers_constant_tau() {
        let h = h_eff();
        let tau = 3.0;
        let model = SeaqtModel::new(h.clone(), RelaxationModel::Constant { tau }).unwrap();
        let rho = from_pure(&PureStateSpec::real(&[0.8, 0.5, 0.3])).unwrap().mixed_with_identity(0.05);
        let dt = 1e-3;
        let traj = integrate(&model, &rho, &[1.0 - dt, 1.0, 1.0 + dt]).unwrap();
        let s: Vec<f64> = traj.samples.iter().map(|x| x.observables.entropy).collect();
        let rate = (s[2] - s[0]) / (2.0 * dt);
        let est = tau_eval(&RelaxationModel::FluctuationDiagnostic, &traj.samples[1].state, &h, 1.0, rate)
            .unwrap();
        assert!((est - tau).abs() < 1e-4 * tau, "estimated {est}");
        assert_eq!(
            tau_eval(&RelaxationModel::FluctuationDiagnostic, &rho, &h, 0.0, 0.0),
            Err(Error::ZeroEntropyRate)
        );
    }
}
