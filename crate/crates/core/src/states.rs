//! Initial conditions: the three reference states and the search for pure
//! states orthogonal to the slowest Liouvillian mode.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitkit::{differential_evolution, levenberg_marquardt, DeConfig, LmConfig};
use crate::lindblad::LiouvillianSpectrum;
use crate::matcore::{c, CMatrix, C64};
use crate::qstate::{self, from_pure, hs_distance, DensityOperator, PureStateSpec};

/// Reference initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableState {
    Ket0,
    Ket2,
    Sme,
}

impl TableState {
    pub const ALL: [TableState; 3] = [TableState::Ket0, TableState::Ket2, TableState::Sme];

    /// Printed amplitudes `(p0, p1, p2)`, not normalized.
    pub fn amplitudes(&self) -> PureStateSpec {
        match self {
            TableState::Ket0 => PureStateSpec::real(&[0.96, 0.003, 0.03]),
            TableState::Ket2 => PureStateSpec::real(&[0.03, 0.003, 0.967]),
            TableState::Sme => PureStateSpec::new(vec![c(0.8, 0.0), c(0.176, 0.283), c(0.196, -0.459)]),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TableState::Ket0 => "ket0",
            TableState::Ket2 => "ket2",
            TableState::Sme => "sme",
        }
    }
}

impl FromStr for TableState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ket0" => Ok(TableState::Ket0),
            "ket2" => Ok(TableState::Ket2),
            "sme" => Ok(TableState::Sme),
            other => Err(Error::Invalid(format!("unknown initial state '{other}' (expected ket0, ket2 or sme)"))),
        }
    }
}

/// `|ψ⟩⟨ψ|` of the renormalized printed amplitudes.
pub fn table1_state(row: TableState) -> DensityOperator {
    from_pure(&row.amplitudes()).expect("printed amplitudes are nonzero")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmeConstraints {
    /// Populations `|p_i|²` to reproduce; `None` leaves them free.
    pub target_populations: Option<[f64; 3]>,
    /// Bound on `|Tr(L̂₁ρ)|`.
    pub overlap_tolerance: f64,
    pub entropy_tolerance: f64,
}

impl Default for SmeConstraints {
    fn default() -> Self {
        SmeConstraints { target_populations: None, overlap_tolerance: 1e-8, entropy_tolerance: 1e-9 }
    }
}

impl SmeConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_tolerance > 0.0) || !(self.entropy_tolerance > 0.0) {
            return Err(Error::Invalid("sME tolerances must be positive".into()));
        }
        if let Some(t) = self.target_populations {
            let sum: f64 = t.iter().sum();
            if t.iter().any(|&p| !(p >= 0.0)) || !((sum - 1.0).abs() <= 1e-3) {
                return Err(Error::Invalid(format!("target populations {t:?} must be nonnegative and sum to 1")));
            }
        }
        Ok(())
    }
}

/// How far each defining condition is from exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmeResiduals {
    /// `|‖ψ‖ − 1|`.
    pub norm: f64,
    /// `|Tr ρ − 1|`.
    pub trace: f64,
    /// `‖ρ² − ρ‖_F`.
    pub purity: f64,
    pub entropy: f64,
    pub overlap: f64,
    /// Largest population mismatch when populations were targeted.
    pub populations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmeResult {
    pub amplitudes: Vec<C64>,
    pub state: DensityOperator,
    pub overlap: C64,
    pub residuals: SmeResiduals,
}

/// `p0 = cos θ₁`, `p1 = sin θ₁ cos θ₂ e^{iφ₁}`, `p2 = sin θ₁ sin θ₂ e^{iφ₂}`.
fn amplitudes(x: &[f64]) -> [C64; 3] {
    let (t1, t2, f1, f2) = (x[0], x[1], x[2], x[3]);
    [
        c(t1.cos(), 0.0),
        C64::from_polar(t1.sin() * t2.cos(), f1),
        C64::from_polar(t1.sin() * t2.sin(), f2),
    ]
}

fn overlap_of(l1: &CMatrix, psi: &[C64; 3]) -> C64 {
    // ⟨ψ|L̂₁|ψ⟩ = Tr(L̂₁ |ψ⟩⟨ψ|)
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            acc += psi[i].conj() * l1[(i, j)] * psi[j];
        }
    }
    acc
}

fn evaluate(psi: [C64; 3], l1: &CMatrix, target: Option<[f64; 3]>) -> Result<SmeResult> {
    let spec = PureStateSpec::new(psi.to_vec());
    let norm = spec.norm();
    let state = from_pure(&spec)?;
    let m = state.matrix();
    let overlap = (l1 * m).trace();
    let residuals = SmeResiduals {
        norm: (norm - 1.0).abs(),
        trace: (m.trace().re - 1.0).abs(),
        purity: (m * m - m).norm(),
        entropy: qstate::entropy(&state)?,
        overlap: overlap.norm(),
        populations: target.map(|t| {
            psi.iter().zip(t).map(|(p, q)| (p.norm_sqr() - q).abs()).fold(0.0, f64::max)
        }),
    };
    Ok(SmeResult { amplitudes: psi.to_vec(), state, overlap, residuals })
}

fn satisfies(r: &SmeResult, c: &SmeConstraints) -> bool {
    r.residuals.norm <= 1e-12
        && r.residuals.trace <= 1e-12
        && r.residuals.purity <= 1e-10
        && r.residuals.entropy <= c.entropy_tolerance
        && r.residuals.overlap <= c.overlap_tolerance
}

const ATTEMPTS: u64 = 8;

fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(attempt.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Pure state with `Tr(L̂₁ρ) = 0`.
///
/// Without target populations the search runs over two mixing angles and
/// two relative phases with `p0` real and nonnegative. With targets, the
/// moduli are fixed to `√P_i` and only the phases are searched.
pub fn find_sme(spec: &LiouvillianSpectrum, c: &SmeConstraints, seed: u64) -> Result<SmeResult> {
    c.validate()?;
    if spec.dim() != 3 {
        return Err(Error::DimensionMismatch("sME search needs a qutrit spectrum".into()));
    }
    let l1 = spec
        .left_modes
        .get(1)
        .ok_or_else(|| Error::Invalid("spectrum has no decaying mode".into()))?;

    let (bounds, embed): (Vec<(f64, f64)>, Box<dyn Fn(&[f64]) -> [f64; 4] + Sync>) = match c.target_populations {
        None => (
            vec![(0.0, FRAC_PI_2), (0.0, FRAC_PI_2), (0.0, TAU), (0.0, TAU)],
            Box::new(|x: &[f64]| [x[0], x[1], x[2], x[3]]),
        ),
        Some(t) => {
            let sum: f64 = t.iter().sum();
            let (a, b, d) = ((t[0] / sum).sqrt(), (t[1] / sum).sqrt(), (t[2] / sum).sqrt());
            let t1 = a.clamp(-1.0, 1.0).acos();
            let t2 = d.atan2(b);
            (vec![(0.0, TAU), (0.0, TAU)], Box::new(move |x: &[f64]| [t1, t2, x[0], x[1]]))
        }
    };
    let residual = |x: &[f64]| {
        let o = overlap_of(l1, &amplitudes(&embed(x)));
        [o.re, o.im]
    };

    let mut best: Option<SmeResult> = None;
    for attempt in 0..ATTEMPTS {
        let cfg = DeConfig {
            seed: attempt_seed(seed, attempt),
            target: Some(1e-10),
            max_generations: 300,
            ..Default::default()
        };
        let de = differential_evolution(
            |x| {
                let r = residual(x);
                r[0] * r[0] + r[1] * r[1]
            },
            &bounds,
            &cfg,
        )?;
        let lm = levenberg_marquardt(
            |x| Ok(residual(x).to_vec()),
            &de.best,
            &bounds,
            &LmConfig { ftol: 0.0, xtol: 1e-16, ..Default::default() },
        )?;
        let result = evaluate(amplitudes(&embed(&lm.x)), l1, c.target_populations)?;
        if satisfies(&result, c) {
            return Ok(result);
        }
        if best.as_ref().is_none_or(|b| result.residuals.overlap < b.residuals.overlap) {
            best = Some(result);
        }
    }
    let r = best.expect("at least one attempt").residuals;
    Err(Error::Infeasible(format!(
        "no sME state within {} attempts; best residuals: overlap {:.3e}, entropy {:.3e}, purity {:.3e}",
        ATTEMPTS, r.overlap, r.entropy, r.purity
    )))
}

/// `count` distinct sME states from independent searches, one seed per member.
pub fn random_sme_ensemble(
    spec: &LiouvillianSpectrum,
    c: &SmeConstraints,
    count: usize,
    seed: u64,
) -> Result<Vec<SmeResult>> {
    if count == 0 {
        return Err(Error::Invalid("ensemble count must be at least 1".into()));
    }
    c.validate()?;
    let budget = 3 * count + 10;
    let member_seed = |k: usize| attempt_seed(seed ^ 0xA5A5_A5A5, k as u64 + 1);
    let mut out: Vec<SmeResult> = Vec::with_capacity(count);
    let mut next = 0usize;
    while out.len() < count && next < budget {
        let want = (count - out.len()).min(budget - next);
        let batch: Vec<Result<SmeResult>> =
            (next..next + want).into_par_iter().map(|k| find_sme(spec, c, member_seed(k))).collect();
        next += want;
        for r in batch {
            let Ok(r) = r else { continue };
            let distinct = out
                .iter()
                .all(|o| hs_distance(&o.state, &r.state).is_ok_and(|d| d > 1e-6));
            if distinct && out.len() < count {
                out.push(r);
            }
        }
    }
    if out.len() < count {
        return Err(Error::Infeasible(format!("found {} of {count} distinct sME states", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{self, LindbladModel, DEFAULT_KAPPA1, DEFAULT_KAPPA2};
    use crate::qstate::populations;

    fn case_spectrum() -> LiouvillianSpectrum {
        lindblad::spectrum(&LindbladModel::case_study(DEFAULT_KAPPA1, DEFAULT_KAPPA2).unwrap()).unwrap()
    }

    #[test]
    fn table_states() {
        let k0 = table1_state(TableState::Ket0);
        let norm2 = 0.96f64.powi(2) + 0.003f64.powi(2) + 0.03f64.powi(2);
        assert!((populations(&k0)[0] - 0.9216 / norm2).abs() < 1e-15);
        let k2 = table1_state(TableState::Ket2);
        assert!(populations(&k2)[2] > 0.99);
        let sme = table1_state(TableState::Sme);
        let m = sme.matrix();
        assert!((m * m - m).norm() < 1e-12);
        assert_eq!("SME".parse::<TableState>().unwrap(), TableState::Sme);
        assert!("ket1".parse::<TableState>().is_err());
    }

    #[test]
    fn printed_sme_is_close_but_not_exact() {
        let spec = case_spectrum();
        let sme = lindblad::mpemba_overlap(&spec, &table1_state(TableState::Sme)).unwrap().norm();
        let ket0 = lindblad::mpemba_overlap(&spec, &table1_state(TableState::Ket0)).unwrap().norm();
        assert!(sme < 1e-2 && sme > 1e-8 && ket0 > 0.1);
    }

    #[test]
    fn find_sme_meets_constraints() {
        let spec = case_spectrum();
        let c = SmeConstraints::default();
        let r = find_sme(&spec, &c, 42).unwrap();
        assert!(r.residuals.overlap <= 1e-8);
        assert!(r.residuals.purity <= 1e-10 && r.residuals.entropy <= 1e-9);
        let direct = lindblad::mpemba_overlap(&spec, &r.state).unwrap();
        assert!((direct - r.overlap).norm() < 1e-14);
        assert!(r.amplitudes[0].im == 0.0 && r.amplitudes[0].re >= 0.0);

        let again = find_sme(&spec, &c, 42).unwrap();
        assert_eq!(r.amplitudes, again.amplitudes);
    }

    #[test]
    fn find_sme_with_target_populations() {
        let spec = case_spectrum();
        let target = [0.64, 0.111, 0.249];
        let c = SmeConstraints { target_populations: Some(target), ..Default::default() };
        let r = find_sme(&spec, &c, 1).unwrap();
        for (p, t) in r.amplitudes.iter().zip(target) {
            assert!((p.norm_sqr() - t).abs() < 1e-12);
        }
        assert!(r.residuals.overlap <= 1e-8);
    }

    #[test]
    fn search_succeeds_from_most_seeds() {
        let spec = case_spectrum();
        let c = SmeConstraints::default();
        let ok = (0..20u64).filter(|&s| find_sme(&spec, &c, s).is_ok()).count();
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn ensemble_is_distinct_and_reproducible() {
        let spec = case_spectrum();
        let c = SmeConstraints::default();
        let a = random_sme_ensemble(&spec, &c, 10, 5).unwrap();
        assert_eq!(a.len(), 10);
        for i in 0..a.len() {
            assert!(a[i].residuals.overlap <= 1e-8);
            for j in 0..i {
                assert!(hs_distance(&a[i].state, &a[j].state).unwrap() > 1e-6);
            }
        }
        let b = random_sme_ensemble(&spec, &c, 1, 5).unwrap();
        assert_eq!(a[0].amplitudes, b[0].amplitudes);
        assert!(random_sme_ensemble(&spec, &c, 0, 5).is_err());
    }
}
