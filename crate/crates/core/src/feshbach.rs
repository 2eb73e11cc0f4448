//! Four-level Hamiltonian with the short-lived `|P⟩` level and its
//! projection onto `span{|0⟩, |1⟩, |2⟩}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{re, CMatrix};

/// Drive ratio `Ω₂/Ω₁` of the case study.
pub const OMEGA2_RATIO: f64 = 0.06;

/// `κ₂/Ω₁` implied by the weak `|2⟩ ↔ |P⟩` coupling.
pub const KAPPA2_RATIO: f64 = 0.0015;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourLevelParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega1_p: f64,
    pub omega2_p: f64,
    /// Detuning Δ between `|0⟩` and `|P⟩`.
    pub detuning: f64,
    /// Emission rate of `|P⟩ → |0⟩`.
    pub gamma: f64,
    /// ε = H_P − E.
    pub epsilon: f64,
}

impl FourLevelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.omega1 > 0.0) {
            return Err(Error::Invalid("four-level model needs gamma > 0 and omega1 > 0".into()));
        }
        Ok(())
    }

    /// Effective parameters `ω₁ = Ω_1P²/(2εΩ₁)`, `ω₂ = Ω_2P²/(2εΩ₁)`.
    pub fn effective(&self) -> Result<EffectiveParams> {
        if self.epsilon.abs() <= 1e-12 {
            return Err(Error::SingularEpsilon(self.epsilon));
        }
        let scale = 2.0 * self.epsilon * self.omega1;
        Ok(EffectiveParams {
            w1: self.omega1_p.powi(2) / scale,
            w2: self.omega2_p.powi(2) / scale,
        })
    }
}

/// Dimensionless coefficients of the projected Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub w1: f64,
    pub w2: f64,
}

/// The 4×4 Hamiltonian in the basis `(|0⟩, |1⟩, |2⟩, |P⟩)`.
pub fn full_hamiltonian(p: &FourLevelParams) -> CMatrix {
    let rows = [
        [0.0, p.omega1, p.omega2, 0.0],
        [p.omega1, 0.0, 0.0, p.omega1_p],
        [p.omega2, 0.0, 0.0, p.omega2_p],
        [0.0, p.omega1_p, p.omega2_p, p.detuning],
    ];
    CMatrix::from_fn(4, 4, |i, j| re(0.5 * rows[i][j]))
}

/// `H_S − H_SP ε⁻¹ H_PS`, with ε taken as a free parameter.
pub fn project(p: &FourLevelParams) -> Result<CMatrix> {
    if p.epsilon.abs() <= 1e-12 {
        return Err(Error::SingularEpsilon(p.epsilon));
    }
    let full = full_hamiltonian(p);
    let h_s = full.view((0, 0), (3, 3)).into_owned();
    let h_sp = full.view((0, 3), (3, 1)).into_owned();
    let h_ps = full.view((3, 0), (1, 3)).into_owned();
    Ok(h_s - (h_sp * h_ps) / re(p.epsilon))
}

/// Dimensionless effective Hamiltonian with Ω₁ = 1, Ω₂ = 0.06:
///
/// ```text
/// ½ [[0,    1,        0.06     ],
///    [1,    −ω₁,      −√(ω₁ω₂) ],
///    [0.06, −√(ω₁ω₂), −ω₂      ]]
/// ```
pub fn effective_hamiltonian(e: &EffectiveParams) -> Result<CMatrix> {
    let product = e.w1 * e.w2;
    if product < 0.0 {
        return Err(Error::NegativeProduct(product));
    }
    let cross = -product.sqrt();
    let rows = [
        [0.0, 1.0, OMEGA2_RATIO],
        [1.0, -e.w1, cross],
        [OMEGA2_RATIO, cross, -e.w2],
    ];
    Ok(CMatrix::from_fn(3, 3, |i, j| re(0.5 * rows[i][j])))
}

/// Case-study Hamiltonian without the `|P⟩` correction (Ω₁ = 1).
pub fn bare_hamiltonian() -> CMatrix {
    effective_hamiltonian(&EffectiveParams { w1: 0.0, w2: 0.0 }).expect("zero product")
}

/// Couplings `(Ω_1P, Ω_2P)` from `ω_1P = 2aγ`, `ω_2P = 0.0015 bγ` and
/// `Ω_iP = √(ω_iP Ω₁)`.
pub fn coupling_from_rates(omega1: f64, gamma: f64, a: f64, b: f64) -> (f64, f64) {
    let w1p = 2.0 * a * gamma;
    let w2p = KAPPA2_RATIO * b * gamma;
    ((w1p * omega1).sqrt(), (w2p * omega1).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{approx_eq, hermitian_residual, herm_eig};

    fn params(omega1_p: f64, omega2_p: f64, detuning: f64, epsilon: f64) -> FourLevelParams {
        FourLevelParams {
            omega1: 1.0,
            omega2: OMEGA2_RATIO,
            omega1_p,
            omega2_p,
            detuning,
            gamma: 1.0,
            epsilon,
        }
    }

    #[test]
    fn full_hamiltonian_structure() {
        let zero = FourLevelParams {
            omega1: 0.0,
            omega2: 0.0,
            omega1_p: 0.0,
            omega2_p: 0.0,
            detuning: 0.0,
            gamma: 1.0,
            epsilon: 1.0,
        };
        assert!(full_hamiltonian(&zero).norm() == 0.0);

        let decoupled = full_hamiltonian(&params(0.0, 0.0, 3.0, 1.0));
        assert!(approx_eq(&decoupled.view((0, 0), (3, 3)).into_owned(), &bare_hamiltonian(), 0.0));
        assert!(decoupled.view((0, 3), (3, 1)).norm() == 0.0);

        let generic = full_hamiltonian(&params(1.3, 0.2, -0.7, 1.0));
        assert!(hermitian_residual(&generic) == 0.0);
    }

    #[test]
    fn projection_examples() {
        let p = params(0.0, 0.0, 2.0, 5.0);
        assert!(approx_eq(&project(&p).unwrap(), &bare_hamiltonian(), 0.0));

        let p = params(1.3, 0.2, 2.0, 0.8);
        let correction = bare_hamiltonian() - project(&p).unwrap();
        let s = correction.singular_values();
        let nonzero = s.iter().filter(|&&x| x > 1e-12).count();
        assert_eq!(nonzero, 1);
        // entry (1,1) is -Ω_1P² / (4ε)
        let h = project(&p).unwrap();
        assert!((h[(1, 1)].re + 1.3f64.powi(2) / (4.0 * 0.8)).abs() < 1e-15);

        assert!(matches!(project(&params(1.0, 1.0, 0.0, 0.0)), Err(Error::SingularEpsilon(_))));
    }

    #[test]
    fn projection_matches_effective_form() {
        for &(o1p, o2p, eps) in &[(1.3, 0.2, 0.8), (2f64.sqrt(), 0.0015f64.sqrt(), 0.3), (0.5, 0.9, 4.0)] {
            let p = params(o1p, o2p, 1.0, eps);
            let via_params = effective_hamiltonian(&p.effective().unwrap()).unwrap();
            assert!(approx_eq(&project(&p).unwrap(), &via_params, 1e-12));
        }
    }

    #[test]
    fn projected_spectrum_converges_with_large_detuning() {
        // with ε ≈ Δ/2 the error of the lowest three 4x4 eigenvalues shrinks as 1/ε²
        let err = |delta: f64| {
            let p = params(1.3, 0.4, delta, delta / 2.0);
            let mut full = herm_eig(&full_hamiltonian(&p)).unwrap().eigenvalues;
            full.truncate(3);
            let proj = herm_eig(&project(&p).unwrap()).unwrap().eigenvalues;
            full.iter().zip(&proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100.0), err(200.0));
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let h0 = effective_hamiltonian(&EffectiveParams { w1: 0.0, w2: 0.0 }).unwrap();
        assert!((h0[(0, 1)].re - 0.5).abs() < 1e-15 && (h0[(0, 2)].re - 0.03).abs() < 1e-15);
        assert!(h0[(1, 1)].re == 0.0 && h0[(2, 2)].re == 0.0 && h0[(1, 2)].re == 0.0);

        let h = effective_hamiltonian(&EffectiveParams { w1: 2.53, w2: 0.026 }).unwrap();
        assert!((h[(1, 1)].re + 1.265).abs() < 1e-15);
        assert!((h[(2, 2)].re + 0.013).abs() < 1e-15);
        assert!((h[(1, 2)].re + 0.128238).abs() < 1e-6);
        assert!(hermitian_residual(&h) == 0.0);

        for &(w1, w2) in &[(1.0, 2.0), (0.3, 0.0), (-1.0, -0.5)] {
            let h = effective_hamiltonian(&EffectiveParams { w1, w2 }).unwrap();
            assert!((h.trace().re + (w1 + w2) / 2.0).abs() < 1e-15);
        }
        assert!(matches!(
            effective_hamiltonian(&EffectiveParams { w1: 1.0, w2: -0.1 }),
            Err(Error::NegativeProduct(_))
        ));
    }

    #[test]
    fn couplings_from_rates() {
        let (a, b) = coupling_from_rates(1.0, 1.0, 1.0, 1.0);
        assert!((a - 2f64.sqrt()).abs() < 1e-15 && (b - 0.0015f64.sqrt()).abs() < 1e-15);
        assert_eq!(coupling_from_rates(1.0, 1.0, 0.0, 1.0).0, 0.0);
        let (a4, b4) = coupling_from_rates(1.0, 4.0, 1.0, 1.0);
        assert!((a4 - 2.0 * a).abs() < 1e-14 && (b4 - 2.0 * b).abs() < 1e-14);
    }
}
