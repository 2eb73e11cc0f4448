//! Density operators, the entropy operator, and state-weighted statistics.
//!
//! Units are dimensionless with k_B = ħ = 1.

use crate::error::{Error, Result};
use crate::matcore::{
    self, herm_eig, hermitian_residual, hermitize, identity, re, support_map, CMatrix, HermEig,
    C64, SUPPORT_CUTOFF,
};

/// Tolerance on Hermiticity, unit trace and positivity of a density operator.
pub const STATE_TOL: f64 = 1e-9;

/// A Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates `matrix` against the density-operator invariants.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermitian_residual(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (residual {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr - re(1.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = herm_eig(&matrix)?.min();
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
        }
        Ok(DensityOperator { matrix })
    }

    /// Hermitizes and rescales to unit trace, then validates.
    pub fn normalized(matrix: CMatrix) -> Result<Self> {
        let h = hermitize(&matrix);
        let tr = h.trace().re;
        if tr.abs() < f64::MIN_POSITIVE {
            return Err(Error::InvalidState("zero trace".into()));
        }
        Self::new(h / re(tr))
    }

    /// Wraps a matrix the caller already knows to be a valid state.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityOperator { matrix }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator { matrix: identity(d) / re(d as f64) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eig(&self) -> Result<HermEig> {
        herm_eig(&self.matrix)
    }

    /// `⟨A⟩ = Re Tr(ρA)`.
    pub fn expect(&self, a: &CMatrix) -> f64 {
        (&self.matrix * a).trace().re
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `(1 − η) ρ + η I/d`.
    pub fn mixed_with_identity(&self, eta: f64) -> Self {
        let d = self.dim();
        let m = self.matrix.scale(1.0 - eta) + identity(d) * re(eta / d as f64);
        DensityOperator { matrix: m }
    }
}

/// Amplitudes `(p0, p1, p2, ...)` of `|ψ⟩ = Σ p_i |i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateSpec {
    pub amplitudes: Vec<C64>,
}

impl PureStateSpec {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        PureStateSpec { amplitudes }
    }

    pub fn real(amplitudes: &[f64]) -> Self {
        PureStateSpec { amplitudes: amplitudes.iter().map(|&x| re(x)).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Vec<C64>> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.amplitudes.iter().map(|p| p / n).collect())
    }
}

/// `|ψ⟩⟨ψ|` of the normalized amplitudes.
pub fn from_pure(spec: &PureStateSpec) -> Result<DensityOperator> {
    let psi = spec.normalized()?;
    let d = psi.len();
    let m = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
    Ok(DensityOperator::from_trusted(m))
}

/// Support projector and entropy operator `S = −B ln ρ` of a state.
#[derive(Debug, Clone)]
pub struct EntropyContext {
    /// Projector `B` onto the range of ρ.
    pub support_projector: CMatrix,
    /// `B ln ρ`.
    pub log_rho_on_support: CMatrix,
    pub entropy_operator: CMatrix,
    /// Spectral decomposition of ρ the above were built from.
    pub eig: HermEig,
}

pub fn entropy_context(rho: &DensityOperator) -> Result<EntropyContext> {
    entropy_context_from_eig(rho.eig()?)
}

pub(crate) fn entropy_context_from_eig(eig: HermEig) -> Result<EntropyContext> {
    let support_projector = support_map(&eig, |_| 1.0, SUPPORT_CUTOFF)?;
    let log_rho_on_support = support_map(&eig, f64::ln, SUPPORT_CUTOFF)?;
    let entropy_operator = -&log_rho_on_support;
    Ok(EntropyContext { support_projector, log_rho_on_support, entropy_operator, eig })
}

/// Entropy operator written as `−ln(ρ + P_ker)`.
pub fn entropy_operator_kernel_form(rho: &DensityOperator) -> Result<CMatrix> {
    let eig = rho.eig()?;
    if eig.min() < -1e-9 {
        return Err(Error::NegativeEigenvalue(eig.min()));
    }
    let kernel = eig.map(|w| if w > SUPPORT_CUTOFF { 0.0 } else { 1.0 });
    let lifted = herm_eig(&hermitize(&(rho.matrix() + kernel)))?;
    Ok(-lifted.map(f64::ln))
}

/// von Neumann entropy `⟨S⟩ = −Σ w ln w` over the support.
pub fn entropy(rho: &DensityOperator) -> Result<f64> {
    let eig = rho.eig()?;
    if eig.min() < -1e-9 {
        return Err(Error::NegativeEigenvalue(eig.min()));
    }
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&w| w > SUPPORT_CUTOFF)
        .map(|&w| -w * w.ln())
        .sum())
}

fn check_operands(rho: &DensityOperator, f: &CMatrix, g: &CMatrix) -> Result<()> {
    let d = rho.dim();
    for m in [f, g] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, state is {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// `(F, G) = ½ Tr(|ρ| {F, G})`; `|ρ| = ρ` for a valid state.
pub fn weighted_inner(rho: &DensityOperator, f: &CMatrix, g: &CMatrix) -> Result<f64> {
    check_operands(rho, f, g)?;
    Ok(weighted_inner_unchecked(rho.matrix(), f, g))
}

pub(crate) fn weighted_inner_unchecked(rho: &CMatrix, f: &CMatrix, g: &CMatrix) -> f64 {
    let fg = f * g;
    let gf = g * f;
    0.5 * (rho * (fg + gf)).trace().re
}

/// `(F, G) − ⟨F⟩⟨G⟩`.
pub fn covariance(rho: &DensityOperator, f: &CMatrix, g: &CMatrix) -> Result<f64> {
    check_operands(rho, f, g)?;
    Ok(weighted_inner_unchecked(rho.matrix(), f, g) - rho.expect(f) * rho.expect(g))
}

/// Diagonal of ρ: `P_i = Tr(ρ |i⟩⟨i|)`.
pub fn populations(rho: &DensityOperator) -> Vec<f64> {
    (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect()
}

/// Hilbert–Schmidt distance `√Tr[(a − b)†(a − b)]`.
pub fn hs_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "hs_distance between d={} and d={}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(matcore::frob(&(a.matrix() - b.matrix())))
}
