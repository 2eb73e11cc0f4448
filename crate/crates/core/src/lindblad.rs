//! GKSL dynamics: Liouvillian assembly, eigenmode expansion, direct
//! integration and the Mpemba overlap `Tr(L̂₁ ρ_in)`.
//!
//! The Liouvillian acts on column-stacked density matrices:
//!
//! ```text
//! 𝓛 = −i (I ⊗ H − Hᵀ ⊗ I) + Σ_k [ J_k* ⊗ J_k − ½ I ⊗ J_k†J_k − ½ (J_k†J_k)ᵀ ⊗ I ]
//! ```

use crate::error::{Error, Result};
use crate::feshbach;
use crate::matcore::{self, c, gen_eig, hermitize, identity, kron, re, unvec, CMatrix, C64};
use crate::ode;
use crate::qstate::DensityOperator;

pub const DEFAULT_KAPPA1: f64 = 2.0;
/// Not printed directly; inferred from `Ω_2P ≈ √(0.0015 Ω₁ γ)` and `κ ≈ Ω_P²/γ`.
pub const DEFAULT_KAPPA2: f64 = 0.0015;

/// Step used by [`integrate_direct`].
pub const DIRECT_STEP: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub hamiltonian: CMatrix,
    /// Jump operators with the rates folded in (`√κ_k · A_k`).
    pub jumps: Vec<CMatrix>,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d || d == 0 {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        let residual = matcore::hermitian_residual(&hamiltonian);
        if residual > 1e-12 * hamiltonian.norm().max(1.0) {
            return Err(Error::NotHermitian { residual });
        }
        if jumps.iter().any(|j| j.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!("jump operators must be {d}x{d}")));
        }
        Ok(LindbladModel { hamiltonian, jumps })
    }

    /// Three-level case study: `H = ½(|0⟩⟨1| + 0.06 |0⟩⟨2| + h.c.)`,
    /// `J₁ = √κ₁ |0⟩⟨1|`, `J₂ = √κ₂ |0⟩⟨2|`.
    pub fn case_study(kappa1: f64, kappa2: f64) -> Result<Self> {
        Self::with_decay(feshbach::bare_hamiltonian(), kappa1, kappa2)
    }

    /// A qutrit Hamiltonian with the case-study decay channels `|1⟩, |2⟩ → |0⟩`.
    pub fn with_decay(hamiltonian: CMatrix, kappa1: f64, kappa2: f64) -> Result<Self> {
        if !(kappa1 >= 0.0) || !(kappa2 >= 0.0) {
            return Err(Error::Invalid(format!("decay rates must be nonnegative, got {kappa1}, {kappa2}")));
        }
        if hamiltonian.shape() != (3, 3) {
            return Err(Error::DimensionMismatch("decay channels need a 3x3 Hamiltonian".into()));
        }
        let lower = |k: usize, rate: f64| {
            let mut j = CMatrix::zeros(3, 3);
            j[(0, k)] = re(rate.sqrt());
            j
        };
        Self::new(hamiltonian, vec![lower(1, kappa1), lower(2, kappa2)])
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

/// Right-hand side of the master equation evaluated directly on ρ.
pub fn lindblad_rhs(model: &LindbladModel, rho: &CMatrix) -> CMatrix {
    let h = &model.hamiltonian;
    let mut out = (h * rho - rho * h) * c(0.0, -1.0);
    for j in &model.jumps {
        let jd = j.adjoint();
        let jdj = &jd * j;
        out += j * rho * &jd - (&jdj * rho + rho * &jdj) * re(0.5);
    }
    out
}

pub fn build_liouvillian(model: &LindbladModel) -> Result<CMatrix> {
    let d = model.dim();
    let eye = identity(d);
    let h = &model.hamiltonian;
    let mut l = (kron(&eye, h) - kron(&h.transpose(), &eye)) * c(0.0, -1.0);
    for j in &model.jumps {
        if j.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("jump operators must be {d}x{d}")));
        }
        let jdj = j.adjoint() * j;
        l += kron(&j.conjugate(), j) - (kron(&eye, &jdj) + kron(&jdj.transpose(), &eye)) * re(0.5);
    }
    Ok(l)
}

#[derive(Debug, Clone)]
pub struct LiouvillianSpectrum {
    pub matrix: CMatrix,
    /// Descending by real part; `eigenvalues[0]` is the stationary mode.
    pub eigenvalues: Vec<C64>,
    pub right_modes: Vec<CMatrix>,
    /// Stored so that `Tr(L̂_i R̂_j) = δ_ij`; `Tr(L̂_i ρ)` is the expansion
    /// coefficient of ρ on mode `i`.
    pub left_modes: Vec<CMatrix>,
    pub steady_state: DensityOperator,
    pub pairing_condition: f64,
}

impl LiouvillianSpectrum {
    pub fn dim(&self) -> usize {
        self.steady_state.dim()
    }

    /// `Tr(L̂_i ρ)` for every mode.
    pub fn coefficients(&self, rho: &CMatrix) -> Vec<C64> {
        self.left_modes.iter().map(|l| (l * rho).trace()).collect()
    }

    /// `−1/Re λ_i`, infinite for the stationary mode.
    pub fn decay_times(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| if l.re.abs() <= 1e-10 { f64::INFINITY } else { -1.0 / l.re })
            .collect()
    }
}

pub fn spectrum(model: &LindbladModel) -> Result<LiouvillianSpectrum> {
    let d = model.dim();
    let matrix = build_liouvillian(model)?;
    let eig = gen_eig(&matrix)?;
    let lambda0 = eig.eigenvalues[0];
    if lambda0.norm() > 1e-10 {
        return Err(Error::Invalid(format!("leading Liouvillian eigenvalue {lambda0} is not zero")));
    }
    if let Some(bad) = eig.eigenvalues.iter().find(|l| l.re > 1e-10) {
        return Err(Error::Invalid(format!("Liouvillian eigenvalue {bad} has positive real part")));
    }

    let mut right_modes = Vec::with_capacity(d * d);
    let mut left_modes = Vec::with_capacity(d * d);
    for k in 0..d * d {
        let r = unvec(&eig.right_vectors.column(k).into_owned(), d)?;
        let l = unvec(&eig.left_vectors.column(k).into_owned(), d)?.adjoint();
        right_modes.push(r);
        left_modes.push(l);
    }
    // scale the stationary mode to unit trace, keeping Tr(L̂₀R̂₀) = 1
    let tr0 = right_modes[0].trace();
    if tr0.norm() < 1e-12 {
        return Err(Error::Invalid("stationary mode has zero trace".into()));
    }
    right_modes[0] /= tr0;
    left_modes[0] *= tr0;
    let steady_state = DensityOperator::normalized(right_modes[0].clone())?;

    Ok(LiouvillianSpectrum {
        matrix,
        eigenvalues: eig.eigenvalues,
        right_modes,
        left_modes,
        steady_state,
        pairing_condition: eig.pairing_condition,
    })
}

fn finish(m: CMatrix) -> DensityOperator {
    let h = hermitize(&m);
    let tr = h.trace().re;
    DensityOperator::from_trusted(h / re(tr))
}

/// `ρ(t) = Σ_i Tr(L̂_i ρ_in) e^{λ_i t} R̂_i`.
pub fn propagate_modes(
    spec: &LiouvillianSpectrum,
    rho_in: &DensityOperator,
    times: &[f64],
) -> Result<Vec<DensityOperator>> {
    ode::check_times(times)?;
    if times[0] < 0.0 {
        return Err(Error::Invalid("times must be nonnegative".into()));
    }
    if rho_in.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("state and Liouvillian dimensions differ".into()));
    }
    let coeffs = spec.coefficients(rho_in.matrix());
    let d = spec.dim();
    Ok(times
        .iter()
        .map(|&t| {
            let mut m = CMatrix::zeros(d, d);
            for ((ci, li), ri) in coeffs.iter().zip(&spec.eigenvalues).zip(&spec.right_modes) {
                m += ri * (ci * (li * t).exp());
            }
            finish(m)
        })
        .collect())
}

/// Fixed-step RK4 integration of the master equation.
pub fn integrate_direct(
    model: &LindbladModel,
    rho_in: &DensityOperator,
    times: &[f64],
) -> Result<Vec<DensityOperator>> {
    integrate_direct_with_step(model, rho_in, times, DIRECT_STEP)
}

pub fn integrate_direct_with_step(
    model: &LindbladModel,
    rho_in: &DensityOperator,
    times: &[f64],
    dt: f64,
) -> Result<Vec<DensityOperator>> {
    if rho_in.dim() != model.dim() {
        return Err(Error::DimensionMismatch("state and model dimensions differ".into()));
    }
    let out = ode::rk4(|_, rho| Ok(lindblad_rhs(model, rho)), rho_in.matrix(), times, dt)?;
    Ok(out.into_iter().map(|m| DensityOperator::from_trusted(hermitize(&m))).collect())
}

/// `Φ_GKSL(ρ_in) = Tr(L̂₁ ρ_in)`.
pub fn mpemba_overlap(spec: &LiouvillianSpectrum, rho_in: &DensityOperator) -> Result<C64> {
    let l1 = spec
        .left_modes
        .get(1)
        .ok_or_else(|| Error::Invalid("spectrum has no decaying mode".into()))?;
    if rho_in.dim() != spec.dim() {
        return Err(Error::DimensionMismatch("state and Liouvillian dimensions differ".into()));
    }
    Ok((l1 * rho_in.matrix()).trace())
}
