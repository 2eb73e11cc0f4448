//! Shared fixtures for the acceptance suite: the case-study models, the
//! published fit parameters used as planted truths, and random states.

use rand::Rng;
use rand_distr::StandardNormal;

use mpemba_core::feshbach::{effective_hamiltonian, EffectiveParams};
use mpemba_core::lindblad::{self, LindbladModel, LiouvillianSpectrum, DEFAULT_KAPPA1, DEFAULT_KAPPA2};
use mpemba_core::matcore::{c, CMatrix};
use mpemba_core::qstate::DensityOperator;
use mpemba_core::seaqt::RelaxationModel;
use mpemba_core::states::TableState;

pub const W1: f64 = 2.53;
pub const W2: f64 = 0.026;

/// Constant relaxation times fitted per initial state.
pub const CONSTANT_TAU: [(TableState, f64); 3] =
    [(TableState::Ket0, 16.0783), (TableState::Ket2, 14.366), (TableState::Sme, 1.3176)];

/// Logistic relaxation fitted for the sME state, the only row with a positive amplitude.
pub const SME_LOGISTIC: RelaxationModel = RelaxationModel::Logistic { w3: 5.7664, w4: 25.4405, w5: 0.9094 };

pub fn effective() -> CMatrix {
    effective_hamiltonian(&EffectiveParams { w1: W1, w2: W2 }).expect("valid coefficients")
}

pub fn case_model() -> LindbladModel {
    LindbladModel::case_study(DEFAULT_KAPPA1, DEFAULT_KAPPA2).expect("valid rates")
}

pub fn case_spectrum() -> LiouvillianSpectrum {
    lindblad::spectrum(&case_model()).expect("case-study spectrum")
}

/// Ginibre-distributed density operator of the given rank.
pub fn random_density<R: Rng>(rng: &mut R, d: usize, rank: usize) -> DensityOperator {
    let g = CMatrix::from_fn(d, rank, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    DensityOperator::normalized(&g * g.adjoint()).expect("nonzero Ginibre sample")
}

/// Evenly spaced sample times on `[0, t_max]`.
pub fn grid(t_max: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|k| t_max * k as f64 / (samples - 1) as f64).collect()
}

/// Relative difference, guarded against a zero reference.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rank in 1..=3 {
            let rho = random_density(&mut rng, 3, rank);
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            assert!(rho.eig().unwrap().min() > -1e-12);
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = grid(20.0, 41);
        assert_eq!(g.len(), 41);
        assert_eq!(g[40], 20.0);
        assert_eq!(g[2], 1.0);
    }
}
