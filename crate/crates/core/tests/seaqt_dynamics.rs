use proptest::prelude::*;

use mpemba_core::feshbach::{effective_hamiltonian, EffectiveParams};
use mpemba_core::matcore::{c, frob, identity, CMatrix};
use mpemba_core::ode::AdaptiveConfig;
use mpemba_core::qstate::{hs_distance, DensityOperator};
use mpemba_core::seaqt::{
    self, dissipation_operator, dissipation_operator_gram, equilibrium_state, gibbs_state, observables,
    RelaxationModel, SeaqtConfig, SeaqtModel,
};
use mpemba_core::states::{table1_state, TableState};

fn ginibre(parts: &[f64]) -> DensityOperator {
    let g = CMatrix::from_fn(3, 3, |i, j| c(parts[2 * (3 * i + j)], parts[2 * (3 * i + j) + 1]));
    // a small identity shift keeps the sample away from the rank boundary
    let m = &g * g.adjoint() + identity(3) * c(1e-3, 0.0);
    DensityOperator::normalized(m).unwrap()
}

fn hermitian(parts: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(3, 3);
    let mut k = 0;
    for i in 0..3 {
        h[(i, i)] = c(parts[k], 0.0);
        k += 1;
        for j in i + 1..3 {
            h[(i, j)] = c(parts[k], parts[k + 1]);
            h[(j, i)] = h[(i, j)].conj();
            k += 2;
        }
    }
    h
}

fn times(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectories_conserve_energy_and_raise_entropy(
        s in proptest::collection::vec(-1.0f64..1.0, 18),
        hp in proptest::collection::vec(-2.0f64..2.0, 9),
        tau in 0.5f64..20.0,
    ) {
        let rho = ginibre(&s);
        let h = hermitian(&hp);
        let model = SeaqtModel::new(h.clone(), RelaxationModel::Constant { tau }).unwrap();
        let traj = seaqt::integrate(&model, &rho, &times(10.0, 41)).unwrap();
        prop_assert_eq!(traj.report.violations(), 0, "{:?}", traj.report);
        let e0 = traj.samples[0].observables.energy;
        for w in traj.samples.windows(2) {
            prop_assert!(w[1].observables.entropy >= w[0].observables.entropy - 1e-9);
        }
        for smp in &traj.samples {
            let o = smp.observables;
            prop_assert!((o.energy - e0).abs() <= 1e-6);
            prop_assert!((smp.state.matrix().trace().re - 1.0).abs() <= 1e-9);
            let chain = o.beta * o.beta * o.sigma_ff - (o.sigma_ss - o.beta * o.beta * o.sigma_hh);
            prop_assert!(chain.abs() <= 1e-8, "chain residual {chain}");
        }
    }

    #[test]
    fn gibbs_states_saturate_cauchy_schwarz_and_stay_put(
        hp in proptest::collection::vec(-2.0f64..2.0, 9),
        beta in -1.5f64..1.5,
    ) {
        let h = hermitian(&hp);
        let g = gibbs_state(&h, beta).unwrap().state;
        let o = observables(&g, &h).unwrap();
        let gap = o.sigma_hs * o.sigma_hs - o.sigma_hh * o.sigma_ss;
        prop_assert!(gap.abs() <= 1e-8 * (o.sigma_hh * o.sigma_ss).max(1.0), "gap {gap}");

        let model = SeaqtModel::new(h, RelaxationModel::Constant { tau: 1.0 }).unwrap();
        let traj = seaqt::integrate(&model, &g, &times(5.0, 6)).unwrap();
        prop_assert!(hs_distance(&traj.last().state, &g).unwrap() <= 1e-9);
    }

    #[test]
    fn determinant_form_matches_anticommutator_form(
        s in proptest::collection::vec(-1.0f64..1.0, 18),
        hp in proptest::collection::vec(-2.0f64..2.0, 9),
    ) {
        let rho = ginibre(&s);
        let h = hermitian(&hp);
        let a = dissipation_operator(&rho, &h).unwrap();
        let b = dissipation_operator_gram(&rho, &h).unwrap();
        prop_assert!(frob(&(a - b)) <= 1e-8);
    }
}

#[test]
fn tolerance_halving_moves_the_state_by_less_than_1e7() {
    let h = effective_hamiltonian(&EffectiveParams { w1: 2.53, w2: 0.026 }).unwrap();
    let model = SeaqtModel::new(h, RelaxationModel::Constant { tau: 16.0783 }).unwrap();
    let grid = times(40.0, 81);
    for row in [TableState::Ket0, TableState::Ket2, TableState::Sme] {
        let rho = table1_state(row);
        let coarse = seaqt::integrate(&model, &rho, &grid).unwrap();
        let fine_cfg = SeaqtConfig {
            ode: AdaptiveConfig { rtol: 5e-9, atol: 5e-11, ..AdaptiveConfig::default() },
            ..SeaqtConfig::default()
        };
        let fine = seaqt::integrate_with(&model, &rho, &grid, &fine_cfg).unwrap();
        for (a, b) in coarse.states().zip(fine.states()) {
            let d = hs_distance(a, b).unwrap();
            assert!(d <= 1e-7, "{row:?}: {d}");
        }
    }
}

#[test]
fn full_rank_states_relax_to_the_gibbs_state_at_their_energy() {
    let h = effective_hamiltonian(&EffectiveParams { w1: 2.53, w2: 0.026 }).unwrap();
    let model = SeaqtModel::new(h.clone(), RelaxationModel::Constant { tau: 1.0 }).unwrap();
    let parts: Vec<f64> = (0..18).map(|k| ((k * 37 % 17) as f64 / 8.5) - 1.0).collect();
    let rho = ginibre(&parts);
    let traj = seaqt::integrate(&model, &rho, &times(300.0, 31)).unwrap();
    let target = equilibrium_state(&h, traj.samples[0].observables.energy).unwrap();
    let d = hs_distance(&traj.last().state, &target.state).unwrap();
    assert!(d <= 1e-4, "{d}");
    assert!((traj.last().observables.beta - target.beta_eq).abs() < 1e-3);
}

#[test]
fn negative_relaxation_time_is_integrated_without_monotonicity() {
    let h = effective_hamiltonian(&EffectiveParams { w1: 2.53, w2: 0.026 }).unwrap();
    let model = SeaqtModel::new(h, RelaxationModel::Logistic { w3: -2.0, w4: 0.0, w5: 1.0 }).unwrap();
    let rho = table1_state(TableState::Ket2).mixed_with_identity(0.3);
    let traj = seaqt::integrate(&model, &rho, &times(1.0, 11)).unwrap();
    assert_eq!(traj.report.negative_tau_samples, traj.samples.len());
    assert_eq!(traj.report.entropy_violations, 0);
    assert!(traj.last().observables.entropy < traj.samples[0].observables.entropy);
}
