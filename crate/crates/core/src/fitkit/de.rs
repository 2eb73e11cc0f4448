//! Bound-constrained Differential Evolution, rand/1/bin with deferred updates.
//!
//! Every trial vector draws from its own ChaCha stream keyed by
//! `(generation, index)`, and a generation's trials are scored together
//! before selection, so results do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score substituted for failed or non-finite objective evaluations.
pub const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    /// Defaults to 15 × dimension.
    pub population_size: Option<usize>,
    pub mutation: f64,
    pub crossover: f64,
    pub max_generations: usize,
    /// Relative spread of the population scores that counts as converged.
    pub tolerance: f64,
    /// Absolute spread added to the relative criterion.
    pub atol: f64,
    pub seed: u64,
    /// Stop as soon as the best score reaches this value.
    pub target: Option<f64>,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population_size: None,
            mutation: 0.7,
            crossover: 0.9,
            max_generations: 1000,
            tolerance: 1e-8,
            atol: 0.0,
            seed: 0,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_score: f64,
    pub generations: usize,
    pub evaluations: usize,
    /// Best score after initialization and after each generation.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::Invalid("no parameters to optimize: bounds are empty".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
            return Err(Error::Invalid(format!("bound {k} must be finite with low < high, got ({lo}, {hi})")));
        }
    }
    Ok(())
}

fn score<F: Fn(&[f64]) -> f64 + Sync>(objective: &F, xs: &[Vec<f64>]) -> Vec<f64> {
    xs.par_iter()
        .map(|x| {
            let v = objective(x);
            if v.is_finite() {
                v
            } else {
                PENALTY
            }
        })
        .collect()
}

fn spread(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// Minimizes `objective` over the box `bounds`.
pub fn differential_evolution<F>(objective: F, bounds: &[(f64, f64)], cfg: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate_bounds(bounds)?;
    let dim = bounds.len();
    let np = cfg.population_size.unwrap_or(15 * dim);
    if np < 4 {
        return Err(Error::Invalid(format!("population size must be at least 4, got {np}")));
    }
    if !(cfg.mutation > 0.0 && cfg.mutation <= 2.0) || !(0.0..=1.0).contains(&cfg.crossover) {
        return Err(Error::Invalid("mutation must lie in (0, 2] and crossover in [0, 1]".into()));
    }

    // Latin hypercube start
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = vec![vec![0.0; dim]; np];
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..np).collect();
        for i in (1..np).rev() {
            strata.swap(i, rng.gen_range(0..=i));
        }
        for (i, member) in pop.iter_mut().enumerate() {
            let u = (strata[i] as f64 + rng.gen::<f64>()) / np as f64;
            member[k] = lo + u * (hi - lo);
        }
    }
    let mut scores = score(&objective, &pop);
    let mut evaluations = np;
    let mut best = argmin(&scores);
    let mut trace = vec![scores[best]];

    let reached = |s: f64| cfg.target.is_some_and(|t| s <= t);
    let settled = |scores: &[f64]| {
        let (mean, sd) = spread(scores);
        sd <= cfg.atol + cfg.tolerance * mean.abs()
    };
    let mut converged = reached(scores[best]) || settled(&scores);
    let mut generations = 0;

    while !converged && generations < cfg.max_generations {
        let gen = generations as u64;
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(1 + gen * np as u64 + i as u64);
                let mut pick = [0usize; 3];
                for slot in 0..3 {
                    pick[slot] = loop {
                        let c = r.gen_range(0..np);
                        if c != i && !pick[..slot].contains(&c) {
                            break c;
                        }
                    };
                }
                let [a, b, c] = pick;
                let forced = r.gen_range(0..dim);
                let mut trial = pop[i].clone();
                for k in 0..dim {
                    if k == forced || r.gen::<f64>() < cfg.crossover {
                        let v = pop[a][k] + cfg.mutation * (pop[b][k] - pop[c][k]);
                        let (lo, hi) = bounds[k];
                        trial[k] = if v < lo || v > hi { lo + r.gen::<f64>() * (hi - lo) } else { v };
                    }
                }
                trial
            })
            .collect();
        let trial_scores = score(&objective, &trials);
        evaluations += np;
        for (i, (trial, s)) in trials.into_iter().zip(trial_scores).enumerate() {
            if s <= scores[i] {
                pop[i] = trial;
                scores[i] = s;
            }
        }
        best = argmin(&scores);
        trace.push(scores[best]);
        generations += 1;
        converged = reached(scores[best]) || settled(&scores);
    }

    Ok(DeResult {
        best: pop[best].clone(),
        best_score: scores[best],
        generations,
        evaluations,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
    }

    #[test]
    fn sphere_minimum() {
        let cfg = DeConfig { seed: 7, ..Default::default() };
        let r = differential_evolution(sphere, &[(-5.0, 5.0); 3], &cfg).unwrap();
        assert!(r.best.iter().all(|v| v.abs() < 1e-6), "{:?}", r.best);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rastrigin_success_rate() {
        let hits = (0..50)
            .filter(|&seed| {
                let cfg = DeConfig { seed, ..Default::default() };
                let r = differential_evolution(rastrigin, &[(-5.12, 5.12); 2], &cfg).unwrap();
                r.best_score < 1e-6
            })
            .count();
        assert!(hits >= 40, "{hits}/50 seeds reached the global minimum");
    }

    #[test]
    fn deterministic_and_budgeted() {
        let cfg = DeConfig { seed: 3, max_generations: 5, ..Default::default() };
        let a = differential_evolution(rastrigin, &[(-5.12, 5.12); 2], &cfg).unwrap();
        let b = differential_evolution(rastrigin, &[(-5.12, 5.12); 2], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.converged && a.generations == 5);
        assert_eq!(a.trace.len(), 6);
    }

    #[test]
    fn target_stops_early() {
        let cfg = DeConfig { seed: 1, target: Some(1e-2), ..Default::default() };
        let r = differential_evolution(sphere, &[(-5.0, 5.0); 2], &cfg).unwrap();
        assert!(r.converged && r.best_score <= 1e-2 && r.generations < 100);
    }

    #[test]
    fn rejects_bad_setup() {
        assert!(differential_evolution(sphere, &[], &DeConfig::default()).is_err());
        assert!(differential_evolution(sphere, &[(1.0, 1.0)], &DeConfig::default()).is_err());
        let tiny = DeConfig { population_size: Some(3), ..Default::default() };
        assert!(differential_evolution(sphere, &[(0.0, 1.0)], &tiny).is_err());
    }

    #[test]
    fn failures_are_penalized() {
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0] * x[0] };
        let cfg = DeConfig { seed: 2, max_generations: 50, ..Default::default() };
        let r = differential_evolution(f, &[(-1.0, 1.0)], &cfg).unwrap();
        assert!(r.best_score < 1e-4 && r.best[0] <= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn argmin_invariant_under_scaling(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let cfg = DeConfig { seed, max_generations: 30, ..Default::default() };
            let a = differential_evolution(rastrigin, &[(-5.12, 5.12); 2], &cfg).unwrap();
            let b = differential_evolution(|x: &[f64]| scale * rastrigin(x), &[(-5.12, 5.12); 2], &cfg).unwrap();
            prop_assert_eq!(a.best, b.best);
        }
    }
}
