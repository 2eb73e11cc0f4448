//! Population time-series fitting: the squared-error objective over
//! simulated populations, Differential Evolution search and a
//! Levenberg–Marquardt polish.

pub mod de;
pub mod lm;

use std::io::Read;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

pub use de::{differential_evolution, validate_bounds, DeConfig, DeResult, PENALTY};
pub use lm::{levenberg_marquardt, LmConfig, LmResult};

use crate::error::{Error, Result};
use crate::feshbach::{effective_hamiltonian, EffectiveParams};
use crate::lindblad::{self, LindbladModel};
use crate::ode::AdaptiveConfig;
use crate::qstate::{populations, DensityOperator};
use crate::seaqt::{self, RelaxationModel, SeaqtConfig, SeaqtModel};

/// Allowed deviation of a measured population row from unit sum.
pub const ROW_SUM_TOL: f64 = 0.05;

/// Populations `(P₀, P₁, P₂)` sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSeries {
    times: Vec<f64>,
    populations: Vec<[f64; 3]>,
    weights: Option<Vec<f64>>,
}

impl PopulationSeries {
    pub fn new(times: Vec<f64>, populations: Vec<[f64; 3]>, weights: Option<Vec<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Data("population series is empty".into()));
        }
        if times.len() != populations.len() {
            return Err(Error::Data(format!("{} times but {} population rows", times.len(), populations.len())));
        }
        if let Some(w) = &weights {
            if w.len() != times.len() {
                return Err(Error::Data(format!("{} weights for {} rows", w.len(), times.len())));
            }
            if let Some(k) = w.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::Data(format!("row {}: weight must be finite and nonnegative", k + 1)));
            }
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Data(format!("row {}: time must be finite and nonnegative", k + 1)));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::Data(format!("row {}: times must be strictly increasing", k + 1)));
            }
        }
        for (k, row) in populations.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite()) {
                return Err(Error::Data(format!("row {}: populations must be finite", k + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Data(format!("row {}: populations sum to {sum}, expected 1 ± {ROW_SUM_TOL}", k + 1)));
            }
        }
        Ok(PopulationSeries { times, populations, weights })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn populations(&self) -> &[[f64; 3]] {
        &self.populations
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[k])
    }

    /// Reads CSV with header `t,p0,p1,p2` and an optional `weight` column.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Data(format!("header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        let weighted = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["t", "p0", "p1", "p2"] => false,
            ["t", "p0", "p1", "p2", "weight"] => true,
            other => {
                return Err(Error::Data(format!("header must be t,p0,p1,p2[,weight], got {}", other.join(","))))
            }
        };
        let mut times = Vec::new();
        let mut pops = Vec::new();
        let mut weights = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let row = k + 1;
            let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
            if record.len() != header.len() {
                return Err(Error::Data(format!("row {row}: expected {} columns, found {}", header.len(), record.len())));
            }
            let mut vals = [0.0; 5];
            for (col, field) in record.iter().enumerate() {
                vals[col] = field.parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {row}, column {}: cannot parse '{field}' as a number", header[col]))
                })?;
            }
            times.push(vals[0]);
            pops.push([vals[1], vals[2], vals[3]]);
            if weighted {
                weights.push(vals[4]);
            }
        }
        Self::new(times, pops, weighted.then_some(weights))
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file).map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Which parameters are searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitMode {
    /// `(ω₁, ω₂, ω₃, ω₄, ω₅)` with the logistic relaxation time.
    Seaqt5,
    /// Constant τ_D with ω₁, ω₂ frozen.
    Seaqt3 { w1: f64, w2: f64 },
    /// `(κ₁, κ₂)` of the case-study master equation.
    LindbladRates,
}

impl FitMode {
    pub fn seaqt3_default() -> Self {
        FitMode::Seaqt3 { w1: 2.53, w2: 0.026 }
    }

    pub fn dim(&self) -> usize {
        match self {
            FitMode::Seaqt5 => 5,
            FitMode::Seaqt3 { .. } => 1,
            FitMode::LindbladRates => 2,
        }
    }

    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        match self {
            FitMode::Seaqt5 => vec![(0.5, 5.0), (0.0, 0.1), (-20.0, 20.0), (0.0, 50.0), (0.0, 100.0)],
            FitMode::Seaqt3 { .. } => vec![(0.1, 100.0)],
            FitMode::LindbladRates => vec![(0.0, 10.0), (0.0, 0.1)],
        }
    }

    /// Names of the reported parameters.
    pub fn param_names(&self) -> Vec<&'static str> {
        match self {
            FitMode::Seaqt5 => vec!["w1", "w2", "w3", "w4", "w5"],
            FitMode::Seaqt3 { .. } => vec!["w1", "w2", "tau_d"],
            FitMode::LindbladRates => vec!["kappa1", "kappa2"],
        }
    }

    /// Reported parameters from the searched ones.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            FitMode::Seaqt3 { w1, w2 } => vec![w1, w2, x[0]],
            _ => x.to_vec(),
        }
    }
}

/// One measured series and the initial state it starts from at t = 0.
#[derive(Debug, Clone)]
pub struct FitSeries {
    pub label: String,
    pub initial: DensityOperator,
    pub series: PopulationSeries,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub mode: FitMode,
    pub bounds: Vec<(f64, f64)>,
    pub data: Vec<FitSeries>,
    pub rng_seed: u64,
    pub de: DeConfig,
    pub polish: bool,
    pub seaqt: SeaqtConfig,
}

impl FitProblem {
    /// Default bounds, optimizer settings and integrator tolerances for `mode`.
    pub fn new(mode: FitMode, data: Vec<FitSeries>, rng_seed: u64) -> Self {
        let seaqt = SeaqtConfig { ode: AdaptiveConfig { max_steps: 100_000, ..Default::default() }, ..Default::default() };
        FitProblem {
            mode,
            bounds: mode.default_bounds(),
            data,
            rng_seed,
            de: DeConfig { target: Some(1e-8), ..Default::default() },
            polish: true,
            seaqt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_bounds(&self.bounds)?;
        if self.bounds.len() != self.mode.dim() {
            return Err(Error::Invalid(format!(
                "{} bounds given, the fit mode has {} free parameters",
                self.bounds.len(),
                self.mode.dim()
            )));
        }
        if self.data.is_empty() {
            return Err(Error::Invalid("fit needs at least one data series".into()));
        }
        if let Some(s) = self.data.iter().find(|s| s.initial.dim() != 3) {
            return Err(Error::Invalid(format!("series '{}' starts from a non-qutrit state", s.label)));
        }
        Ok(())
    }

    fn check_inside(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch(format!("{} parameters for {} bounds", x.len(), self.bounds.len())));
        }
        for (k, (&v, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::Invalid(format!("parameter {k} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

fn with_origin(times: &[f64]) -> (Vec<f64>, usize) {
    if times[0] > 0.0 {
        let mut t = Vec::with_capacity(times.len() + 1);
        t.push(0.0);
        t.extend_from_slice(times);
        (t, 1)
    } else {
        (times.to_vec(), 0)
    }
}

/// Simulated populations on every series' own time grid.
pub fn model_populations(problem: &FitProblem, x: &[f64]) -> Result<Vec<Vec<[f64; 3]>>> {
    problem.check_inside(x)?;
    let p = problem.mode.expand(x);
    let to_rows = |states: Vec<DensityOperator>, skip: usize| -> Vec<[f64; 3]> {
        states
            .iter()
            .skip(skip)
            .map(|s| {
                let v = populations(s);
                [v[0], v[1], v[2]]
            })
            .collect()
    };
    match problem.mode {
        FitMode::LindbladRates => {
            let spec = lindblad::spectrum(&LindbladModel::case_study(p[0], p[1])?)?;
            problem
                .data
                .iter()
                .map(|s| Ok(to_rows(lindblad::propagate_modes(&spec, &s.initial, s.series.times())?, 0)))
                .collect()
        }
        FitMode::Seaqt5 | FitMode::Seaqt3 { .. } => {
            let h = effective_hamiltonian(&EffectiveParams { w1: p[0], w2: p[1] })?;
            let relaxation = match problem.mode {
                FitMode::Seaqt5 => RelaxationModel::Logistic { w3: p[2], w4: p[3], w5: p[4] },
                _ => RelaxationModel::Constant { tau: p[2] },
            };
            let model = SeaqtModel::new(h, relaxation)?;
            problem
                .data
                .iter()
                .map(|s| {
                    let (times, skip) = with_origin(s.series.times());
                    let traj = seaqt::integrate_with(&model, &s.initial, &times, &problem.seaqt)?;
                    Ok(to_rows(traj.samples.into_iter().map(|x| x.state).collect(), skip))
                })
                .collect()
        }
    }
}

/// Weighted residuals `√w (P_model − P_data)`, series by series, row by row.
pub fn residuals(problem: &FitProblem, x: &[f64]) -> Result<Vec<f64>> {
    let model = model_populations(problem, x)?;
    let mut out = Vec::new();
    for (s, rows) in problem.data.iter().zip(model) {
        for (k, (m, d)) in rows.iter().zip(s.series.populations()).enumerate() {
            let w = s.series.weight(k).sqrt();
            for i in 0..3 {
                out.push(w * (m[i] - d[i]));
            }
        }
    }
    Ok(out)
}

pub fn try_mse(params: &[f64], problem: &FitProblem) -> Result<f64> {
    Ok(residuals(problem, params)?.iter().map(|r| r * r).sum())
}

/// Summed squared population error; simulation failures score [`PENALTY`].
pub fn mse(params: &[f64], problem: &FitProblem) -> f64 {
    match try_mse(params, problem) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => PENALTY,
        Err(e) => {
            warn!("simulation failed at {params:?}: {e}");
            PENALTY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResidual {
    pub label: String,
    pub samples: usize,
    pub mse: f64,
    /// Contribution of each population to `mse`.
    pub per_population: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub param_names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best_mse: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub population_trace: Vec<f64>,
    pub converged: bool,
    /// Whether the local polish improved on the Differential Evolution result.
    pub polished: bool,
    pub per_series: Vec<SeriesResidual>,
}

/// Weighted squared error of each population against `series`.
pub fn squared_error(model: &[[f64; 3]], series: &PopulationSeries) -> [f64; 3] {
    let mut per = [0.0; 3];
    for (k, (m, d)) in model.iter().zip(series.populations()).enumerate() {
        for i in 0..3 {
            per[i] += series.weight(k) * (m[i] - d[i]).powi(2);
        }
    }
    per
}

pub fn series_breakdown(problem: &FitProblem, x: &[f64]) -> Result<Vec<SeriesResidual>> {
    let model = model_populations(problem, x)?;
    Ok(problem
        .data
        .iter()
        .zip(model)
        .map(|(s, rows)| {
            let per = squared_error(&rows, &s.series);
            SeriesResidual { label: s.label.clone(), samples: rows.len(), mse: per.iter().sum(), per_population: per }
        })
        .collect())
}

pub fn fit(problem: &FitProblem) -> Result<FitReport> {
    problem.validate()?;
    let cfg = DeConfig { seed: problem.rng_seed, ..problem.de };
    let de = differential_evolution(|x| mse(x, problem), &problem.bounds, &cfg)?;
    let mut best = de.best.clone();
    let mut best_mse = de.best_score;
    let mut polished = false;
    let mut evaluations = de.evaluations;
    if problem.polish && best_mse < PENALTY {
        match levenberg_marquardt(|x| residuals(problem, x), &best, &problem.bounds, &LmConfig::default()) {
            Ok(lm) => {
                evaluations += lm.evaluations;
                if lm.cost < best_mse {
                    best = lm.x;
                    best_mse = lm.cost;
                    polished = true;
                }
            }
            Err(e) => warn!("local polish failed: {e}"),
        }
    }
    let per_series = series_breakdown(problem, &best).unwrap_or_default();
    Ok(FitReport {
        param_names: problem.mode.param_names().into_iter().map(String::from).collect(),
        best_params: problem.mode.expand(&best),
        best_mse,
        generations: de.generations,
        evaluations,
        population_trace: de.trace,
        converged: de.converged,
        polished,
        per_series,
    })
}
