//! The four subcommands as library functions. Each writes its files and
//! also returns what it wrote, so tests can inspect results directly.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Deserialize;
use serde_json::{json, Value};

use mpemba_core::fitkit::{self, FitMode, FitProblem, FitReport, FitSeries, PopulationSeries};
use mpemba_core::lindblad::{self, LindbladModel, LiouvillianSpectrum};
use mpemba_core::matcore::{herm_eig, hermitian_residual, CMatrix, C64};
use mpemba_core::qstate::{hs_distance, populations, DensityOperator};
use mpemba_core::seaqt::{self, RelaxationModel, SeaqtConfig, SeaqtModel, SeaqtTrajectory};
use mpemba_core::states::{self, SmeConstraints, SmeResult, TableState};

use crate::config::{InitialSpec, RunConfig, DEFAULT_W1, DEFAULT_W2};
use crate::error::CliError;
use crate::output::{rows_for, trajectory_csv, write_file, write_json, TrajectoryRow, TRAJECTORY_HEADER};

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub files: Vec<PathBuf>,
    pub metadata: Value,
    pub seaqt: Option<Vec<TrajectoryRow>>,
    pub lindblad: Option<Vec<TrajectoryRow>>,
}

impl SimulateOutput {
    pub fn invariant_violations(&self) -> u64 {
        self.metadata["invariant_violations"].as_u64().unwrap_or(0)
    }
}

fn seaqt_metadata(traj: &SeaqtTrajectory, file: &str) -> Value {
    let s = &traj.stats;
    let r = &traj.report;
    json!({
        "file": file,
        "regularized": traj.regularized,
        "regularization": traj.regularization,
        "integrator": {
            "method": "dormand_prince_5_4",
            "accepted_steps": s.accepted,
            "rejected_steps": s.rejected,
            "rhs_evaluations": s.rhs_evals,
            "min_step": s.min_step,
            "max_step": s.max_step,
        },
        "invariants": {
            "max_trace_drift": r.max_trace_drift,
            "max_energy_drift": r.max_energy_drift,
            "min_eigenvalue": r.min_eigenvalue,
            "entropy_monotonicity_violations": r.entropy_violations,
            "negative_tau_samples": r.negative_tau_samples,
        },
        "invariant_violations": r.violations(),
    })
}

/// Trace drift, Hermiticity and positivity of a Lindblad trajectory.
fn lindblad_invariants(states: &[DensityOperator]) -> Result<(Value, usize), CliError> {
    let mut trace = 0.0f64;
    let mut herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for s in states {
        trace = trace.max((s.matrix().trace().re - 1.0).abs());
        herm = herm.max(hermitian_residual(s.matrix()));
        min_eig = min_eig.min(herm_eig(s.matrix())?.min());
    }
    let violations = (trace > 1e-9) as usize + (herm > 1e-9) as usize + (min_eig < -1e-8) as usize;
    Ok((
        json!({
            "max_trace_drift": trace,
            "max_hermitian_residual": herm,
            "min_eigenvalue": min_eig,
        }),
        violations,
    ))
}

pub fn run_seaqt(
    cfg: &RunConfig,
    initial: &DensityOperator,
    times: &[f64],
) -> Result<(SeaqtTrajectory, Vec<TrajectoryRow>), CliError> {
    let h = cfg.seaqt_hamiltonian()?;
    let model = SeaqtModel::new(h.clone(), cfg.relaxation)?;
    let sc = SeaqtConfig { regularization: cfg.regularization, ..Default::default() };
    let traj = seaqt::integrate_with(&model, initial, times, &sc)?;
    let states: Vec<DensityOperator> = traj.states().cloned().collect();
    let taus: Vec<f64> = traj.samples.iter().map(|s| s.tau).collect();
    let rows = rows_for(times, &states, &h, |k| taus[k])?;
    Ok((traj, rows))
}

pub fn lindblad_model(cfg: &RunConfig) -> Result<LindbladModel, CliError> {
    Ok(LindbladModel::with_decay(cfg.lindblad_hamiltonian()?, cfg.rates.kappa1, cfg.rates.kappa2)?)
}

pub fn run_lindblad(
    spec: &LiouvillianSpectrum,
    hamiltonian: &CMatrix,
    initial: &DensityOperator,
    times: &[f64],
) -> Result<(Vec<DensityOperator>, Vec<TrajectoryRow>), CliError> {
    let states = lindblad::propagate_modes(spec, initial, times)?;
    let rows = rows_for(times, &states, hamiltonian, |_| f64::NAN)?;
    Ok((states, rows))
}

/// Integrates the configured model(s), writing `trajectory_<framework>.csv`
/// and `metadata.json` into the output directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    cfg.validate()?;
    let initial = cfg.initial.state()?;
    let times = cfg.times();
    let mut files = Vec::new();
    let mut violations = 0usize;
    let mut meta = json!({
        "tool": "mpemba",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "simulate",
        "config": cfg,
        "columns": TRAJECTORY_HEADER.split(',').collect::<Vec<_>>(),
    });

    let mut seaqt_rows = None;
    if cfg.framework.runs_seaqt() {
        let (traj, rows) = run_seaqt(cfg, &initial, &times)?;
        let path = cfg.output_dir.join("trajectory_seaqt.csv");
        write_file(&path, &trajectory_csv(&rows))?;
        violations += traj.report.violations();
        if traj.report.violations() > 0 {
            warn!("SEAQT run violated {} invariant check(s)", traj.report.violations());
        }
        meta["seaqt"] = seaqt_metadata(&traj, "trajectory_seaqt.csv");
        files.push(path);
        seaqt_rows = Some(rows);
    }

    let mut lindblad_rows = None;
    if cfg.framework.runs_lindblad() {
        let spec = lindblad::spectrum(&lindblad_model(cfg)?)?;
        let h = cfg.lindblad_hamiltonian()?;
        let (states, rows) = run_lindblad(&spec, &h, &initial, &times)?;
        let path = cfg.output_dir.join("trajectory_lindblad.csv");
        write_file(&path, &trajectory_csv(&rows))?;
        let (inv, n) = lindblad_invariants(&states)?;
        violations += n;
        meta["lindblad"] = json!({
            "file": "trajectory_lindblad.csv",
            "method": "liouvillian_eigenmode_expansion",
            "pairing_condition": spec.pairing_condition,
            "mpemba_overlap": complex_json(lindblad::mpemba_overlap(&spec, &initial)?),
            "invariants": inv,
            "invariant_violations": n,
        });
        files.push(path);
        lindblad_rows = Some(rows);
    }

    meta["invariant_violations"] = json!(violations);
    let meta_path = cfg.output_dir.join("metadata.json");
    write_json(&meta_path, &meta)?;
    files.push(meta_path);
    info!("wrote {} file(s) to {}", files.len(), cfg.output_dir.display());
    Ok(SimulateOutput { files, metadata: meta, seaqt: seaqt_rows, lindblad: lindblad_rows })
}

/// Liouvillian eigenvalues, decay times, steady state and Mpemba overlaps,
/// written to `spectrum.json`.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Value, CliError> {
    cfg.validate()?;
    let spec = lindblad::spectrum(&lindblad_model(cfg)?)?;
    let mut overlaps = serde_json::Map::new();
    for row in TableState::ALL {
        let o = lindblad::mpemba_overlap(&spec, &states::table1_state(row))?;
        overlaps.insert(row.label().into(), json!({ "value": complex_json(o), "abs": o.norm() }));
    }
    if !matches!(cfg.initial, InitialSpec::Label(_)) {
        let o = lindblad::mpemba_overlap(&spec, &cfg.initial.state()?)?;
        overlaps.insert("initial".into(), json!({ "value": complex_json(o), "abs": o.norm() }));
    }
    let decay: Vec<Value> =
        spec.decay_times().into_iter().map(|t| if t.is_finite() { json!(t) } else { Value::Null }).collect();
    let out = json!({
        "tool": "mpemba",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "spectrum",
        "rates": cfg.rates,
        "eigenvalues": spec.eigenvalues.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "decay_times": decay,
        "steady_state": matrix_json(spec.steady_state.matrix()),
        "pairing_condition": spec.pairing_condition,
        "overlaps": Value::Object(overlaps),
    });
    write_json(&cfg.output_dir.join("spectrum.json"), &out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Seaqt5,
    Seaqt3,
    LindbladRates,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSeries {
    label: String,
    file: PathBuf,
    /// Defaults to the reference state named by `label`.
    #[serde(default)]
    initial: Option<InitialSpec>,
}

/// Binds data files to initial states for `fit`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    mode: ModeName,
    #[serde(default)]
    w1: Option<f64>,
    #[serde(default)]
    w2: Option<f64>,
    #[serde(default)]
    bounds: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    max_generations: Option<usize>,
    series: Vec<ManifestSeries>,
}

#[derive(Debug, Clone, Default)]
pub struct FitArgs {
    pub manifest: PathBuf,
    pub mode: Option<ModeName>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub seed: Option<u64>,
    pub max_generations: Option<usize>,
    /// Report path; nothing is written when absent.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: FitReport,
    pub json: Value,
}

/// Builds the fit problem described by a manifest, with overrides applied.
pub fn load_fit_problem(args: &FitArgs) -> Result<FitProblem, CliError> {
    let text = std::fs::read_to_string(&args.manifest).map_err(|e| CliError::io(&args.manifest, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", args.manifest.display())))?;
    if m.schema_version != crate::config::SCHEMA_VERSION {
        return Err(CliError::validation(format!("manifest schema_version {} is not supported", m.schema_version)));
    }
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let mode = match args.mode.unwrap_or(m.mode) {
        ModeName::Seaqt5 => FitMode::Seaqt5,
        ModeName::Seaqt3 => FitMode::Seaqt3 { w1: m.w1.unwrap_or(DEFAULT_W1), w2: m.w2.unwrap_or(DEFAULT_W2) },
        ModeName::LindbladRates => FitMode::LindbladRates,
    };
    let mut data = Vec::with_capacity(m.series.len());
    for s in &m.series {
        let initial = match &s.initial {
            Some(spec) => spec.state()?,
            None => states::table1_state(s.label.parse::<TableState>()?),
        };
        let series = PopulationSeries::from_csv_path(&base.join(&s.file))?;
        data.push(FitSeries { label: s.label.clone(), initial, series });
    }
    let seed = args.seed.or(m.seed).unwrap_or(0);
    let mut problem = FitProblem::new(mode, data, seed);
    if let Some(b) = args.bounds.clone().or_else(|| m.bounds.map(|v| v.iter().map(|p| (p[0], p[1])).collect())) {
        problem.bounds = b;
    }
    if let Some(g) = args.max_generations.or(m.max_generations) {
        problem.de.max_generations = g;
    }
    problem.validate()?;
    Ok(problem)
}

pub fn fit_report_json(problem: &FitProblem, report: &FitReport) -> Value {
    let named: serde_json::Map<String, Value> =
        report.param_names.iter().cloned().zip(report.best_params.iter().map(|&v| json!(v))).collect();
    json!({
        "tool": "mpemba",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "fit",
        "mode": problem.mode,
        "seed": problem.rng_seed,
        "bounds": problem.bounds,
        "params": Value::Object(named),
        "best_params": report.best_params,
        "best_mse": report.best_mse,
        "generations": report.generations,
        "evaluations": report.evaluations,
        "converged": report.converged,
        "polished": report.polished,
        "per_series": report.per_series,
        "population_trace": report.population_trace,
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitOutcome, CliError> {
    let problem = load_fit_problem(args)?;
    let report = fitkit::fit(&problem)?;
    let json = fit_report_json(&problem, &report);
    if let Some(path) = &args.output {
        write_json(path, &json)?;
    }
    Ok(FitOutcome { report, json })
}

#[derive(Debug, Clone)]
pub struct SmeSearchArgs {
    pub count: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub target_populations: Option<[f64; 3]>,
    /// Also write Lindblad and SEAQT trajectories of every member.
    pub propagate: bool,
    pub t_max: f64,
    pub samples: usize,
    /// Relaxation model for the SEAQT propagation.
    pub relaxation: RelaxationModel,
}

impl Default for SmeSearchArgs {
    fn default() -> Self {
        SmeSearchArgs {
            count: 1,
            seed: 0,
            output_dir: PathBuf::from("out"),
            target_populations: None,
            propagate: false,
            t_max: 60.0,
            samples: 121,
            relaxation: RelaxationModel::Constant { tau: 1.3176 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmeSearchOutput {
    pub results: Vec<SmeResult>,
    pub json: Value,
    pub files: Vec<PathBuf>,
}

pub fn cmd_sme_search(args: &SmeSearchArgs) -> Result<SmeSearchOutput, CliError> {
    if args.count == 0 {
        return Err(CliError::validation("count must be at least 1"));
    }
    let base = RunConfig {
        t_max: args.t_max,
        samples: args.samples,
        relaxation: args.relaxation,
        output_dir: args.output_dir.clone(),
        ..Default::default()
    };
    if args.propagate {
        base.validate()?;
    }
    let spec = lindblad::spectrum(&lindblad_model(&base)?)?;
    let constraints = SmeConstraints { target_populations: args.target_populations, ..Default::default() };
    let results = states::random_sme_ensemble(&spec, &constraints, args.count, args.seed)?;

    let h_seaqt = base.seaqt_hamiltonian()?;
    let h_lindblad = base.lindblad_hamiltonian()?;
    let times = base.times();
    let mut files = Vec::new();
    let mut entries = Vec::with_capacity(results.len());
    for (k, r) in results.iter().enumerate() {
        let mut entry = json!({
            "index": k,
            "amplitudes": r.amplitudes.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
            "populations": populations(&r.state),
            "overlap": complex_json(r.overlap),
            "overlap_abs": r.overlap.norm(),
            "residuals": r.residuals,
            "energy": r.state.expect(&h_seaqt),
        });
        if args.propagate {
            let (ld_states, ld_rows) = run_lindblad(&spec, &h_lindblad, &r.state, &times)?;
            let ld_name = format!("sme_{k:03}_lindblad.csv");
            write_file(&args.output_dir.join(&ld_name), &trajectory_csv(&ld_rows))?;
            let (traj, sq_rows) = run_seaqt(&base, &r.state, &times)?;
            let sq_name = format!("sme_{k:03}_seaqt.csv");
            write_file(&args.output_dir.join(&sq_name), &trajectory_csv(&sq_rows))?;
            let last = &traj.last().state;
            let gibbs = seaqt::equilibrium_state(&h_seaqt, last.expect(&h_seaqt))?;
            entry["lindblad"] = json!({
                "file": ld_name,
                "final_distance_to_steady_state": hs_distance(ld_states.last().expect("samples"), &spec.steady_state)?,
            });
            entry["seaqt"] = json!({
                "file": sq_name,
                "beta_eq": gibbs.beta_eq,
                "final_distance_to_gibbs": hs_distance(last, &gibbs.state)?,
                "invariant_violations": traj.report.violations(),
            });
            files.push(args.output_dir.join(ld_name));
            files.push(args.output_dir.join(sq_name));
        }
        entries.push(entry);
    }
    let json = json!({
        "tool": "mpemba",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "sme-search",
        "count": args.count,
        "seed": args.seed,
        "overlap_tolerance": constraints.overlap_tolerance,
        "steady_state": matrix_json(spec.steady_state.matrix()),
        "states": entries,
    });
    let path = args.output_dir.join("ensemble.json");
    write_json(&path, &json)?;
    files.push(path);
    Ok(SmeSearchOutput { results, json, files })
}
