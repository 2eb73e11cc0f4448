use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mpemba_cli::commands::{self, FitArgs, ModeName, SmeSearchArgs};
use mpemba_cli::config::{Framework, HamiltonianSpec, InitialSpec, RunConfig};
use mpemba_cli::error::CliError;
use mpemba_core::seaqt::RelaxationModel;

#[derive(Parser)]
#[command(name = "mpemba", version, about = "SEAQT and Lindblad relaxation of a driven qutrit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one initial state and write trajectory CSVs plus metadata.json.
    Simulate(RunArgs),
    /// Liouvillian eigenvalues, steady state and Mpemba overlaps.
    Spectrum(RunArgs),
    /// Fit model parameters to population time series.
    Fit(FitCli),
    /// Search for pure states orthogonal to the slowest Liouvillian mode.
    SmeSearch(SmeCli),
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameworkArg {
    Seaqt,
    Lindblad,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    framework: Option<FrameworkArg>,
    /// ket0, ket2, sme, or three amplitudes such as `0.8,0.176+0.283i,0.196-0.459i`.
    #[arg(long)]
    initial: Option<String>,
    /// Constant relaxation time.
    #[arg(long, conflicts_with = "logistic")]
    tau: Option<f64>,
    /// Logistic relaxation time `w3,w4,w5`.
    #[arg(long, value_parser = triple)]
    logistic: Option<[f64; 3]>,
    /// Effective Hamiltonian coefficients (both required).
    #[arg(long, requires = "w2")]
    w1: Option<f64>,
    #[arg(long, requires = "w1")]
    w2: Option<f64>,
    #[arg(long)]
    kappa1: Option<f64>,
    #[arg(long)]
    kappa2: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    regularization: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(f) = self.framework {
            cfg.framework = match f {
                FrameworkArg::Seaqt => Framework::Seaqt,
                FrameworkArg::Lindblad => Framework::Lindblad,
                FrameworkArg::Both => Framework::Both,
            };
        }
        if let Some(s) = &self.initial {
            cfg.initial = InitialSpec::parse(s)?;
        }
        if let Some(tau) = self.tau {
            cfg.relaxation = RelaxationModel::Constant { tau };
        }
        if let Some(w) = self.logistic {
            cfg.relaxation = RelaxationModel::Logistic { w3: w[0], w4: w[1], w5: w[2] };
        }
        if let (Some(w1), Some(w2)) = (self.w1, self.w2) {
            cfg.hamiltonian = HamiltonianSpec::Effective { w1, w2 };
        }
        if let Some(k) = self.kappa1 {
            cfg.rates.kappa1 = k;
        }
        if let Some(k) = self.kappa2 {
            cfg.rates.kappa2 = k;
        }
        if let Some(t) = self.t_max {
            cfg.t_max = t;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(r) = self.regularization {
            cfg.regularization = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitCli {
    /// JSON manifest binding CSV files to initial states.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Box bounds as `lo:hi` per parameter, comma separated.
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_generations: Option<usize>,
    /// Report file (default: fit_report.json next to the manifest).
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Three comma-separated numbers.
fn triple(text: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("cannot parse '{s}' as a number")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected three values, got {}", v.len()))
}

fn parse_bounds(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    text.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| CliError::validation(format!("bound '{pair}' must look like lo:hi")))?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| CliError::validation(format!("cannot parse bound '{s}'")))
            };
            Ok((parse(lo)?, parse(hi)?))
        })
        .collect()
}

#[derive(Args)]
struct SmeCli {
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Fix the populations `P0,P1,P2` and search phases only.
    #[arg(long, value_parser = triple)]
    populations: Option<[f64; 3]>,
    /// Also integrate every state under both frameworks.
    #[arg(long)]
    propagate: bool,
    #[arg(long, default_value_t = 60.0)]
    t_max: f64,
    #[arg(long, default_value_t = 121)]
    samples: usize,
    /// Constant SEAQT relaxation time for propagation.
    #[arg(long, default_value_t = 1.3176)]
    tau: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let out = commands::cmd_simulate(&a.resolve()?)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            if out.invariant_violations() > 0 {
                eprintln!("warning: {} invariant check(s) failed; see metadata.json", out.invariant_violations());
            }
        }
        Command::Spectrum(a) => {
            let cfg = a.resolve()?;
            let out = commands::cmd_spectrum(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out["eigenvalues"]).expect("JSON"));
            println!("{}", cfg.output_dir.join("spectrum.json").display());
        }
        Command::Fit(a) => {
            let output = a.output.clone().unwrap_or_else(|| {
                a.manifest.parent().unwrap_or(std::path::Path::new(".")).join("fit_report.json")
            });
            let args = FitArgs {
                manifest: a.manifest,
                mode: a.mode,
                bounds: a.bounds.as_deref().map(parse_bounds).transpose()?,
                seed: a.seed,
                max_generations: a.max_generations,
                output: Some(output.clone()),
            };
            let out = commands::cmd_fit(&args)?;
            for (name, v) in out.report.param_names.iter().zip(&out.report.best_params) {
                println!("{name} = {v:.10}");
            }
            println!("mse = {:.6e}", out.report.best_mse);
            println!("{}", output.display());
        }
        Command::SmeSearch(a) => {
            let args = SmeSearchArgs {
                count: a.count,
                seed: a.seed,
                output_dir: a.output_dir,
                target_populations: a.populations,
                propagate: a.propagate,
                t_max: a.t_max,
                samples: a.samples,
                relaxation: RelaxationModel::Constant { tau: a.tau },
            };
            let out = commands::cmd_sme_search(&args)?;
            for f in &out.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(n) = std::env::var("MPEMBA_THREADS") {
        match n.parse::<usize>() {
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("error: invalid input: MPEMBA_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
