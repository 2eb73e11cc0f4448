//! Run configuration: JSON file with a schema version, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mpemba_core::feshbach::{self, EffectiveParams};
use mpemba_core::lindblad::{DEFAULT_KAPPA1, DEFAULT_KAPPA2};
use mpemba_core::matcore::{c, CMatrix};
use mpemba_core::qstate::{from_pure, DensityOperator, PureStateSpec};
use mpemba_core::seaqt::{RelaxationModel, DEFAULT_REGULARIZATION};
use mpemba_core::states::{table1_state, TableState};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Effective-Hamiltonian coefficients used when none are configured.
pub const DEFAULT_W1: f64 = 2.53;
pub const DEFAULT_W2: f64 = 0.026;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Seaqt,
    Lindblad,
    Both,
}

impl Framework {
    pub fn runs_seaqt(&self) -> bool {
        matches!(self, Framework::Seaqt | Framework::Both)
    }

    pub fn runs_lindblad(&self) -> bool {
        matches!(self, Framework::Lindblad | Framework::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    /// `H_eff(w1, w2)` for both frameworks.
    Effective { w1: f64, w2: f64 },
    /// `H_eff(2.53, 0.026)` for SEAQT and the bare drive for Lindblad.
    CaseStudyDefaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates { kappa1: DEFAULT_KAPPA1, kappa2: DEFAULT_KAPPA2 }
    }
}

/// A reference state label, real amplitudes, or complex amplitudes as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Label(String),
    Real([f64; 3]),
    Complex([[f64; 2]; 3]),
}

impl InitialSpec {
    pub fn state(&self) -> Result<DensityOperator, CliError> {
        match self {
            InitialSpec::Label(s) => Ok(table1_state(s.parse::<TableState>()?)),
            InitialSpec::Real(a) => Ok(from_pure(&PureStateSpec::real(a))?),
            InitialSpec::Complex(a) => {
                Ok(from_pure(&PureStateSpec::new(a.iter().map(|p| c(p[0], p[1])).collect()))?)
            }
        }
    }

    /// Parses `ket0`, `0.96,0.003,0.03` or `0.8,0.176+0.283i,0.196-0.459i`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() == 1 {
            return Ok(InitialSpec::Label(text.trim().to_string()));
        }
        if parts.len() != 3 {
            return Err(CliError::validation(format!("initial state '{text}' must be a label or three amplitudes")));
        }
        let mut out = [[0.0; 2]; 3];
        let mut complex = false;
        for (k, p) in parts.iter().enumerate() {
            out[k] = parse_complex(p).ok_or_else(|| CliError::validation(format!("cannot parse amplitude '{p}'")))?;
            complex |= out[k][1] != 0.0;
        }
        Ok(if complex {
            InitialSpec::Complex(out)
        } else {
            InitialSpec::Real([out[0][0], out[1][0], out[2][0]])
        })
    }

    pub fn label(&self) -> String {
        match self {
            InitialSpec::Label(s) => s.to_ascii_lowercase(),
            _ => "custom".into(),
        }
    }
}

fn parse_complex(s: &str) -> Option<[f64; 2]> {
    let s = s.replace(' ', "");
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(|x| [x, 0.0]);
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = body[..k].parse().ok()?;
            let im_text = &body[k..];
            let im = match im_text {
                "+" => 1.0,
                "-" => -1.0,
                t => t.parse().ok()?,
            };
            Some([re, im])
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                t => t.parse().ok()?,
            };
            Some([0.0, im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub framework: Framework,
    pub hamiltonian: HamiltonianSpec,
    pub relaxation: RelaxationModel,
    pub rates: Rates,
    pub initial: InitialSpec,
    pub t_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Full-rank lift applied to rank-deficient SEAQT initial states.
    pub regularization: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            framework: Framework::Seaqt,
            hamiltonian: HamiltonianSpec::CaseStudyDefaults,
            relaxation: RelaxationModel::Constant { tau: 16.0783 },
            rates: Rates::default(),
            initial: InitialSpec::Label("ket0".into()),
            t_max: 20.0,
            samples: 201,
            seed: 0,
            output_dir: PathBuf::from("out"),
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(CliError::validation(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.samples < 2 {
            return Err(CliError::validation(format!("samples must be at least 2, got {}", self.samples)));
        }
        if !(0.0..1.0).contains(&self.regularization) {
            return Err(CliError::validation("regularization must lie in [0, 1)"));
        }
        if !(self.rates.kappa1 >= 0.0) || !(self.rates.kappa2 >= 0.0) {
            return Err(CliError::validation("decay rates must be nonnegative"));
        }
        self.relaxation.validate()?;
        if matches!(self.relaxation, RelaxationModel::FluctuationDiagnostic) && self.framework.runs_seaqt() {
            return Err(CliError::validation(
                "the fluctuation-ratio relaxation time is a diagnostic and cannot drive a simulation",
            ));
        }
        self.initial.state()?;
        self.seaqt_hamiltonian()?;
        Ok(())
    }

    /// Sample times `k t_max / (samples − 1)`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.samples - 1;
        (0..=n).map(|k| self.t_max * k as f64 / n as f64).collect()
    }

    pub fn seaqt_hamiltonian(&self) -> Result<CMatrix, CliError> {
        let p = match self.hamiltonian {
            HamiltonianSpec::Effective { w1, w2 } => EffectiveParams { w1, w2 },
            HamiltonianSpec::CaseStudyDefaults => EffectiveParams { w1: DEFAULT_W1, w2: DEFAULT_W2 },
        };
        Ok(feshbach::effective_hamiltonian(&p)?)
    }

    pub fn lindblad_hamiltonian(&self) -> Result<CMatrix, CliError> {
        match self.hamiltonian {
            HamiltonianSpec::Effective { .. } => self.seaqt_hamiltonian(),
            HamiltonianSpec::CaseStudyDefaults => Ok(feshbach::bare_hamiltonian()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_defaults() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1, "framework": "lindblad", "initial": "sme"}"#).unwrap();
        assert_eq!(cfg.framework, Framework::Lindblad);
        assert_eq!(cfg.samples, 201);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);

        let cfg = RunConfig::from_json(
            r#"{"relaxation": {"kind": "logistic", "w3": 5.7664, "w4": 25.4405, "w5": 0.9094},
                "hamiltonian": {"kind": "effective", "w1": 2.0, "w2": 0.01},
                "initial": [[0.8, 0], [0.176, 0.283], [0.196, -0.459]]}"#,
        )
        .unwrap();
        assert!(matches!(cfg.initial, InitialSpec::Complex(_)));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg = RunConfig { t_max: 0.0, samples: 2, ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = RunConfig { samples: 1, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { initial: InitialSpec::Label("ket7".into()), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn amplitude_parsing() {
        assert_eq!(InitialSpec::parse("Ket2").unwrap(), InitialSpec::Label("Ket2".into()));
        assert_eq!(InitialSpec::parse("0.96, 0.003, 0.03").unwrap(), InitialSpec::Real([0.96, 0.003, 0.03]));
        assert_eq!(
            InitialSpec::parse("0.8,0.176+0.283i,0.196-0.459i").unwrap(),
            InitialSpec::Complex([[0.8, 0.0], [0.176, 0.283], [0.196, -0.459]])
        );
        assert_eq!(parse_complex("-2i"), Some([0.0, -2.0]));
        assert_eq!(parse_complex("1e-3-1e-2i"), Some([1e-3, -1e-2]));
        assert!(InitialSpec::parse("1,2").is_err());
        assert!(InitialSpec::parse("a,b,c").is_err());
    }

    #[test]
    fn sample_grid() {
        let cfg = RunConfig { t_max: 2.0, samples: 5, ..Default::default() };
        assert_eq!(cfg.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
