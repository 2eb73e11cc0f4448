//! Trajectory rows, CSV with round-trip precision, and JSON files.

use std::fmt::Write as _;
use std::path::Path;

use mpemba_core::matcore::CMatrix;
use mpemba_core::qstate::{hs_distance, populations, DensityOperator};
use mpemba_core::seaqt::{observables, ThermoObservables};
use mpemba_core::{qstate, Error};

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str =
    "t,p0,p1,p2,energy,entropy,beta,beta_defined,heat_capacity,sigma_ff,free_energy,tau_d,hs_dist_final";

/// One sample of a trajectory as written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub populations: [f64; 3],
    pub energy: f64,
    pub entropy: f64,
    pub beta: f64,
    /// False when the energy variance is too small for β to exist.
    pub beta_defined: bool,
    pub heat_capacity: f64,
    pub sigma_ff: f64,
    pub free_energy: f64,
    /// NaN for Lindblad trajectories.
    pub tau_d: f64,
    pub hs_dist_final: f64,
}

/// Shortest string with 17 significant digits, so every double round-trips.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Rows for a sequence of states; `hs_dist_final` is measured to the last one.
pub fn rows_for(
    times: &[f64],
    states: &[DensityOperator],
    hamiltonian: &CMatrix,
    tau: impl Fn(usize) -> f64,
) -> Result<Vec<TrajectoryRow>, CliError> {
    let last = states.last().ok_or_else(|| CliError::Numerical("empty trajectory".into()))?;
    let mut rows = Vec::with_capacity(states.len());
    for (k, (t, s)) in times.iter().zip(states).enumerate() {
        let p = populations(s);
        let (energy, entropy, obs) = match observables(s, hamiltonian) {
            Ok(o) => (o.energy, o.entropy, Some(o)),
            Err(Error::DegenerateVariance(_)) => (s.expect(hamiltonian), qstate::entropy(s)?, None),
            Err(e) => return Err(e.into()),
        };
        let pick = |f: fn(&ThermoObservables) -> f64| obs.as_ref().map_or(f64::NAN, f);
        rows.push(TrajectoryRow {
            t: *t,
            populations: [p[0], p[1], p[2]],
            energy,
            entropy,
            beta: pick(|o| o.beta),
            beta_defined: obs.is_some(),
            heat_capacity: pick(|o| o.heat_capacity),
            sigma_ff: pick(|o| o.sigma_ff),
            free_energy: pick(|o| o.free_energy),
            tau_d: tau(k),
            hs_dist_final: hs_distance(s, last)?,
        });
    }
    Ok(rows)
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 260);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            fmt_num(r.t),
            fmt_num(r.populations[0]),
            fmt_num(r.populations[1]),
            fmt_num(r.populations[2]),
            fmt_num(r.energy),
            fmt_num(r.entropy),
            fmt_num(r.beta),
            (r.beta_defined as u8).to_string(),
            fmt_num(r.heat_capacity),
            fmt_num(r.sigma_ff),
            fmt_num(r.free_energy),
            fmt_num(r.tau_d),
            fmt_num(r.hs_dist_final),
        ];
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn header_matches_row_width() {
        let row = TrajectoryRow {
            t: 0.0,
            populations: [1.0, 0.0, 0.0],
            energy: 0.0,
            entropy: 0.0,
            beta: f64::NAN,
            beta_defined: false,
            heat_capacity: f64::NAN,
            sigma_ff: f64::NAN,
            free_energy: f64::NAN,
            tau_d: 1.0,
            hs_dist_final: 0.0,
        };
        let text = trajectory_csv(&[row]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }
}
