//! Simulation and fitting toolkit for anomalous (Mpemba) relaxation of a
//! driven three-level system.
//!
//! Two dynamical frameworks are provided: the linear GKSL (Lindblad) master
//! equation with its Liouvillian eigenmode expansion ([`lindblad`]), and the
//! nonlinear steepest-entropy-ascent equation of motion ([`seaqt`]).
//! Free parameters of either are fitted to population time series with a
//! seedable Differential Evolution optimizer ([`fitkit`]).

pub mod error;
pub mod feshbach;
pub mod fitkit;
pub mod lindblad;
pub mod matcore;
pub mod ode;
pub mod qstate;
pub mod seaqt;
pub mod states;

pub use error::{Error, Result};
