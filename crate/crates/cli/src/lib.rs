//! Command-line front end for the SEAQT and Lindblad qutrit models.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
