//! Simulation and control synthesis for the two-species diffusive
//! Lotka-Volterra competition system on an interval, with constrained
//! Dirichlet boundary controls and a multiplicative interior control.

// comparisons are negated on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod discretization;

pub use error::{Error, Result};
pub mod elliptic;
pub mod parabolic;
pub mod optimal_control;
pub mod comparison;
pub mod control_synthesis;
pub mod config;
pub mod io;
pub mod scenario;
