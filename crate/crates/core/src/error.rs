use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("non-positive coefficient `{name}` = {value}")]
    NonPositiveCoefficient { name: String, value: f64 },

    #[error("empty omega: ({lo}, {hi})")]
    EmptyOmega { lo: f64, hi: f64 },

    #[error("omega ({lo}, {hi}) is not contained in [0, {length}]")]
    OmegaOutOfRange { lo: f64, hi: f64, length: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("parameters are not in the symmetric regime (d1 = d2, a1 = a2 required)")]
    NotSymmetric,

    #[error("coexistence coefficients inadmissible (need b1 > b2 and c1 < c2)")]
    CoexistenceInadmissible,

    #[error("degenerate denominator b1*c2 - b2*c1 = {0}")]
    DegenerateDenominator(f64),

    #[error("converged steady state is negative (min = {min:.3e})")]
    NegativeSteadyState { min: f64 },

    #[error("boundary control `{which}` = {value} at step {step} violates [0, {cap}]")]
    ControlOutOfBounds {
        which: &'static str,
        step: usize,
        value: f64,
        cap: f64,
    },

    #[error("initial state violates the admissible box at node {node}: {detail}")]
    InadmissibleInitialState { node: usize, detail: String },

    #[error("blow-up detected at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },

    #[error("stagnated: distance {distance:.6e} above eps after t = {t}")]
    Stagnated { distance: f64, t: f64 },

    #[error("sigma = {sigma} outside admissible window ({lo}, {hi})")]
    SigmaOutOfWindow { sigma: f64, lo: f64, hi: f64 },

    #[error("regime precondition violated: {0}")]
    RegimeViolated(String),

    #[error("phase 2 failed to reach tolerance: terminal distance {distance:.6e}")]
    SteeringFailed { distance: f64 },

    #[error("bracket invalid: {0}")]
    BracketInvalid(String),

    #[error("non-monotone feasibility: feasible at T = {feasible_at}, infeasible at T = {infeasible_at}")]
    NonMonotoneFeasibility { feasible_at: f64, infeasible_at: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingKey(_) => "missing_key",
            Error::NonPositiveCoefficient { .. } => "non_positive_coefficient",
            Error::EmptyOmega { .. } => "empty_omega",
            Error::OmegaOutOfRange { .. } => "omega_out_of_range",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidInput(_) => "invalid_input",
            Error::NotConverged { .. } => "not_converged",
            Error::NotSymmetric => "not_symmetric",
            Error::CoexistenceInadmissible => "coexistence_inadmissible",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::NegativeSteadyState { .. } => "negative_steady_state",
            Error::ControlOutOfBounds { .. } => "control_out_of_bounds",
            Error::InadmissibleInitialState { .. } => "inadmissible_initial_state",
            Error::BlowUp { .. } => "blow_up",
            Error::Stagnated { .. } => "stagnated",
            Error::SigmaOutOfWindow { .. } => "sigma_out_of_window",
            Error::RegimeViolated(_) => "regime_violated",
            Error::SteeringFailed { .. } => "steering_failed",
            Error::BracketInvalid(_) => "bracket_invalid",
            Error::NonMonotoneFeasibility { .. } => "non_monotone_feasibility",
            Error::Parse { .. } => "parse",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
