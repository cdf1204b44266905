use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid branching law: {0}")]
    InvalidLaw(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty population: {0}")]
    EmptyPopulation(String),

    #[error("genealogy not recorded; rerun with record_genealogy = true")]
    GenealogyAbsent,

    #[error("unknown particle id {0}")]
    UnknownParticle(u64),

    #[error("solver instability at t = {time}: value {value} outside [-1e-6, 1+1e-6] at x = {x}")]
    SolverInstability { time: f64, x: f64, value: f64 },

    #[error("front within {distance:.2} of domain boundary at t = {time} (minimum margin {margin})")]
    BoundaryTooClose { time: f64, distance: f64, margin: f64 },

    #[error("no level crossing found for level {0}")]
    NoCrossing(f64),

    #[error("window [{lo}, {hi}] is invalid: {reason}")]
    BadWindow { lo: f64, hi: f64, reason: String },

    #[error("atom window has unbounded or excessive mass: {0}")]
    AtomMass(String),

    #[error("rejection sampler exhausted budget of {budget} trials with {accepted} acceptances (estimated acceptance probability {p_est:.3e})")]
    RejectionBudget {
        budget: u64,
        accepted: u64,
        p_est: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
