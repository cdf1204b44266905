//! Simulation and numerics laboratory for branching Brownian motion (BBM),
//! the F-KPP equation, and the Poisson cluster structure of the BBM extremal
//! process.
//!
//! The crate is organised around five subsystems:
//!
//! * [`engine`] — exact event-driven BBM simulation with drift, pruning,
//!   checkpointing and genealogy tracking;
//! * [`martingale`] — the derivative martingale `Z(t)`, its additive
//!   companion, and an empirical sampler of the limiting variable `Z`;
//! * [`fkpp`] — a deterministic F-KPP solver (IMEX, co-moving frame),
//!   traveling-wave extraction, tail constants and the Brownian-bridge
//!   integral approximation of the solution far ahead of the front;
//! * [`cluster`] — samplers for the auxiliary Poisson cluster process, the
//!   conditioned cluster (gap) law, and window diagnostics for contributing
//!   atoms;
//! * [`stats`] — point-configuration data model, Laplace functionals,
//!   Kolmogorov-Smirnov and Poisson dispersion tests, process comparison.
//!
//! All Monte Carlo entry points are deterministic given a seed: random
//! streams are counter-based and keyed by (seed, replica, particle), so
//! results do not depend on scheduling or on pruning order.

pub mod cluster;
pub mod engine;
pub mod error;
pub mod fkpp;
pub mod io;
pub mod law;
pub mod martingale;
pub mod rng;
pub mod stats;

pub use engine::{centering_m, PopulationSnapshot, Particle, SimConfig, SimResult};
pub use error::{Error, Result};
pub use law::BranchingLaw;
pub use stats::{PointConfiguration, TestFunction};

/// `sqrt(2)`, the asymptotic front speed of standard BBM.
pub const SQRT2: f64 = std::f64::consts::SQRT_2;
