//! The derivative martingale `Z(t)`, its additive companion `W(t)`, and an
//! empirical sampler of the strictly positive limiting variable `Z`.

use crate::engine::{self, PopulationSnapshot, SimConfig};
use crate::error::{Error, Result};
use crate::law::BranchingLaw;
use crate::SQRT2;
use serde::{Deserialize, Serialize};

/// One replica's martingale values at a fixed time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MartingaleSample {
    pub time: f64,
    /// Signed at finite t.
    pub z_value: f64,
    /// Always nonnegative.
    pub w_value: f64,
    pub replica: u64,
}

/// `Z(t) = sum_k (sqrt2 t - x_k) exp(-sqrt2 (sqrt2 t - x_k))`.
pub fn derivative_martingale(snapshot: &PopulationSnapshot) -> f64 {
    let t = snapshot.time;
    snapshot
        .particles
        .iter()
        .map(|p| {
            let depth = SQRT2 * t - p.position;
            depth * (-SQRT2 * depth).exp()
        })
        .sum()
}

/// `W(t) = sum_k exp(-sqrt2 (sqrt2 t - x_k))`, the additive companion.
/// Unit mean at every time.
pub fn additive_companion(snapshot: &PopulationSnapshot) -> f64 {
    let t = snapshot.time;
    snapshot
        .particles
        .iter()
        .map(|p| (-SQRT2 * (SQRT2 * t - p.position)).exp())
        .sum()
}

/// Empirical sampler output for the limiting variable `Z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZEmpirical {
    /// Strictly positive retained samples.
    pub samples: Vec<f64>,
    pub horizon_used: f64,
    pub replica_count: u64,
    /// Replicas rejected because `Z(horizon) <= 0`.
    pub rejected: u64,
    pub seed: u64,
}

impl ZEmpirical {
    pub fn rejection_rate(&self) -> f64 {
        if self.replica_count == 0 {
            0.0
        } else {
            self.rejected as f64 / self.replica_count as f64
        }
    }

    /// Rejection above 10% signals the horizon is too short.
    pub fn horizon_warning(&self) -> bool {
        self.rejection_rate() > 0.10
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Default engine settings for `Z` sampling: pruning keeps the population
/// tractable while the culled mass contributes negligibly to `Z`.
pub fn z_engine_config(horizon: f64, seed: u64) -> SimConfig {
    SimConfig {
        prune_gap: Some(8.0),
        ..SimConfig::at_horizon(horizon, seed)
    }
}

/// One `Z(horizon)` per replica; non-positive values are rejected and counted.
pub fn sample_limiting_z(
    horizon: f64,
    replicas: u64,
    config: &SimConfig,
    law: &BranchingLaw,
) -> Result<ZEmpirical> {
    if config.checkpoint_times.last().copied() != Some(horizon) {
        return Err(Error::InvalidConfig(
            "config checkpoints must end at the sampling horizon".into(),
        ));
    }
    let results = engine::simulate_many(config, law, replicas)?;
    let mut samples = Vec::with_capacity(replicas as usize);
    let mut rejected = 0u64;
    for result in &results {
        let snap = result.snapshots.last().expect("checkpoint at horizon");
        let z = derivative_martingale(snap);
        if z > 0.0 {
            samples.push(z);
        } else {
            rejected += 1;
        }
    }
    Ok(ZEmpirical {
        samples,
        horizon_used: horizon,
        replica_count: replicas,
        rejected,
        seed: config.seed,
    })
}

/// Paired-horizon stability report for the almost-sure convergence proxy.
#[derive(Debug, Clone, Serialize)]
pub struct ZDriftReport {
    pub horizon_a: f64,
    pub horizon_b: f64,
    pub replicas: u64,
    /// Median of |Z(b) - Z(a)| / Z(a) over replicas with Z(a) > 0.
    pub median_relative_drift: f64,
    pub mean_absolute_drift: f64,
}

/// Evaluate `Z` at two horizons of the same paths (one run per replica with
/// both checkpoints) and report the drift between them.
pub fn z_horizon_drift(
    horizon_a: f64,
    horizon_b: f64,
    replicas: u64,
    seed: u64,
    law: &BranchingLaw,
) -> Result<ZDriftReport> {
    if !(horizon_a > 0.0 && horizon_b > horizon_a) {
        return Err(Error::InvalidConfig("need 0 < horizon_a < horizon_b".into()));
    }
    let config = SimConfig {
        checkpoint_times: vec![horizon_a, horizon_b],
        ..z_engine_config(horizon_b, seed)
    };
    let results = engine::simulate_many(&config, law, replicas)?;
    let mut rel = Vec::new();
    let mut abs_sum = 0.0;
    let mut n = 0u64;
    for result in &results {
        let za = derivative_martingale(&result.snapshots[0]);
        let zb = derivative_martingale(&result.snapshots[1]);
        abs_sum += (zb - za).abs();
        n += 1;
        if za > 0.0 {
            rel.push((zb - za).abs() / za);
        }
    }
    rel.sort_unstable_by(f64::total_cmp);
    let median_relative_drift = if rel.is_empty() {
        f64::NAN
    } else {
        rel[rel.len() / 2]
    };
    Ok(ZDriftReport {
        horizon_a,
        horizon_b,
        replicas,
        median_relative_drift,
        mean_absolute_drift: abs_sum / n.max(1) as f64,
    })
}
