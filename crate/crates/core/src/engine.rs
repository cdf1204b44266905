//! Exact event-driven simulation of branching Brownian motion.
//!
//! Between branch events the simulation is exact: lifetimes are Exp(1),
//! displacements are Gaussian with the configured drift, and checkpoint
//! positions are obtained by advancing each particle with conditionally exact
//! Gaussian increments in time order. There is no time-step discretisation
//! bias anywhere.
//!
//! Pruning, when enabled, culls a particle at its branch event if it sits more
//! than `prune_gap` below the drift-compensated running front. The induced
//! bias on the front law is measured by tests, never assumed zero.

use crate::error::{Error, Result};
use crate::law::BranchingLaw;
use crate::rng::{ReplicaKey, Stream};
use crate::stats::{Origin, PointConfiguration};
use crate::SQRT2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

/// One particle of a population snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub position: f64,
    pub birth_time: f64,
    pub parent_id: Option<u64>,
}

/// Ancestor-link table covering every particle ever created in a run.
/// Indexed by particle id.
#[derive(Debug, Clone, Default)]
pub struct Genealogy {
    parents: Vec<u64>, // u64::MAX encodes "root"
    birth_times: Vec<f64>,
}

const NO_PARENT: u64 = u64::MAX;

impl Genealogy {
    fn push(&mut self, parent: Option<u64>, birth_time: f64) {
        self.parents.push(parent.unwrap_or(NO_PARENT));
        self.birth_times.push(birth_time);
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parent(&self, id: u64) -> Option<u64> {
        let p = *self.parents.get(id as usize)?;
        if p == NO_PARENT {
            None
        } else {
            Some(p)
        }
    }

    pub fn birth_time(&self, id: u64) -> Option<f64> {
        self.birth_times.get(id as usize).copied()
    }

    /// Ancestor chain `[id, parent, ..., root]`.
    pub fn chain(&self, id: u64) -> Vec<u64> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            chain.push(p);
            cur = p;
        }
        chain
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Final time of the run.
    pub horizon: f64,
    /// Drift added to every particle's motion, per unit time.
    pub drift: f64,
    /// Cull particles more than this far below the running front (at branch
    /// events only). Must be at least 4 when set.
    pub prune_gap: Option<f64>,
    /// Abort with partial results when the live population exceeds this.
    pub population_cap: Option<usize>,
    /// Times at which snapshots are taken; sorted, within `[0, horizon]`.
    pub checkpoint_times: Vec<f64>,
    pub seed: u64,
    pub record_genealogy: bool,
}

impl SimConfig {
    /// Single snapshot at the horizon, genealogy off.
    pub fn at_horizon(horizon: f64, seed: u64) -> Self {
        SimConfig {
            horizon,
            drift: 0.0,
            prune_gap: None,
            population_cap: Some(10_000_000),
            checkpoint_times: vec![horizon],
            seed,
            record_genealogy: false,
        }
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_prune_gap(mut self, gap: f64) -> Self {
        self.prune_gap = Some(gap);
        self
    }

    pub fn with_genealogy(mut self) -> Self {
        self.record_genealogy = true;
        self
    }

    pub fn with_checkpoints(mut self, times: Vec<f64>) -> Self {
        self.checkpoint_times = times;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} must be >= 0",
                self.horizon
            )));
        }
        if !self.drift.is_finite() {
            return Err(Error::InvalidConfig("drift must be finite".into()));
        }
        if let Some(gap) = self.prune_gap {
            if !(gap >= 4.0) {
                return Err(Error::InvalidConfig(format!(
                    "prune_gap {gap} below safety floor 4"
                )));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for &c in &self.checkpoint_times {
            if !(c >= 0.0 && c <= self.horizon) {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint {} outside [0, {}]",
                    c, self.horizon
                )));
            }
            if c < prev {
                return Err(Error::InvalidConfig("checkpoints not sorted".into()));
            }
            prev = c;
        }
        Ok(())
    }
}

/// Population state at one checkpoint.
#[derive(Debug, Clone)]
pub struct PopulationSnapshot {
    pub time: f64,
    /// Alive particles, sorted by id.
    pub particles: Vec<Particle>,
    pub genealogy: Option<Arc<Genealogy>>,
    /// Particles culled by pruning up to this checkpoint.
    pub pruned_count: u64,
}

impl PopulationSnapshot {
    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Synthetic snapshot, mainly for tests and martingale formula checks.
    pub fn from_positions(time: f64, positions: &[f64]) -> Self {
        PopulationSnapshot {
            time,
            particles: positions
                .iter()
                .enumerate()
                .map(|(i, &position)| Particle {
                    id: i as u64,
                    position,
                    birth_time: 0.0,
                    parent_id: None,
                })
                .collect(),
            genealogy: None,
            pruned_count: 0,
        }
    }
}

/// Why a run ended early, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Abort {
    /// Live population exceeded the cap at this time.
    PopulationCap { time: f64, population: usize },
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub snapshots: Vec<PopulationSnapshot>,
    pub genealogy: Option<Arc<Genealogy>>,
    /// Split events by offspring count `k`.
    pub split_counts: Vec<(u32, u64)>,
    pub pruned_count: u64,
    /// Pruning culled the whole population before the last checkpoint.
    pub annihilated: bool,
    /// Present when the run aborted; snapshots before the abort are kept.
    pub abort: Option<Abort>,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    death_time: f64,
    slot: u32,
    id: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.death_time == other.death_time && self.id == other.id
    }
}
impl Eq for Event {}

// Min-heap by (death_time, id).
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .death_time
            .total_cmp(&self.death_time)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Body {
    id: u64,
    birth_time: f64,
    last_time: f64,
    last_pos: f64,
    stream: Stream,
    alive: bool,
}

impl Body {
    /// Advance the Brownian position to `time` with one exact increment.
    #[inline]
    fn advance(&mut self, time: f64, drift: f64) {
        let dt = time - self.last_time;
        if dt > 0.0 {
            self.last_pos += drift * dt + dt.sqrt() * self.stream.standard_normal();
            self.last_time = time;
        }
    }
}

/// Run one replica. Deterministic given `(config.seed, replica)`.
pub fn simulate_replica(
    config: &SimConfig,
    law: &BranchingLaw,
    replica: u64,
) -> Result<SimResult> {
    config.validate()?;
    let key = ReplicaKey::new(config.seed, replica);
    let drift = config.drift;
    let front_speed = SQRT2 + drift;
    let end_time = config.checkpoint_times.last().copied().unwrap_or(0.0);

    let mut bodies: Vec<Body> = Vec::with_capacity(1024);
    let mut free: Vec<u32> = Vec::new();
    let mut heap: BinaryHeap<Event> = BinaryHeap::with_capacity(1024);
    let mut genealogy = config.record_genealogy.then(Genealogy::default);
    let mut split_counts: Vec<(u32, u64)> = Vec::new();
    let mut snapshots: Vec<PopulationSnapshot> = Vec::new();
    let mut pruned_count: u64 = 0;
    let mut alive_count: usize = 0;
    let mut next_id: u64 = 0;
    // Drift-compensated running front reference: barrier(t) = front_ref + front_speed*t - gap.
    let mut front_ref = f64::NEG_INFINITY;
    let mut abort: Option<Abort> = None;

    let spawn = |bodies: &mut Vec<Body>,
                     free: &mut Vec<u32>,
                     heap: &mut BinaryHeap<Event>,
                     genealogy: &mut Option<Genealogy>,
                     next_id: &mut u64,
                     alive_count: &mut usize,
                     parent: Option<u64>,
                     birth_time: f64,
                     position: f64| {
        let id = *next_id;
        *next_id += 1;
        let mut stream = key.stream(id);
        let death_time = birth_time + stream.exponential();
        let body = Body {
            id,
            birth_time,
            last_time: birth_time,
            last_pos: position,
            stream,
            alive: true,
        };
        let slot = match free.pop() {
            Some(s) => {
                bodies[s as usize] = body;
                s
            }
            None => {
                bodies.push(body);
                (bodies.len() - 1) as u32
            }
        };
        if let Some(g) = genealogy.as_mut() {
            g.push(parent, birth_time);
        }
        heap.push(Event {
            death_time,
            slot,
            id,
        });
        *alive_count += 1;
    };

    spawn(
        &mut bodies,
        &mut free,
        &mut heap,
        &mut genealogy,
        &mut next_id,
        &mut alive_count,
        None,
        0.0,
        0.0,
    );

    let mut checkpoint_iter = config.checkpoint_times.iter().copied().peekable();
    let shared_genealogy: Option<Arc<Genealogy>>;

    'outer: loop {
        let next_checkpoint = match checkpoint_iter.peek() {
            Some(&c) => c,
            None => break,
        };
        // Process deaths up to and including the checkpoint time.
        loop {
            let due = match heap.peek() {
                Some(ev) if ev.death_time <= next_checkpoint => true,
                _ => false,
            };
            if !due {
                break;
            }
            let ev = heap.pop().unwrap();
            let slot = ev.slot as usize;
            debug_assert!(bodies[slot].alive && bodies[slot].id == ev.id);
            bodies[slot].advance(ev.death_time, drift);
            let death_pos = bodies[slot].last_pos;
            let compensated = death_pos - front_speed * ev.death_time;
            if compensated > front_ref {
                front_ref = compensated;
            }
            let culled = match config.prune_gap {
                Some(gap) => death_pos < front_ref + front_speed * ev.death_time - gap,
                None => false,
            };
            bodies[slot].alive = false;
            alive_count -= 1;
            if culled {
                pruned_count += 1;
                free.push(ev.slot);
                continue;
            }
            let k = law.sample(&mut bodies[slot].stream);
            match split_counts.iter_mut().find(|(kk, _)| *kk == k) {
                Some((_, n)) => *n += 1,
                None => split_counts.push((k, 1)),
            }
            let parent = Some(ev.id);
            for _ in 0..k {
                spawn(
                    &mut bodies,
                    &mut free,
                    &mut heap,
                    &mut genealogy,
                    &mut next_id,
                    &mut alive_count,
                    parent,
                    ev.death_time,
                    death_pos,
                );
            }
            free.push(ev.slot);
            if let Some(cap) = config.population_cap {
                if alive_count > cap {
                    abort = Some(Abort::PopulationCap {
                        time: ev.death_time,
                        population: alive_count,
                    });
                    break 'outer;
                }
            }
        }
        // Emit the snapshot: advance every live particle to the checkpoint.
        let time = next_checkpoint;
        checkpoint_iter.next();
        let mut particles: Vec<Particle> = Vec::with_capacity(alive_count);
        for body in bodies.iter_mut().filter(|b| b.alive) {
            body.advance(time, drift);
            let compensated = body.last_pos - front_speed * time;
            if compensated > front_ref {
                front_ref = compensated;
            }
            particles.push(Particle {
                id: body.id,
                position: body.last_pos,
                birth_time: body.birth_time,
                parent_id: genealogy
                    .as_ref()
                    .and_then(|g| g.parent(body.id))
                    .or_else(|| {
                        // Without a genealogy table, parents of live particles
                        // are unknown except for the root.
                        None
                    }),
            });
        }
        particles.sort_unstable_by_key(|p| p.id);
        snapshots.push(PopulationSnapshot {
            time,
            particles,
            genealogy: None, // patched below once shared
            pruned_count,
        });
        if heap.is_empty() && checkpoint_iter.peek().is_some() {
            // Pruning annihilated the population; remaining checkpoints are empty.
            for c in checkpoint_iter.by_ref() {
                snapshots.push(PopulationSnapshot {
                    time: c,
                    particles: Vec::new(),
                    genealogy: None,
                    pruned_count,
                });
            }
            break;
        }
        let _ = end_time;
    }

    shared_genealogy = genealogy.map(Arc::new);
    if let Some(g) = &shared_genealogy {
        for snap in &mut snapshots {
            snap.genealogy = Some(Arc::clone(g));
        }
    }
    let annihilated = snapshots.last().is_some_and(|s| s.is_empty());
    Ok(SimResult {
        snapshots,
        genealogy: shared_genealogy,
        split_counts,
        pruned_count,
        annihilated,
        abort,
    })
}

/// Run replica 0.
pub fn simulate(config: &SimConfig, law: &BranchingLaw) -> Result<SimResult> {
    simulate_replica(config, law, 0)
}

/// Run `replicas` independent replicas in parallel. Results are ordered by
/// replica index and do not depend on the degree of parallelism.
pub fn simulate_many(
    config: &SimConfig,
    law: &BranchingLaw,
    replicas: u64,
) -> Result<Vec<SimResult>> {
    use rayon::prelude::*;
    (0..replicas)
        .into_par_iter()
        .map(|r| simulate_replica(config, law, r))
        .collect()
}

/// Largest particle position of a nonempty snapshot.
pub fn max_displacement(snapshot: &PopulationSnapshot) -> Result<f64> {
    snapshot
        .particles
        .iter()
        .map(|p| p.position)
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |m| m.max(x)))
        })
        .ok_or_else(|| Error::EmptyPopulation("max_displacement of empty snapshot".into()))
}

/// Front centering `m(t) = sqrt(2) t - 3/(2 sqrt(2)) log t`.
pub fn centering_m(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("centering requires t > 0, got {t}")));
    }
    Ok(SQRT2 * t - 1.5 / SQRT2 * t.ln())
}

/// Particle positions re-centered by `center`, as a point configuration.
pub fn extremal_points(snapshot: &PopulationSnapshot, center: f64) -> Result<PointConfiguration> {
    if snapshot.is_empty() {
        return Err(Error::EmptyPopulation("extremal_points of empty snapshot".into()));
    }
    Ok(PointConfiguration::new(
        snapshot.particles.iter().map(|p| p.position - center),
        Origin::Extremal,
    ))
}

/// Branch time of the most recent common ancestor of `i` and `j`, both alive
/// in `snapshot`; equals the snapshot time when `i == j`.
pub fn genealogical_distance(i: u64, j: u64, snapshot: &PopulationSnapshot) -> Result<f64> {
    let genealogy = snapshot
        .genealogy
        .as_ref()
        .ok_or(Error::GenealogyAbsent)?;
    for id in [i, j] {
        if snapshot.particles.binary_search_by_key(&id, |p| p.id).is_err() {
            return Err(Error::UnknownParticle(id));
        }
    }
    if i == j {
        return Ok(snapshot.time);
    }
    let chain_i = genealogy.chain(i);
    let chain_j = genealogy.chain(j);
    // Walk the two root-ward chains from the root until they part ways.
    let mut it_i = chain_i.iter().rev();
    let mut it_j = chain_j.iter().rev();
    let mut divergence: Option<u64> = None;
    loop {
        match (it_i.next(), it_j.next()) {
            (Some(&a), Some(&b)) if a == b => continue,
            (Some(&a), _) => {
                divergence = Some(a);
                break;
            }
            (None, Some(&b)) => {
                divergence = Some(b);
                break;
            }
            (None, None) => break,
        }
    }
    let child = divergence.ok_or_else(|| {
        Error::Numerical("identical ancestor chains for distinct particles".into())
    })?;
    genealogy
        .birth_time(child)
        .ok_or(Error::UnknownParticle(child))
}

/// The curve `(s/t) m(t) - e_{alpha,t}(s)` with `e = s^alpha` on the first
/// half and `(t-s)^alpha` on the second.
pub fn entropic_envelope(s: f64, t: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside (0, 1/2)")));
    }
    if !(s >= 0.0 && s <= t) {
        return Err(Error::InvalidConfig(format!("s = {s} outside [0, {t}]")));
    }
    let m = centering_m(t)?;
    let e = if s <= t / 2.0 {
        s.powf(alpha)
    } else {
        (t - s).powf(alpha)
    };
    Ok(s / t * m - e)
}

/// Outcome of the entropic-envelope path diagnostic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingReport {
    pub selected: usize,
    pub crossed: usize,
    pub fraction: f64,
}

/// Fraction of particles landing in `d + m(t)` whose checkpointed path exceeds
/// the entropic envelope somewhere in `(r_d, t - r_g)`.
///
/// A discrete-time proxy: paths are only monitored at checkpoint times, so the
/// result under-estimates continuous crossing. Returns `None` when no particle
/// lands in the window (undefined, not zero).
pub fn envelope_crossing_fraction(
    result: &SimResult,
    alpha: f64,
    r_d: f64,
    r_g: f64,
    d: (f64, f64),
) -> Result<Option<CrossingReport>> {
    let t = result
        .snapshots
        .last()
        .ok_or_else(|| Error::EmptyInput("no snapshots".into()))?
        .time;
    crossing_fraction_with(result, r_d, r_g, d, |s| entropic_envelope(s, t, alpha))
}

fn crossing_fraction_with(
    result: &SimResult,
    r_d: f64,
    r_g: f64,
    d: (f64, f64),
    envelope: impl Fn(f64) -> Result<f64>,
) -> Result<Option<CrossingReport>> {
    let genealogy = result.genealogy.as_ref().ok_or(Error::GenealogyAbsent)?;
    let last = result
        .snapshots
        .last()
        .ok_or_else(|| Error::EmptyInput("no snapshots".into()))?;
    let t = last.time;
    let m = centering_m(t)?;
    let window: Vec<&PopulationSnapshot> = result
        .snapshots
        .iter()
        .filter(|s| s.time > r_d && s.time < t - r_g)
        .collect();
    let selected: Vec<&Particle> = last
        .particles
        .iter()
        .filter(|p| {
            let y = p.position - m;
            y >= d.0 && y <= d.1
        })
        .collect();
    if selected.is_empty() {
        return Ok(None);
    }
    // Position lookup tables per monitored snapshot.
    let tables: Vec<std::collections::HashMap<u64, f64>> = window
        .iter()
        .map(|s| s.particles.iter().map(|p| (p.id, p.position)).collect())
        .collect();
    let mut crossed = 0usize;
    for particle in &selected {
        let chain = genealogy.chain(particle.id); // leaf..root, birth times decreasing
        let mut hit = false;
        for (snap, table) in window.iter().zip(&tables) {
            let s = snap.time;
            // Ancestor alive at s: deepest chain element with birth <= s.
            let ancestor = chain
                .iter()
                .copied()
                .find(|&a| genealogy.birth_time(a).unwrap_or(f64::INFINITY) <= s);
            let Some(a) = ancestor else { continue };
            let Some(&pos) = table.get(&a) else { continue };
            if pos >= envelope(s)? {
                hit = true;
                break;
            }
        }
        if hit {
            crossed += 1;
        }
    }
    Ok(Some(CrossingReport {
        selected: selected.len(),
        crossed,
        fraction: crossed as f64 / selected.len() as f64,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binary() -> BranchingLaw {
        BranchingLaw::binary()
    }

    #[test]
    fn horizon_zero_single_particle_at_origin() {
        let config = SimConfig::at_horizon(0.0, 1);
        let result = simulate(&config, &binary()).unwrap();
        assert_eq!(result.snapshots.len(), 1);
        let snap = &result.snapshots[0];
        assert_eq!(snap.particles.len(), 1);
        assert_eq!(snap.particles[0].position, 0.0);
        assert_eq!(snap.time, 0.0);
    }

    #[test]
    fn mean_population_is_exp_t() {
        // E n(t) = e^t for the binary law; 3-SE band over 1e5 replicas at t=2.
        let config = SimConfig {
            population_cap: None,
            ..SimConfig::at_horizon(2.0, 7)
        };
        let law = binary();
        let replicas = 100_000u64;
        let results = simulate_many(&config, &law, replicas).unwrap();
        let counts: Vec<f64> = results
            .iter()
            .map(|r| r.snapshots[0].particles.len() as f64)
            .collect();
        let mean: f64 = counts.iter().sum::<f64>() / replicas as f64;
        let var: f64 =
            counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (replicas - 1) as f64;
        let se = (var / replicas as f64).sqrt();
        let target = (2.0f64).exp();
        assert!(
            (mean - target).abs() < 3.0 * se,
            "mean {mean} vs e^2 = {target}, se {se}"
        );
    }

    #[test]
    fn degenerate_law_is_brownian_motion() {
        // p_1 = 1: one particle, N(0, t) position; sample variance near 4 at t=4.
        let config = SimConfig::at_horizon(4.0, 5);
        let law = BranchingLaw::single();
        let replicas = 10_000u64;
        let results = simulate_many(&config, &law, replicas).unwrap();
        let mut positions = Vec::with_capacity(replicas as usize);
        for r in &results {
            let snap = &r.snapshots[0];
            assert_eq!(snap.particles.len(), 1);
            positions.push(snap.particles[0].position);
        }
        let mean: f64 = positions.iter().sum::<f64>() / replicas as f64;
        let var: f64 = positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (replicas - 1) as f64;
        // SE of the sample variance of N(0,4): sqrt(2 sigma^4 / (n-1))
        let se = (2.0 * 16.0 / (replicas as f64 - 1.0)).sqrt();
        assert!((var - 4.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn max_displacement_examples() {
        let single = PopulationSnapshot::from_positions(0.0, &[0.0]);
        assert_eq!(max_displacement(&single).unwrap(), 0.0);
        let three = PopulationSnapshot::from_positions(1.0, &[-1.0, 2.5, 0.3]);
        assert_eq!(max_displacement(&three).unwrap(), 2.5);
        let empty = PopulationSnapshot::from_positions(1.0, &[]);
        assert!(max_displacement(&empty).is_err());
    }

    #[test]
    fn max_of_single_brownian_is_normal() {
        // KS distance of 1e4 replica maxima against the N(0, t) CDF.
        let t = 4.0;
        let config = SimConfig::at_horizon(t, 11);
        let law = BranchingLaw::single();
        let results = simulate_many(&config, &law, 10_000).unwrap();
        let maxima: Vec<f64> = results
            .iter()
            .map(|r| max_displacement(&r.snapshots[0]).unwrap())
            .collect();
        let cdf = crate::stats::empirical_cdf(&maxima);
        let normal = statrs::distribution::Normal::new(0.0, t.sqrt()).unwrap();
        let d = crate::stats::ks_distance(&cdf, |x| {
            statrs::distribution::ContinuousCDF::cdf(&normal, x)
        });
        assert!(d < 0.02, "KS distance {d}");
    }

    #[test]
    fn centering_values() {
        assert!(centering_m(0.0).is_err());
        assert!(centering_m(-1.0).is_err());
        assert_abs_diff_eq!(centering_m(1.0).unwrap(), SQRT2, epsilon = 1e-15);
        // Direct substitution into the formula.
        assert_abs_diff_eq!(centering_m(10.0).unwrap(), 11.699875, epsilon = 1e-6);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(centering_m(e).unwrap(), SQRT2 * e - 1.5 / SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(centering_m(e).unwrap(), 2.783571, epsilon = 1e-6);
    }

    #[test]
    fn extremal_points_examples() {
        let snap = PopulationSnapshot::from_positions(1.0, &[3.0, 5.0]);
        let config = extremal_points(&snap, 5.0).unwrap();
        assert_eq!(config.points(), &[-2.0, 0.0]);
        let max = max_displacement(&snap).unwrap();
        let centered = extremal_points(&snap, max).unwrap();
        assert_eq!(centered.max().unwrap(), 0.0);
    }

    #[test]
    fn genealogy_distance_siblings_and_self() {
        let config = SimConfig {
            record_genealogy: true,
            checkpoint_times: vec![3.0],
            ..SimConfig::at_horizon(3.0, 13)
        };
        let result = simulate(&config, &binary()).unwrap();
        let snap = &result.snapshots[0];
        let genealogy = result.genealogy.as_ref().unwrap();
        // Q_ii = t
        let some_id = snap.particles[0].id;
        assert_eq!(genealogical_distance(some_id, some_id, snap).unwrap(), 3.0);
        // Siblings split exactly at their parent's death time = their birth time.
        let mut by_parent: std::collections::HashMap<u64, Vec<&Particle>> =
            std::collections::HashMap::new();
        for p in &snap.particles {
            if let Some(parent) = genealogy.parent(p.id) {
                by_parent.entry(parent).or_default().push(p);
            }
        }
        let mut checked = false;
        for (_, children) in by_parent {
            if children.len() == 2 {
                let q = genealogical_distance(children[0].id, children[1].id, snap).unwrap();
                assert_eq!(q, children[0].birth_time);
                assert_eq!(q, children[1].birth_time);
                checked = true;
                break;
            }
        }
        assert!(checked, "no sibling pair found at t=3");
    }

    #[test]
    fn genealogy_absent_and_unknown_rejected() {
        let config = SimConfig::at_horizon(1.0, 17);
        let result = simulate(&config, &binary()).unwrap();
        let snap = &result.snapshots[0];
        let id = snap.particles[0].id;
        assert!(matches!(
            genealogical_distance(id, id, snap),
            Err(Error::GenealogyAbsent)
        ));
        let config = SimConfig::at_horizon(1.0, 17).with_genealogy();
        let law = BranchingLaw::single();
        let result = simulate(&config, &law).unwrap();
        let snap = &result.snapshots[0];
        assert_eq!(snap.particles.len(), 1);
        let only = snap.particles[0].id;
        assert!(genealogical_distance(only, only + 1, snap).is_err());
    }

    #[test]
    fn entropic_envelope_examples() {
        let t = 16.0;
        assert_eq!(entropic_envelope(0.0, t, 1.0 / 3.0).unwrap(), 0.0);
        let m = centering_m(t).unwrap();
        assert_abs_diff_eq!(entropic_envelope(t, t, 1.0 / 3.0).unwrap(), m, epsilon = 1e-12);
        // s = 8 = t/2: 0.5 m(16) - 8^(1/3), evaluated from the formula.
        assert_abs_diff_eq!(
            entropic_envelope(8.0, t, 1.0 / 3.0).unwrap(),
            0.5 * centering_m(16.0).unwrap() - 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            entropic_envelope(8.0, t, 1.0 / 3.0).unwrap(),
            7.843321,
            epsilon = 1e-6
        );
        assert!(entropic_envelope(-1.0, t, 0.3).is_err());
        assert!(entropic_envelope(17.0, t, 0.3).is_err());
        assert!(entropic_envelope(1.0, t, 0.6).is_err());
    }

    #[test]
    fn crossing_fraction_trivial_cases() {
        let t = 6.0;
        let config = SimConfig {
            record_genealogy: true,
            checkpoint_times: (1..=6).map(|k| k as f64).collect(),
            prune_gap: Some(8.0),
            ..SimConfig::at_horizon(t, 23)
        };
        let result = simulate(&config, &binary()).unwrap();
        // Empty window: r_d and r_g exclude every checkpoint.
        let report = envelope_crossing_fraction(&result, 0.45, 3.0, 3.0, (-8.0, 8.0))
            .unwrap()
            .expect("front window is populated");
        assert_eq!(report.fraction, 0.0);
        // Envelope at +infinity is never crossed.
        let report = crossing_fraction_with(&result, 1.0, 1.0, (-8.0, 8.0), |_| Ok(f64::INFINITY))
            .unwrap()
            .unwrap();
        assert_eq!(report.fraction, 0.0);
        // A region nobody reaches is undefined, not zero.
        let none = envelope_crossing_fraction(&result, 0.45, 1.0, 1.0, (50.0, 60.0)).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn crossing_fraction_monotone_in_window() {
        // Nested windows on the same paths: the crossing indicator can only
        // shrink as the window shrinks.
        let t = 10.0;
        let config = SimConfig {
            record_genealogy: true,
            checkpoint_times: (1..=10).map(|k| k as f64).collect(),
            prune_gap: Some(8.0),
            ..SimConfig::at_horizon(t, 29)
        };
        let law = binary();
        let mut fractions = Vec::new();
        for margin in [1.0, 2.0, 3.0] {
            let mut crossed = 0usize;
            let mut selected = 0usize;
            for replica in 0..300 {
                let result = simulate_replica(&config, &law, replica).unwrap();
                if let Some(r) =
                    envelope_crossing_fraction(&result, 0.45, margin, margin, (-3.0, 3.0)).unwrap()
                {
                    crossed += r.crossed;
                    selected += r.selected;
                }
            }
            assert!(selected > 0);
            fractions.push(crossed as f64 / selected as f64);
        }
        assert!(
            fractions[0] >= fractions[1] && fractions[1] >= fractions[2],
            "fractions {fractions:?}"
        );
    }

    #[test]
    fn reproducible_bit_identical() {
        let config = SimConfig {
            prune_gap: Some(6.0),
            checkpoint_times: vec![2.0, 5.0],
            ..SimConfig::at_horizon(5.0, 31)
        }
        .with_genealogy();
        let law = binary();
        let a = simulate(&config, &law).unwrap();
        let b = simulate(&config, &law).unwrap();
        assert_eq!(a.snapshots.len(), b.snapshots.len());
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(sa.particles, sb.particles);
            assert_eq!(sa.pruned_count, sb.pruned_count);
        }
    }

    #[test]
    fn count_martingale_mean_one() {
        // e^{-t} n(t) has mean 1; checked at t in {1, 2, 4}.
        let law = binary();
        for (t, replicas) in [(1.0, 20_000u64), (2.0, 20_000), (4.0, 20_000)] {
            let config = SimConfig {
                population_cap: None,
                ..SimConfig::at_horizon(t, 37)
            };
            let results = simulate_many(&config, &law, replicas).unwrap();
            let weights: Vec<f64> = results
                .iter()
                .map(|r| (-t).exp() * r.snapshots[0].particles.len() as f64)
                .collect();
            let mean: f64 = weights.iter().sum::<f64>() / replicas as f64;
            let var: f64 = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>()
                / (replicas - 1) as f64;
            let se = (var / replicas as f64).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "t={t}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn branch_count_fractions_match_law() {
        let law = BranchingLaw::new(&[(1, 0.3), (2, 0.45), (3, 0.2), (4, 0.05)]).unwrap();
        let config = SimConfig {
            population_cap: None,
            ..SimConfig::at_horizon(6.0, 41)
        };
        let results = simulate_many(&config, &law, 2000).unwrap();
        let mut totals: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
        let mut all = 0u64;
        for r in &results {
            for &(k, n) in &r.split_counts {
                *totals.entry(k).or_insert(0) += n;
                all += n;
            }
        }
        for &(k, p) in law.entries() {
            let frac = *totals.get(&k).unwrap_or(&0) as f64 / all as f64;
            let se = (p * (1.0 - p) / all as f64).sqrt();
            assert!((frac - p).abs() < 4.0 * se, "k={k}: frac {frac} vs p {p}");
        }
    }

    #[test]
    fn population_cap_aborts_with_partial_results() {
        let config = SimConfig {
            population_cap: Some(64),
            checkpoint_times: vec![1.0, 20.0],
            ..SimConfig::at_horizon(20.0, 43)
        };
        let result = simulate(&config, &binary()).unwrap();
        assert!(matches!(result.abort, Some(Abort::PopulationCap { .. })));
        assert!(result.snapshots.len() < 2);
    }

    #[test]
    fn prune_gap_floor_enforced() {
        let mut config = SimConfig::at_horizon(1.0, 47);
        config.prune_gap = Some(2.0);
        assert!(simulate(&config, &binary()).is_err());
    }
}
