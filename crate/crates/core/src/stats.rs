//! Point-configuration data model and the statistics used to compare point
//! processes: Laplace functionals, gap processes, max laws, KS and Poisson
//! dispersion tests, superposition checks.

use crate::engine::{self, SimConfig};
use crate::error::{Error, Result};
use crate::law::BranchingLaw;
use crate::rng::mix64;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

/// Provenance tag for a point configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Front-centered BBM positions.
    Extremal,
    /// Auxiliary Poisson-cluster construction.
    Auxiliary,
    /// Conditioned cluster gaps.
    ClusterGaps,
    Synthetic,
}

/// A finite multiset of reals, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    points: Vec<f64>,
    pub origin: Origin,
}

impl PointConfiguration {
    pub fn new(points: impl IntoIterator<Item = f64>, origin: Origin) -> Self {
        let mut points: Vec<f64> = points.into_iter().collect();
        points.sort_unstable_by(f64::total_cmp);
        PointConfiguration { points, origin }
    }

    pub fn empty(origin: Origin) -> Self {
        PointConfiguration {
            points: Vec::new(),
            origin,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max(&self) -> Option<f64> {
        self.points.last().copied()
    }

    pub fn translated(&self, c: f64) -> Self {
        PointConfiguration {
            points: self.points.iter().map(|p| p + c).collect(),
            origin: self.origin,
        }
    }

    /// Number of points in the half-open interval `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.points.partition_point(|&p| p < lo);
        let b = self.points.partition_point(|&p| p < hi);
        b - a
    }
}

/// Shift every configuration so its maximum sits at 0.
///
/// Idempotent; empty input is rejected.
pub fn gap_process(config: &PointConfiguration) -> Result<PointConfiguration> {
    let max = config
        .max()
        .ok_or_else(|| Error::EmptyInput("gap_process of empty configuration".into()))?;
    Ok(PointConfiguration {
        points: config.points.iter().map(|p| p - max).collect(),
        origin: Origin::ClusterGaps,
    })
}

/// Continuous, compactly supported, nonnegative test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// Indicator of `[lo, hi]` mollified by linear ramps of `ramp` on each side.
    Box { lo: f64, hi: f64, height: f64, ramp: f64 },
    /// Piecewise-linear peak at the midpoint of `[lo, hi]`.
    Tent { lo: f64, hi: f64, height: f64 },
    /// Smooth bump `height * exp(1 - 1/(1 - s^2))` with `s` the normalised coordinate.
    Bump { lo: f64, hi: f64, height: f64 },
}

/// Mollification width of near-indicator boxes.
pub const BOX_RAMP: f64 = 0.05;

impl TestFunction {
    pub fn boxcar(lo: f64, hi: f64, height: f64) -> Self {
        TestFunction::Box {
            lo,
            hi,
            height,
            ramp: BOX_RAMP,
        }
    }

    pub fn tent(lo: f64, hi: f64, height: f64) -> Self {
        TestFunction::Tent { lo, hi, height }
    }

    pub fn bump(lo: f64, hi: f64, height: f64) -> Self {
        TestFunction::Bump { lo, hi, height }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            TestFunction::Box { lo, hi, ramp, .. } => (lo - ramp, hi + ramp),
            TestFunction::Tent { lo, hi, .. } | TestFunction::Bump { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Box { lo, hi, height, ramp } => {
                if x <= lo - ramp || x >= hi + ramp {
                    0.0
                } else if x >= lo && x <= hi {
                    height
                } else if x < lo {
                    height * (x - (lo - ramp)) / ramp
                } else {
                    height * ((hi + ramp) - x) / ramp
                }
            }
            TestFunction::Tent { lo, hi, height } => {
                if x <= lo || x >= hi {
                    0.0
                } else {
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * (hi - lo);
                    height * (1.0 - (x - mid).abs() / half)
                }
            }
            TestFunction::Bump { lo, hi, height } => {
                if x <= lo || x >= hi {
                    0.0
                } else {
                    let s = (2.0 * x - lo - hi) / (hi - lo);
                    height * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    /// The function `x -> eval(x - c)`: support shifts right by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Box { lo, hi, .. }
            | TestFunction::Tent { lo, hi, .. }
            | TestFunction::Bump { lo, hi, .. } => {
                *lo += c;
                *hi += c;
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        match *self {
            TestFunction::Box { lo, hi, height, .. } => format!("box[{lo},{hi}]x{height}"),
            TestFunction::Tent { lo, hi, height } => format!("tent[{lo},{hi}]x{height}"),
            TestFunction::Bump { lo, hi, height } => format!("bump[{lo},{hi}]x{height}"),
        }
    }
}

/// Default comparison panel: two boxes, two tents, one bump spanning [-4, 2].
pub fn default_panel() -> Vec<TestFunction> {
    vec![
        TestFunction::boxcar(-4.0, -0.5, 1.0),
        TestFunction::boxcar(-1.5, 2.0, 1.0),
        TestFunction::tent(-4.0, 0.0, 1.0),
        TestFunction::tent(-2.0, 2.0, 1.5),
        TestFunction::bump(-3.0, 1.0, 1.0),
    ]
}

/// Monte Carlo estimate of a Laplace functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub phi: String,
}

impl LaplaceEstimate {
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.std_error,
            self.mean + 1.96 * self.std_error,
        )
    }

    pub fn overlaps(&self, other: &LaplaceEstimate) -> bool {
        (self.mean - other.mean).abs() <= 1.96 * (self.std_error + other.std_error)
    }
}

/// Sample mean and standard error of `exp(-sum_points phi(p))` over configs.
/// Empty configurations contribute the factor 1.
pub fn laplace_functional(
    configs: &[PointConfiguration],
    phi: &TestFunction,
) -> Result<LaplaceEstimate> {
    if configs.is_empty() {
        return Err(Error::EmptyInput("laplace_functional needs configurations".into()));
    }
    let (lo, hi) = phi.support();
    let n = configs.len() as f64;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for config in configs {
        let mut acc = 0.0;
        for &p in config.points() {
            if p > lo && p < hi {
                acc += phi.eval(p);
            }
        }
        let v = (-acc).exp();
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    Ok(LaplaceEstimate {
        mean,
        std_error: (var / n).sqrt(),
        replicas: configs.len(),
        phi: phi.describe(),
    })
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone)]
pub struct StepCdf {
    /// Sorted sample values.
    values: Vec<f64>,
}

impl StepCdf {
    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Empirical CDF of raw samples.
pub fn empirical_cdf(samples: &[f64]) -> StepCdf {
    let mut values = samples.to_vec();
    values.sort_unstable_by(f64::total_cmp);
    StepCdf { values }
}

/// Empirical CDF of per-configuration maxima. Empty configurations are
/// skipped; the number skipped is returned alongside.
pub fn empirical_max_cdf(configs: &[PointConfiguration]) -> (StepCdf, usize) {
    let mut values: Vec<f64> = Vec::with_capacity(configs.len());
    let mut skipped = 0usize;
    for config in configs {
        match config.max() {
            Some(m) => values.push(m),
            None => skipped += 1,
        }
    }
    values.sort_unstable_by(f64::total_cmp);
    (StepCdf { values }, skipped)
}

/// A reference distribution for KS comparisons. `cdf_left` is the left limit;
/// it differs from `cdf` only for discrete references.
pub trait ReferenceCdf {
    fn cdf(&self, x: f64) -> f64;
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl<F: Fn(f64) -> f64> ReferenceCdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

impl ReferenceCdf for &StepCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn cdf_left(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.values.len() as f64
    }
}

/// Kolmogorov-Smirnov distance between an empirical CDF and a reference,
/// evaluated at the jump points; both the right values and the left limits
/// of the two functions are compared, so an empirical CDF has distance 0
/// from itself while continuous references get the standard two-gap statistic.
pub fn ks_distance<R: ReferenceCdf>(empirical: &StepCdf, reference: R) -> f64 {
    let n = empirical.values.len();
    if n == 0 {
        return 0.0;
    }
    let mut d: f64 = 0.0;
    let mut i = 0usize;
    while i < n {
        let x = empirical.values[i];
        let mut j = i;
        while j + 1 < n && empirical.values[j + 1] == x {
            j += 1;
        }
        let hi = (j + 1) as f64 / n as f64 - reference.cdf(x);
        let lo = reference.cdf_left(x) - i as f64 / n as f64;
        d = d.max(hi.abs()).max(lo.abs());
        i = j + 1;
    }
    d
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let ca = empirical_cdf(a);
    let cb = empirical_cdf(b);
    let mut d: f64 = 0.0;
    for &x in ca.values().iter().chain(cb.values()) {
        d = d.max((ca.eval(x) - cb.eval(x)).abs());
    }
    d
}

/// Variance-to-mean ratio with a chi-square dispersion p-value
/// (upper tail: evidence of overdispersion).
pub fn poisson_dispersion(counts: &[u64]) -> Result<(f64, f64)> {
    if counts.len() < 30 {
        return Err(Error::EmptyInput(format!(
            "poisson_dispersion needs >= 30 counts, got {}",
            counts.len()
        )));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Numerical("all counts zero; dispersion undefined".into()));
    }
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    let index = var / mean;
    let statistic = (n - 1.0) * index;
    let chi2 = statrs::distribution::ChiSquared::new(n - 1.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let p = 1.0 - chi2.cdf(statistic);
    Ok((index, p))
}

/// Verdict for one panel function.
#[derive(Debug, Clone, Serialize)]
pub struct PanelVerdict {
    pub phi: String,
    pub a: LaplaceEstimate,
    pub b: LaplaceEstimate,
    pub overlap: bool,
}

/// Outcome of a two-process comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub panel: Vec<PanelVerdict>,
    pub max_ks: f64,
    pub max_ks_threshold: f64,
    pub skipped_empty_a: usize,
    pub skipped_empty_b: usize,
    pub pass: bool,
}

/// Compare two families of point configurations: per-function Laplace CIs must
/// overlap and the max laws must agree to `max_ks_threshold` in KS distance.
pub fn compare_processes(
    a: &[PointConfiguration],
    b: &[PointConfiguration],
    phi_panel: &[TestFunction],
    max_ks_threshold: f64,
) -> Result<ComparisonReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("compare_processes needs samples on both sides".into()));
    }
    let mut panel = Vec::with_capacity(phi_panel.len());
    let mut all_overlap = true;
    for phi in phi_panel {
        let ea = laplace_functional(a, phi)?;
        let eb = laplace_functional(b, phi)?;
        let overlap = ea.overlaps(&eb);
        all_overlap &= overlap;
        panel.push(PanelVerdict {
            phi: phi.describe(),
            a: ea,
            b: eb,
            overlap,
        });
    }
    let (cdf_a, skipped_a) = empirical_max_cdf(a);
    let (cdf_b, skipped_b) = empirical_max_cdf(b);
    let maxima_a: Vec<f64> = cdf_a.values().to_vec();
    let maxima_b: Vec<f64> = cdf_b.values().to_vec();
    let max_ks = ks_two_sample(&maxima_a, &maxima_b);
    Ok(ComparisonReport {
        panel,
        max_ks,
        max_ks_threshold,
        skipped_empty_a: skipped_a,
        skipped_empty_b: skipped_b,
        pass: all_overlap && max_ks < max_ks_threshold,
    })
}

/// Outcome of the superposition invariance check.
#[derive(Debug, Clone, Serialize)]
pub struct SuperpositionReport {
    pub starts: Vec<f64>,
    pub panel: Vec<PanelVerdict>,
    pub panel_pass: bool,
    /// Max-law KS after fitting the best scalar shift.
    pub shifted_max_ks: f64,
    pub fitted_shift: f64,
    /// Components that essentially never place a particle near the front.
    pub dominated_components: Vec<usize>,
}

/// Simulate the superposition of BBMs started at `starts`, compare the gap
/// process of the superposed extremal configuration against the single-BBM gap
/// law on a Laplace panel; max laws are compared only after an optimal scalar
/// shift fit.
pub fn superposition_check(
    starts: &[f64],
    t: f64,
    replicas: u64,
    seed: u64,
    law: &BranchingLaw,
) -> Result<SuperpositionReport> {
    if starts.is_empty() {
        return Err(Error::EmptyInput("superposition_check needs at least one start".into()));
    }
    let config = SimConfig {
        prune_gap: Some(8.0),
        ..SimConfig::at_horizon(t, seed)
    };
    let single_config = SimConfig {
        seed: mix64(seed ^ 0x5e1f),
        ..config.clone()
    };

    // Superposed side: per replica, one independent BBM per start.
    let mut super_gaps = Vec::with_capacity(replicas as usize);
    let mut super_maxima = Vec::with_capacity(replicas as usize);
    // Count, per component, how often it contributes a point within 4 of the max.
    let mut front_hits = vec![0u64; starts.len()];
    for replica in 0..replicas {
        let mut points: Vec<(f64, usize)> = Vec::new();
        for (c, &start) in starts.iter().enumerate() {
            let component_config = SimConfig {
                seed: mix64(seed ^ mix64(c as u64 ^ 0xabcd)),
                ..config.clone()
            };
            let result = engine::simulate_replica(&component_config, law, replica)?;
            let snap = &result.snapshots[0];
            points.extend(snap.particles.iter().map(|p| (p.position + start, c)));
        }
        if points.is_empty() {
            continue;
        }
        let max = points.iter().map(|&(x, _)| x).fold(f64::NEG_INFINITY, f64::max);
        // Per-component front flags, deduplicated within the replica.
        let mut seen = vec![false; starts.len()];
        for &(x, c) in &points {
            if x >= max - 4.0 {
                seen[c] = true;
            }
        }
        for (c, s) in seen.iter().enumerate() {
            if *s {
                front_hits[c] += 1;
            }
        }
        super_maxima.push(max);
        super_gaps.push(PointConfiguration::new(
            points.iter().map(|&(x, _)| x - max),
            Origin::ClusterGaps,
        ));
    }

    // Single-BBM side.
    let single_results = engine::simulate_many(&single_config, law, replicas)?;
    let mut single_gaps = Vec::with_capacity(replicas as usize);
    let mut single_maxima = Vec::with_capacity(replicas as usize);
    for result in &single_results {
        let snap = &result.snapshots[0];
        if snap.is_empty() {
            continue;
        }
        let max = engine::max_displacement(snap)?;
        single_maxima.push(max);
        single_gaps.push(PointConfiguration::new(
            snap.particles.iter().map(|p| p.position - max),
            Origin::ClusterGaps,
        ));
    }

    let panel_fns = default_panel();
    let mut panel = Vec::new();
    let mut panel_pass = true;
    for phi in &panel_fns {
        let ea = laplace_functional(&super_gaps, phi)?;
        let eb = laplace_functional(&single_gaps, phi)?;
        let overlap = ea.overlaps(&eb);
        panel_pass &= overlap;
        panel.push(PanelVerdict {
            phi: phi.describe(),
            a: ea,
            b: eb,
            overlap,
        });
    }

    // Optimal scalar shift: median difference.
    let fitted_shift = median(&super_maxima) - median(&single_maxima);
    let shifted: Vec<f64> = super_maxima.iter().map(|m| m - fitted_shift).collect();
    let shifted_max_ks = ks_two_sample(&shifted, &single_maxima);

    let threshold = (replicas as f64 * 0.005).max(1.0);
    let dominated_components = front_hits
        .iter()
        .enumerate()
        .filter(|&(_, &hits)| (hits as f64) < threshold)
        .map(|(c, _)| c)
        .collect();

    Ok(SuperpositionReport {
        starts: starts.to_vec(),
        panel,
        panel_pass,
        shifted_max_ks,
        fitted_shift,
        dominated_components,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
