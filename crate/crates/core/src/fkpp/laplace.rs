//! Constants defined through F-KPP tail integrals, and the randomly shifted
//! Gumbel mixture they parameterise.

use super::solver::{solve, Convention, Frame, Grid, InitialCondition, SolutionField};
use crate::error::{Error, Result};
use crate::law::BranchingLaw;
use crate::stats::TestFunction;
use crate::SQRT2;
use serde::Serialize;

/// Outcome of a tail-constant computation.
#[derive(Debug, Clone, Serialize)]
pub struct LaplaceConstant {
    pub c: f64,
    /// Relative change between the two evaluation times.
    pub drift: f64,
    /// Drift at or below 5%.
    pub converged: bool,
    pub t_early: f64,
    pub t_late: f64,
    pub phi: String,
    pub delta: Option<f64>,
}

/// `sqrt(2/pi) * integral_0^inf v(t, y + sqrt2 t) y e^{sqrt2 y} dy` computed by
/// trapezoid on the solver grid, truncated where the integrand falls below
/// 1e-14 of its peak. Needs a co-moving V field.
pub fn tail_integral(field: &SolutionField) -> Result<f64> {
    if field.grid.frame != Frame::Comoving || field.convention != Convention::V {
        return Err(Error::InvalidConfig(
            "tail integral needs a co-moving V-convention field".into(),
        ));
    }
    let grid = &field.grid;
    let n = grid.n_points();
    let usable_hi = grid.x_max - 10.0;
    let mut integrand = Vec::with_capacity(n);
    let mut peak: f64 = 0.0;
    for i in 0..n {
        let y = grid.x(i);
        if y < 0.0 || y > usable_hi {
            integrand.push(0.0);
            continue;
        }
        let v = field.values[i];
        if v <= 0.0 {
            integrand.push(0.0);
            continue;
        }
        let g = v * y * (SQRT2 * y).exp();
        peak = peak.max(g);
        integrand.push(g);
    }
    let floor = 1e-14 * peak;
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let a = integrand[i];
        let b = integrand[i + 1];
        if a < floor && b < floor {
            continue;
        }
        acc += 0.5 * (a + b) * grid.dx;
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * acc)
}

/// Compute `C(phi)` (or `C(phi, delta)` for the cutoff variant): solve the
/// one-minus form with initial datum `1 - e^{-phi(-x)}` (cutoff: forced to 1
/// left of `-delta`), evaluate the tail integral at two large times, and
/// report the value at the later time with the inter-time drift.
pub fn laplace_constant(
    phi: &TestFunction,
    delta: Option<f64>,
    law: &BranchingLaw,
    grid: &Grid,
    t_early: f64,
    t_late: f64,
) -> Result<LaplaceConstant> {
    if !(0.0 < t_early && t_early < t_late) {
        return Err(Error::InvalidConfig("need 0 < t_early < t_late".into()));
    }
    let ic = match delta {
        Some(d) => InitialCondition::ExpPhiCutoff {
            phi: phi.clone(),
            delta: d,
        },
        None => InitialCondition::ExpPhi { phi: phi.clone() },
    };
    let fields = solve(&ic, law, grid, t_late, &[t_early, t_late], Convention::V)?;
    let early = tail_integral(&fields[0])?;
    let late = tail_integral(&fields[1])?;
    let drift = if late == 0.0 && early == 0.0 {
        0.0
    } else {
        (late - early).abs() / late.abs().max(f64::MIN_POSITIVE)
    };
    Ok(LaplaceConstant {
        c: late,
        drift,
        converged: drift <= 0.05,
        t_early,
        t_late,
        phi: phi.describe(),
        delta,
    })
}

/// `E[exp(-C z e^{-sqrt2 x})]` over the empirical `z` samples.
pub fn gumbel_mixture_cdf(x: f64, c: f64, z_samples: &[f64]) -> Result<f64> {
    if z_samples.is_empty() {
        return Err(Error::EmptyInput("gumbel_mixture_cdf needs z samples".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("C = {c} must be positive")));
    }
    let factor = (-SQRT2 * x).exp();
    let mean = z_samples
        .iter()
        .map(|&z| (-c * z * factor).exp())
        .sum::<f64>()
        / z_samples.len() as f64;
    Ok(mean)
}

/// The `C` for which the mixture's median sits at `target_median`:
/// solves `E[exp(-C z e^{-sqrt2 median})] = 1/2` by bisection. This fixes the
/// one free translation degree of freedom of the mixture representation.
pub fn median_matched_c(z_samples: &[f64], target_median: f64) -> Result<f64> {
    if z_samples.is_empty() {
        return Err(Error::EmptyInput("median_matched_c needs z samples".into()));
    }
    let eval = |c: f64| gumbel_mixture_cdf(target_median, c, z_samples).unwrap();
    let (mut lo, mut hi) = (1e-12, 1e12);
    if eval(lo) < 0.5 || eval(hi) > 0.5 {
        return Err(Error::Numerical("median matching out of bracket".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if eval(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
