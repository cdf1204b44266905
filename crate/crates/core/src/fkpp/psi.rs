//! The Brownian-bridge integral approximation of the F-KPP solution far ahead
//! of the front, the exact bridge-crossing formula it rests on, and the
//! associated tail asymptotics.

use super::solver::{Convention, Frame, SolutionField};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::SQRT2;
use serde::Serialize;

/// `psi` evaluated at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiValue {
    pub value: f64,
    /// `e^{sqrt2 X} psi`: finite even when `value` underflows.
    pub scaled: f64,
    /// Inside the regime `t >= 8r`, `X >= 8r - (3/(2 sqrt2)) log t`.
    pub in_validity_window: bool,
}

fn beta_of(t: f64) -> f64 {
    1.5 / SQRT2 * t.ln()
}

/// `e^{sqrt2 X} psi(r, t, X + sqrt2 t)` by trapezoid quadrature over the
/// stored field at time `r` (a co-moving `V` field).
fn psi_scaled(field: &SolutionField, r: f64, t: f64, x_offset: f64) -> Result<f64> {
    if field.grid.frame != Frame::Comoving || field.convention != Convention::V {
        return Err(Error::InvalidConfig(
            "psi quadrature needs a co-moving V-convention field".into(),
        ));
    }
    if (field.time - r).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "field is at time {}, not r = {r}",
            field.time
        )));
    }
    if !(t > r) {
        return Err(Error::InvalidConfig(format!("need t > r, got t = {t}, r = {r}")));
    }
    let tau = t - r;
    let beta = beta_of(t);
    let grid = &field.grid;
    let n = grid.n_points();
    let usable_hi = grid.x_max - 10.0;
    let mut integrand: Vec<f64> = Vec::with_capacity(n);
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
        let gauss = (-(y - x_offset) * (y - x_offset) / (2.0 * tau)).exp();
        let bridge = 1.0 - (-2.0 * y * (x_offset + beta) / tau).exp();
        let g = v * (SQRT2 * y).exp() * gauss * bridge;
        peak = peak.max(g);
        integrand.push(g);
    }
    // Truncate where the integrand falls below 1e-14 of its peak.
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
    Ok(acc / (2.0 * std::f64::consts::PI * tau).sqrt())
}

/// Evaluate `psi(r, t, X + sqrt2 t)`; warns (via the flag) outside the
/// validity regime of the sandwich bounds.
pub fn psi_approx(field: &SolutionField, r: f64, t: f64, x_offset: f64) -> Result<PsiValue> {
    let scaled = psi_scaled(field, r, t, x_offset)?;
    let in_validity_window = t >= 8.0 * r && x_offset >= 8.0 * r - beta_of(t);
    Ok(PsiValue {
        value: (-SQRT2 * x_offset).exp() * scaled,
        scaled,
        in_validity_window,
    })
}

/// Probability that a Brownian bridge of length `t` (from 0 to 0) stays below
/// the line interpolating `A` at time 0 and `B` at time `t`.
pub fn bridge_below_line_prob(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::InvalidConfig("endpoints must be nonnegative".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("t = {t} must be positive")));
    }
    Ok(1.0 - (-2.0 * a * b / t).exp())
}

/// Monte Carlo oracle for the bridge probability. The path is monitored at
/// `steps` points and interval crossings are completed by exact Bernoulli
/// draws (the barrier is linear, so the crossing probability of each bridge
/// segment is known in closed form); the estimator has no discretisation bias.
pub fn bridge_below_line_mc(
    a: f64,
    b: f64,
    t: f64,
    steps: usize,
    replicas: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if steps < 2 || replicas == 0 {
        return Err(Error::InvalidConfig("need steps >= 2 and replicas >= 1".into()));
    }
    let dt = t / steps as f64;
    let mut survived = 0u64;
    let mut walk = vec![0.0f64; steps + 1];
    for replica in 0..replicas {
        let mut stream = Stream::named(seed, 0x8000_0000 | replica);
        let mut acc = 0.0;
        walk[0] = 0.0;
        for i in 1..=steps {
            acc += dt.sqrt() * stream.standard_normal();
            walk[i] = acc;
        }
        let end = walk[steps];
        let mut ok = true;
        let mut d_prev = a; // distance below the line at time 0
        for i in 1..=steps {
            let s = i as f64 * dt;
            let bridge = walk[i] - (s / t) * end;
            let line = a + (b - a) * s / t;
            let d = line - bridge;
            if d <= 0.0 {
                ok = false;
                break;
            }
            // Exact within-interval crossing completion.
            let p_cross = (-2.0 * d_prev * d / dt).exp();
            if stream.uniform() <= p_cross {
                ok = false;
                break;
            }
            d_prev = d;
        }
        if ok {
            survived += 1;
        }
    }
    let p = survived as f64 / replicas as f64;
    let se = (p * (1.0 - p) / replicas as f64).sqrt();
    Ok((p, se))
}

/// Which scaling regime the asymptotics report evaluates.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum AsymptoticsMode {
    /// `e^{sqrt2 x} (t^{3/2} / log t) psi(r, t, x + sqrt2 t)` at fixed `x`.
    FixedX { x: f64 },
    /// `e^{sqrt2 x} (t^{3/2} / x) psi(r, t, x + y + sqrt2 t)` at `x = a sqrt t`.
    SqrtT { a: f64, y: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub mode: AsymptoticsMode,
    pub values: Vec<(f64, f64)>,
    pub final_value: f64,
    /// Relative change between the last two entries.
    pub relative_drift: f64,
    pub stabilized: bool,
}

/// Evaluate the normalised psi functional along a t-sequence and report
/// whether it stabilises. Pure quadrature against the stored `r` field; the
/// scaled form is used internally, so huge `X` does not underflow.
pub fn front_tail_asymptotics(
    field: &SolutionField,
    r: f64,
    t_sequence: &[f64],
    mode: AsymptoticsMode,
) -> Result<AsymptoticsReport> {
    if t_sequence.len() < 2 {
        return Err(Error::InvalidConfig("need at least two times".into()));
    }
    let mut values = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let value = match mode {
            AsymptoticsMode::FixedX { x } => {
                // e^{sqrt2 x} psi(X = x) = e^{-sqrt2*0} * scaled... scaled
                // already carries e^{sqrt2 X}; here X = x exactly.
                let scaled = psi_scaled(field, r, t, x)?;
                scaled * t.powf(1.5) / t.ln()
            }
            AsymptoticsMode::SqrtT { a, y } => {
                let x = a * t.sqrt();
                let scaled = psi_scaled(field, r, t, x + y)?;
                // e^{sqrt2 x} psi(X = x + y) = e^{-sqrt2 y} scaled.
                (-SQRT2 * y).exp() * scaled * t.powf(1.5) / x
            }
        };
        values.push((t, value));
    }
    let last = values[values.len() - 1].1;
    let prev = values[values.len() - 2].1;
    let relative_drift = if last == 0.0 && prev == 0.0 {
        0.0
    } else {
        (last - prev).abs() / last.abs().max(f64::MIN_POSITIVE)
    };
    Ok(AsymptoticsReport {
        mode,
        values,
        final_value: last,
        relative_drift,
        stabilized: relative_drift < 0.02,
    })
}
