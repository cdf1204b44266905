//! Traveling-wave extraction, the wave ODE residual, and tail-constant fits.

use super::solver::{Convention, Frame, SolutionField};
use crate::engine::centering_m;
use crate::error::{Error, Result};
use crate::law::BranchingLaw;
use crate::SQRT2;
use serde::Serialize;

/// How the wave profile is re-centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Centering {
    /// Shift so the level-1/2 crossing sits at x = 0. Pins the phase exactly
    /// at every time.
    ByMedian,
    /// Shift by `m(t)`. Converges to the front-centered wave but carries the
    /// slowly decaying O(1/sqrt t) phase drift of the centering itself.
    ByM,
}

/// A re-centered wave profile on a uniform grid.
///
/// Values are stored in the `V` form (`1 - omega`), which keeps full relative
/// precision ahead of the front; `omega` itself is exposed through `u_at`.
/// Node positions are exact reals: the stored values are untouched field
/// samples (the centering shift is snapped to whole grid cells), so finite
/// differences of the values are clean.
#[derive(Debug, Clone, Serialize)]
pub struct WaveProfile {
    pub x0: f64,
    pub dx: f64,
    pub v_values: Vec<f64>,
    pub centering: Centering,
    pub time: f64,
}

impl WaveProfile {
    pub fn len(&self) -> usize {
        self.v_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x0, self.x(self.len().saturating_sub(1)))
    }

    /// `omega(x)` by linear interpolation.
    pub fn u_at(&self, x: f64) -> f64 {
        1.0 - self.v_at(x)
    }

    /// `1 - omega(x)` by linear interpolation.
    pub fn v_at(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        let n = self.v_values.len();
        if s <= 0.0 {
            return self.v_values[0];
        }
        if s >= (n - 1) as f64 {
            return self.v_values[n - 1];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.v_values[i] * (1.0 - w) + self.v_values[i + 1] * w
    }
}

/// Linear-interpolated position of the rightmost crossing of `level`.
pub fn front_position(field: &SolutionField, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level {level} outside (0,1)")));
    }
    let values = &field.values;
    let n = values.len();
    for i in (0..n - 1).rev() {
        let a = values[i] - level;
        let b = values[i + 1] - level;
        if a == 0.0 {
            return Ok(field.grid.x(i));
        }
        if a * b < 0.0 {
            let w = a / (a - b);
            return Ok(field.grid.x(i) + w * field.grid.dx);
        }
    }
    if values[n - 1] == level {
        return Ok(field.grid.x(n - 1));
    }
    Err(Error::NoCrossing(level))
}

/// Centering shift for a field: the x-position that should map to 0.
fn centering_shift(field: &SolutionField, centering: Centering) -> Result<f64> {
    match centering {
        Centering::ByMedian => front_position(field, 0.5),
        Centering::ByM => {
            let m = centering_m(field.time)?;
            Ok(match field.grid.frame {
                Frame::Lab => m,
                Frame::Comoving => m - SQRT2 * field.time,
            })
        }
    }
}

/// Extract a re-centered profile from one field. The shift is snapped to a
/// whole number of grid cells; the sub-cell remainder goes into the exact
/// node coordinates, so stored values are raw field samples.
pub fn extract_profile(
    field: &SolutionField,
    centering: Centering,
    margin: f64,
) -> Result<WaveProfile> {
    let shift = centering_shift(field, centering)?;
    let grid = &field.grid;
    let n = grid.n_points();
    let lo = ((grid.x_min + margin - grid.x_min) / grid.dx).ceil() as usize;
    let hi = ((grid.x_max - margin - grid.x_min) / grid.dx).floor() as usize;
    if lo >= hi || hi >= n {
        return Err(Error::InvalidConfig("margin leaves no interior nodes".into()));
    }
    let v_values: Vec<f64> = (lo..=hi)
        .map(|i| match field.convention {
            Convention::V => field.values[i],
            Convention::U => 1.0 - field.values[i],
        })
        .collect();
    Ok(WaveProfile {
        x0: grid.x(lo) - shift,
        dx: grid.dx,
        v_values,
        centering,
        time: field.time,
    })
}

/// Result of a two-time wave extraction.
#[derive(Debug, Clone, Serialize)]
pub struct WaveProfileResult {
    pub profile: WaveProfile,
    /// Sup-norm discrepancy between the two re-centered profiles.
    pub discrepancy: f64,
    /// Discrepancy at or below 0.01.
    pub converged: bool,
}

/// Re-center profiles at two large times and return the later one together
/// with the sup-norm discrepancy between them as a convergence certificate.
pub fn wave_profile(
    early: &SolutionField,
    late: &SolutionField,
    centering: Centering,
) -> Result<WaveProfileResult> {
    if !(early.time < late.time) {
        return Err(Error::InvalidConfig("need two fields with increasing times".into()));
    }
    let a = extract_profile(early, centering, 10.0)?;
    let b = extract_profile(late, centering, 10.0)?;
    let lo = a.x_range().0.max(b.x_range().0);
    let hi = a.x_range().1.min(b.x_range().1);
    if !(hi > lo) {
        return Err(Error::InvalidConfig("profiles do not overlap".into()));
    }
    let mut discrepancy: f64 = 0.0;
    for (i, _) in b.v_values.iter().enumerate() {
        let x = b.x(i);
        if x < lo || x > hi {
            continue;
        }
        discrepancy = discrepancy.max((b.v_at(x) - a.v_at(x)).abs());
    }
    Ok(WaveProfileResult {
        profile: b,
        discrepancy,
        converged: discrepancy <= 0.01,
    })
}

/// Best scalar shift aligning `a` onto `b` (median crossings), then the
/// sup-norm difference after the shift.
pub fn shift_fit_difference(a: &WaveProfile, b: &WaveProfile) -> Result<(f64, f64)> {
    let median_of = |p: &WaveProfile| -> Result<f64> {
        // Bisection on the interpolated profile.
        let (mut lo, mut hi) = p.x_range();
        if !((p.u_at(lo) - 0.5) * (p.u_at(hi) - 0.5) < 0.0) {
            return Err(Error::NoCrossing(0.5));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (p.u_at(mid) - 0.5) * (p.u_at(lo) - 0.5) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let shift = median_of(b)? - median_of(a)?;
    let lo = (a.x_range().0 + shift).max(b.x_range().0);
    let hi = (a.x_range().1 + shift).min(b.x_range().1);
    let mut d: f64 = 0.0;
    let mut x = lo;
    while x <= hi {
        d = d.max((a.v_at(x - shift) - b.v_at(x)).abs());
        x += b.dx;
    }
    Ok((shift, d))
}

/// Discrete L2 norm of `0.5 w'' + sqrt2 w' + sum p_k w^k - w` over the
/// interior of the profile (the traveling-wave equation in the U form).
pub fn wave_ode_residual(profile: &WaveProfile, law: &BranchingLaw) -> f64 {
    let n = profile.len();
    if n < 3 {
        return 0.0;
    }
    let dx = profile.dx;
    let mut sum2 = 0.0;
    for i in 1..n - 1 {
        // omega = 1 - v; derivatives flip sign.
        let w_m = 1.0 - profile.v_values[i - 1];
        let w_0 = 1.0 - profile.v_values[i];
        let w_p = 1.0 - profile.v_values[i + 1];
        let d2 = (w_p - 2.0 * w_0 + w_m) / (dx * dx);
        let d1 = (w_p - w_m) / (2.0 * dx);
        let r = 0.5 * d2 + SQRT2 * d1 + law.generating(w_0) - w_0;
        sum2 += r * r;
    }
    (sum2 * dx).sqrt()
}

/// Tail-constant fit.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub constant: f64,
    /// (max - min) / mean of the windowed ratio values.
    pub variation: f64,
    /// Variation within 10%.
    pub reliable: bool,
    pub window: (f64, f64),
}

/// Fit `(1 - omega(x)) / (x e^{-sqrt2 x})` to a constant over `window` by
/// log-space least squares with uniform weights; also report the relative
/// variation of the ratio across the window.
pub fn tail_constant(profile: &WaveProfile, window: (f64, f64)) -> Result<TailFit> {
    let (lo, hi) = window;
    if !(hi > lo && lo > 0.0) {
        return Err(Error::BadWindow {
            lo,
            hi,
            reason: "need 0 < lo < hi".into(),
        });
    }
    let (range_lo, range_hi) = profile.x_range();
    if lo < range_lo || hi > range_hi {
        return Err(Error::BadWindow {
            lo,
            hi,
            reason: format!("outside profile range [{range_lo:.2}, {range_hi:.2}]"),
        });
    }
    let mut log_sum = 0.0;
    let mut count = 0usize;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut mean_ratio = 0.0;
    for i in 0..profile.len() {
        let x = profile.x(i);
        if x < lo || x > hi {
            continue;
        }
        let v = profile.v_values[i];
        if !(v > 0.0) {
            return Err(Error::Numerical(format!(
                "tail not resolved at x = {x} (1 - omega = {v})"
            )));
        }
        if 1.0 - v < 0.99 {
            return Err(Error::BadWindow {
                lo,
                hi,
                reason: format!("omega({x}) = {} below 0.99; window not in the tail", 1.0 - v),
            });
        }
        let ratio = v / (x * (-SQRT2 * x).exp());
        log_sum += ratio.ln();
        mean_ratio += ratio;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        count += 1;
    }
    if count < 8 {
        return Err(Error::BadWindow {
            lo,
            hi,
            reason: format!("only {count} nodes in window"),
        });
    }
    mean_ratio /= count as f64;
    let variation = (max_ratio - min_ratio) / mean_ratio;
    Ok(TailFit {
        constant: (log_sum / count as f64).exp(),
        variation,
        reliable: variation <= 0.10,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fkpp::solver::{solve, Grid, InitialCondition};
    use approx::assert_abs_diff_eq;

    fn synthetic_profile(f: impl Fn(f64) -> f64, x0: f64, dx: f64, n: usize) -> WaveProfile {
        WaveProfile {
            x0,
            dx,
            v_values: (0..n).map(|i| f(x0 + i as f64 * dx)).collect(),
            centering: Centering::ByMedian,
            time: 0.0,
        }
    }

    #[test]
    fn front_position_trivials() {
        let grid = Grid::comoving(-4.0, 4.0, 0.05, 0.02);
        let n = grid.n_points();
        // Exact Heaviside data: crossing at 0 for any level.
        let values: Vec<f64> = (0..n).map(|i| if grid.x(i) < 0.0 { 1.0 } else { 0.0 }).collect();
        let field = SolutionField {
            time: 0.0,
            grid,
            convention: Convention::V,
            values: values.clone(),
        };
        for level in [0.2, 0.5, 0.8] {
            let x = front_position(&field, level).unwrap();
            assert!(x.abs() < grid.dx, "level {level}: {x}");
        }
        // Translation moves the front by the same amount, exactly.
        let shifted: Vec<f64> = (0..n).map(|i| if grid.x(i) < 1.0 { 1.0 } else { 0.0 }).collect();
        let field2 = SolutionField {
            time: 0.0,
            grid,
            convention: Convention::V,
            values: shifted,
        };
        let a = front_position(&field, 0.5).unwrap();
        let b = front_position(&field2, 0.5).unwrap();
        assert_abs_diff_eq!(b - a, 1.0, epsilon = 1e-12);
        // No crossing -> error.
        let flat = SolutionField {
            time: 0.0,
            grid,
            convention: Convention::V,
            values: vec![0.9; n],
        };
        assert!(front_position(&flat, 0.5).is_err());
    }

    #[test]
    fn identical_fields_zero_discrepancy() {
        let grid = Grid::comoving_default();
        let law = crate::law::BranchingLaw::binary();
        let fields = solve(
            &InitialCondition::Heaviside,
            &law,
            &grid,
            30.0,
            &[30.0],
            Convention::V,
        )
        .unwrap();
        let mut early = fields[0].clone();
        early.time = 29.0; // same data presented as an earlier time
        let result = wave_profile(&early, &fields[0], Centering::ByMedian).unwrap();
        assert!(result.discrepancy < 1e-12);
        assert!(result.converged);
    }

    #[test]
    fn residual_trivials() {
        let law = crate::law::BranchingLaw::binary();
        let zero = synthetic_profile(|_| 1.0, -5.0, 0.02, 400); // omega = 0
        assert_eq!(wave_ode_residual(&zero, &law), 0.0);
        let one = synthetic_profile(|_| 0.0, -5.0, 0.02, 400); // omega = 1
        assert_eq!(wave_ode_residual(&one, &law), 0.0);
    }

    #[test]
    fn tail_constant_exact_form() {
        // 1 - omega = 0.7 x e^{-sqrt2 x}: recovers 0.7 within 1e-6.
        let profile = synthetic_profile(
            |x| 0.7 * x * (-SQRT2 * x).exp(),
            4.0,
            0.02,
            400,
        );
        let fit = tail_constant(&profile, (5.0, 9.0)).unwrap();
        assert_abs_diff_eq!(fit.constant, 0.7, epsilon = 1e-6);
        assert!(fit.reliable);
        assert!(fit.variation < 1e-9);
    }

    #[test]
    fn tail_constant_wrong_decay_flagged() {
        // 1 - omega = e^{-2x}: not the right tail shape; flagged unreliable.
        let profile = synthetic_profile(|x| (-2.0 * x).exp(), 4.0, 0.02, 400);
        let fit = tail_constant(&profile, (5.0, 9.0)).unwrap();
        assert!(!fit.reliable, "variation {}", fit.variation);
    }

    #[test]
    fn tail_constant_window_validation() {
        let profile = synthetic_profile(|x| 0.5 * x * (-SQRT2 * x).exp(), 4.0, 0.02, 400);
        assert!(tail_constant(&profile, (9.0, 5.0)).is_err());
        assert!(tail_constant(&profile, (2.0, 30.0)).is_err());
        // Window where omega < 0.99 is rejected.
        let front = synthetic_profile(|x| 1.0 / (1.0 + (SQRT2 * x).exp()), -2.0, 0.02, 400);
        assert!(tail_constant(&front, (0.5, 1.5)).is_err());
    }
}
