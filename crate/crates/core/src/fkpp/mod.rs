//! Numerical F-KPP laboratory: solver with general initial data,
//! traveling-wave extraction, tail constants, the Brownian-bridge integral
//! approximation of the solution far ahead of the front, and the constants
//! defined through F-KPP tail integrals.
//!
//! Two equivalent writings of the equation are supported. In the `U`
//! convention the field is a CDF-like quantity rising from 0 on the left to 1
//! on the right, with reaction `sum_k p_k u^k - u`. In the `V` convention the
//! field is the complementary quantity with reaction `v - sum_k p_k v^k`. For
//! the binary law the two are exact mirror images under `u -> 1 - v`; tail
//! quantities are computed on `V` fields, where values ahead of the front are
//! resolved to full relative precision.

mod laplace;
mod psi;
mod solver;
mod wave;

pub use laplace::{gumbel_mixture_cdf, laplace_constant, median_matched_c, LaplaceConstant};
pub use psi::{
    bridge_below_line_prob, bridge_below_line_mc, front_tail_asymptotics, psi_approx,
    AsymptoticsMode, AsymptoticsReport, PsiValue,
};
pub use solver::{solve, Bc, Convention, Frame, Grid, InitialCondition, SolutionField};
pub use wave::{
    extract_profile, front_position, shift_fit_difference, wave_ode_residual, wave_profile,
    Centering, TailFit, WaveProfile, WaveProfileResult,
};

/// Least-squares tail fit of `(1 - omega(x)) / (x e^{-sqrt2 x})` over a window.
pub fn tail_constant(profile: &WaveProfile, window: (f64, f64)) -> crate::Result<TailFit> {
    wave::tail_constant(profile, window)
}
