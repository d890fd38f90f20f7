//! Physical constants and the phase convention.
//!
//! Time dependence is `exp(+iωt)` everywhere. A resonance is written
//! `ω̃ = ω − iΔω` with `Δω > 0` for a lossy mode, a passive medium has
//! `n = n′ − i·n″` with `n″ > 0`, and a wave crossing a slab of length `l`
//! picks up `P = exp(−i·k0·n·l)`.
//!
//! Circuit-level natural frequencies come out of the nodal equations as
//! `ω = ω′ + iγ` with `γ > 0` for decay, i.e. the complex conjugate of the
//! resonance notation above. [`crate::circuit_model::circuit_modes`] returns
//! them already conjugated.

use std::f64::consts::PI;

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Reference impedance of the measurement system, Ω.
pub const Z_REF: f64 = 50.0;

/// Radians per second from hertz.
#[inline]
pub fn ang(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// Hertz from radians per second.
#[inline]
pub fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Default material and resonator constants.
pub mod defaults {
    /// γμ0/2π, Hz/T.
    pub const GAMMA_MU0_HZ_PER_T: f64 = 28.0e9;
    /// μ0·Ms of YIG, T.
    pub const MU0_MS: f64 = 0.175;
    /// Gilbert damping of the stand-alone coupled-mode model.
    pub const ALPHA: f64 = 1.0e-4;
    /// ISRR resonance, Hz.
    pub const F_ISRR: f64 = 3.4e9;
    /// ISRR half linewidth, Hz.
    pub const DF_ISRR: f64 = 30.0e6;
    /// Magnon half linewidth, Hz.
    pub const DF_MAGNON: f64 = 3.0e6;
    /// Sample length, m.
    pub const LS: f64 = 0.005;
    /// Fitted coupling for the forward direction.
    pub const KAPPA_RE: f64 = 0.0296;
    pub const KAPPA_IM: f64 = 0.0088;
    /// Microstrip-YIG coupling.
    pub const M0: f64 = 0.085;
    /// ISRR-YIG mutual coupling for the forward direction.
    pub const MC_RE: f64 = 0.0093;
    pub const MC_IM: f64 = -0.0028;
}
