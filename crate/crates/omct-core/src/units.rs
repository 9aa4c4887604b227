//! Unit conventions and physical constants.
//!
//! Every rate and frequency exposed by this crate is an *ordinary* frequency
//! (ω/2π) in Hz, matching the way such quantities are quoted for these devices
//! ("γ0/(2π) = 660 kHz"). Formulas that need an angular rate — exponential
//! decay, scattering probabilities, detected-photon rates — multiply by 2π at
//! the point of use via [`angular`].

/// 2π, the conversion factor between ordinary and angular frequency.
pub const TAU: f64 = std::f64::consts::TAU;

/// Planck constant (J·s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Convert an ordinary frequency (Hz, ω/2π) to an angular rate (rad/s).
#[inline]
pub fn angular(hz: f64) -> f64 {
    TAU * hz
}
