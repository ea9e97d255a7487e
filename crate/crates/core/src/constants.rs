//! CODATA 2018 exact / recommended values, SI units.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mean molecular mass of dry air in atomic mass units.
pub const AIR_MOLECULAR_MASS_AMU: f64 = 28.97;
/// Numerical prefactor of the free-molecular (Epstein) drag on a sphere.
pub const EPSTEIN_PREFACTOR: f64 = 15.8;

pub const PA_PER_MBAR: f64 = 100.0;
pub const TWO_PI: f64 = 2.0 * PI;

/// Converts an ordinary frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

/// Converts an angular frequency in rad/s to an ordinary frequency in Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
