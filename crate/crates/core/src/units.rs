//! Unit conventions.
//!
//! Lengths are in micrometres, times in microseconds, frequencies in MHz as
//! ordinary (not angular) frequencies, energies as `E/h` in MHz, temperatures
//! in microkelvin and masses in kilograms. Propagators apply the phase
//! `2*pi*nu*t` internally.

use std::f64::consts::TAU;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Mass of a 87Rb atom, kg.
pub const RB87_MASS: f64 = 1.443_160_6e-25;

/// Ordinary frequency (MHz) to angular frequency (rad/us).
#[inline]
pub fn to_angular(nu: f64) -> f64 {
    nu * TAU
}

/// Angular frequency (rad/us) to ordinary frequency (MHz).
#[inline]
pub fn to_ordinary(omega: f64) -> f64 {
    omega / TAU
}

/// `k_B T / m` in (um/us)^2 for a temperature in microkelvin.
///
/// 1 m/s equals 1 um/us, so the SI value carries over unchanged.
#[inline]
pub fn thermal_velocity_sq(temperature_uk: f64, mass_kg: f64) -> f64 {
    BOLTZMANN * temperature_uk * 1e-6 / mass_kg
}
