//! Natural units and their mapping to SI.
//!
//! Everything inside the crate is expressed with ħ = 1, laser wavenumber
//! k = 1 and recoil energy E_r = ħ²k²/2M = 1, which fixes the atomic mass to
//! M = 1/2. Time is measured in 1/ω_r, lengths in 1/k, momenta in ħk, and
//! velocities in ω_r/k. Conversions to SI live here and are only used at the
//! command-line and export boundary.

use std::f64::consts::PI;

/// Atomic mass in natural units.
pub const MASS: f64 = 0.5;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// ⁸⁵Rb atomic mass.
pub const RB85_MASS: f64 = 84.911_789_738 * ATOMIC_MASS_UNIT;

/// D2 line of rubidium.
pub const RB_D2_WAVELENGTH: f64 = 780.241e-9;

/// Velocity of a particle with momentum `p` (units ħk).
#[inline]
pub fn velocity(p: f64) -> f64 {
    p / MASS
}

/// Conversion factors for a given species and laser wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiScale {
    pub wavelength: f64,
    pub mass: f64,
}

impl Default for SiScale {
    fn default() -> Self {
        SiScale {
            wavelength: RB_D2_WAVELENGTH,
            mass: RB85_MASS,
        }
    }
}

impl SiScale {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Recoil angular frequency ω_r = ħk²/2M in rad/s.
    pub fn recoil_angular_frequency(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * k * k / (2.0 * self.mass)
    }

    /// Length unit 1/k in metres.
    pub fn length(&self) -> f64 {
        1.0 / self.wavenumber()
    }

    /// Time unit 1/ω_r in seconds.
    pub fn time(&self) -> f64 {
        1.0 / self.recoil_angular_frequency()
    }

    /// Velocity unit ω_r/k in m/s.
    pub fn velocity(&self) -> f64 {
        self.length() / self.time()
    }

    /// Converts an angular frequency in natural units to Hz (cycles per second).
    pub fn to_hz(&self, omega: f64) -> f64 {
        omega * self.recoil_angular_frequency() / (2.0 * PI)
    }

    /// Converts a frequency in Hz to an angular frequency in natural units.
    pub fn from_hz(&self, hz: f64) -> f64 {
        hz * 2.0 * PI / self.recoil_angular_frequency()
    }
}
