//! Closed-form predictions for the propagation mode: its velocity, the
//! pattern velocity and detuning that excite it in each configuration, and
//! the wavevector of the resulting material grating.
//!
//! All quantities are in natural units (λ = 2π, k = 1) unless a function name
//! says otherwise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Configuration;

/// Below this |mismatch| (units of k) a grating counts as phase matched.
pub const PHASE_MATCH_TOLERANCE: f64 = 1e-9;

fn check_angle(field: &'static str, angle: f64) -> Result<()> {
    if angle > 0.0 && angle < PI / 2.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, "0 < angle < pi/2", angle))
    }
}

/// Mean velocity of the propagation mode along x, Ωx / sin θ.
pub fn mode_velocity(theta: f64, omega_x: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    if !(omega_x > 0.0) {
        return Err(Error::invalid("omega_x", "omega_x > 0", omega_x));
    }
    Ok(omega_x / theta.sin())
}

/// Mode velocity in SI: λ Ωx / (2π sin θ), with `omega_x` in rad/s.
pub fn mode_velocity_si(wavelength: f64, theta: f64, omega_x: f64) -> Result<f64> {
    Ok(mode_velocity(theta, omega_x)? * wavelength / (2.0 * PI))
}

/// Phase velocity of the pump-probe interference pattern, δ / (2 sin φ).
pub fn modulation_velocity(delta: f64, phi: f64) -> Result<f64> {
    check_angle("phi", phi)?;
    Ok(delta / (2.0 * phi.sin()))
}

/// Ratio of the resonant pattern velocity to the mode velocity.
pub fn velocity_ratio(kind: Configuration, phi: f64, theta: f64) -> Result<f64> {
    check_angle("phi", phi)?;
    check_angle("theta", theta)?;
    Ok(match kind {
        Configuration::Parallel => 1.0,
        Configuration::Perp => 1.0 + theta.sin() / (2.0 * phi.sin()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonancePrediction {
    pub kind: Configuration,
    /// Resonant detunings (-δ, +δ).
    pub delta_res: [f64; 2],
    pub v_mode: f64,
    pub v_mod_res: f64,
}

impl ResonancePrediction {
    /// The positive resonant detuning.
    pub fn delta(&self) -> f64 {
        self.delta_res[1]
    }
}

/// Pump-probe detunings at which the pattern excites the mode.
pub fn resonance_detunings(
    kind: Configuration,
    phi: f64,
    theta: f64,
    omega_x: f64,
) -> Result<ResonancePrediction> {
    let v_mode = mode_velocity(theta, omega_x)?;
    check_angle("phi", phi)?;
    let geometric = 2.0 * phi.sin() / theta.sin();
    let delta = match kind {
        Configuration::Parallel => geometric * omega_x,
        Configuration::Perp => (1.0 + geometric) * omega_x,
    };
    Ok(ResonancePrediction {
        kind,
        delta_res: [-delta, delta],
        v_mode,
        v_mod_res: velocity_ratio(kind, phi, theta)? * v_mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingPrediction {
    pub kind: Configuration,
    pub q_magnitude: f64,
    /// |q| - |Δk|
    pub mismatch: f64,
    pub phase_matched: bool,
}

/// Wavenumber of the material grating that moves at the mode velocity with
/// the resonant frequency, q = δ_res / v̄.
pub fn grating_wavevector(kind: Configuration, phi: f64, theta: f64) -> Result<GratingPrediction> {
    check_angle("phi", phi)?;
    check_angle("theta", theta)?;
    let delta_k = 2.0 * phi.sin();
    let q = match kind {
        Configuration::Parallel => delta_k,
        Configuration::Perp => delta_k * (1.0 + theta.sin() / (2.0 * phi.sin())),
    };
    let mismatch = q - delta_k;
    Ok(GratingPrediction {
        kind,
        q_magnitude: q,
        mismatch,
        phase_matched: mismatch.abs() < PHASE_MATCH_TOLERANCE,
    })
}

/// Momentum mismatch |q| - |Δk| of stimulated scattering off the grating.
/// Zero means the mode is visible in the probe transmission.
pub fn phase_matching_residual(kind: Configuration, phi: f64, theta: f64) -> Result<f64> {
    Ok(grating_wavevector(kind, phi, theta)?.mismatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn mode_velocity_examples() {
        assert!((mode_velocity(deg(30.0), 5.0).unwrap() - 10.0).abs() < 1e-12);
        let v = mode_velocity_si(780e-9, deg(30.0), 2.0 * PI * 50e3).unwrap();
        assert!((v - 0.078).abs() < 1e-9, "{v}");
        let near_90 = mode_velocity(PI / 2.0 - 1e-9, 3.0).unwrap();
        assert!((near_90 - 3.0).abs() < 1e-9);
        assert!(mode_velocity(0.0, 1.0).is_err());
        assert!(mode_velocity(PI / 2.0, 1.0).is_err());
    }

    #[test]
    fn mode_velocity_is_minimal_at_normal_incidence() {
        let at_90 = mode_velocity(PI / 2.0 - 1e-12, 1.0).unwrap();
        for d in [10.0, 30.0, 60.0, 89.0] {
            assert!(mode_velocity(deg(d), 1.0).unwrap() >= at_90);
        }
    }

    #[test]
    fn modulation_velocity_examples() {
        assert_eq!(modulation_velocity(0.0, deg(24.0)).unwrap(), 0.0);
        let v = modulation_velocity(8.135, deg(24.0)).unwrap();
        assert!((v - 10.0).abs() < 1e-3, "{v}");
        let phi = deg(37.0);
        assert_eq!(
            modulation_velocity(-2.5, phi).unwrap(),
            -modulation_velocity(2.5, phi).unwrap()
        );
        assert!(modulation_velocity(1.0, 0.0).is_err());
    }

    #[test]
    fn resonance_examples() {
        let par = resonance_detunings(Configuration::Parallel, deg(24.0), deg(30.0), 1.0).unwrap();
        let perp = resonance_detunings(Configuration::Perp, deg(24.0), deg(30.0), 1.0).unwrap();
        assert!((par.delta() - 1.6270).abs() < 1e-4);
        assert!((perp.delta() - 2.6270).abs() < 1e-4);
        assert_eq!(par.delta_res[0], -par.delta_res[1]);
        assert!((perp.delta() - par.delta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grating_examples() {
        let par = grating_wavevector(Configuration::Parallel, deg(24.0), deg(30.0)).unwrap();
        assert!((par.q_magnitude - 0.81348).abs() < 1e-5);
        assert!(par.phase_matched);
        assert_eq!(par.mismatch, 0.0);

        let perp = grating_wavevector(Configuration::Perp, deg(24.0), deg(30.0)).unwrap();
        assert!((perp.q_magnitude - 1.31348).abs() < 1e-5);
        assert!((perp.q_magnitude / par.q_magnitude - 1.6146).abs() < 5e-5);
        assert!(!perp.phase_matched);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(
            phase_matching_residual(Configuration::Parallel, deg(50.0), deg(10.0)).unwrap(),
            0.0
        );
        let r = phase_matching_residual(Configuration::Perp, deg(24.0), deg(30.0)).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn perp_mismatch_is_sin_theta(phi in 0.01..1.56f64, theta in 0.01..1.56f64) {
            let r = phase_matching_residual(Configuration::Perp, phi, theta).unwrap();
            prop_assert!((r - theta.sin()).abs() < 1e-12);
            prop_assert!(r > 0.0);
        }

        #[test]
        fn resonance_and_pattern_velocity_agree(phi in 0.01..1.56f64, theta in 0.01..1.56f64, omega in 0.1..50.0f64) {
            for kind in Configuration::BOTH {
                let pred = resonance_detunings(kind, phi, theta, omega).unwrap();
                let v = modulation_velocity(pred.delta(), phi).unwrap();
                prop_assert!((v - pred.v_mod_res).abs() <= 1e-12 * v.abs().max(1.0));
                let ratio = pred.v_mod_res / pred.v_mode;
                prop_assert!((ratio - velocity_ratio(kind, phi, theta).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn dispersion_closure(phi in 0.01..1.56f64, theta in 0.01..1.56f64, omega in 0.1..50.0f64) {
            for kind in Configuration::BOTH {
                let pred = resonance_detunings(kind, phi, theta, omega).unwrap();
                let q = grating_wavevector(kind, phi, theta).unwrap().q_magnitude;
                let lhs = pred.delta();
                prop_assert!((lhs - pred.v_mode * q).abs() <= 1e-12 * lhs.max(1.0));
            }
        }
    }
}
