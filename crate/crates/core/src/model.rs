//! Lattice geometry, state-dependent optical potentials, pumping rates and the
//! moving pump-probe modulation.
//!
//! The ground state is the J = 1/2 doublet of a J = 1/2 → J' = 3/2 transition.
//! The four lattice beams produce a σ+ intensity `I_+` and a σ- intensity
//! `I_-`; sublevel `s` is light-shifted with Clebsch–Gordan weights 1 and 1/3
//! by the matching and opposite helicity, and is pumped to `-s` by the
//! opposite helicity. A σ+ well sits at the origin.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::MASS;

/// Internal Zeeman sublevel, m = +1/2 or m = -1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublevel {
    Plus,
    Minus,
}

impl Sublevel {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Sublevel::Plus => 1.0,
            Sublevel::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Sublevel::Plus => Sublevel::Minus,
            Sublevel::Minus => Sublevel::Plus,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sublevel::Plus => 1,
            Sublevel::Minus => -1,
        }
    }

    pub fn from_i8(s: i8) -> Option<Self> {
        match s {
            1 => Some(Sublevel::Plus),
            -1 => Some(Sublevel::Minus),
            _ => None,
        }
    }
}

/// One atom: position (1/k), momentum (ħk) and internal sublevel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub r: Vector3<f64>,
    pub p: Vector3<f64>,
    pub s: Sublevel,
}

impl AtomState {
    pub fn kinetic_energy(&self) -> f64 {
        self.p.norm_squared() / (2.0 * MASS)
    }
}

/// Static lattice: beam half-angle, depth and pumping scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub theta: f64,
    pub u0: f64,
    pub gamma_p: f64,
    pub kappa_perp: f64,
    pub kappa_z: f64,
}

impl LatticeSpec {
    pub fn new(theta: f64, u0: f64, gamma_p: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI / 2.0) {
            return Err(Error::invalid("theta", "0 < theta < pi/2", theta));
        }
        // U0 = 0 is accepted for free-particle checks; negative depths are not.
        if !(u0 >= 0.0 && u0.is_finite()) {
            return Err(Error::invalid("u0", "u0 >= 0", u0));
        }
        if !(gamma_p >= 0.0 && gamma_p.is_finite()) {
            return Err(Error::invalid("gamma_p", "gamma_p >= 0", gamma_p));
        }
        Ok(LatticeSpec {
            theta,
            u0,
            gamma_p,
            kappa_perp: theta.sin(),
            kappa_z: 2.0 * theta.cos(),
        })
    }

    /// Lattice built with the pumping scale tied to the vibrational frequency,
    /// `gamma_p = ratio * Ωx`.
    pub fn with_gamma_ratio(theta: f64, u0: f64, ratio: f64) -> Result<Self> {
        let omega = theta.sin() * u0.max(0.0).sqrt();
        Self::new(theta, u0, ratio * omega)
    }

    /// Distance between equivalent (same polarization) sites: (λx, λy, λz).
    pub fn lattice_constants(&self) -> Vector3<f64> {
        let lx = 2.0 * PI / self.kappa_perp;
        Vector3::new(lx, lx, 2.0 * PI / self.kappa_z)
    }

    pub fn vibrational_frequency(&self) -> f64 {
        vibrational_frequency(self)
    }
}

/// Pump-probe arrangement: intensity modulation (parallel polarizations) or
/// polarization modulation (orthogonal polarizations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Configuration {
    Parallel,
    Perp,
}

impl Configuration {
    pub const BOTH: [Configuration; 2] = [Configuration::Parallel, Configuration::Perp];

    pub fn name(self) -> &'static str {
        match self {
            Configuration::Parallel => "parallel",
            Configuration::Perp => "perp",
        }
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Configuration::Parallel),
            "perp" => Ok(Configuration::Perp),
            other => Err(Error::Config(format!(
                "unknown configuration {other:?} (expected \"parallel\" or \"perp\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    pub kind: Configuration,
    pub phi: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Pattern wavenumber |Δk| = 2 sin φ.
    pub delta_k: f64,
}

impl ModulationSpec {
    pub fn new(kind: Configuration, phi: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < PI / 2.0) {
            return Err(Error::invalid("phi", "0 < phi < pi/2", phi));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "epsilon >= 0", epsilon));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta", "finite", delta));
        }
        Ok(ModulationSpec {
            kind,
            phi,
            epsilon,
            delta,
            delta_k: 2.0 * phi.sin(),
        })
    }

    /// Same pattern with the amplitude switched off.
    pub fn switched_off(&self) -> Self {
        ModulationSpec {
            epsilon: 0.0,
            ..*self
        }
    }

    /// Phase velocity of the interference pattern along x.
    pub fn phase_velocity(&self) -> f64 {
        self.delta / self.delta_k
    }

    #[inline]
    pub fn phase(&self, x: f64, t: f64) -> f64 {
        self.delta_k * x - self.delta * t
    }

    /// Weight of the modulation on sublevel `s`: in phase for an intensity
    /// pattern, in phase opposition for a polarization pattern.
    #[inline]
    pub fn sublevel_weight(&self, s: Sublevel) -> f64 {
        match self.kind {
            Configuration::Parallel => 1.0,
            Configuration::Perp => s.sign(),
        }
    }
}

/// Trigonometric factors of the lattice at one point.
#[derive(Debug, Clone, Copy)]
struct LatticeTrig {
    cx: f64,
    sx: f64,
    cy: f64,
    sy: f64,
    cz: f64,
    sz: f64,
}

impl LatticeTrig {
    #[inline]
    fn at(lat: &LatticeSpec, r: &Vector3<f64>) -> Self {
        let (sx, cx) = (lat.kappa_perp * r.x).sin_cos();
        let (sy, cy) = (lat.kappa_perp * r.y).sin_cos();
        let (sz, cz) = (lat.kappa_z * r.z).sin_cos();
        LatticeTrig {
            cx,
            sx,
            cy,
            sy,
            cz,
            sz,
        }
    }
}

/// σ+ and σ- intensities, each in [0, 4].
pub fn intensity_components(lat: &LatticeSpec, r: &Vector3<f64>) -> (f64, f64) {
    let tr = LatticeTrig::at(lat, r);
    let a = tr.cx * tr.cx + tr.cy * tr.cy;
    let b = 2.0 * tr.cx * tr.cy * tr.cz;
    (a + b, a - b)
}

/// Light-shift potential of sublevel `s`, `-(U0/8) [I_s + I_{-s}/3]`.
pub fn potential(lat: &LatticeSpec, r: &Vector3<f64>, s: Sublevel) -> f64 {
    let (ip, im) = intensity_components(lat, r);
    let (own, other) = match s {
        Sublevel::Plus => (ip, im),
        Sublevel::Minus => (im, ip),
    };
    -(lat.u0 / 8.0) * (own + other / 3.0)
}

/// Optical pumping rate out of sublevel `s`.
pub fn pump_rate(lat: &LatticeSpec, r: &Vector3<f64>, s: Sublevel) -> f64 {
    let (ip, im) = intensity_components(lat, r);
    let opposite = match s {
        Sublevel::Plus => im,
        Sublevel::Minus => ip,
    };
    (2.0 * lat.gamma_p / 9.0) * (opposite / 4.0)
}

/// Potential of the moving pump-probe pattern seen by sublevel `s`.
pub fn modulation_potential(
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
    r: &Vector3<f64>,
    t: f64,
    s: Sublevel,
) -> f64 {
    let amplitude = modulation.epsilon * lat.u0 / 2.0;
    -modulation.sublevel_weight(s) * amplitude * modulation.phase(r.x, t).cos()
}

pub fn total_potential(
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
    r: &Vector3<f64>,
    t: f64,
    s: Sublevel,
) -> f64 {
    potential(lat, r, s) + modulation_potential(lat, modulation, r, t, s)
}

/// Lattice force on sublevel `s`, without modulation.
#[inline]
pub fn lattice_force(lat: &LatticeSpec, r: &Vector3<f64>, s: Sublevel) -> Vector3<f64> {
    lattice_force_from(lat, &LatticeTrig::at(lat, r), s)
}

#[inline]
fn lattice_force_from(lat: &LatticeSpec, tr: &LatticeTrig, s: Sublevel) -> Vector3<f64> {
    // U_s = -(U0/6) (cx² + cy² + σ cx cy cz)
    let sigma = s.sign();
    let c = lat.u0 / 6.0;
    Vector3::new(
        -c * lat.kappa_perp * tr.sx * (2.0 * tr.cx + sigma * tr.cy * tr.cz),
        -c * lat.kappa_perp * tr.sy * (2.0 * tr.cy + sigma * tr.cx * tr.cz),
        -c * lat.kappa_z * sigma * tr.cx * tr.cy * tr.sz,
    )
}

/// Total force, the analytic negative gradient of lattice plus modulation
/// potential.
#[inline]
pub fn force(
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
    r: &Vector3<f64>,
    t: f64,
    s: Sublevel,
) -> Vector3<f64> {
    let mut f = lattice_force(lat, r, s);
    add_modulation_force(&mut f, lat, modulation, r, t, s);
    f
}

/// [`force`] together with [`pump_rate`], sharing the lattice evaluation.
#[inline]
pub fn force_and_pump_rate(
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
    r: &Vector3<f64>,
    t: f64,
    s: Sublevel,
) -> (Vector3<f64>, f64) {
    let tr = LatticeTrig::at(lat, r);
    let mut f = lattice_force_from(lat, &tr, s);
    add_modulation_force(&mut f, lat, modulation, r, t, s);
    let a = tr.cx * tr.cx + tr.cy * tr.cy;
    let b = 2.0 * tr.cx * tr.cy * tr.cz;
    let opposite = a - s.sign() * b;
    (f, (2.0 * lat.gamma_p / 9.0) * (opposite / 4.0))
}

#[inline]
fn add_modulation_force(
    f: &mut Vector3<f64>,
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
    r: &Vector3<f64>,
    t: f64,
    s: Sublevel,
) {
    if modulation.epsilon != 0.0 {
        let amplitude = modulation.epsilon * lat.u0 / 2.0;
        f.x -= modulation.sublevel_weight(s)
            * amplitude
            * modulation.delta_k
            * modulation.phase(r.x, t).sin();
    }
}

/// x vibrational frequency at the bottom of a σ+ well, κ⊥ √U0.
pub fn vibrational_frequency(lat: &LatticeSpec) -> f64 {
    // (1/2) M Ω² = U0 κ⊥² / 4 with M = 1/2
    (lat.u0 * lat.kappa_perp * lat.kappa_perp / (2.0 * MASS)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lattice() -> LatticeSpec {
        LatticeSpec::new(30f64.to_radians(), 100.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn intensity_examples() {
        let lat = lattice();
        let k = lat.kappa_perp;
        let (p, m) = intensity_components(&lat, &Vector3::zeros());
        assert_eq!((p, m), (4.0, 0.0));
        let (p, m) = intensity_components(&lat, &Vector3::new(PI / k, 0.0, 0.0));
        assert!(close(p, 0.0, 1e-12) && close(m, 4.0, 1e-12));
        let (p, m) = intensity_components(&lat, &Vector3::new(PI / (2.0 * k), 0.0, 0.0));
        assert!(close(p, 1.0, 1e-12) && close(m, 1.0, 1e-12));
    }

    #[test]
    fn potential_examples() {
        let lat = lattice();
        let u0 = lat.u0;
        assert!(close(potential(&lat, &Vector3::zeros(), Sublevel::Plus), -u0 / 2.0, 1e-14));
        assert!(close(potential(&lat, &Vector3::zeros(), Sublevel::Minus), -u0 / 6.0, 1e-14));
        let mid = Vector3::new(PI / (2.0 * lat.kappa_perp), 0.0, 0.0);
        for s in [Sublevel::Plus, Sublevel::Minus] {
            assert!(close(potential(&lat, &mid, s), -u0 / 6.0, 1e-12));
        }
    }

    #[test]
    fn pump_rate_examples() {
        let lat = lattice();
        let g = lat.gamma_p;
        assert_eq!(pump_rate(&lat, &Vector3::zeros(), Sublevel::Plus), 0.0);
        assert!(close(pump_rate(&lat, &Vector3::zeros(), Sublevel::Minus), 2.0 * g / 9.0, 1e-14));
        let mid = Vector3::new(PI / (2.0 * lat.kappa_perp), 0.0, 0.0);
        assert!(close(pump_rate(&lat, &mid, Sublevel::Plus), g / 18.0, 1e-12));
    }

    #[test]
    fn modulation_examples() {
        let lat = lattice();
        let r = Vector3::new(0.3, -1.0, 2.0);
        let off = ModulationSpec::new(Configuration::Parallel, 0.4, 0.0, 3.0).unwrap();
        assert_eq!(modulation_potential(&lat, &off, &r, 1.7, Sublevel::Plus), 0.0);

        let perp = ModulationSpec::new(Configuration::Perp, 0.4, 0.3, 0.0).unwrap();
        let up = modulation_potential(&lat, &perp, &Vector3::zeros(), 0.0, Sublevel::Plus);
        let down = modulation_potential(&lat, &perp, &Vector3::zeros(), 0.0, Sublevel::Minus);
        assert!(up != 0.0);
        assert_eq!(up, -down);
    }

    #[test]
    fn pattern_moves_at_phase_velocity() {
        let phi = 24f64.to_radians();
        let m = ModulationSpec::new(Configuration::Parallel, phi, 0.2, 8.135).unwrap();
        let v = 8.135 / (2.0 * phi.sin());
        assert!(close(m.phase_velocity(), v, 1e-14));
        for (x, t) in [(0.0, 0.0), (1.3, 0.2), (-4.0, 7.5)] {
            let dt = 0.37;
            assert!(close(m.phase(x + v * dt, t + dt), m.phase(x, t), 1e-12));
        }
    }

    #[test]
    fn vibrational_frequency_examples() {
        let theta = 30f64.to_radians();
        let l100 = LatticeSpec::new(theta, 100.0, 0.3).unwrap();
        let l400 = LatticeSpec::new(theta, 400.0, 0.3).unwrap();
        assert!(close(vibrational_frequency(&l100), 5.0, 1e-12));
        assert!(close(vibrational_frequency(&l400), 10.0, 1e-12));
    }

    #[test]
    fn vibrational_frequency_matches_numeric_curvature() {
        for (theta_deg, u0) in [(30.0, 100.0), (30.0, 200.0), (45.0, 50.0), (15.0, 700.0)] {
            let lat = LatticeSpec::new(f64::to_radians(theta_deg), u0, 1.0).unwrap();
            let h = 1e-4;
            let u = |x: f64| potential(&lat, &Vector3::new(x, 0.0, 0.0), Sublevel::Plus);
            let curvature = (u(h) - 2.0 * u(0.0) + u(-h)) / (h * h);
            let numeric = (curvature / MASS).sqrt();
            let analytic = vibrational_frequency(&lat);
            assert!(close(numeric, analytic, 1e-6), "{numeric} vs {analytic}");
        }
    }

    #[test]
    fn harmonic_restoring_force() {
        let lat = LatticeSpec::new(30f64.to_radians(), 200.0, 1.0).unwrap();
        let off = ModulationSpec::new(Configuration::Parallel, 0.4, 0.0, 0.0).unwrap();
        assert_eq!(
            force(&lat, &off, &Vector3::zeros(), 0.0, Sublevel::Plus),
            Vector3::zeros()
        );
        let omega = vibrational_frequency(&lat);
        let x = 1e-3;
        let f = force(&lat, &off, &Vector3::new(x, 0.0, 0.0), 0.0, Sublevel::Plus);
        assert!(close(f.x, -MASS * omega * omega * x, 1e-5));
    }

    fn sublevel() -> impl Strategy<Value = Sublevel> {
        prop_oneof![Just(Sublevel::Plus), Just(Sublevel::Minus)]
    }

    fn kind() -> impl Strategy<Value = Configuration> {
        prop_oneof![Just(Configuration::Parallel), Just(Configuration::Perp)]
    }

    fn point() -> impl Strategy<Value = Vector3<f64>> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn force_is_negative_gradient(
            r in point(),
            t in -10.0..10.0f64,
            s in sublevel(),
            kind in kind(),
            theta in 0.1..1.45f64,
            phi in 0.1..1.45f64,
            eps in 0.0..0.5f64,
            delta in -20.0..20.0f64,
        ) {
            let lat = LatticeSpec::new(theta, 150.0, 1.0).unwrap();
            let m = ModulationSpec::new(kind, phi, eps, delta).unwrap();
            let f = force(&lat, &m, &r, t, s);
            let h = 1e-5;
            let scale = lat.u0 * (1.0 + eps);
            for axis in 0..3 {
                let mut a = r;
                let mut b = r;
                a[axis] += h;
                b[axis] -= h;
                let fd = -(total_potential(&lat, &m, &a, t, s) - total_potential(&lat, &m, &b, t, s))
                    / (2.0 * h);
                // relative to the force scale U0·κ so near-zero components are meaningful
                prop_assert!((fd - f[axis]).abs() <= 1e-6 * scale, "axis {axis}: {fd} vs {}", f[axis]);
            }
        }

        #[test]
        fn fused_force_and_rate_agree(r in point(), t in -5.0..5.0f64, s in sublevel(), kind in kind()) {
            let lat = lattice();
            let m = ModulationSpec::new(kind, 0.7, 0.3, 4.0).unwrap();
            let (f, g) = force_and_pump_rate(&lat, &m, &r, t, s);
            prop_assert_eq!(f, force(&lat, &m, &r, t, s));
            prop_assert!((g - pump_rate(&lat, &r, s)).abs() < 1e-14);
        }

        #[test]
        fn total_intensity_has_no_z_dependence(r in point(), dz in -10.0..10.0f64) {
            let lat = lattice();
            let (p, m) = intensity_components(&lat, &r);
            let shifted = r + Vector3::new(0.0, 0.0, dz);
            let (p2, m2) = intensity_components(&lat, &shifted);
            prop_assert!(((p + m) - (p2 + m2)).abs() < 1e-12);
            let cx = (lat.kappa_perp * r.x).cos();
            let cy = (lat.kappa_perp * r.y).cos();
            prop_assert!(((p + m) - 2.0 * (cx * cx + cy * cy)).abs() < 1e-12);
        }

        #[test]
        fn half_period_translation_swaps_sublevels(r in point(), axis in 0usize..3) {
            let lat = lattice();
            let mut shift = Vector3::zeros();
            shift[axis] = if axis == 2 { PI / lat.kappa_z } else { PI / lat.kappa_perp };
            let r2 = r + shift;
            let (p, m) = intensity_components(&lat, &r);
            let (p2, m2) = intensity_components(&lat, &r2);
            prop_assert!((p - m2).abs() < 1e-9 && (m - p2).abs() < 1e-9);
            for s in [Sublevel::Plus, Sublevel::Minus] {
                prop_assert!((potential(&lat, &r, s) - potential(&lat, &r2, s.flipped())).abs() < 1e-9);
                prop_assert!((pump_rate(&lat, &r, s) - pump_rate(&lat, &r2, s.flipped())).abs() < 1e-9);
            }
        }

        #[test]
        fn potentials_and_rates_are_bounded(r in point(), s in sublevel()) {
            let lat = lattice();
            let (p, m) = intensity_components(&lat, &r);
            prop_assert!((-1e-12..=4.0 + 1e-12).contains(&p));
            prop_assert!((-1e-12..=4.0 + 1e-12).contains(&m));
            let u = potential(&lat, &r, s);
            prop_assert!(u >= -lat.u0 / 2.0 - 1e-9 && u <= 1e-9);
            let g = pump_rate(&lat, &r, s);
            prop_assert!(g >= -1e-12 && g <= 2.0 * lat.gamma_p / 9.0 + 1e-12);
        }

        #[test]
        fn modulation_symmetry(r in point(), t in -5.0..5.0f64, phi in 0.1..1.4f64, eps in 0.0..1.0f64) {
            let lat = lattice();
            let perp = ModulationSpec::new(Configuration::Perp, phi, eps, 2.0).unwrap();
            let par = ModulationSpec::new(Configuration::Parallel, phi, eps, 2.0).unwrap();
            prop_assert_eq!(
                modulation_potential(&lat, &perp, &r, t, Sublevel::Plus),
                -modulation_potential(&lat, &perp, &r, t, Sublevel::Minus)
            );
            prop_assert_eq!(
                modulation_potential(&lat, &par, &r, t, Sublevel::Plus),
                modulation_potential(&lat, &par, &r, t, Sublevel::Minus)
            );
        }
    }

    #[test]
    fn rejects_out_of_range_angles() {
        assert!(LatticeSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(PI / 2.0, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(0.5, -1.0, 1.0).is_err());
        assert!(ModulationSpec::new(Configuration::Perp, 1.6, 0.1, 0.0).is_err());
        assert!(ModulationSpec::new(Configuration::Perp, 0.3, -0.1, 0.0).is_err());
    }

    #[test]
    fn lattice_constants() {
        let lat = lattice();
        let c = lat.lattice_constants();
        // λ/sin θ and λ/(2 cos θ) with λ = 2π
        assert!(close(c.x, 2.0 * PI / 0.5, 1e-12));
        assert!(close(c.z, 2.0 * PI / (2.0 * 30f64.to_radians().cos()), 1e-12));
    }
}
