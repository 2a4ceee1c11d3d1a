//! Experiment configuration files.
//!
//! A configuration is a flat TOML table. Every key is optional except
//! `experiment`; angles are in degrees. Keys that are not listed in
//! [`KNOWN_KEYS`] are rejected all at once.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineHooks, SimConfig, STABILITY_BOUND};
use crate::error::{Error, Result};
use crate::model::{Configuration, LatticeSpec, ModulationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Predict,
    DeltaSweep,
    AngleSweep,
    DensityProfile,
    TransmissionScan,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Predict => "predict",
            ExperimentKind::DeltaSweep => "delta-sweep",
            ExperimentKind::AngleSweep => "angle-sweep",
            ExperimentKind::DensityProfile => "density-profile",
            ExperimentKind::TransmissionScan => "transmission-scan",
        }
    }
}

/// Unit of the detuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaUnits {
    /// Multiples of the vibrational frequency of the lattice.
    OmegaX,
    /// Recoil frequencies.
    Absolute,
}

/// Time step as a fraction of the stability bound.
const DT_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,

    pub theta_deg: f64,
    pub phi_deg: f64,
    pub u0: f64,
    /// Pumping rate Γ₀′; Ωx / 10 when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<f64>,

    pub epsilon: f64,
    pub configurations: Vec<Configuration>,
    pub delta_start: f64,
    pub delta_stop: f64,
    pub delta_count: usize,
    pub delta_units: DeltaUnits,
    /// Half-angles for angle sweeps.
    pub angles_deg: Vec<f64>,

    pub n_atoms: usize,
    /// 0.98 of the stability bound when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Modulated phase length in vibrational periods.
    pub duration_periods: f64,
    /// Unmodulated phase length in units of 1/Γ₀′.
    pub thermalize_pump_times: f64,
    pub seed: u64,
    pub snapshot_stride: usize,
    pub initial_temperature: f64,
    pub recoil_kicks: bool,
    pub cloud_cells: usize,
    pub workers: usize,

    /// Density-profile window, in periods of the predicted grating.
    pub profile_periods: usize,
    pub profile_bins_per_period: usize,
    /// Off-target frequencies used for the proxy floor.
    pub floor_frequencies: usize,

    pub output_dir: PathBuf,
    pub dump_snapshots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Predict,
            theta_deg: 30.0,
            phi_deg: 24.0,
            u0: 200.0,
            gamma_p: None,
            epsilon: 0.05,
            configurations: Configuration::BOTH.to_vec(),
            delta_start: -3.0,
            delta_stop: 3.0,
            delta_count: 21,
            delta_units: DeltaUnits::OmegaX,
            angles_deg: vec![16.0, 24.0, 32.0],
            n_atoms: 1000,
            dt: None,
            duration_periods: 150.0,
            thermalize_pump_times: 100.0,
            seed: 1,
            snapshot_stride: 10,
            initial_temperature: 2.0,
            recoil_kicks: true,
            cloud_cells: 8,
            workers: 1,
            profile_periods: 16,
            profile_bins_per_period: 16,
            floor_frequencies: 32,
            output_dir: PathBuf::from("results"),
            dump_snapshots: false,
        }
    }
}

/// Every key a configuration file may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "theta_deg",
    "phi_deg",
    "u0",
    "gamma_p",
    "epsilon",
    "configurations",
    "delta_start",
    "delta_stop",
    "delta_count",
    "delta_units",
    "angles_deg",
    "n_atoms",
    "dt",
    "duration_periods",
    "thermalize_pump_times",
    "seed",
    "snapshot_stride",
    "initial_temperature",
    "recoil_kicks",
    "cloud_cells",
    "workers",
    "profile_periods",
    "profile_bins_per_period",
    "floor_frequencies",
    "output_dir",
    "dump_snapshots",
];

fn open_angle(field: &'static str, deg: f64) -> Result<()> {
    if deg > 0.0 && deg < 90.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, "0 < angle < 90 degrees", deg))
    }
}

impl ExperimentConfig {
    /// Parses, applies defaults and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let unknown: Vec<String> = table
            .keys()
            .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        if !table.contains_key("experiment") {
            return Err(Error::Config("missing key `experiment`".into()));
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        open_angle("theta_deg", self.theta_deg)?;
        open_angle("phi_deg", self.phi_deg)?;
        self.lattice_at(self.theta_deg)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "epsilon >= 0", self.epsilon));
        }
        if self.configurations.is_empty() {
            return Err(Error::invalid("configurations", "at least one", 0.0));
        }
        let mut seen = Vec::new();
        for c in &self.configurations {
            if seen.contains(c) {
                return Err(Error::Config(format!("configuration {c} listed twice")));
            }
            seen.push(*c);
        }
        if self.delta_count < 1 {
            return Err(Error::invalid("delta_count", "delta_count >= 1", 0.0));
        }
        if !(self.delta_start.is_finite() && self.delta_stop.is_finite()) {
            return Err(Error::invalid("delta_start", "finite grid bounds", self.delta_start));
        }
        if self.delta_count > 1 && !(self.delta_stop > self.delta_start) {
            return Err(Error::invalid(
                "delta_stop",
                "delta_stop > delta_start",
                self.delta_stop,
            ));
        }
        for &a in &self.angles_deg {
            open_angle("angles_deg", a)?;
        }
        if self.angles_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("angles_deg must be strictly increasing".into()));
        }
        if self.experiment == ExperimentKind::AngleSweep && self.angles_deg.len() < 3 {
            return Err(Error::invalid(
                "angles_deg",
                "at least 3 angles for a line fit",
                self.angles_deg.len() as f64,
            ));
        }
        if !(self.duration_periods > 0.0 && self.duration_periods.is_finite()) {
            return Err(Error::invalid(
                "duration_periods",
                "duration_periods > 0",
                self.duration_periods,
            ));
        }
        if !(self.thermalize_pump_times >= 0.0 && self.thermalize_pump_times.is_finite()) {
            return Err(Error::invalid(
                "thermalize_pump_times",
                "thermalize_pump_times >= 0",
                self.thermalize_pump_times,
            ));
        }
        if self.profile_periods < 4 {
            return Err(Error::invalid(
                "profile_periods",
                "profile_periods >= 4",
                self.profile_periods as f64,
            ));
        }
        if self.profile_bins_per_period < 4 {
            return Err(Error::invalid(
                "profile_bins_per_period",
                "profile_bins_per_period >= 4",
                self.profile_bins_per_period as f64,
            ));
        }
        if self.workers < 1 {
            return Err(Error::invalid("workers", "workers >= 1", 0.0));
        }
        let lat = self.lattice()?;
        self.sim_config(&lat)?.validate(&lat)?;
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn phi(&self) -> f64 {
        self.phi_deg.to_radians()
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        self.lattice_at(self.theta_deg)
    }

    fn lattice_at(&self, theta_deg: f64) -> Result<LatticeSpec> {
        let theta = theta_deg.to_radians();
        match self.gamma_p {
            Some(g) => LatticeSpec::new(theta, self.u0, g),
            None => LatticeSpec::with_gamma_ratio(theta, self.u0, 0.1),
        }
    }

    pub fn sim_config(&self, lat: &LatticeSpec) -> Result<SimConfig> {
        let omega_x = lat.vibrational_frequency();
        let fastest = omega_x.max(lat.gamma_p);
        if !(fastest > 0.0) {
            return Err(Error::invalid("u0", "u0 > 0 or gamma_p > 0", self.u0));
        }
        let dt = self.dt.unwrap_or(DT_FRACTION * STABILITY_BOUND / fastest);
        let duration = if omega_x > 0.0 {
            self.duration_periods * 2.0 * PI / omega_x
        } else {
            self.duration_periods
        };
        let t_thermalize = if lat.gamma_p > 0.0 {
            self.thermalize_pump_times / lat.gamma_p
        } else {
            0.0
        };
        Ok(SimConfig {
            n_atoms: self.n_atoms,
            dt,
            n_steps: (duration / dt).round() as usize,
            t_thermalize,
            seed: self.seed,
            snapshot_stride: self.snapshot_stride,
            initial_temperature: self.initial_temperature,
            recoil_kicks: self.recoil_kicks,
            cloud_cells: self.cloud_cells,
            workers: self.workers,
            hooks: EngineHooks::default(),
        })
    }

    /// Detuning grid in recoil frequencies.
    pub fn delta_grid(&self, omega_x: f64) -> Vec<f64> {
        let scale = match self.delta_units {
            DeltaUnits::OmegaX => omega_x,
            DeltaUnits::Absolute => 1.0,
        };
        if self.delta_count == 1 {
            return vec![self.delta_start * scale];
        }
        let step = (self.delta_stop - self.delta_start) / (self.delta_count - 1) as f64;
        (0..self.delta_count)
            .map(|i| (self.delta_start + i as f64 * step) * scale)
            .collect()
    }

    pub fn modulation(&self, kind: Configuration, phi: f64, delta: f64) -> Result<ModulationSpec> {
        ModulationSpec::new(kind, phi, self.epsilon, delta)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}
