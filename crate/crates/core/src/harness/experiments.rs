//! Sweeps and profile runs built from the engine and the observables.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::export;
use crate::engine::{self, EnsembleSeries, SimConfig};
use crate::error::{Error, Result};
use crate::model::{Configuration, LatticeSpec, ModulationSpec};
use crate::observables::{
    self, Channel, CurvePoint, DensityProfile, GratingEstimate, ResonanceCurve, ResonancePeaks,
    Weighting, Window,
};
use crate::rng::derive_seed;
use crate::theory;

/// Version of the JSON summary and CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

// Seed-derivation tags, so different kinds of run never share a stream.
const TAG_POINT: u64 = 0;
const TAG_NULL: u64 = 1;
const TAG_PROFILE: u64 = 2;

fn kind_index(kind: Configuration) -> u64 {
    match kind {
        Configuration::Parallel => 0,
        Configuration::Perp => 1,
    }
}

/// Theory for one configuration at one half-angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindTheory {
    pub kind: Configuration,
    pub phi_deg: f64,
    pub delta_res: f64,
    pub delta_res_over_omega_x: f64,
    pub v_mod_res: f64,
    pub q: f64,
    pub mismatch: f64,
    pub phase_matched: bool,
}

impl KindTheory {
    pub fn new(kind: Configuration, phi_deg: f64, theta: f64, omega_x: f64) -> Result<Self> {
        let phi = phi_deg.to_radians();
        let res = theory::resonance_detunings(kind, phi, theta, omega_x)?;
        let grating = theory::grating_wavevector(kind, phi, theta)?;
        Ok(KindTheory {
            kind,
            phi_deg,
            delta_res: res.delta(),
            delta_res_over_omega_x: res.delta() / omega_x,
            v_mod_res: res.v_mod_res,
            q: grating.q_magnitude,
            mismatch: grating.mismatch,
            phase_matched: grating.phase_matched,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryEcho {
    pub omega_x: f64,
    pub v_mode: f64,
    pub gamma_p: f64,
    pub per_kind: Vec<KindTheory>,
}

impl TheoryEcho {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let lat = cfg.lattice()?;
        let omega_x = lat.vibrational_frequency();
        let v_mode = theory::mode_velocity(cfg.theta(), omega_x)?;
        let per_kind = cfg
            .configurations
            .iter()
            .map(|&k| KindTheory::new(k, cfg.phi_deg, cfg.theta(), omega_x))
            .collect::<Result<_>>()?;
        Ok(TheoryEcho {
            omega_x,
            v_mode,
            gamma_p: lat.gamma_p,
            per_kind,
        })
    }
}

/// One detuning of a sweep. Optional fields are absent when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub delta: f64,
    pub delta_over_omega_x: f64,
    pub v_mod: f64,
    pub v_cm: Option<[f64; 3]>,
    pub stderr: Option<[f64; 3]>,
    /// Diffraction proxy with the configuration's own weighting.
    pub proxy: Option<f64>,
    /// The proxy with the other weighting, as a cross-check.
    pub proxy_cross: Option<f64>,
    /// Noise floor of `proxy` from an unmodulated run (transmission scans).
    pub proxy_floor: Option<f64>,
    pub proxy_cross_floor: Option<f64>,
    pub theory_delta_res: f64,
    pub status: String,
}

impl SweepPoint {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: Configuration,
    pub phi_deg: f64,
    pub theory: KindTheory,
    pub points: Vec<SweepPoint>,
    /// Drift curve over the successful points, abscissa δ.
    pub curve: ResonanceCurve,
    pub peaks: Option<ResonancePeaks>,
    /// Peaks divided by Ωx.
    pub peaks_over_omega_x: Option<[Option<f64>; 2]>,
    pub analysis_error: Option<String>,
}

impl SweepResult {
    /// Mean |position| of the detected peaks, in units of δ.
    pub fn resonance_magnitude(&self) -> Option<f64> {
        let p = self.peaks?;
        match (p.negative, p.positive) {
            (Some(n), Some(q)) => Some(0.5 * (q.position - n.position)),
            (Some(n), None) => Some(-n.position),
            (None, Some(q)) => Some(q.position),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    pub kind: Configuration,
    pub phi_deg: f64,
    pub sin_phi: f64,
    pub peaks: Option<ResonancePeaks>,
    /// Measured resonance detuning, mean of the two branches.
    pub delta_res: Option<f64>,
    pub theory_delta_res: f64,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub kind: Configuration,
    /// δ_res against sin φ.
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
    pub n_points: usize,
    pub theory_slope: f64,
    pub theory_intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub kind: Configuration,
    pub delta: f64,
    pub theory_q: f64,
    pub profile: DensityProfile,
    pub grating: Option<GratingEstimate>,
    pub grating_status: String,
    pub magnetization_grating: Option<GratingEstimate>,
    /// Estimate in a frame at half the mode velocity, where a real grating
    /// should wash out.
    pub half_frame_grating: Option<GratingEstimate>,
    /// Spectral power at the predicted q, in the mode frame and at rest.
    pub power_at_theory_q: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Outcome {
    Predict,
    DeltaSweep {
        sweeps: Vec<SweepResult>,
    },
    AngleSweep {
        sweeps: Vec<SweepResult>,
        rows: Vec<AngleRow>,
        fits: Vec<Option<LineFit>>,
    },
    DensityProfile {
        profiles: Vec<ProfileResult>,
        /// q̂⊥ / q̂∥ when both gratings were found.
        q_ratio: Option<f64>,
        theory_q_ratio: Option<f64>,
    },
    TransmissionScan {
        sweeps: Vec<SweepResult>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub theory: TheoryEcho,
    pub outcome: Outcome,
    /// Kept out of the summary so that identical configs give identical
    /// bytes; written to its own file.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Everything a sweep point needs besides its detuning.
struct Job<'a> {
    cfg: &'a ExperimentConfig,
    lat: LatticeSpec,
    sim: SimConfig,
    out: Option<&'a Path>,
}

impl Job<'_> {
    fn run(&self, modulation: &ModulationSpec, coords: &[u64]) -> Result<EnsembleSeries> {
        let sim = SimConfig {
            seed: derive_seed(self.cfg.seed, coords),
            ..self.sim
        };
        let series = engine::run(&sim, &self.lat, modulation)?;
        if let (true, Some(dir)) = (self.cfg.dump_snapshots, self.out) {
            let tag: Vec<String> = coords.iter().map(u64::to_string).collect();
            let path = dir.join(format!("snapshots_{}.csv", tag.join("_")));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            series
                .write_csv(std::io::BufWriter::new(file))
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(series)
    }
}

fn sweep(
    job: &Job,
    kind: Configuration,
    phi_deg: f64,
    angle_index: u64,
    with_floor: bool,
) -> Result<SweepResult> {
    let cfg = job.cfg;
    let omega_x = job.lat.vibrational_frequency();
    let theory = KindTheory::new(kind, phi_deg, cfg.theta(), omega_x)?;
    let phi = phi_deg.to_radians();
    let own = Weighting::for_configuration(kind);
    let cross = match own {
        Weighting::Density => Weighting::Magnetization,
        Weighting::Magnetization => Weighting::Density,
    };
    let k = kind_index(kind);

    let null = if with_floor {
        let off = ModulationSpec::new(kind, phi, 0.0, 0.0)?;
        Some(job.run(&off, &[TAG_NULL, k, angle_index]))
    } else {
        None
    };

    let mut points = Vec::new();
    for (i, delta) in cfg.delta_grid(omega_x).into_iter().enumerate() {
        let mut point = SweepPoint {
            index: i,
            delta,
            delta_over_omega_x: delta / omega_x,
            v_mod: theory::modulation_velocity(delta, phi)?,
            v_cm: None,
            stderr: None,
            proxy: None,
            proxy_cross: None,
            proxy_floor: None,
            proxy_cross_floor: None,
            theory_delta_res: theory.delta_res,
            status: "ok".into(),
        };
        let measured = cfg.modulation(kind, phi, delta).and_then(|m| {
            let series = job.run(&m, &[TAG_POINT, k, angle_index, i as u64])?;
            let (v, e) = observables::cm_velocity(&series)?;
            Ok((m, series, v, e))
        });
        match measured {
            Ok((m, series, v, e)) => {
                point.v_cm = Some(v);
                point.stderr = Some(e);
                point.proxy = Some(observables::transmission_proxy(&series, &m, own));
                point.proxy_cross = Some(observables::transmission_proxy(&series, &m, cross));
                match &null {
                    Some(Ok(null)) => {
                        let n = cfg.floor_frequencies;
                        point.proxy_floor = Some(observables::proxy_floor(null, m.delta_k, delta, own, n));
                        point.proxy_cross_floor =
                            Some(observables::proxy_floor(null, m.delta_k, delta, cross, n));
                    }
                    Some(Err(e)) => point.status = format!("null run failed: {e}"),
                    None => {}
                }
            }
            Err(e) => point.status = e.to_string(),
        }
        points.push(point);
    }

    let good: Vec<CurvePoint> = points
        .iter()
        .filter_map(|p| {
            Some(CurvePoint {
                abscissa: p.delta,
                v_cm_x: p.v_cm?[0],
                stderr: p.stderr?[0],
            })
        })
        .collect();
    let curve = ResonanceCurve::new(
        &ModulationSpec::new(kind, phi, cfg.epsilon, 0.0)?,
        cfg.theta(),
        job.lat.u0,
        job.lat.gamma_p,
        good,
    )?;
    let (peaks, analysis_error) = match observables::resonance_scan_analyze(&curve) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let peaks_over_omega_x =
        peaks.map(|p| [p.negative.map(|q| q.position / omega_x), p.positive.map(|q| q.position / omega_x)]);
    Ok(SweepResult {
        kind,
        phi_deg,
        theory,
        points,
        curve,
        peaks,
        peaks_over_omega_x,
        analysis_error,
    })
}

fn job<'a>(cfg: &'a ExperimentConfig, out: Option<&'a Path>) -> Result<Job<'a>> {
    let lat = cfg.lattice()?;
    let sim = cfg.sim_config(&lat)?;
    Ok(Job { cfg, lat, sim, out })
}

/// Drift (and proxy) against detuning for each configured arrangement.
pub fn run_delta_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SweepResult>> {
    let job = job(cfg, out)?;
    let with_floor = cfg.experiment == ExperimentKind::TransmissionScan;
    cfg.configurations
        .iter()
        .map(|&kind| sweep(&job, kind, cfg.phi_deg, 0, with_floor))
        .collect()
}

/// Straight-line fit with standard errors of slope and intercept.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let (slope, intercept, slope_err) = observables::linear_fit(x, y);
    let n = x.len() as f64;
    let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    (slope, slope_err, intercept, slope_err * mean_sq.sqrt())
}

/// Resonance position against sin φ, one sweep per angle and configuration.
pub fn run_angle_sweep(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<(Vec<SweepResult>, Vec<AngleRow>, Vec<Option<LineFit>>)> {
    if cfg.angles_deg.len() < 3 {
        return Err(Error::invalid(
            "angles_deg",
            "at least 3 angles for a line fit",
            cfg.angles_deg.len() as f64,
        ));
    }
    let job = job(cfg, out)?;
    let omega_x = job.lat.vibrational_frequency();
    let theta = cfg.theta();
    let mut sweeps = Vec::new();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &kind in &cfg.configurations {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (a, &phi_deg) in cfg.angles_deg.iter().enumerate() {
            let s = sweep(&job, kind, phi_deg, a as u64 + 1, false)?;
            let delta_res = s.resonance_magnitude();
            let status = match (&s.analysis_error, delta_res) {
                (Some(e), _) => e.clone(),
                (None, None) => "no resonance detected".into(),
                (None, Some(_)) => "ok".into(),
            };
            let sin_phi = phi_deg.to_radians().sin();
            if let Some(d) = delta_res {
                xs.push(sin_phi);
                ys.push(d);
            }
            rows.push(AngleRow {
                kind,
                phi_deg,
                sin_phi,
                peaks: s.peaks,
                delta_res,
                theory_delta_res: s.theory.delta_res,
                status,
            });
            sweeps.push(s);
        }
        let theory_intercept = match kind {
            Configuration::Parallel => 0.0,
            Configuration::Perp => omega_x,
        };
        fits.push((xs.len() >= 2).then(|| {
            let (slope, slope_stderr, intercept, intercept_stderr) = fit_line(&xs, &ys);
            LineFit {
                kind,
                slope,
                slope_stderr,
                intercept,
                intercept_stderr,
                n_points: xs.len(),
                theory_slope: 2.0 * omega_x / theta.sin(),
                theory_intercept,
            }
        }));
    }
    Ok((sweeps, rows, fits))
}

/// Moving-frame profiles at each configuration's predicted resonance.
pub fn run_density_profile(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<ProfileResult>> {
    let job = job(cfg, out)?;
    let omega_x = job.lat.vibrational_frequency();
    let v_mode = theory::mode_velocity(cfg.theta(), omega_x)?;
    let mut results = Vec::new();
    for &kind in &cfg.configurations {
        let th = KindTheory::new(kind, cfg.phi_deg, cfg.theta(), omega_x)?;
        let m = cfg.modulation(kind, cfg.phi(), th.delta_res)?;
        let series = job.run(&m, &[TAG_PROFILE, kind_index(kind)])?;
        let window = Window {
            origin: 0.0,
            length: cfg.profile_periods as f64 * 2.0 * PI / th.q,
        };
        let bins = cfg.profile_periods * cfg.profile_bins_per_period;
        let profile = observables::moving_frame_density(&series, v_mode, window, bins, true)?;
        let half = observables::moving_frame_density(&series, 0.5 * v_mode, window, bins, false)?;
        let rest = observables::moving_frame_density(&series, 0.0, window, bins, false)?;
        let power = |p: &DensityProfile| -> Result<f64> {
            Ok(observables::power_spectrum(p, Channel::Density)?[cfg.profile_periods])
        };
        let grating = observables::grating_wavevector_estimate(&profile, Channel::Density);
        results.push(ProfileResult {
            kind,
            delta: th.delta_res,
            theory_q: th.q,
            grating_status: match &grating {
                Ok(_) => "ok".into(),
                Err(e) => e.to_string(),
            },
            grating: grating.ok(),
            magnetization_grating: observables::grating_wavevector_estimate(&profile, Channel::Magnetization)
                .ok(),
            half_frame_grating: observables::grating_wavevector_estimate(&half, Channel::Density).ok(),
            power_at_theory_q: [power(&profile)?, power(&rest)?],
            profile,
        });
    }
    Ok(results)
}

/// Runs the configured experiment and, when `out` is given, writes its
/// files there.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    cfg.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let start = Instant::now();
    let outcome = match cfg.experiment {
        ExperimentKind::Predict => Outcome::Predict,
        ExperimentKind::DeltaSweep => Outcome::DeltaSweep {
            sweeps: run_delta_sweep(cfg, out)?,
        },
        ExperimentKind::TransmissionScan => Outcome::TransmissionScan {
            sweeps: run_delta_sweep(cfg, out)?,
        },
        ExperimentKind::AngleSweep => {
            let (sweeps, rows, fits) = run_angle_sweep(cfg, out)?;
            Outcome::AngleSweep { sweeps, rows, fits }
        }
        ExperimentKind::DensityProfile => {
            let profiles = run_density_profile(cfg, out)?;
            let find = |k: Configuration| profiles.iter().find(|p| p.kind == k);
            let (q_ratio, theory_q_ratio) = match (find(Configuration::Parallel), find(Configuration::Perp)) {
                (Some(a), Some(b)) => (
                    a.grating.zip(b.grating).map(|(ga, gb)| gb.q_hat / ga.q_hat),
                    Some(b.theory_q / a.theory_q),
                ),
                _ => (None, None),
            };
            Outcome::DensityProfile {
                profiles,
                q_ratio,
                theory_q_ratio,
            }
        }
    };
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        tool: format!("lattice-brillouin {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        config: cfg.clone(),
        theory: TheoryEcho::new(cfg)?,
        outcome,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        export::write_record(&record, dir)?;
    }
    Ok(record)
}
