//! Ensemble integrator: velocity-Verlet motion on the state-dependent
//! potential, Bernoulli-sampled optical pumping jumps and recoil kicks.
//!
//! Atoms never interact, so each one is integrated on its own counter-based
//! stream. Results do not depend on the number of workers.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, AtomState, LatticeSpec, ModulationSpec, Sublevel};
use crate::rng::AtomRng;
use crate::units::MASS;

/// Upper bound on `dt · max(Ωx, Γ₀′)`.
pub const STABILITY_BOUND: f64 = 0.05;

/// Probability of starting in the locally deeper sublevel.
const DEEPER_SUBLEVEL_PROBABILITY: f64 = 0.9;

/// Switches used by statistical tests of the integrator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineHooks {
    /// Replace the position-dependent pumping rate by this constant.
    pub uniform_rate: Option<f64>,
    /// Disable all forces.
    pub forces_off: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_atoms: usize,
    /// Time step, units of 1/ω_r.
    pub dt: f64,
    /// Steps with the modulation on.
    pub n_steps: usize,
    /// Duration of the unmodulated phase that precedes the run.
    pub t_thermalize: f64,
    pub seed: u64,
    pub snapshot_stride: usize,
    /// Momentum spread per component at initialization (ħk).
    pub initial_temperature: f64,
    pub recoil_kicks: bool,
    /// Cloud width in lattice unit cells along each axis.
    pub cloud_cells: usize,
    pub workers: usize,
    #[serde(default)]
    pub hooks: EngineHooks,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_atoms: 1000,
            dt: 0.005,
            n_steps: 10_000,
            t_thermalize: 0.0,
            seed: 1,
            snapshot_stride: 10,
            initial_temperature: 5.0,
            recoil_kicks: true,
            cloud_cells: 8,
            workers: 1,
            hooks: EngineHooks::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self, lat: &LatticeSpec) -> Result<()> {
        if self.n_atoms < 1 {
            return Err(Error::invalid("n_atoms", "n_atoms >= 1", self.n_atoms as f64));
        }
        if self.snapshot_stride < 1 {
            return Err(Error::invalid(
                "snapshot_stride",
                "snapshot_stride >= 1",
                self.snapshot_stride as f64,
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "dt > 0", self.dt));
        }
        let fastest = lat.vibrational_frequency().max(lat.gamma_p);
        if self.dt * fastest > STABILITY_BOUND {
            return Err(Error::invalid(
                "dt",
                "dt * max(omega_x, gamma_p) <= 0.05",
                self.dt,
            ));
        }
        if !(self.t_thermalize >= 0.0 && self.t_thermalize.is_finite()) {
            return Err(Error::invalid("t_thermalize", "t_thermalize >= 0", self.t_thermalize));
        }
        if !(self.initial_temperature >= 0.0 && self.initial_temperature.is_finite()) {
            return Err(Error::invalid(
                "initial_temperature",
                "initial_temperature >= 0",
                self.initial_temperature,
            ));
        }
        if self.cloud_cells < 1 {
            return Err(Error::invalid("cloud_cells", "cloud_cells >= 1", self.cloud_cells as f64));
        }
        if let Some(rate) = self.hooks.uniform_rate {
            if !(rate >= 0.0 && rate * self.dt <= 1.0) {
                return Err(Error::invalid("uniform_rate", "0 <= rate * dt <= 1", rate));
            }
        }
        Ok(())
    }

    pub fn thermalize_steps(&self) -> usize {
        (self.t_thermalize / self.dt).round() as usize
    }

    /// Number of recorded snapshots, including the one at switch-on.
    pub fn n_snapshots(&self) -> usize {
        self.n_steps / self.snapshot_stride + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub sim: SimConfig,
    pub lattice: LatticeSpec,
    pub modulation: ModulationSpec,
    /// Time-averaged ensemble kinetic energy in each quarter of the
    /// thermalization phase (empty when there was none).
    pub thermalization_kinetic: Vec<f64>,
    pub provenance: String,
}

impl SeriesMetadata {
    /// Metadata for data that did not come out of [`run`].
    pub fn detached(lattice: LatticeSpec, modulation: ModulationSpec) -> Self {
        SeriesMetadata {
            sim: SimConfig::default(),
            lattice,
            modulation,
            thermalization_kinetic: Vec::new(),
            provenance: "detached".into(),
        }
    }
}

/// Snapshots of the ensemble during the modulated phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<AtomState>>,
    pub metadata: SeriesMetadata,
}

impl EnsembleSeries {
    /// Assembles a series from recorded data, checking the shape invariants.
    pub fn from_parts(
        times: Vec<f64>,
        snapshots: Vec<Vec<AtomState>>,
        metadata: SeriesMetadata,
    ) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::InsufficientData(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if let Some(first) = snapshots.first() {
            if snapshots.iter().any(|s| s.len() != first.len()) {
                return Err(Error::InsufficientData("ragged snapshots".into()));
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InsufficientData("times not strictly increasing".into()));
        }
        Ok(EnsembleSeries {
            times,
            snapshots,
            metadata,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.snapshots.first().map_or(0, Vec::len)
    }

    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    /// Raw dump, one row per atom and snapshot.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SNAPSHOT_CSV_HEADER}")?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for (id, a) in snap.iter().enumerate() {
                writeln!(
                    out,
                    "{t:e},{id},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                    a.r.x,
                    a.r.y,
                    a.r.z,
                    a.p.x,
                    a.p.y,
                    a.p.z,
                    a.s.as_i8()
                )?;
            }
        }
        Ok(())
    }
}

pub const SNAPSHOT_CSV_HEADER: &str = "t,atom_id,x,y,z,px,py,pz,s";

/// Atoms together with their random streams and cached forces.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub atoms: Vec<AtomState>,
    rngs: Vec<AtomRng>,
    forces: Vec<Vector3<f64>>,
    force_stamp: Option<(f64, ModulationSpec)>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Builds an ensemble from explicit states, each atom on stream `(seed, i)`.
    pub fn from_states(atoms: Vec<AtomState>, seed: u64) -> Self {
        let rngs = (0..atoms.len() as u64).map(|i| AtomRng::new(seed, i)).collect();
        let forces = vec![Vector3::zeros(); atoms.len()];
        Ensemble {
            atoms,
            rngs,
            forces,
            force_stamp: None,
        }
    }

    /// Advances every atom by one step `t -> t + dt`.
    pub fn step(
        &mut self,
        cfg: &SimConfig,
        lat: &LatticeSpec,
        modulation: &ModulationSpec,
        t: f64,
        dt: f64,
    ) {
        let ctx = StepContext::new(cfg, lat, modulation);
        let fresh = match self.force_stamp {
            Some((stamp, m)) => m == *modulation && (stamp - t).abs() <= 1e-9 * dt,
            None => false,
        };
        if !fresh {
            for (f, a) in self.forces.iter_mut().zip(&self.atoms) {
                *f = ctx.force(a, t);
            }
        }
        for ((atom, rng), f) in self.atoms.iter_mut().zip(&mut self.rngs).zip(&mut self.forces) {
            ctx.advance(atom, f, rng, t, dt);
        }
        self.force_stamp = Some((t + dt, *modulation));
    }
}

/// Per-step constants shared by every atom.
struct StepContext<'a> {
    lat: &'a LatticeSpec,
    modulation: &'a ModulationSpec,
    hooks: EngineHooks,
    recoil_kicks: bool,
}

impl<'a> StepContext<'a> {
    fn new(cfg: &SimConfig, lat: &'a LatticeSpec, modulation: &'a ModulationSpec) -> Self {
        StepContext {
            lat,
            modulation,
            hooks: cfg.hooks,
            recoil_kicks: cfg.recoil_kicks,
        }
    }

    #[inline]
    fn force(&self, a: &AtomState, t: f64) -> Vector3<f64> {
        if self.hooks.forces_off {
            Vector3::zeros()
        } else {
            model::force(self.lat, self.modulation, &a.r, t, a.s)
        }
    }

    /// Force on the atom and its pumping rate.
    #[inline]
    fn local(&self, a: &AtomState, t: f64) -> (Vector3<f64>, f64) {
        let (f, rate) = model::force_and_pump_rate(self.lat, self.modulation, &a.r, t, a.s);
        let f = if self.hooks.forces_off { Vector3::zeros() } else { f };
        (f, self.hooks.uniform_rate.unwrap_or(rate))
    }

    /// One velocity-Verlet step followed by a jump trial. `force` holds the
    /// force at `(r, t, s)` on entry and at the new state on exit.
    #[inline]
    fn advance(&self, a: &mut AtomState, force: &mut Vector3<f64>, rng: &mut AtomRng, t: f64, dt: f64) {
        let half = 0.5 * dt;
        a.p += *force * half;
        a.r += a.p * (dt / MASS);
        let t_next = t + dt;
        let (f, rate) = self.local(a, t_next);
        *force = f;
        a.p += f * half;

        let jump_probability = rate * dt;
        if rng.uniform() < jump_probability {
            a.s = a.s.flipped();
            if self.recoil_kicks {
                // absorption and spontaneous emission, one photon momentum each
                for _ in 0..2 {
                    let n = rng.unit_vector();
                    a.p += Vector3::new(n[0], n[1], n[2]);
                }
            }
            *force = self.force(a, t_next);
        }
    }
}

fn initial_atom(cfg: &SimConfig, lat: &LatticeSpec, rng: &mut AtomRng) -> AtomState {
    let cell = lat.lattice_constants();
    let half = (cfg.cloud_cells / 2) as f64;
    let mut r = Vector3::zeros();
    for k in 0..3 {
        let inside = rng.uniform() * cell[k];
        let offset = (rng.uniform() * cfg.cloud_cells as f64).floor() - half;
        r[k] = inside + offset * cell[k];
    }
    let mut p = Vector3::zeros();
    for k in 0..3 {
        p[k] = cfg.initial_temperature * rng.normal();
    }
    let deeper = if model::potential(lat, &r, Sublevel::Plus) <= model::potential(lat, &r, Sublevel::Minus)
    {
        Sublevel::Plus
    } else {
        Sublevel::Minus
    };
    let s = if rng.uniform() < DEEPER_SUBLEVEL_PROBABILITY {
        deeper
    } else {
        deeper.flipped()
    };
    AtomState { r, p, s }
}

/// Samples the initial ensemble.
pub fn initialize(cfg: &SimConfig, lat: &LatticeSpec) -> Result<Ensemble> {
    cfg.validate(lat)?;
    let mut rngs: Vec<AtomRng> = (0..cfg.n_atoms as u64)
        .map(|i| AtomRng::new(cfg.seed, i))
        .collect();
    let atoms = rngs.iter_mut().map(|rng| initial_atom(cfg, lat, rng)).collect();
    Ok(Ensemble {
        atoms,
        rngs,
        forces: vec![Vector3::zeros(); cfg.n_atoms],
        force_stamp: None,
    })
}

/// Full trajectory of one atom: thermalization, then the modulated phase.
struct AtomRun {
    snapshots: Vec<AtomState>,
    thermal_kinetic: [f64; 4],
}

fn run_atom(
    index: usize,
    cfg: &SimConfig,
    lat: &LatticeSpec,
    modulation: &ModulationSpec,
) -> AtomRun {
    let mut rng = AtomRng::new(cfg.seed, index as u64);
    let mut atom = initial_atom(cfg, lat, &mut rng);

    let dark = modulation.switched_off();
    let ctx = StepContext::new(cfg, lat, &dark);
    let n_therm = cfg.thermalize_steps();
    let mut thermal_kinetic = [0.0; 4];
    let mut force = ctx.force(&atom, 0.0);
    for i in 0..n_therm {
        ctx.advance(&mut atom, &mut force, &mut rng, i as f64 * cfg.dt, cfg.dt);
        thermal_kinetic[4 * i / n_therm] += atom.kinetic_energy();
    }

    // the modulation phase origin is reset at switch-on
    let ctx = StepContext::new(cfg, lat, modulation);
    let mut force = ctx.force(&atom, 0.0);
    let mut snapshots = Vec::with_capacity(cfg.n_snapshots());
    snapshots.push(atom);
    for i in 0..cfg.n_steps {
        ctx.advance(&mut atom, &mut force, &mut rng, i as f64 * cfg.dt, cfg.dt);
        if (i + 1) % cfg.snapshot_stride == 0 {
            snapshots.push(atom);
        }
    }
    AtomRun {
        snapshots,
        thermal_kinetic,
    }
}

/// Thermalizes with the modulation off, then records `n_steps` with it on.
pub fn run(cfg: &SimConfig, lat: &LatticeSpec, modulation: &ModulationSpec) -> Result<EnsembleSeries> {
    cfg.validate(lat)?;
    let job = |i: usize| run_atom(i, cfg, lat, modulation);
    let runs: Vec<AtomRun> = if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.n_atoms).into_par_iter().map(job).collect())
    } else {
        (0..cfg.n_atoms).map(job).collect()
    };

    let n_snap = cfg.n_snapshots();
    let stride_dt = cfg.snapshot_stride as f64 * cfg.dt;
    let times = (0..n_snap).map(|k| k as f64 * stride_dt).collect();
    let snapshots = (0..n_snap)
        .map(|k| runs.iter().map(|r| r.snapshots[k]).collect())
        .collect();

    let n_therm = cfg.thermalize_steps();
    let thermalization_kinetic = if n_therm >= 4 {
        (0..4)
            .map(|q| {
                let steps_in_quarter = (0..n_therm).filter(|i| 4 * i / n_therm == q).count();
                let total: f64 = runs.iter().map(|r| r.thermal_kinetic[q]).sum();
                total / (steps_in_quarter * cfg.n_atoms) as f64
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(EnsembleSeries {
        times,
        snapshots,
        metadata: SeriesMetadata {
            sim: *cfg,
            lattice: *lat,
            modulation: *modulation,
            thermalization_kinetic,
            provenance: provenance(cfg, lat, modulation),
        },
    })
}

/// Version plus a fingerprint of the inputs that determine the run.
pub fn provenance(cfg: &SimConfig, lat: &LatticeSpec, modulation: &ModulationSpec) -> String {
    let mut cfg = *cfg;
    cfg.workers = 0;
    let echo = serde_json::to_string(&(cfg, lat, modulation)).unwrap_or_default();
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in echo.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("lattice-brillouin {} inputs-{h:016x}", env!("CARGO_PKG_VERSION"))
}
