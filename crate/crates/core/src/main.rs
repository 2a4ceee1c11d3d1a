use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lattice_brillouin::harness::{self, ExperimentConfig, ExperimentKind, Outcome, RunRecord};
use lattice_brillouin::Error;

#[derive(Parser)]
#[command(name = "lattice-brillouin", version, about = "Propagation modes of a dissipative optical lattice under pump-probe modulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form resonance detunings and grating wavevectors only.
    Predict(Common),
    /// Centre-of-mass drift against pump-probe detuning.
    ScanDelta(Common),
    /// Resonance position against the pump-probe half-angle.
    ScanAngle(Common),
    /// Moving-frame density at each configuration's resonance.
    DensityProfile(Common),
    /// Diffraction proxy against detuning, with its noise floor.
    TransmissionScan(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML); built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of atoms per run.
    #[arg(long)]
    atoms: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write every raw snapshot (large).
    #[arg(long)]
    dump_snapshots: bool,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::InsufficientData(_) => "insufficient_data",
        Error::NoResonance => "no_resonance",
        Error::NoGrating => "no_grating",
        Error::UnknownKeys(_) => "unknown_keys",
        Error::Config(_) => "config",
        Error::Io { .. } => "io",
        Error::Json(_) => "json",
    }
}

fn configure(kind: ExperimentKind, args: Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => harness::load_config(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.atoms {
        cfg.n_atoms = n;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.dump_snapshots |= args.dump_snapshots;
    cfg.validate()?;
    Ok(cfg)
}

/// One line per headline result.
fn report(record: &RunRecord) {
    let w = record.theory.omega_x;
    println!("omega_x = {w:.6}, v_mode = {:.6}", record.theory.v_mode);
    for t in &record.theory.per_kind {
        println!(
            "theory {}: delta_res = ±{:.4} omega_x, q = {:.5}, mismatch = {:.5}",
            t.kind, t.delta_res_over_omega_x, t.q, t.mismatch
        );
    }
    match &record.outcome {
        Outcome::Predict => {}
        Outcome::DeltaSweep { sweeps } | Outcome::TransmissionScan { sweeps } | Outcome::AngleSweep { sweeps, .. } => {
            for s in sweeps {
                let fmt = |p: Option<f64>| p.map_or("none".to_string(), |v| format!("{v:+.3}"));
                let [neg, pos] = s.peaks_over_omega_x.unwrap_or([None, None]);
                let failed = s.points.iter().filter(|p| !p.is_ok()).count();
                println!(
                    "{} phi = {} deg: peaks at {} / {} omega_x ({failed} failed points)",
                    s.kind,
                    s.phi_deg,
                    fmt(neg),
                    fmt(pos)
                );
            }
        }
        Outcome::DensityProfile { profiles, q_ratio, .. } => {
            for p in profiles {
                match p.grating {
                    Some(g) => println!("{}: q = {:.4} ± {:.4} (theory {:.4})", p.kind, g.q_hat, g.uncertainty, p.theory_q),
                    None => println!("{}: {}", p.kind, p.grating_status),
                }
            }
            if let Some(r) = q_ratio {
                println!("q ratio perp/parallel = {r:.4}");
            }
        }
    }
    if let Outcome::AngleSweep { fits, .. } = &record.outcome {
        for f in fits.iter().flatten() {
            println!(
                "{} fit: slope = {:.4} (theory {:.4}), intercept = {:.4} (theory {:.4})",
                f.kind, f.slope, f.theory_slope, f.intercept, f.theory_intercept
            );
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (kind, args) = match cli.command {
        Command::Predict(a) => (ExperimentKind::Predict, a),
        Command::ScanDelta(a) => (ExperimentKind::DeltaSweep, a),
        Command::ScanAngle(a) => (ExperimentKind::AngleSweep, a),
        Command::DensityProfile(a) => (ExperimentKind::DensityProfile, a),
        Command::TransmissionScan(a) => (ExperimentKind::TransmissionScan, a),
    };
    let cfg = configure(kind, args)?;
    let record = harness::run_experiment(&cfg, Some(&cfg.output_dir))?;
    report(&record);
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = json!({"error": error_kind(&e), "message": e.to_string()});
            if let Error::UnknownKeys(keys) = &e {
                body["keys"] = json!(keys);
            }
            if let Error::InvalidParameter { field, constraint, value } = &e {
                body["field"] = json!(field);
                body["constraint"] = json!(constraint);
                body["value"] = json!(value);
            }
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}
