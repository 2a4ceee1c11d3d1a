//! CSV and JSON files of a [`RunRecord`], and readers for the CSV files.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! back gives the in-memory values bit for bit. Missing values are empty
//! fields.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiments::{AngleRow, LineFit, Outcome, ProfileResult, RunRecord, SweepPoint, SweepResult};
use crate::error::{Error, Result};
use crate::model::Configuration;

pub const SWEEP_CSV_HEADER: &str = "index,delta,delta_over_omega_x,v_mod,v_cm_x,v_cm_y,v_cm_z,stderr_x,stderr_y,stderr_z,proxy,proxy_floor,proxy_cross,proxy_cross_floor,theory_delta_res,status";
pub const ANGLE_CSV_HEADER: &str =
    "kind,phi_deg,sin_phi,delta_neg,delta_neg_err,delta_pos,delta_pos_err,delta_res,theory_delta_res,status";
pub const FIT_CSV_HEADER: &str =
    "kind,slope,slope_stderr,intercept,intercept_stderr,n_points,theory_slope,theory_intercept";
pub const PROFILE_CSV_HEADER: &str = "x,density,density_plus,density_minus";

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TIMING_FILE: &str = "timing.json";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Keeps free text inside one CSV field.
fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for p in points {
        let v = |k: usize| opt(p.v_cm.map(|v| v[k]));
        let e = |k: usize| opt(p.stderr.map(|v| v[k]));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.index,
            p.delta,
            p.delta_over_omega_x,
            p.v_mod,
            v(0),
            v(1),
            v(2),
            e(0),
            e(1),
            e(2),
            opt(p.proxy),
            opt(p.proxy_floor),
            opt(p.proxy_cross),
            opt(p.proxy_cross_floor),
            p.theory_delta_res,
            clean(&p.status)
        )
        .unwrap();
    }
    out
}

pub fn angle_csv(rows: &[AngleRow]) -> String {
    let mut out = format!("{ANGLE_CSV_HEADER}\n");
    for r in rows {
        let neg = r.peaks.and_then(|p| p.negative);
        let pos = r.peaks.and_then(|p| p.positive);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.kind,
            r.phi_deg,
            r.sin_phi,
            opt(neg.map(|p| p.position)),
            opt(neg.map(|p| p.uncertainty)),
            opt(pos.map(|p| p.position)),
            opt(pos.map(|p| p.uncertainty)),
            opt(r.delta_res),
            r.theory_delta_res,
            clean(&r.status)
        )
        .unwrap();
    }
    out
}

pub fn fit_csv(fits: &[Option<LineFit>]) -> String {
    let mut out = format!("{FIT_CSV_HEADER}\n");
    for f in fits.iter().flatten() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.kind,
            f.slope,
            f.slope_stderr,
            f.intercept,
            f.intercept_stderr,
            f.n_points,
            f.theory_slope,
            f.theory_intercept
        )
        .unwrap();
    }
    out
}

pub fn profile_csv(p: &ProfileResult) -> String {
    let mut out = format!("{PROFILE_CSV_HEADER}\n");
    let states = p.profile.by_state.as_ref();
    for (i, x) in p.profile.bin_centers().iter().enumerate() {
        let plus = states.map(|s| s[0][i]);
        let minus = states.map(|s| s[1][i]);
        writeln!(out, "{x},{},{},{}", p.profile.density[i], opt(plus), opt(minus)).unwrap();
    }
    out
}

fn sweep_file(s: &SweepResult, with_angle: bool) -> String {
    if with_angle {
        format!("sweep_{}_phi{}.csv", s.kind, s.phi_deg)
    } else {
        format!("sweep_{}.csv", s.kind)
    }
}

/// Writes the summary, the config echo, the timing file and the CSV tables.
pub fn write_record(record: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut summary = serde_json::to_string_pretty(record)?;
    summary.push('\n');
    write_file(dir.join(SUMMARY_FILE), &summary)?;
    write_file(dir.join(CONFIG_FILE), &record.config.to_toml_string())?;
    write_file(
        dir.join(TIMING_FILE),
        &format!("{{\"wall_clock_seconds\": {}}}\n", record.wall_clock_seconds),
    )?;
    match &record.outcome {
        Outcome::Predict => {}
        Outcome::DeltaSweep { sweeps } | Outcome::TransmissionScan { sweeps } => {
            for s in sweeps {
                write_file(dir.join(sweep_file(s, false)), &sweep_csv(&s.points))?;
            }
        }
        Outcome::AngleSweep { sweeps, rows, fits } => {
            for s in sweeps {
                write_file(dir.join(sweep_file(s, true)), &sweep_csv(&s.points))?;
            }
            write_file(dir.join("angles.csv"), &angle_csv(rows))?;
            write_file(dir.join("fits.csv"), &fit_csv(fits))?;
        }
        Outcome::DensityProfile { profiles, .. } => {
            for p in profiles {
                write_file(dir.join(format!("profile_{}.csv", p.kind)), &profile_csv(p))?;
            }
        }
    }
    Ok(())
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        field
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad number {field:?}")))
    }
}

fn parse(field: &str) -> Result<f64> {
    parse_opt(field)?.ok_or_else(|| Error::Config("missing value".into()))
}

fn triple(fields: &[&str]) -> Result<Option<[f64; 3]>> {
    let v = [parse_opt(fields[0])?, parse_opt(fields[1])?, parse_opt(fields[2])?];
    Ok(match v {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        _ => None,
    })
}

/// Reads a table written by [`sweep_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_CSV_HEADER) {
        return Err(Error::Config("unexpected sweep CSV header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 16 {
                return Err(Error::Config(format!("expected 16 fields, got {}", f.len())));
            }
            Ok(SweepPoint {
                index: f[0].parse().map_err(|_| Error::Config(format!("bad index {:?}", f[0])))?,
                delta: parse(f[1])?,
                delta_over_omega_x: parse(f[2])?,
                v_mod: parse(f[3])?,
                v_cm: triple(&f[4..7])?,
                stderr: triple(&f[7..10])?,
                proxy: parse_opt(f[10])?,
                proxy_floor: parse_opt(f[11])?,
                proxy_cross: parse_opt(f[12])?,
                proxy_cross_floor: parse_opt(f[13])?,
                theory_delta_res: parse(f[14])?,
                status: f[15].to_string(),
            })
        })
        .collect()
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepPoint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_csv(&text)
}

/// Path of the sweep table for one configuration of a delta sweep.
pub fn sweep_path(dir: &Path, kind: Configuration) -> PathBuf {
    dir.join(format!("sweep_{kind}.csv"))
}
