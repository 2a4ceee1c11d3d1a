//! Measurements on an [`EnsembleSeries`]: centre-of-mass drift, vibrational
//! frequency, moving-frame density profiles, grating wavevectors and the
//! diffraction proxy for probe transmission.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::engine::EnsembleSeries;
use crate::error::{Error, Result};
use crate::model::{Configuration, ModulationSpec, Sublevel};
use crate::units::MASS;

/// Minimum snapshots for a drift fit.
pub const MIN_SNAPSHOTS: usize = 10;

/// A peak counts only if it exceeds this multiple of the reference level
/// (median stderr for resonance curves, median power for spectra).
pub const SIGNIFICANCE: f64 = 3.0;

/// Least-squares slope of `y` against `x` and its standard error from the
/// residuals. `x` must have at least three distinct values.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Drift velocity of the cloud: the slope of a straight-line fit to the mean
/// position, per component.
///
/// The mean of the per-atom slopes equals the slope of the mean position, and
/// since atoms are independent their spread gives the standard error
/// (`sd / sqrt(N)`). Residuals of the mean trajectory are correlated in time
/// and would underestimate it. A single atom falls back on its own residuals.
pub fn cm_velocity(series: &EnsembleSeries) -> Result<([f64; 3], [f64; 3])> {
    let n_snap = series.n_snapshots();
    if n_snap < MIN_SNAPSHOTS {
        return Err(Error::InsufficientData(format!(
            "{n_snap} snapshots, need at least {MIN_SNAPSHOTS}"
        )));
    }
    let n_atoms = series.n_atoms();
    if n_atoms == 0 {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let t = &series.times;
    let tm = t.iter().sum::<f64>() / n_snap as f64;
    let weights: Vec<f64> = t.iter().map(|v| v - tm).collect();
    let sxx: f64 = weights.iter().map(|w| w * w).sum();

    let mut v = [0.0; 3];
    let mut err = [0.0; 3];
    for k in 0..3 {
        let slopes: Vec<f64> = (0..n_atoms)
            .map(|j| {
                weights
                    .iter()
                    .zip(&series.snapshots)
                    .map(|(w, snap)| w * snap[j].r[k])
                    .sum::<f64>()
                    / sxx
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / n_atoms as f64;
        v[k] = mean;
        err[k] = if n_atoms > 1 {
            let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n_atoms - 1) as f64;
            (var / n_atoms as f64).sqrt()
        } else {
            let y: Vec<f64> = series.snapshots.iter().map(|s| s[0].r[k]).collect();
            linear_fit(t, &y).2
        };
    }
    Ok((v, err))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationalEstimate {
    /// Peak angular frequency.
    pub omega: f64,
    /// Spacing of the frequency grid.
    pub resolution: f64,
    /// Peak power over the median power above the cutoff.
    pub prominence: f64,
}

/// Dominant angular frequency of the per-atom x velocity above `low_cutoff`.
///
/// Each trajectory is mean-subtracted and Hann-windowed; the power spectra are
/// summed over atoms and the peak is refined by a parabola through the three
/// highest bins.
pub fn vibrational_spectrum(series: &EnsembleSeries, low_cutoff: f64) -> Result<VibrationalEstimate> {
    let n = series.n_snapshots();
    if n < 16 {
        return Err(Error::InsufficientData(format!("{n} snapshots, need at least 16")));
    }
    let sample = series.times[1] - series.times[0];
    let expected = series.metadata.lattice.vibrational_frequency();
    if expected > 0.0 && sample * expected > 2.0 * PI / 10.0 {
        return Err(Error::InsufficientData(
            "fewer than 10 samples per vibrational period".into(),
        ));
    }

    let fft = FftPlanner::new().plan_fft_forward(n);
    let hann: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let mut power = vec![0.0; n / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for j in 0..series.n_atoms() {
        let mean = series.snapshots.iter().map(|s| s[j].p.x).sum::<f64>() / n as f64;
        for (i, b) in buf.iter_mut().enumerate() {
            let v = (series.snapshots[i][j].p.x - mean) / MASS;
            *b = Complex::new(v * hann[i], 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }

    let resolution = 2.0 * PI / (n as f64 * sample);
    let first = ((low_cutoff / resolution).ceil() as usize).max(1);
    if first + 2 >= power.len() {
        return Err(Error::InsufficientData("cutoff above the Nyquist frequency".into()));
    }
    let band = &power[first..];
    let (peak, &peak_power) = band
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("band is non-empty");
    let floor = median(band);
    let prominence = peak_power / floor;
    if !(prominence > SIGNIFICANCE) {
        return Err(Error::NoResonance);
    }
    let k = first + peak;
    let offset = if k > first && k + 1 < power.len() {
        parabolic_offset(power[k - 1], power[k], power[k + 1]).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(VibrationalEstimate {
        omega: (k as f64 + offset) * resolution,
        resolution,
        prominence,
    })
}

/// Vertex offset of the parabola through equally spaced samples at -1, 0, 1,
/// when it is concave.
fn parabolic_offset(fm: f64, f0: f64, fp: f64) -> Option<f64> {
    let denom = fm - 2.0 * f0 + fp;
    if !(denom < 0.0) {
        return None;
    }
    let dx = 0.5 * (fm - fp) / denom;
    (dx.abs() <= 1.0).then_some(dx)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Pattern velocity or detuning.
    pub abscissa: f64,
    pub v_cm_x: f64,
    pub stderr: f64,
}

/// Drift velocity against the pattern velocity or detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceCurve {
    pub kind: Configuration,
    pub phi: f64,
    pub theta: f64,
    pub u0: f64,
    pub gamma_p: f64,
    pub epsilon: f64,
    pub points: Vec<CurvePoint>,
}

impl ResonanceCurve {
    pub fn new(
        modulation: &ModulationSpec,
        theta: f64,
        u0: f64,
        gamma_p: f64,
        points: Vec<CurvePoint>,
    ) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].abscissa > w[0].abscissa)) {
            return Err(Error::InsufficientData("abscissae not strictly increasing".into()));
        }
        Ok(ResonanceCurve {
            kind: modulation.kind,
            phi: modulation.phi,
            theta,
            u0,
            gamma_p,
            epsilon: modulation.epsilon,
            points,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub uncertainty: f64,
    /// Smoothed drift velocity at the peak grid point.
    pub height: f64,
}

/// Extremum on each side of zero; `None` where nothing significant was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonancePeaks {
    pub negative: Option<Peak>,
    pub positive: Option<Peak>,
}

impl ResonancePeaks {
    pub fn both(&self) -> Option<(Peak, Peak)> {
        Some((self.negative?, self.positive?))
    }
}

/// Locates the drift extrema on the negative and positive branches.
///
/// The curve is smoothed by a 3-point moving average (2 points at the ends).
/// On each branch the largest |smoothed| value is taken, ties going to the
/// smaller |abscissa|, and refined by the vertex of a parabola through the
/// three nearest points. A branch whose peak is below [`SIGNIFICANCE`] times
/// the median stderr is reported as `None`. The uncertainty is the half width
/// at half maximum scaled by noise over height, and never less than half the
/// local grid step.
pub fn resonance_scan_analyze(curve: &ResonanceCurve) -> Result<ResonancePeaks> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} curve points", pts.len())));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.abscissa).collect();
    let n = pts.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            pts[lo..=hi].iter().map(|p| p.v_cm_x).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mag: Vec<f64> = smooth.iter().map(|v| v.abs()).collect();
    let noise = median(&pts.iter().map(|p| p.stderr).collect::<Vec<_>>());

    let branch = |keep: &dyn Fn(f64) -> bool| -> Option<Peak> {
        let idx: Vec<usize> = (0..n).filter(|&i| keep(x[i])).collect();
        let mut best = *idx.first()?;
        for &i in &idx {
            let better = mag[i] > mag[best] || (mag[i] == mag[best] && x[i].abs() < x[best].abs());
            if better {
                best = i;
            }
        }
        let height = mag[best];
        if !(height > SIGNIFICANCE * noise) {
            return None;
        }
        let c = best.clamp(1, n - 2);
        let (x0, x1, x2) = (x[c - 1], x[c], x[c + 1]);
        let position = parabola_vertex([x0, x1, x2], [mag[c - 1], mag[c], mag[c + 1]])
            .filter(|v| *v >= x0 && *v <= x2)
            .unwrap_or(x[best]);

        let lo = *idx.first().unwrap();
        let hi = *idx.last().unwrap();
        let half = 0.5 * height;
        let left = crossing(&x, &mag, best, lo, half);
        let right = crossing(&x, &mag, best, hi, half);
        let hwhm = 0.5 * (right - left);
        let (a, b) = (best.saturating_sub(1), (best + 1).min(n - 1));
        let local_step = (x[b] - x[a]) / (b - a) as f64;
        let uncertainty = (hwhm * noise / height).max(0.5 * local_step);
        Some(Peak {
            position,
            uncertainty,
            height: smooth[best],
        })
    };
    Ok(ResonancePeaks {
        negative: branch(&|a| a < 0.0),
        positive: branch(&|a| a > 0.0),
    })
}

/// Abscissa where `y` falls below `level` walking from `from` towards `to`,
/// linearly interpolated; the end of the walk if it never does.
fn crossing(x: &[f64], y: &[f64], from: usize, to: usize, level: f64) -> f64 {
    let mut i = from;
    while i != to {
        let j = if to > from { i + 1 } else { i - 1 };
        if y[j] < level {
            let f = (y[i] - level) / (y[i] - y[j]);
            return x[i] + f * (x[j] - x[i]);
        }
        i = j;
    }
    x[to]
}

/// Vertex of the parabola through three points, if it opens downwards.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / d;
    let b = (x[2].powi(2) * (y[0] - y[1]) + x[1].powi(2) * (y[2] - y[0]) + x[0].powi(2) * (y[1] - y[2])) / d;
    (a < 0.0).then(|| -b / (2.0 * a))
}

/// Spatial window that positions are folded into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub origin: f64,
    pub length: f64,
}

/// Time-accumulated histogram of x in a moving frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub frame_velocity: f64,
    pub window: Window,
    /// Counts per bin summed over snapshots.
    pub density: Vec<f64>,
    /// Counts per bin for s = +1 and s = -1.
    pub by_state: Option<[Vec<f64>; 2]>,
    pub n_atoms: usize,
    pub n_snapshots: usize,
    /// Samples that fell outside the window. Folding keeps this at zero
    /// unless positions are not finite.
    pub clipped: usize,
    /// κ⊥ of the lattice the series came from, for masking its harmonics.
    pub kappa_perp: f64,
}

impl DensityProfile {
    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.window.length / self.n_bins() as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins())
            .map(|i| self.window.origin + (i as f64 + 0.5) * w)
            .collect()
    }

    pub fn total_counts(&self) -> f64 {
        self.density.iter().sum()
    }

    /// Counts per snapshot.
    pub fn time_averaged(&self) -> Vec<f64> {
        self.density
            .iter()
            .map(|c| c / self.n_snapshots as f64)
            .collect()
    }

    /// n₊ − n₋ per bin.
    pub fn magnetization(&self) -> Option<Vec<f64>> {
        let [plus, minus] = self.by_state.as_ref()?;
        Some(plus.iter().zip(minus).map(|(a, b)| a - b).collect())
    }

    /// (max − min) / (max + min) of the density.
    pub fn contrast(&self) -> f64 {
        let max = self.density.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.density.iter().cloned().fold(f64::MAX, f64::min);
        if max + min > 0.0 {
            (max - min) / (max + min)
        } else {
            0.0
        }
    }
}

/// Histogram of `x - frame_velocity * t` folded into `window`, accumulated
/// over all snapshots.
pub fn moving_frame_density(
    series: &EnsembleSeries,
    frame_velocity: f64,
    window: Window,
    n_bins: usize,
    split_states: bool,
) -> Result<DensityProfile> {
    if !frame_velocity.is_finite() {
        return Err(Error::invalid("frame_velocity", "finite", frame_velocity));
    }
    if !(window.length > 0.0 && window.length.is_finite()) || !window.origin.is_finite() {
        return Err(Error::invalid("window", "finite origin and length > 0", window.length));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "n_bins >= 1", 0.0));
    }
    let width = window.length / n_bins as f64;
    let mut density = vec![0.0; n_bins];
    let mut states = [vec![0.0; n_bins], vec![0.0; n_bins]];
    let mut clipped = 0;
    for (t, snap) in series.times.iter().zip(&series.snapshots) {
        for a in snap {
            let u = (a.r.x - frame_velocity * t - window.origin).rem_euclid(window.length);
            if !u.is_finite() {
                clipped += 1;
                continue;
            }
            let bin = ((u / width) as usize).min(n_bins - 1);
            density[bin] += 1.0;
            let which = if a.s == Sublevel::Plus { 0 } else { 1 };
            states[which][bin] += 1.0;
        }
    }
    Ok(DensityProfile {
        frame_velocity,
        window,
        density,
        by_state: split_states.then_some(states),
        n_atoms: series.n_atoms(),
        n_snapshots: series.n_snapshots(),
        clipped,
        kappa_perp: series.metadata.lattice.kappa_perp,
    })
}

/// Which profile a grating is searched in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Total density; the static lattice shows at multiples of 2κ⊥.
    Density,
    /// n₊ − n₋; the static lattice shows at odd multiples of κ⊥.
    Magnetization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingEstimate {
    pub q_hat: f64,
    /// One FFT bin.
    pub uncertainty: f64,
    pub peak_power: f64,
    pub median_power: f64,
}

/// A grating must repeat at least this often inside the window. Slower
/// components come from the folded cloud envelope, not from a grating.
pub const MIN_GRATING_PERIODS: usize = 4;

/// False-alarm rate of the grating test on a featureless profile.
pub const GRATING_FALSE_ALARM: f64 = 0.01;

/// Peak-to-median power ratio a grating must exceed among `n_bins`
/// candidates.
///
/// Power in a bin of a featureless profile is exponentially distributed, so a
/// single bin beats c times the median with probability 2^-c, and the largest
/// of n bins beats 3 medians almost always once n is in the hundreds. The
/// threshold is raised until the chance of any bin passing is
/// [`GRATING_FALSE_ALARM`], and is never below [`SIGNIFICANCE`].
pub fn grating_threshold(n_bins: usize) -> f64 {
    (n_bins as f64 / GRATING_FALSE_ALARM).log2().max(SIGNIFICANCE)
}

/// Wavenumber of the strongest spatial Fourier component of the profile.
///
/// Components with fewer than [`MIN_GRATING_PERIODS`] periods in the window
/// and those within one bin of the static-lattice harmonics are excluded. The peak must pass [`grating_threshold`] relative to the
/// spectral median.
pub fn grating_wavevector_estimate(profile: &DensityProfile, channel: Channel) -> Result<GratingEstimate> {
    let spectrum = power_spectrum(profile, channel)?;
    let dq = 2.0 * PI / profile.window.length;
    let masked = |k: usize| -> bool {
        if k < MIN_GRATING_PERIODS {
            return true;
        }
        if profile.kappa_perp <= 0.0 {
            return false;
        }
        let q = k as f64 * dq;
        let (base, odd_only) = match channel {
            Channel::Density => (2.0 * profile.kappa_perp, false),
            Channel::Magnetization => (profile.kappa_perp, true),
        };
        let m = (q / base).round();
        m >= 1.0 && (!odd_only || m % 2.0 == 1.0) && (q - m * base).abs() <= 1.5 * dq
    };
    let candidates: Vec<(usize, f64)> = spectrum
        .iter()
        .enumerate()
        .filter(|(k, _)| !masked(*k))
        .map(|(k, p)| (k, *p))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoGrating);
    }
    let median_power = median(&candidates.iter().map(|c| c.1).collect::<Vec<_>>());
    let &(k, peak_power) = candidates
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    if !(peak_power > grating_threshold(candidates.len()) * median_power) {
        return Err(Error::NoGrating);
    }
    let offset = if k >= 1 && k + 1 < spectrum.len() && !masked(k - 1) && !masked(k + 1) {
        parabolic_offset(spectrum[k - 1], spectrum[k], spectrum[k + 1]).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(GratingEstimate {
        q_hat: (k as f64 + offset) * dq,
        uncertainty: dq,
        peak_power,
        median_power,
    })
}

/// |FFT|² of the mean-subtracted profile channel, bins 0 ..= n/2.
pub fn power_spectrum(profile: &DensityProfile, channel: Channel) -> Result<Vec<f64>> {
    let values = match channel {
        Channel::Density => profile.density.clone(),
        Channel::Magnetization => profile.magnetization().ok_or_else(|| {
            Error::InsufficientData("profile was built without the sublevel split".into())
        })?,
    };
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} bins")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect())
}

/// How each atom contributes to the diffracting grating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// w = 1
    Density,
    /// w = s
    Magnetization,
}

impl Weighting {
    /// Intensity patterns diffract off density, polarization patterns off
    /// the sublevel imbalance.
    pub fn for_configuration(kind: Configuration) -> Self {
        match kind {
            Configuration::Parallel => Weighting::Density,
            Configuration::Perp => Weighting::Magnetization,
        }
    }

    fn weight(self, s: Sublevel) -> f64 {
        match self {
            Weighting::Density => 1.0,
            Weighting::Magnetization => s.sign(),
        }
    }
}

/// Fourier amplitude of the material grating at the pattern's own wavevector
/// and frequency, |⟨w exp(i(Δk x − δ t))⟩| over atoms and snapshots.
pub fn transmission_proxy(series: &EnsembleSeries, modulation: &ModulationSpec, weighting: Weighting) -> f64 {
    transmission_proxy_at(series, modulation.delta_k, modulation.delta, weighting)
}

/// [`transmission_proxy`] at an arbitrary (wavevector, frequency).
pub fn transmission_proxy_at(series: &EnsembleSeries, delta_k: f64, delta: f64, weighting: Weighting) -> f64 {
    let samples = series.n_atoms() * series.n_snapshots();
    if samples == 0 {
        return 0.0;
    }
    let mut sum = Complex::new(0.0, 0.0);
    for (t, snap) in series.times.iter().zip(&series.snapshots) {
        let mut inner = Complex::new(0.0, 0.0);
        for a in snap {
            inner += Complex::from_polar(weighting.weight(a.s), delta_k * a.r.x);
        }
        sum += inner * Complex::from_polar(1.0, -delta * t);
    }
    sum.norm() / samples as f64
}

/// Nominal floor 1/√(N·T) of the proxy for uncorrelated samples.
pub fn proxy_floor_nominal(series: &EnsembleSeries) -> f64 {
    1.0 / ((series.n_atoms() * series.n_snapshots()) as f64).sqrt()
}

/// Empirical floor of the proxy: RMS over `count` frequencies spaced by
/// 4π/T around `delta`, the target itself excluded. Applied to an
/// unmodulated run it measures the noise the target value competes with,
/// including the correlation between snapshots of one atom.
pub fn proxy_floor(series: &EnsembleSeries, delta_k: f64, delta: f64, weighting: Weighting, count: usize) -> f64 {
    let span = series.times.last().copied().unwrap_or(0.0) - series.times.first().copied().unwrap_or(0.0);
    if count == 0 || !(span > 0.0) {
        return proxy_floor_nominal(series);
    }
    let step = 4.0 * PI / span;
    let half = (count / 2) as isize;
    let mut sum = 0.0;
    let mut used = 0;
    for m in -half..=half {
        if m == 0 {
            continue;
        }
        let s = transmission_proxy_at(series, delta_k, delta + m as f64 * step, weighting);
        sum += s * s;
        used += 1;
    }
    (sum / used as f64).sqrt()
}
