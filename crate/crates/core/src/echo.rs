//! Point-target echo simulation for a straight, level strip-map pass.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dsp::{cis_cycles, fft_friendly_length};
use crate::error::{Error, Result};
use crate::waveform::{subchirp_at, subchirp_phase_cycles, FimFrame, Waveform};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub altitude_m: f64,
    pub speed_mps: f64,
    /// Depression angle to the scene center, degrees.
    pub depression_deg: f64,
    pub antenna_len_m: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            altitude_m: 20e3,
            speed_mps: 100.0,
            depression_deg: 60.0,
            antenna_len_m: 2.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.altitude_m) {
            return Err(Error::config("geometry.h", "must be positive"));
        }
        if !positive(self.speed_mps) {
            return Err(Error::config("geometry.v", "must be positive"));
        }
        if !(self.depression_deg > 0.0 && self.depression_deg < 90.0) {
            return Err(Error::config("geometry.depression", "must lie strictly between 0 and 90 degrees"));
        }
        if !positive(self.antenna_len_m) {
            return Err(Error::config("geometry.antenna_len", "must be positive"));
        }
        Ok(())
    }

    /// Closest slant range to the scene center.
    pub fn center_range(&self) -> f64 {
        self.altitude_m / self.depression_deg.to_radians().sin()
    }

    /// Ground range of the scene center.
    pub fn center_ground_range(&self) -> f64 {
        self.altitude_m / self.depression_deg.to_radians().tan()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointTarget {
    pub id: String,
    /// Ground range from the nadir track, m.
    pub ground_range_m: f64,
    /// Along-track position, m.
    pub azimuth_m: f64,
    pub reflectivity: Complex64,
}

impl PointTarget {
    /// Target placed relative to the scene center.
    pub fn relative(id: impl Into<String>, geom: &Geometry, d_ground: f64, azimuth: f64, reflectivity: Complex64) -> Self {
        Self {
            id: id.into(),
            ground_range_m: geom.center_ground_range() + d_ground,
            azimuth_m: azimuth,
            reflectivity,
        }
    }

    pub fn closest_range(&self, geom: &Geometry) -> f64 {
        self.ground_range_m.hypot(geom.altitude_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantRange {
    pub exact: f64,
    /// Second-order expansion about the target's own closest approach.
    pub taylor: f64,
}

pub fn slant_range(geom: &Geometry, target: &PointTarget, slow_time: f64) -> SlantRange {
    let along = target.azimuth_m - geom.speed_mps * slow_time;
    let closest = target.closest_range(geom);
    SlantRange {
        exact: (closest * closest + along * along).sqrt(),
        taylor: closest + along * along / (2.0 * closest),
    }
}

/// Two-way Doppler of sub-band `index` seen from `target` at `slow_time`.
pub fn instantaneous_doppler(geom: &Geometry, target: &PointTarget, wf: &Waveform, index: usize, slow_time: f64) -> f64 {
    let freq = wf.config.carrier_hz + index as f64 * wf.params.subband_hz;
    let along = target.azimuth_m - geom.speed_mps * slow_time;
    2.0 * freq * along * geom.speed_mps / (SPEED_OF_LIGHT * target.closest_range(geom))
}

/// How sub-pulse echoes are split into rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separation {
    /// Each row holds exactly one sub-pulse's echo.
    Ideal,
    /// The whole pulse echo is received once and rows are cut from it with a
    /// fixed time gate per sub-pulse, referenced to the scene-center delay.
    Gated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub prf_hz: f64,
    pub pulses: usize,
    /// Extra receive time before the earliest and after the latest echo, s.
    pub guard_s: f64,
    /// Complex noise variance per sample; zero disables noise.
    pub noise_power: f64,
    pub seed: u64,
    pub separation: Separation,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            prf_hz: 80.0,
            pulses: 256,
            guard_s: 2.5e-6,
            noise_power: 0.0,
            seed: 0,
            separation: Separation::Ideal,
        }
    }
}

impl Acquisition {
    pub fn validate(&self, wf: &Waveform) -> Result<()> {
        if !(self.prf_hz.is_finite() && self.prf_hz > 0.0) {
            return Err(Error::config("acquisition.prf", "must be positive"));
        }
        if self.prf_hz * wf.config.pulse_width_s >= 1.0 {
            return Err(Error::config("acquisition.prf", "pulse repetition interval must exceed the pulse width"));
        }
        if self.pulses == 0 {
            return Err(Error::config("acquisition.K", "must be at least 1"));
        }
        if !(self.guard_s.is_finite() && self.guard_s >= 0.0) {
            return Err(Error::config("acquisition.guard", "must be non-negative"));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::config("acquisition.noise_power", "must be non-negative"));
        }
        Ok(())
    }

    /// Slow time of pulse `k`; pulse `K/2` is the aperture center.
    pub fn slow_time(&self, k: usize) -> f64 {
        (k as f64 - (self.pulses / 2) as f64) / self.prf_hz
    }
}

/// Fast-time receive window shared by every row. Times are measured from
/// the emission of the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveWindow {
    pub start_s: f64,
    pub samples: usize,
}

impl ReceiveWindow {
    /// Smallest window covering every echo plus the guard. The length is a
    /// multiple of the sample-rate multiple so sub-band shifts are whole bins.
    pub fn covering(wf: &Waveform, geom: &Geometry, acq: &Acquisition, targets: &[PointTarget]) -> Self {
        let fs = wf.params.sample_rate;
        let (lo, hi) = delay_span(geom, acq, targets).unwrap_or_else(|| {
            let tau = 2.0 * geom.center_range() / SPEED_OF_LIGHT;
            (tau, tau)
        });
        let start_s = ((lo - acq.guard_s) * fs).floor() / fs;
        let end = hi + wf.config.pulse_width_s + acq.guard_s;
        let min_len = ((end - start_s) * fs).ceil() as usize;
        Self {
            start_s,
            samples: fft_friendly_length(min_len, wf.params.rate_multiple),
        }
    }

    pub fn time(&self, n: usize, sample_rate: f64) -> f64 {
        self.start_s + n as f64 / sample_rate
    }
}

fn delay_span(geom: &Geometry, acq: &Acquisition, targets: &[PointTarget]) -> Option<(f64, f64)> {
    let mut span: Option<(f64, f64)> = None;
    for t in targets {
        for k in [0, acq.pulses / 2, acq.pulses - 1] {
            let tau = 2.0 * slant_range(geom, t, acq.slow_time(k)).exact / SPEED_OF_LIGHT;
            span = Some(match span {
                None => (tau, tau),
                Some((lo, hi)) => (lo.min(tau), hi.max(tau)),
            });
        }
        // The range is minimal at closest approach, which may fall inside the aperture.
        let closest = 2.0 * t.closest_range(geom) / SPEED_OF_LIGHT;
        let s_closest = t.azimuth_m / geom.speed_mps;
        if s_closest >= acq.slow_time(0) && s_closest <= acq.slow_time(acq.pulses - 1) {
            span = span.map(|(lo, hi)| (lo.min(closest), hi));
        }
    }
    span
}

/// Received samples indexed by pulse, sub-pulse and fast time.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoCube {
    pub pulses: usize,
    pub subpulses: usize,
    pub window: ReceiveWindow,
    pub sample_rate: f64,
    pub prf_hz: f64,
    pub frame: FimFrame,
    data: Vec<Complex64>,
}

impl EchoCube {
    pub fn zeros(pulses: usize, subpulses: usize, window: ReceiveWindow, sample_rate: f64, prf_hz: f64, frame: FimFrame) -> Self {
        Self {
            pulses,
            subpulses,
            window,
            sample_rate,
            prf_hz,
            frame,
            data: vec![Complex64::new(0.0, 0.0); pulses * subpulses * window.samples],
        }
    }

    pub fn from_data(
        pulses: usize,
        subpulses: usize,
        window: ReceiveWindow,
        sample_rate: f64,
        prf_hz: f64,
        frame: FimFrame,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != pulses * subpulses * window.samples {
            return Err(Error::Dimension(format!(
                "{} samples do not fill {pulses} x {subpulses} x {}",
                data.len(),
                window.samples
            )));
        }
        if frame.pulses() != pulses || frame.subpulses() != subpulses {
            return Err(Error::Dimension("frame does not match the cube dimensions".into()));
        }
        Ok(Self {
            pulses,
            subpulses,
            window,
            sample_rate,
            prf_hz,
            frame,
            data,
        })
    }

    pub fn samples(&self) -> usize {
        self.window.samples
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, k: usize, m: usize) -> &[Complex64] {
        let n = self.window.samples;
        let start = (k * self.subpulses + m) * n;
        &self.data[start..start + n]
    }

    pub fn row_mut(&mut self, k: usize, m: usize) -> &mut [Complex64] {
        let n = self.window.samples;
        let start = (k * self.subpulses + m) * n;
        &mut self.data[start..start + n]
    }

    /// All `M` rows of pulse `k`, contiguous.
    pub fn pulse(&self, k: usize) -> &[Complex64] {
        let len = self.subpulses * self.window.samples;
        &self.data[k * len..(k + 1) * len]
    }
}

/// Adds one sub-pulse echo starting at fast time `start` into `row`.
fn add_subpulse_echo(
    row: &mut [Complex64],
    wf: &Waveform,
    window: &ReceiveWindow,
    gain: Complex64,
    index: usize,
    start: f64,
) {
    let p = &wf.params;
    let fs = p.sample_rate;
    let offset = (start - window.start_s) * fs;
    let whole = offset.round();
    if (offset - whole).abs() < 1e-6 {
        // Delay on the sample grid: reuse the exact integer phase.
        let first = whole as i64;
        for i in 0..p.subpulse_samples {
            let n = first + i as i64;
            if n >= 0 && (n as usize) < row.len() {
                row[n as usize] += gain * cis_cycles(subchirp_phase_cycles(p, index, i));
            }
        }
        return;
    }
    let first = offset.ceil().max(0.0) as usize;
    let last = ((offset + p.subpulse_samples as f64).ceil().max(0.0) as usize).min(row.len());
    for (n, v) in row.iter_mut().enumerate().take(last).skip(first) {
        *v += gain * subchirp_at(p, index, (n as f64 - offset) / fs);
    }
}

pub fn simulate_echo(
    wf: &Waveform,
    geom: &Geometry,
    acq: &Acquisition,
    frame: &FimFrame,
    targets: &[PointTarget],
) -> Result<EchoCube> {
    let window = ReceiveWindow::covering(wf, geom, acq, targets);
    simulate_echo_in(wf, geom, acq, frame, targets, window)
}

/// As [`simulate_echo`] with an explicit receive window.
pub fn simulate_echo_in(
    wf: &Waveform,
    geom: &Geometry,
    acq: &Acquisition,
    frame: &FimFrame,
    targets: &[PointTarget],
    window: ReceiveWindow,
) -> Result<EchoCube> {
    geom.validate()?;
    acq.validate(wf)?;
    let m_count = wf.subpulses();
    if frame.pulses() != acq.pulses || frame.subpulses() != m_count {
        return Err(Error::InvalidFrame(format!(
            "frame has {} pulses of {} sub-pulses, acquisition needs {} of {m_count}",
            frame.pulses(),
            frame.subpulses(),
            acq.pulses
        )));
    }
    let p = &wf.params;
    let fs = p.sample_rate;
    let window_end = window.start_s + window.samples as f64 / fs;
    for t in targets {
        for k in 0..acq.pulses {
            let tau = 2.0 * slant_range(geom, t, acq.slow_time(k)).exact / SPEED_OF_LIGHT;
            if tau < window.start_s || tau + wf.config.pulse_width_s > window_end {
                return Err(Error::TargetOutsideWindow(t.id.clone()));
            }
        }
    }

    let mut cube = EchoCube::zeros(acq.pulses, m_count, window, fs, acq.prf_hz, frame.clone());
    let n = window.samples;
    let amp = wf.amplitude();
    let tau_ref = 2.0 * geom.center_range() / SPEED_OF_LIGHT;
    let pulse_len = m_count * n;
    cube.data.par_chunks_mut(pulse_len).enumerate().for_each(|(k, rows)| {
        let s = acq.slow_time(k);
        let indices = frame.pulse_indices(k);
        let symbols = frame.pulse_symbols(k);
        let mut merged = match acq.separation {
            Separation::Ideal => None,
            Separation::Gated => Some(vec![Complex64::new(0.0, 0.0); n]),
        };
        for t in targets {
            let tau = 2.0 * slant_range(geom, t, s).exact / SPEED_OF_LIGHT;
            let carrier = cis_cycles(-wf.config.carrier_hz * tau);
            for m in 0..m_count {
                let gain = t.reflectivity * symbols[m] * amp * carrier;
                let start = m as f64 * p.subpulse_s + tau;
                let row = match merged.as_mut() {
                    Some(buf) => buf.as_mut_slice(),
                    None => &mut rows[m * n..(m + 1) * n],
                };
                add_subpulse_echo(row, wf, &window, gain, indices[m], start);
            }
        }
        if let Some(buf) = merged {
            for m in 0..m_count {
                let gate_start = m as f64 * p.subpulse_s + tau_ref;
                let gate_end = gate_start + p.subpulse_s;
                for (i, v) in rows[m * n..(m + 1) * n].iter_mut().enumerate() {
                    let t = window.time(i, fs);
                    if t >= gate_start && t < gate_end {
                        *v = buf[i];
                    }
                }
            }
        }
        if acq.noise_power > 0.0 {
            // One stream per pulse keeps the noise independent of scheduling.
            let mut rng = ChaCha8Rng::seed_from_u64(acq.seed);
            rng.set_stream(k as u64);
            let sd = (acq.noise_power / 2.0).sqrt();
            for v in rows.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(re, im) * sd;
            }
        }
    });
    Ok(cube)
}
