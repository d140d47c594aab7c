//! Ambiguity function of a single pulse, numerically and in closed form.
//!
//! Convention: `chi(tau, xi) = integral s(t) conj(s(t + tau)) exp(j 2 pi xi t) dt`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dsp::{dirichlet, sinc};
use crate::error::{Error, Result};
use crate::waveform::{synthesize_pulse, DerivedParams, FimFrame, Waveform};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisUnit {
    Seconds,
    Hertz,
    Meters,
}

impl AxisUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisUnit::Seconds => "s",
            AxisUnit::Hertz => "Hz",
            AxisUnit::Meters => "m",
        }
    }
}

/// A 1-D magnitude profile on a uniform axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCut {
    axis: Vec<f64>,
    values: Vec<f64>,
    peak: usize,
    unit: AxisUnit,
}

impl ProfileCut {
    pub fn new(axis: Vec<f64>, values: Vec<f64>, unit: AxisUnit) -> Result<Self> {
        if axis.len() != values.len() || axis.len() < 3 {
            return Err(Error::Dimension(format!(
                "profile needs matching axis and values with at least 3 samples, got {} and {}",
                axis.len(),
                values.len()
            )));
        }
        let step = axis[1] - axis[0];
        let uniform = step > 0.0
            && axis
                .windows(2)
                .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-6 * step);
        if !uniform {
            return Err(Error::Dimension("profile axis must be uniform and increasing".into()));
        }
        let mut peak = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[peak] {
                peak = i;
            }
        }
        if !(values[peak] > 0.0) {
            return Err(Error::Measurement("profile has no positive peak".into()));
        }
        Ok(Self {
            axis,
            values,
            peak,
            unit,
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn peak_index(&self) -> usize {
        self.peak
    }

    pub fn peak_value(&self) -> f64 {
        self.values[self.peak]
    }

    pub fn unit(&self) -> AxisUnit {
        self.unit
    }

    pub fn step(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Same profile with the axis multiplied by `scale` (for example delay to range).
    pub fn rescaled(&self, scale: f64, unit: AxisUnit) -> Result<Self> {
        Self::new(self.axis.iter().map(|x| x * scale).collect(), self.values.clone(), unit)
    }

    /// Axis position of the first local minimum right of the peak.
    pub fn first_null_right(&self) -> Option<f64> {
        (self.peak + 1..self.values.len() - 1)
            .find(|&i| self.values[i] <= self.values[i - 1] && self.values[i] < self.values[i + 1])
            .map(|i| self.axis[i])
    }

    /// Axis position where the profile first falls to `level` (linear,
    /// relative to the peak) walking away from the peak in direction `dir`.
    pub(crate) fn crossing(&self, level: f64, dir: isize) -> Option<f64> {
        let threshold = level * self.peak_value();
        let mut i = self.peak as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= self.values.len() {
                return None;
            }
            let (vi, vj) = (self.values[i as usize], self.values[j as usize]);
            if vj <= threshold {
                let frac = (vi - threshold) / (vi - vj);
                let (xi, xj) = (self.axis[i as usize], self.axis[j as usize]);
                return Some(xi + frac * (xj - xi));
            }
            i = j;
        }
    }
}

/// Width of the mainlobe between the two -3 dB points, interpolated linearly.
pub fn measure_cut_resolution(cut: &ProfileCut) -> Result<f64> {
    let level = 0.5f64.sqrt();
    let left = cut.crossing(level, -1);
    let right = cut.crossing(level, 1);
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Measurement("no -3 dB crossing inside the profile".into())),
    }
}

/// Energy-equivalent width `sum |p|^2 dx / |p_peak|^2`. For a band-limited
/// profile this equals the inverse of the spectrum's effective bandwidth.
pub fn equivalent_width(cut: &ProfileCut) -> f64 {
    let energy: f64 = cut.values.iter().map(|v| v * v).sum();
    energy * cut.step() / (cut.peak_value() * cut.peak_value())
}

/// Finest and coarsest range resolution the index pattern can produce:
/// `c / (2 Bw)` when the sub-bands tile the full band, `c / (2 Bs)` when a
/// single sub-band repeats.
pub fn resolution_bounds(params: &DerivedParams) -> (f64, f64) {
    let full_band = params.subband_hz * params.subpulses() as f64;
    (
        SPEED_OF_LIGHT / (2.0 * full_band),
        SPEED_OF_LIGHT / (2.0 * params.subband_hz),
    )
}

/// Delay/Doppler grid for numeric evaluation. Delays are whole samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub delay_samples: Vec<i64>,
    pub doppler_hz: Vec<f64>,
}

impl GridSpec {
    /// Symmetric grid: delays `-max_delay..=max_delay` samples, Doppler
    /// `-max_doppler..=max_doppler` in `doppler_points` steps.
    pub fn symmetric(max_delay: i64, max_doppler: f64, doppler_points: usize) -> Self {
        let doppler_hz = if doppler_points <= 1 {
            vec![0.0]
        } else {
            let step = 2.0 * max_doppler / (doppler_points - 1) as f64;
            (0..doppler_points).map(|i| -max_doppler + i as f64 * step).collect()
        };
        Self {
            delay_samples: (-max_delay..=max_delay).collect(),
            doppler_hz,
        }
    }

    /// Grid from physical delays, each of which must fall on the sample grid.
    pub fn from_delays(delays_s: &[f64], doppler_hz: Vec<f64>, sample_rate: f64) -> Result<Self> {
        let delay_samples = delays_s
            .iter()
            .map(|&tau| {
                let d = tau * sample_rate;
                let r = d.round();
                if (d - r).abs() > 1e-6 {
                    Err(Error::DelayNotSampleAligned(tau))
                } else {
                    Ok(r as i64)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            delay_samples,
            doppler_hz,
        })
    }
}

/// `|chi|` sampled on a delay/Doppler grid. `values` is row-major with one
/// row per Doppler value.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityGrid {
    pub delay_axis: Vec<f64>,
    pub doppler_axis: Vec<f64>,
    pub values: Vec<f64>,
}

impl AmbiguityGrid {
    pub fn at(&self, doppler_row: usize, delay_col: usize) -> f64 {
        self.values[doppler_row * self.delay_axis.len() + delay_col]
    }

    /// (Doppler row, delay column) of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.delay_axis.len(), best % self.delay_axis.len())
    }
}

/// Integral of `exp(j 2 pi xi u)` over one sample period. Treating the
/// samples as a zero-order hold makes the zero-delay cut of a
/// constant-envelope pulse exact.
fn hold_weight(xi: f64, sample_rate: f64) -> Complex64 {
    let w = 2.0 * PI * xi;
    if w.abs() * (1.0 / sample_rate) < 1e-9 {
        return Complex64::new(1.0 / sample_rate, 0.0);
    }
    (Complex64::from_polar(1.0, w / sample_rate) - 1.0) / Complex64::new(0.0, w)
}

pub fn ambiguity_numeric(signal: &[Complex64], params: &DerivedParams, grid: &GridSpec) -> Result<AmbiguityGrid> {
    let fs = params.sample_rate;
    let limit = params.subpulse_samples as i64;
    for &d in &grid.delay_samples {
        if d.abs() >= limit {
            return Err(Error::DelayOutOfRange {
                tau: d as f64 / fs,
                limit: params.subpulse_s,
            });
        }
    }
    let n = signal.len();
    let rows: Vec<Vec<f64>> = grid
        .doppler_hz
        .par_iter()
        .map(|&xi| {
            // exp(j 2 pi xi n / fs) for every sample, built by direct
            // evaluation so rounding does not accumulate.
            let rot: Vec<Complex64> = (0..n)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * xi * i as f64 / fs))
                .collect();
            let weight = hold_weight(xi, fs);
            grid.delay_samples
                .iter()
                .map(|&d| {
                    let (start, end) = if d >= 0 { (0, n - d as usize) } else { ((-d) as usize, n) };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in start..end {
                        let j = (i as i64 + d) as usize;
                        acc += signal[i] * signal[j].conj() * rot[i];
                    }
                    (acc * weight).norm()
                })
                .collect()
        })
        .collect();
    Ok(AmbiguityGrid {
        delay_axis: grid.delay_samples.iter().map(|&d| d as f64 / fs).collect(),
        doppler_axis: grid.doppler_hz.clone(),
        values: rows.concat(),
    })
}

/// Unit-power, unit-symbol pulse with the given sub-band pattern; the input
/// for the closed-form comparisons.
pub fn unit_pulse(wf: &Waveform, indices: &[usize]) -> Result<Vec<Complex64>> {
    let unit = Waveform::new(crate::waveform::WaveformConfig {
        power: 1.0,
        ..wf.config.clone()
    })?;
    let frame = FimFrame::repeated(indices, 1, Complex64::new(1.0, 0.0))?;
    synthesize_pulse(&unit, &frame, 0)
}

/// Magnitude of the same-sub-pulse (principal) part of the ambiguity function.
pub fn ambiguity_principal_closed_form(
    params: &DerivedParams,
    indices: &[usize],
    tau: f64,
    xi: f64,
) -> Result<f64> {
    let ts = params.subpulse_s;
    if tau.abs() >= ts {
        return Err(Error::DelayOutOfRange { tau, limit: ts });
    }
    let overlap = ts - tau.abs();
    let envelope = overlap * sinc(PI * (xi - params.chirp_rate * tau) * overlap);
    let phasors: Complex64 = indices
        .iter()
        .enumerate()
        .map(|(m, &a)| {
            let cycles = xi * m as f64 * ts - a as f64 * params.subband_hz * tau;
            Complex64::from_polar(1.0, 2.0 * PI * cycles)
        })
        .sum();
    Ok((envelope * phasors.norm()).abs())
}

/// Zero-delay cut `|chi(0, xi)|`.
pub fn doppler_cut_value(params: &DerivedParams, xi: f64) -> f64 {
    let ts = params.subpulse_s;
    let x = PI * xi * ts;
    (ts * sinc(x) * dirichlet(params.subpulses(), x)).abs()
}

pub fn doppler_cut_closed_form(params: &DerivedParams, doppler_hz: &[f64]) -> Result<ProfileCut> {
    let values = doppler_hz.iter().map(|&xi| doppler_cut_value(params, xi)).collect();
    ProfileCut::new(doppler_hz.to_vec(), values, AxisUnit::Hertz)
}

/// Zero-Doppler cut `|chi(tau, 0)|` from the principal term.
pub fn range_cut_closed_form(params: &DerivedParams, indices: &[usize], delays_s: &[f64]) -> Result<ProfileCut> {
    let values = delays_s
        .iter()
        .map(|&tau| ambiguity_principal_closed_form(params, indices, tau, 0.0))
        .collect::<Result<Vec<_>>>()?;
    ProfileCut::new(delays_s.to_vec(), values, AxisUnit::Seconds)
}

/// Uniform axis of `points` samples over `[-half_span, half_span]`.
pub fn symmetric_axis(half_span: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * half_span / (points - 1) as f64;
    (0..points).map(|i| -half_span + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::WaveformConfig;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn waveform(m: usize) -> Waveform {
        Waveform::new(WaveformConfig {
            subpulses: m,
            ..WaveformConfig::default()
        })
        .unwrap()
    }

    fn delay_axis_in_range(params: &DerivedParams, points: usize) -> Vec<f64> {
        symmetric_axis(4.0 / params.subband_hz, points)
    }

    #[test]
    fn origin_equals_pulse_energy() {
        let wf = waveform(4);
        let s = unit_pulse(&wf, &[2, 0, 3, 1]).unwrap();
        let grid = GridSpec::symmetric(0, 0.0, 1);
        let amb = ambiguity_numeric(&s, &wf.params, &grid).unwrap();
        assert!((amb.values[0] - 40e-6).abs() < 1e-12);
        let closed = ambiguity_principal_closed_form(&wf.params, &[2, 0, 3, 1], 0.0, 0.0).unwrap();
        assert!((closed - 40e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_delay_cut_matches_closed_form() {
        let wf = waveform(4);
        let s = unit_pulse(&wf, &[1, 3, 0, 2]).unwrap();
        // Offset so no grid point sits on a null of the closed form.
        let xi: Vec<f64> = (0..81).map(|i| -200e3 + 5e3 * i as f64 + 1234.5).collect();
        let amb = ambiguity_numeric(&s, &wf.params, &GridSpec { delay_samples: vec![0], doppler_hz: xi.clone() }).unwrap();
        for (row, &x) in xi.iter().enumerate() {
            let expect = doppler_cut_value(&wf.params, x);
            let rel = (amb.at(row, 0) - expect).abs() / expect;
            assert!(rel < 1e-6, "xi {x}: rel {rel}");
        }
    }

    #[test]
    fn doppler_cut_limits_and_first_null() {
        let wf = waveform(4);
        let p = &wf.params;
        assert!((doppler_cut_value(p, 0.0) - 40e-6).abs() < 1e-15);
        // At xi Ts = 1 the Dirichlet factor is removable; the sinc is zero there.
        assert!(doppler_cut_value(p, 1.0 / p.subpulse_s) < 1e-18);
        let xi = symmetric_axis(60e3, 1201);
        let cut = doppler_cut_closed_form(p, &xi).unwrap();
        let null = cut.first_null_right().unwrap();
        assert!((null - 25e3).abs() <= cut.step());
    }

    #[test]
    fn single_subpulse_doppler_cut_is_sinc() {
        let wf = waveform(1);
        let ts = wf.params.subpulse_s;
        for xi in [0.0, 1e3, 12.5e3, 40e3] {
            let expect = ts * sinc(PI * xi * ts).abs();
            assert!((doppler_cut_value(&wf.params, xi) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_indices_give_coarse_resolution() {
        let wf = waveform(4);
        let p = &wf.params;
        let cut = range_cut_closed_form(p, &[2, 2, 2, 2], &delay_axis_in_range(p, 4001)).unwrap();
        let width_m = measure_cut_resolution(&cut).unwrap() * SPEED_OF_LIGHT / 2.0;
        let nominal = resolution_bounds(p).1;
        assert!((width_m / nominal - 0.886).abs() < 0.01, "{width_m}");
        // Closed form at zero Doppler equals M times the single sub-chirp cut.
        let tau = 13e-9;
        let single = (p.subpulse_s - tau) * sinc(PI * p.chirp_rate * tau * (p.subpulse_s - tau)).abs();
        let v = ambiguity_principal_closed_form(p, &[1, 1, 1, 1], tau, 0.0).unwrap();
        assert!((v - 4.0 * single).abs() < 1e-15);
    }

    #[test]
    fn contiguous_indices_follow_dirichlet_kernel() {
        let wf = waveform(4);
        let p = &wf.params;
        let tau = 7.3e-9;
        let ts = p.subpulse_s;
        let x = PI * p.subband_hz * tau;
        let expect = ((ts - tau) * sinc(PI * p.chirp_rate * tau * (ts - tau)) * dirichlet(4, x)).abs();
        let v = ambiguity_principal_closed_form(p, &[0, 1, 2, 3], tau, 0.0).unwrap();
        assert!((v - expect).abs() < 1e-15);

        let cut = range_cut_closed_form(p, &[0, 1, 2, 3], &delay_axis_in_range(p, 8001)).unwrap();
        let width_m = measure_cut_resolution(&cut).unwrap() * SPEED_OF_LIGHT / 2.0;
        assert!((width_m / resolution_bounds(p).0 - 0.886).abs() < 0.02, "{width_m}");
    }

    #[test]
    fn zero_delay_is_independent_of_indices() {
        let p = waveform(4).params;
        for idx in [[0, 0, 0, 0], [3, 1, 0, 2]] {
            let v = ambiguity_principal_closed_form(&p, &idx, 0.0, 0.0).unwrap();
            assert!((v - 4.0 * p.subpulse_s).abs() < 1e-15);
        }
    }

    #[test]
    fn bounds() {
        let (lo, hi) = resolution_bounds(&waveform(4).params);
        assert!((lo - 1.875).abs() < 1e-12 && (hi - 7.5).abs() < 1e-12);
        let (lo, hi) = resolution_bounds(&waveform(1).params);
        assert_eq!(lo, hi);
        let (lo, hi) = resolution_bounds(&waveform(8).params);
        assert!((lo - 1.875).abs() < 1e-12 && (hi - 15.0).abs() < 1e-12);
    }

    #[test]
    fn half_power_width_can_beat_the_full_band_limit() {
        // Repeating two adjacent sub-bands produces a spectrum weighted
        // toward its edges; its -3 dB mainlobe is narrower than a flat
        // full-band spectrum even though its energy width is not.
        let p = waveform(4).params;
        let cut = range_cut_closed_form(&p, &[0, 0, 3, 3], &delay_axis_in_range(&p, 8001)).unwrap();
        let half_power = measure_cut_resolution(&cut).unwrap() * SPEED_OF_LIGHT / 2.0;
        let (lo, hi) = resolution_bounds(&p);
        assert!(half_power < lo);
        let equivalent = equivalent_width(&cut) * SPEED_OF_LIGHT / 2.0;
        assert!(equivalent >= lo && equivalent <= hi, "{equivalent}");
    }

    #[test]
    fn measurement_errors() {
        let flat = ProfileCut::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], AxisUnit::Seconds).unwrap();
        assert!(measure_cut_resolution(&flat).is_err());
        assert!(ProfileCut::new(vec![0.0, 1.0, 2.0], vec![0.0; 3], AxisUnit::Seconds).is_err());
        assert!(ProfileCut::new(vec![0.0, 1.0, 5.0], vec![1.0; 3], AxisUnit::Seconds).is_err());
    }

    #[test]
    fn sampled_sinc_width() {
        let b = 1e6;
        let axis = symmetric_axis(5.0 / b, 2001);
        let values = axis.iter().map(|&t| sinc(PI * b * t).abs()).collect();
        let cut = ProfileCut::new(axis, values, AxisUnit::Seconds).unwrap();
        let w = measure_cut_resolution(&cut).unwrap();
        assert!((w * b - 0.8859).abs() < 0.0089);
    }

    #[test]
    fn delay_validation() {
        let wf = waveform(4);
        let s = unit_pulse(&wf, &[0, 1, 2, 3]).unwrap();
        let too_far = GridSpec { delay_samples: vec![1000], doppler_hz: vec![0.0] };
        assert!(matches!(ambiguity_numeric(&s, &wf.params, &too_far), Err(Error::DelayOutOfRange { .. })));
        assert!(matches!(
            GridSpec::from_delays(&[1.5e-8], vec![0.0], wf.params.sample_rate),
            Err(Error::DelayNotSampleAligned(_))
        ));
        let ok = GridSpec::from_delays(&[2e-8, -3e-8], vec![0.0], wf.params.sample_rate).unwrap();
        assert_eq!(ok.delay_samples, vec![2, -3]);
    }

    #[test]
    fn principal_term_dominates_near_mainlobe() {
        let wf = waveform(4);
        let p = &wf.params;
        let idx = [3, 0, 2, 1];
        let s = unit_pulse(&wf, &idx).unwrap();
        let grid = GridSpec::symmetric(3, 0.0, 1);
        let amb = ambiguity_numeric(&s, p, &grid).unwrap();
        for (col, &tau) in amb.delay_axis.iter().enumerate() {
            let closed = ambiguity_principal_closed_form(p, &idx, tau, 0.0).unwrap();
            let rel = (amb.at(0, col) - closed).abs() / closed;
            assert!(rel < 0.1, "tau {tau}: {rel}");
        }
    }

    #[test]
    fn peak_sits_at_origin() {
        let wf = waveform(4);
        let s = unit_pulse(&wf, &[1, 1, 3, 0]).unwrap();
        let grid = GridSpec::symmetric(20, 100e3, 21);
        let amb = ambiguity_numeric(&s, &wf.params, &grid).unwrap();
        let (r, c) = amb.argmax();
        assert_eq!(amb.doppler_axis[r], 0.0);
        assert_eq!(amb.delay_axis[c], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn numeric_surface_is_symmetric(seed in any::<u64>()) {
            let wf = waveform(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let s = unit_pulse(&wf, &idx).unwrap();
            let d = rng.random_range(-200i64..200);
            let xi = rng.random_range(-300e3..300e3);
            let grid = GridSpec { delay_samples: vec![d, -d], doppler_hz: vec![xi, -xi] };
            let amb = ambiguity_numeric(&s, &wf.params, &grid).unwrap();
            let (a, b) = (amb.at(0, 0), amb.at(1, 1));
            prop_assert!((a - b).abs() <= 1e-9 * a.max(b).max(1e-12));
        }

        #[test]
        fn energy_width_respects_bounds(seed in any::<u64>()) {
            let p = waveform(4).params;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let delays = symmetric_axis(0.5 * p.subpulse_s, 20001);
            let cut = range_cut_closed_form(&p, &idx, &delays).unwrap();
            let w = equivalent_width(&cut) * SPEED_OF_LIGHT / 2.0;
            let (lo, hi) = resolution_bounds(&p);
            prop_assert!(w >= 0.99 * lo && w <= 1.01 * hi, "{:?}: {}", idx, w);
        }
    }
}
