//! Small signal-processing helpers shared by the simulation stages.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `exp(j 2 pi cycles)`, with the integer part of `cycles` discarded first so
/// that large phase accumulations keep full precision.
#[inline]
pub fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    let (s, c) = (2.0 * PI * frac).sin_cos();
    Complex64::new(c, s)
}

/// Unnormalized sinc, `sin(x) / x`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Band-limited pulse of bandwidth `bandwidth` repeated with period
/// `period` (both in reciprocal units), normalized to 1 at `x = 0`. It is the
/// sinc that a circular (FFT) convolution produces; as the period grows it
/// tends to `sin(pi B x) / (pi B x)`. The band edges carry half weight.
pub fn periodic_sinc(x: f64, bandwidth: f64, period: f64) -> f64 {
    let t = (PI * x / period).tan();
    if t.abs() < 1e-12 {
        // Integer multiples of the period; tan vanishes with sin(pi B x).
        return (PI * bandwidth * x).cos() * (PI * x / period).cos().signum();
    }
    (PI * bandwidth * x).sin() / (bandwidth * period * t)
}

/// `sin(n x) / sin(x)` evaluated with its limit `±n` at the removable
/// singularities `x = k pi`.
pub fn dirichlet(n: usize, x: f64) -> f64 {
    let s = x.sin();
    if s.abs() < 1e-12 {
        // Limit: n * cos(n x) / cos(x), which is ±n at x = k pi.
        let k = (x / PI).round();
        let sign = if (k as i64 * (n as i64 - 1)) % 2 == 0 { 1.0 } else { -1.0 };
        sign * n as f64
    } else {
        (n as f64 * x).sin() / s
    }
}

/// Forward/inverse FFT pair of a fixed length. Both directions are unnormalized.
#[derive(Clone)]
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
    }
}

/// Smallest length `>= min_len` of the form `multiple * L` with `L` having
/// no prime factors above 7.
pub fn fft_friendly_length(min_len: usize, multiple: usize) -> usize {
    let multiple = multiple.max(1);
    let mut count = min_len.div_ceil(multiple).max(1);
    while !is_7_smooth(count) {
        count += 1;
    }
    count * multiple
}

fn is_7_smooth(mut n: usize) -> bool {
    if n == 0 {
        return false;
    }
    for p in [2, 3, 5, 7] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

/// Bin at which zero padding is inserted: the center of the weakest stretch
/// of spectrum. Range-compressed data occupies `[0, Bw]` rather than a band
/// centered on DC, so the split has to follow the data. A wide window keeps
/// broadband clutter from pulling the split into the band.
fn quietest_bin(power: &[f64]) -> usize {
    let n = power.len();
    let half = n / 16;
    let sums: Vec<f64> = (0..n)
        .map(|i| (0..=2 * half).map(|d| power[(i + n + d - half) % n]).sum())
        .collect();
    let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().cloned().fold(0.0, f64::max);
    // The minimum is usually a plateau; take its middle.
    let quiet: Vec<bool> = sums.iter().map(|&s| s <= lo + 1e-6 * (hi - lo)).collect();
    let loud: Vec<usize> = (0..n).filter(|&i| !quiet[i]).collect();
    if loud.is_empty() {
        return 0;
    }
    let depth = |i: usize| loud.iter().map(|&b| i.abs_diff(b).min(n - i.abs_diff(b))).min().unwrap_or(0);
    (0..n).filter(|&i| quiet[i]).max_by_key(|&i| (depth(i), std::cmp::Reverse(i))).unwrap_or(0)
}

/// Spectrum of `data` with zeros spliced in at `split`, growing from `n` to `n * factor` bins.
fn splice_zeros(spec: &[Complex64], split: usize, factor: usize) -> Vec<Complex64> {
    let n = spec.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n * factor];
    // Bins [split, n) become the "negative" end of the padded spectrum.
    out[..split].copy_from_slice(&spec[..split]);
    let tail = n - split;
    out[n * factor - tail..].copy_from_slice(&spec[split..]);
    out
}

/// Band-limited interpolation by FFT zero padding. Output sample `i` sits at
/// input position `i / factor`, and input samples are reproduced exactly at
/// multiples of `factor` (up to rounding).
pub fn fft_interpolate(data: &[Complex64], factor: usize) -> Vec<Complex64> {
    let n = data.len();
    if factor <= 1 || n == 0 {
        return data.to_vec();
    }
    let fft = FftPair::new(n);
    let mut spec = data.to_vec();
    fft.forward(&mut spec);
    let power: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
    let split = quietest_bin(&power);
    let mut out = splice_zeros(&spec, split, factor);
    FftPair::new(n * factor).inverse(&mut out);
    let scale = 1.0 / n as f64;
    out.iter_mut().for_each(|c| *c *= scale);
    out
}

/// Two-dimensional band-limited interpolation of a row-major `rows x cols`
/// patch. Returns a `(rows * factor) x (cols * factor)` row-major patch.
pub fn fft_interpolate_2d(
    data: &[Complex64],
    rows: usize,
    cols: usize,
    factor: usize,
) -> Vec<Complex64> {
    assert_eq!(data.len(), rows * cols);
    if factor <= 1 {
        return data.to_vec();
    }
    // Rows first (along cols), then columns.
    let col_fft = FftPair::new(cols);
    let mut spec = data.to_vec();
    for r in 0..rows {
        col_fft.forward(&mut spec[r * cols..(r + 1) * cols]);
    }
    let row_fft = FftPair::new(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = spec[r * cols + c];
        }
        row_fft.forward(&mut column);
        for r in 0..rows {
            spec[r * cols + c] = column[r];
        }
    }

    let mut col_power = vec![0.0; cols];
    let mut row_power = vec![0.0; rows];
    for r in 0..rows {
        for c in 0..cols {
            let p = spec[r * cols + c].norm_sqr();
            col_power[c] += p;
            row_power[r] += p;
        }
    }
    let col_split = quietest_bin(&col_power);
    let row_split = quietest_bin(&row_power);

    let (out_rows, out_cols) = (rows * factor, cols * factor);
    // Pad along columns within each row.
    let mut padded = vec![Complex64::new(0.0, 0.0); rows * out_cols];
    for r in 0..rows {
        let line = splice_zeros(&spec[r * cols..(r + 1) * cols], col_split, factor);
        padded[r * out_cols..(r + 1) * out_cols].copy_from_slice(&line);
    }
    // Pad along rows and transform back.
    let mut out = vec![Complex64::new(0.0, 0.0); out_rows * out_cols];
    let out_row_fft = FftPair::new(out_rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..out_cols {
        for r in 0..rows {
            column[r] = padded[r * out_cols + c];
        }
        let mut line = splice_zeros(&column, row_split, factor);
        out_row_fft.inverse(&mut line);
        for r in 0..out_rows {
            out[r * out_cols + c] = line[r];
        }
    }
    let out_col_fft = FftPair::new(out_cols);
    let scale = 1.0 / (rows * cols) as f64;
    for r in 0..out_rows {
        let row = &mut out[r * out_cols..(r + 1) * out_cols];
        out_col_fft.inverse(row);
        row.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

/// Number of taps of the range interpolator. The range spectrum fills 80% of
/// the sample rate; eight taps leave errors near -12 dB at the band edge,
/// sixteen bring them below -38 dB.
pub const INTERP_TAPS: usize = 16;

/// Hann-windowed sinc interpolation of a complex sequence whose spectrum is
/// centered on `center` cycles/sample. The sequence is evaluated at the
/// fractional position `pos`; taps falling outside the sequence read as zero.
pub fn windowed_sinc_at(data: &[Complex64], pos: f64, center: f64) -> Complex64 {
    let half = (INTERP_TAPS / 2) as i64;
    let base = pos.floor() as i64;
    let frac = pos - base as f64;
    if frac.abs() < 1e-12 {
        return data
            .get(base as usize)
            .copied()
            .filter(|_| base >= 0)
            .unwrap_or_default();
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in (base - half + 1)..=(base + half) {
        if i < 0 || i as usize >= data.len() {
            continue;
        }
        let x = pos - i as f64;
        let w = 0.5 * (1.0 + (PI * x / (half as f64 + 0.5)).cos());
        let k = w * sinc(PI * x);
        // Demodulate each tap to baseband, interpolate, then restore the
        // carrier at the output position.
        acc += data[i as usize] * cis_cycles(-center * i as f64) * k;
    }
    acc * cis_cycles(center * pos)
}

/// Short-time magnitude spectrum with a Hann window of `window` samples
/// moved by `hop`. Returns `(rows, cols, values)` with one row per frequency
/// bin (DC first) and one column per window position.
pub fn spectrogram(signal: &[Complex64], window: usize, hop: usize) -> (usize, usize, Vec<f64>) {
    assert!(window > 0 && hop > 0);
    let cols = if signal.len() < window { 0 } else { (signal.len() - window) / hop + 1 };
    let fft = FftPair::new(window);
    let taper: Vec<f64> = (0..window)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / window as f64).cos())
        .collect();
    let mut out = vec![0.0; window * cols];
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for c in 0..cols {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = signal[c * hop + i] * taper[i];
        }
        fft.forward(&mut buf);
        for (r, v) in buf.iter().enumerate() {
            out[r * cols + c] = v.norm();
        }
    }
    (window, cols, out)
}

/// Frequency of FFT bin `k` out of `n` for sample rate `rate`, mapped to
/// `[-rate/2, rate/2)`.
#[inline]
pub fn signed_bin_frequency(k: usize, n: usize, rate: f64) -> f64 {
    let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    k * rate / n as f64
}

pub fn magnitude_db(value: f64, reference: f64) -> f64 {
    20.0 * (value / reference).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cis_cycles_discards_integer_turns() {
        let a = cis_cycles(0.25);
        let b = cis_cycles(123_456.25);
        assert!((a - b).norm() < 1e-9);
        assert!((a - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn dirichlet_limits() {
        assert_eq!(dirichlet(4, 0.0), 4.0);
        // sin(4x)/sin(x) at x = pi: limit 4 cos(4 pi)/cos(pi) = -4.
        assert!((dirichlet(4, PI) + 4.0).abs() < 1e-9);
        assert!((dirichlet(5, PI) - 5.0).abs() < 1e-9);
        let x = 0.3;
        assert!((dirichlet(3, x) - (3.0 * x).sin() / x.sin()).abs() < 1e-12);
    }

    #[test]
    fn periodic_sinc_matches_discrete_band() {
        // Half-weighted edge bins 0..=L of an n-point grid.
        let (n, l) = (200usize, 40usize);
        for x in [0.0, 0.3, 1.0, 7.25, 150.0] {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=l {
                let w = if j == 0 || j == l { 0.5 } else { 1.0 };
                acc += cis_cycles(j as f64 * x / n as f64) * w;
            }
            let centered = acc * cis_cycles(-(l as f64) * x / (2.0 * n as f64)) / l as f64;
            let expect = periodic_sinc(x, l as f64 / n as f64, n as f64);
            assert!((centered.re - expect).abs() < 1e-12 && centered.im.abs() < 1e-12, "x {x}");
        }
        assert!((periodic_sinc(0.37, 0.01, 1e9) - sinc(PI * 0.01 * 0.37)).abs() < 1e-9);
    }

    #[test]
    fn friendly_lengths() {
        assert_eq!(fft_friendly_length(4733, 5), 4800);
        assert_eq!(fft_friendly_length(11, 1), 12);
        assert_eq!(fft_friendly_length(64, 4), 64);
        assert_eq!(fft_friendly_length(121, 11), 132);
        assert_eq!(fft_friendly_length(110, 11), 110);
    }

    #[test]
    fn split_lands_in_the_gap_despite_a_clutter_floor() {
        // Band around DC, everything else only 10 dB down.
        let power: Vec<f64> = (0..96).map(|k| if k <= 17 || k >= 79 { 1.0 } else { 0.1 }).collect();
        let split = quietest_bin(&power);
        assert!((30..=66).contains(&split), "split at {split}");
        // Band in [0, 0.8) of the rate, as in range-compressed data.
        let power: Vec<f64> = (0..100).map(|k| if k < 80 { 1.0 } else { 0.0 }).collect();
        assert!((80..100).contains(&quietest_bin(&power)));
    }

    #[test]
    fn interpolation_keeps_original_samples() {
        let n = 64;
        // Off-center band: tones at 0.125 and 0.375 cycles/sample.
        let data: Vec<Complex64> = (0..n)
            .map(|i| cis_cycles(0.125 * i as f64) + cis_cycles(0.375 * i as f64) * 0.5)
            .collect();
        let up = fft_interpolate(&data, 4);
        for i in 0..n {
            assert!((up[4 * i] - data[i]).norm() < 1e-9);
        }
        // Midpoints follow the continuous signal since both tones are on-grid.
        let t = 10.5;
        let expect = cis_cycles(0.125 * t) + cis_cycles(0.375 * t) * 0.5;
        assert!((up[42] - expect).norm() < 1e-9);
    }

    #[test]
    fn interpolation_2d_matches_separable_1d() {
        let (rows, cols) = (8, 16);
        let data: Vec<Complex64> = (0..rows * cols)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                cis_cycles(0.125 * r as f64) * cis_cycles(0.25 * c as f64)
            })
            .collect();
        let up = fft_interpolate_2d(&data, rows, cols, 2);
        let (ur, uc) = (2 * rows, 2 * cols);
        let (r, c) = (5, 9);
        let expect = cis_cycles(0.125 * r as f64 / 2.0) * cis_cycles(0.25 * c as f64 / 2.0);
        assert!((up[r * uc + c] - expect).norm() < 1e-9);
        assert_eq!(up.len(), ur * uc);
    }

    #[test]
    fn windowed_sinc_tracks_band_limited_tone() {
        let center = 0.3;
        let data: Vec<Complex64> = (0..64).map(|i| cis_cycles(center * i as f64)).collect();
        let v = windowed_sinc_at(&data, 30.4, center);
        let expect = cis_cycles(center * 30.4);
        assert!((v - expect).norm() < 1e-2, "{v} vs {expect}");
        assert_eq!(windowed_sinc_at(&data, 12.0, center), data[12]);
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_bin_frequency(0, 8, 80.0), 0.0);
        assert_eq!(signed_bin_frequency(3, 8, 80.0), 30.0);
        assert_eq!(signed_bin_frequency(4, 8, 80.0), -40.0);
        assert_eq!(signed_bin_frequency(7, 8, 80.0), -10.0);
    }

    #[test]
    fn spectrogram_tracks_a_tone() {
        let tone: Vec<Complex64> = (0..512).map(|n| cis_cycles(5.0 * n as f64 / 64.0)).collect();
        let (rows, cols, v) = spectrogram(&tone, 64, 16);
        assert_eq!((rows, cols), (64, 29));
        for c in 0..cols {
            let peak = (0..rows).max_by(|&a, &b| v[a * cols + c].total_cmp(&v[b * cols + c])).unwrap();
            assert_eq!(peak, 5);
        }
    }
}
