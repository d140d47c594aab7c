//! Range compression: known-symbol removal and per-sub-pulse compensation.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{AzimuthDomain, RangeCompressedMatrix};
use crate::dsp::{cis_cycles, FftPair};
use crate::echo::EchoCube;
use crate::error::{Error, Result};
use crate::waveform::{subchirp, subchirp_phase_cycles, Waveform};

/// How the per-sub-pulse pulse-compression filter is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterKind {
    /// Exact spectral inverse of the sampled sub-chirp over its band.
    #[default]
    Exact,
    /// Closed-form stationary-phase approximation of the same inverse.
    StationaryPhase,
}

/// Divides every row by its known symbol.
pub fn remove_qam(cube: &EchoCube) -> Result<EchoCube> {
    if let Some(pos) = cube.frame.symbols().iter().position(|c| c.norm_sqr() == 0.0) {
        return Err(Error::InvalidFrame(format!("symbol {pos} has zero magnitude")));
    }
    let mut out = cube.clone();
    for k in 0..cube.pulses {
        for m in 0..cube.subpulses {
            let c = cube.frame.pulse_symbols(k)[m];
            let scale = c.conj() / c.norm_sqr();
            out.row_mut(k, m).iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok(out)
}

fn check_grid(cube: &EchoCube, wf: &Waveform) -> Result<usize> {
    let n = cube.samples();
    let q = wf.params.rate_multiple;
    if !n.is_multiple_of(q) {
        return Err(Error::Sampling(format!(
            "window of {n} samples is not a multiple of {q}, so sub-band shifts are not whole bins"
        )));
    }
    if cube.subpulses != wf.subpulses() || (cube.sample_rate - wf.params.sample_rate).abs() > 1e-6 * cube.sample_rate {
        return Err(Error::Dimension("echo cube was not recorded with this waveform".into()));
    }
    Ok(n / q)
}

/// Weight of bin `j` in a brick-wall band of `width` bins. The two edge bins
/// sit exactly on the band limits and get half weight, which centers the
/// discrete band on the continuous one.
fn band_weight(j: usize, width: usize) -> f64 {
    if j == 0 || j == width {
        0.5
    } else {
        1.0
    }
}

/// Inverse filter for the lowest sub-band over bins `0..=band_bins`, scaled
/// by `1 / sqrt(P)` so that the compressed peak does not depend on power.
fn subband_filter(wf: &Waveform, n: usize, band_bins: usize, kind: FilterKind) -> Vec<Complex64> {
    let p = &wf.params;
    let inv_amp = 1.0 / wf.amplitude();
    match kind {
        FilterKind::Exact => {
            let mut g = subchirp(p, 0);
            g.resize(n, Complex64::new(0.0, 0.0));
            FftPair::new(n).forward(&mut g);
            (0..=band_bins)
                .map(|j| {
                    let v = g[j % n];
                    v.conj() / v.norm_sqr() * inv_amp * band_weight(j, band_bins)
                })
                .collect()
        }
        FilterKind::StationaryPhase => {
            let df = p.sample_rate / n as f64;
            let gain = p.chirp_rate.sqrt() / p.sample_rate * inv_amp;
            (0..=band_bins)
                .map(|j| {
                    let f = j as f64 * df;
                    cis_cycles(0.5 * f * f / p.chirp_rate - 0.125) * gain * band_weight(j, band_bins)
                })
                .collect()
        }
    }
}

/// Phase `exp(j 2 pi f_b m Ts)` for absolute bin `b`, which undoes the
/// sub-pulse's position inside the pulse. Since `m Ts` is `m Ns` samples the
/// phase is an exact rational number of turns.
fn offset_phase(bin: usize, m: usize, ns: usize, n: usize) -> Complex64 {
    let turns = (bin as u128 * m as u128 * ns as u128) % n as u128;
    cis_cycles(turns as f64 / n as f64)
}

/// Pulse-compresses each sub-pulse row with its own sub-band filter, removes
/// its time offset inside the pulse, and coherently sums the sub-bands into
/// one full-band profile per pulse. A unit target yields a peak of `M Bs`.
pub fn subpulse_compensate(cube: &EchoCube, wf: &Waveform, kind: FilterKind) -> Result<RangeCompressedMatrix> {
    let band_bins = check_grid(cube, wf)?;
    let n = cube.samples();
    let ns = wf.params.subpulse_samples;
    let filter = subband_filter(wf, n, band_bins, kind);
    let fft = FftPair::new(n);
    let df = cube.sample_rate / n as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); cube.pulses * n];
    data.par_chunks_mut(n).enumerate().for_each(|(k, out)| {
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (m, &a) in cube.frame.pulse_indices(k).iter().enumerate() {
            spec.copy_from_slice(cube.row(k, m));
            fft.forward(&mut spec);
            let first = a * band_bins;
            for (j, h) in filter.iter().enumerate() {
                let b = (first + j) % n;
                out[b] += spec[b] * h * offset_phase(first + j, m, ns, n);
            }
        }
        fft.inverse(out);
        out.iter_mut().for_each(|v| *v *= df);
    });
    Ok(RangeCompressedMatrix::new(
        cube.pulses,
        n,
        cube.window.start_s,
        cube.sample_rate,
        cube.prf_hz,
        AzimuthDomain::SlowTime,
        data,
    ))
}

/// Range compression without sub-pulse compensation: the rows of each pulse
/// are merged and the result is matched against an unhopped full-band chirp
/// (sub-band `m` in slot `m`).
pub fn compress_uncompensated(cube: &EchoCube, wf: &Waveform) -> Result<RangeCompressedMatrix> {
    let band_bins = check_grid(cube, wf)?;
    let n = cube.samples();
    let p = &wf.params;
    let m_count = wf.subpulses();
    let mut reference = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..m_count {
        for i in 0..p.subpulse_samples {
            reference[m * p.subpulse_samples + i] = cis_cycles(subchirp_phase_cycles(p, m, i));
        }
    }
    let fft = FftPair::new(n);
    fft.forward(&mut reference);
    let inv_amp = 1.0 / wf.amplitude();
    let width = m_count * band_bins;
    let mut filter = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..=width {
        let g = reference[j % n];
        filter[j % n] += g.conj() / g.norm_sqr() * inv_amp * band_weight(j, width);
    }
    let df = cube.sample_rate / n as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); cube.pulses * n];
    data.par_chunks_mut(n).enumerate().for_each(|(k, out)| {
        for m in 0..m_count {
            for (o, v) in out.iter_mut().zip(cube.row(k, m)) {
                *o += v;
            }
        }
        fft.forward(out);
        out.iter_mut().zip(&filter).for_each(|(v, h)| *v *= h);
        fft.inverse(out);
        out.iter_mut().for_each(|v| *v *= df);
    });
    Ok(RangeCompressedMatrix::new(
        cube.pulses,
        n,
        cube.window.start_s,
        cube.sample_rate,
        cube.prf_hz,
        AzimuthDomain::SlowTime,
        data,
    ))
}
