//! Range-Doppler focusing: range cell migration correction and azimuth
//! matched filtering.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{AzimuthDomain, RangeCompressedMatrix, SarImage};
use crate::dsp::{cis_cycles, signed_bin_frequency, windowed_sinc_at, FftPair};
use crate::echo::Geometry;
use crate::error::{Error, Result};
use crate::waveform::Waveform;
use crate::SPEED_OF_LIGHT;

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Applies `op` to every column (fixed range bin) of the row-major matrix.
fn for_each_column<F>(matrix: &mut RangeCompressedMatrix, op: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let (rows, cols) = (matrix.rows, matrix.cols);
    let mut columns = transpose(&matrix.data, rows, cols);
    columns.par_chunks_mut(rows).enumerate().for_each(|(c, col)| op(c, col));
    matrix.data = transpose(&columns, cols, rows);
}

fn to_doppler(matrix: &RangeCompressedMatrix) -> RangeCompressedMatrix {
    let mut out = matrix.clone();
    if matrix.domain == AzimuthDomain::Doppler {
        return out;
    }
    let fft = FftPair::new(matrix.rows);
    for_each_column(&mut out, |_, col| fft.forward(col));
    out.domain = AzimuthDomain::Doppler;
    out
}

fn wavelength(wf: &Waveform) -> f64 {
    SPEED_OF_LIGHT / wf.config.carrier_hz
}

/// Removes the Doppler-dependent range walk. The output stays in the
/// range-Doppler domain.
pub fn rcmc(matrix: &RangeCompressedMatrix, wf: &Waveform, geom: &Geometry) -> Result<RangeCompressedMatrix> {
    let mut out = to_doppler(matrix);
    let lambda = wavelength(wf);
    let v = geom.speed_mps;
    let fs = matrix.sample_rate;
    let band_center = wf.config.bandwidth_hz / (2.0 * fs);
    let rows = out.rows;
    let prf = out.prf_hz;
    let start = out.window_start_s;
    out.data.par_chunks_mut(out.cols).enumerate().for_each(|(k, row)| {
        let f = signed_bin_frequency(k, rows, prf);
        if f == 0.0 {
            return;
        }
        let source = row.to_vec();
        let factor = lambda * lambda * f * f / (8.0 * v * v);
        for (n, x) in row.iter_mut().enumerate() {
            let range = SPEED_OF_LIGHT * (start + n as f64 / fs) / 2.0;
            let shift_bins = factor * range * 2.0 / SPEED_OF_LIGHT * fs;
            *x = windowed_sinc_at(&source, n as f64 + shift_bins, band_center);
        }
    });
    Ok(out)
}

/// Azimuth chirp rate of a target at slant range `range`.
pub fn azimuth_fm_rate(wf: &Waveform, geom: &Geometry, range: f64) -> f64 {
    2.0 * geom.speed_mps * geom.speed_mps / (wavelength(wf) * range)
}

pub fn azimuth_compress(matrix: &RangeCompressedMatrix, wf: &Waveform, geom: &Geometry) -> Result<SarImage> {
    azimuth_compress_with_sign(matrix, wf, geom, 1.0)
}

/// `sign = -1` mis-specifies the filter's chirp rate sign. Only used to check
/// that the sign actually matters.
pub(crate) fn azimuth_compress_with_sign(
    matrix: &RangeCompressedMatrix,
    wf: &Waveform,
    geom: &Geometry,
    sign: f64,
) -> Result<SarImage> {
    let fs = matrix.sample_rate;
    let prf = matrix.prf_hz;
    let rows = matrix.rows;
    let start = matrix.window_start_s;
    let range_of = |n: usize| SPEED_OF_LIGHT * (start + n as f64 / fs) / 2.0;
    let ka_max = azimuth_fm_rate(wf, geom, range_of(0));
    let bandwidth = ka_max * rows as f64 / prf;
    if bandwidth > prf {
        return Err(Error::Sampling(format!(
            "azimuth chirp bandwidth {bandwidth:.1} Hz over the aperture exceeds the PRF {prf} Hz"
        )));
    }
    let mut out = to_doppler(matrix);
    let fft = FftPair::new(rows);
    let scale = 1.0 / rows as f64;
    for_each_column(&mut out, |n, col| {
        let ka = azimuth_fm_rate(wf, geom, range_of(n));
        for (k, v) in col.iter_mut().enumerate() {
            let f = signed_bin_frequency(k, rows, prf);
            *v *= cis_cycles(-sign * 0.5 * f * f / ka);
        }
        fft.inverse(col);
        col.iter_mut().for_each(|v| *v *= scale);
    });
    let range_axis = (0..out.cols).map(range_of).collect();
    let azimuth_axis = (0..rows)
        .map(|k| geom.speed_mps * (k as f64 - (rows / 2) as f64) / prf)
        .collect();
    Ok(SarImage::new(rows, out.cols, out.data, range_axis, azimuth_axis))
}
