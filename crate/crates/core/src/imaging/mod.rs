//! SAR focusing: range compression with sub-pulse compensation followed by
//! the range-Doppler algorithm.

mod compensate;
mod rda;

use num_complex::Complex64;

pub use compensate::{compress_uncompensated, remove_qam, subpulse_compensate, FilterKind};
pub use rda::{azimuth_compress, azimuth_fm_rate, rcmc};

use crate::echo::{EchoCube, Geometry};
use crate::error::Result;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzimuthDomain {
    SlowTime,
    Doppler,
}

/// One range-compressed line per pulse on the receive window's fast-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeCompressedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub window_start_s: f64,
    pub sample_rate: f64,
    pub prf_hz: f64,
    pub domain: AzimuthDomain,
    pub data: Vec<Complex64>,
}

impl RangeCompressedMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        window_start_s: f64,
        sample_rate: f64,
        prf_hz: f64,
        domain: AzimuthDomain,
        data: Vec<Complex64>,
    ) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match its shape");
        Self {
            rows,
            cols,
            window_start_s,
            sample_rate,
            prf_hz,
            domain,
            data,
        }
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    /// Fast time of column `n`, measured from pulse emission.
    pub fn time(&self, n: usize) -> f64 {
        self.window_start_s + n as f64 / self.sample_rate
    }
}

/// Which processing steps produced an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessingSteps {
    pub qam_removed: bool,
    pub compensated: bool,
    pub filter: FilterKind,
    pub rcmc: bool,
}

/// Focused image. Rows are azimuth lines, columns are slant-range bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SarImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
    /// Slant range of each column, m.
    pub range_axis: Vec<f64>,
    /// Along-track position of each row, m.
    pub azimuth_axis: Vec<f64>,
    pub steps: Option<ProcessingSteps>,
}

impl SarImage {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>, range_axis: Vec<f64>, azimuth_axis: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "image data does not match its shape");
        assert_eq!(range_axis.len(), cols);
        assert_eq!(azimuth_axis.len(), rows);
        Self {
            rows,
            cols,
            data,
            range_axis,
            azimuth_axis,
            steps: None,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn range_spacing(&self) -> f64 {
        self.range_axis[1] - self.range_axis[0]
    }

    pub fn azimuth_spacing(&self) -> f64 {
        self.azimuth_axis[1] - self.azimuth_axis[0]
    }

    /// Nearest (row, column) to a physical position.
    pub fn nearest_bin(&self, azimuth_m: f64, range_m: f64) -> (usize, usize) {
        let nearest = |axis: &[f64], x: f64| {
            let step = axis[1] - axis[0];
            ((x - axis[0]) / step).round().clamp(0.0, (axis.len() - 1) as f64) as usize
        };
        (nearest(&self.azimuth_axis, azimuth_m), nearest(&self.range_axis, range_m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FocusOptions {
    pub remove_qam: bool,
    pub compensate: bool,
    pub filter: FilterKind,
    pub rcmc: bool,
}

impl Default for FocusOptions {
    fn default() -> Self {
        Self {
            remove_qam: true,
            compensate: true,
            filter: FilterKind::Exact,
            rcmc: true,
        }
    }
}

/// Full chain: symbol removal, range compression, RCMC, azimuth compression.
pub fn focus_rda(cube: &EchoCube, wf: &Waveform, geom: &Geometry, options: FocusOptions) -> Result<SarImage> {
    let cleaned;
    let cube = if options.remove_qam {
        cleaned = remove_qam(cube)?;
        &cleaned
    } else {
        cube
    };
    let compressed = if options.compensate {
        subpulse_compensate(cube, wf, options.filter)?
    } else {
        compress_uncompensated(cube, wf)?
    };
    let corrected = if options.rcmc {
        rcmc(&compressed, wf, geom)?
    } else {
        compressed
    };
    let mut image = azimuth_compress(&corrected, wf, geom)?;
    image.steps = Some(ProcessingSteps {
        qam_removed: options.remove_qam,
        compensated: options.compensate,
        filter: options.filter,
        rcmc: options.rcmc,
    });
    Ok(image)
}
