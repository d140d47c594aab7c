//! Point-target image quality: resolution, PSLR and ISLR along range and
//! azimuth cuts through an interpolated peak.

use rayon::prelude::*;

use crate::ambiguity::{measure_cut_resolution, AxisUnit, ProfileCut};
use crate::dsp::fft_interpolate_2d;
use crate::echo::{Geometry, PointTarget};
use crate::error::{Error, Result};
use crate::imaging::SarImage;

/// Sidelobe ratios are clamped here so that a response without sidelobes
/// still reports a finite number.
pub const RATIO_FLOOR_DB: f64 = -60.0;

/// Width convention of every reported resolution.
pub const WIDTH_CONVENTION: &str = "-3 dB mainlobe width";

/// Mainlobe edges are local minima at least this far below the peak.
const NULL_LEVEL: f64 = 0.1;

/// When no null is found on a side, the mainlobe is taken to extend this many
/// -3 dB widths from the peak.
const FALLBACK_WIDTHS: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub interp_factor: usize,
    /// Half size, in bins, of the square searched for the peak around the hint.
    pub search_radius: usize,
    /// Half size, in bins, of the patch that is interpolated.
    pub patch_radius: usize,
    /// A peak weaker than this, relative to the image maximum, is not a target.
    pub min_relative_db: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            interp_factor: 16,
            search_radius: 4,
            patch_radius: 48,
            min_relative_db: -40.0,
        }
    }
}

/// Peak position on the image grid, in fractional bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakLocation {
    pub row: f64,
    pub col: f64,
    pub azimuth_m: f64,
    pub range_m: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub range: ProfileCut,
    pub azimuth: ProfileCut,
    pub peak: PeakLocation,
}

fn local_peak(img: &SarImage, hint: (usize, usize), opts: &ExtractOptions) -> Result<(usize, usize)> {
    let (hr, hc) = hint;
    if hr >= img.rows || hc >= img.cols {
        return Err(Error::NoPeak(format!("hint ({hr}, {hc}) lies outside the {}x{} image", img.rows, img.cols)));
    }
    let r = opts.search_radius;
    let rows = hr.saturating_sub(r)..(hr + r + 1).min(img.rows);
    let cols = hc.saturating_sub(r)..(hc + r + 1).min(img.cols);
    let mut best = (hr, hc);
    for i in rows.clone() {
        for j in cols.clone() {
            if img.at(i, j).norm() > img.at(best.0, best.1).norm() {
                best = (i, j);
            }
        }
    }
    let peak = img.at(best.0, best.1).norm();
    let floor = img.max_magnitude() * 10f64.powf(opts.min_relative_db / 20.0);
    // A maximum on the search border is only the shoulder of something outside.
    let on_border = |x: usize, range: &std::ops::Range<usize>, len: usize| {
        (x == range.start && x != 0) || (x + 1 == range.end && x + 1 != len)
    };
    if !(peak > 0.0) || peak < floor || on_border(best.0, &rows, img.rows) || on_border(best.1, &cols, img.cols) {
        return Err(Error::NoPeak(format!("no local peak within {r} bins of ({hr}, {hc})")));
    }
    Ok(best)
}

/// Range and azimuth magnitude cuts through the interpolated peak nearest to
/// `hint` (row, column).
pub fn extract_profiles(img: &SarImage, hint: (usize, usize), opts: &ExtractOptions) -> Result<Profiles> {
    let (pr, pc) = local_peak(img, hint, opts)?;
    let factor = opts.interp_factor.max(1);
    let half = opts.patch_radius.max(2);
    let r0 = pr.saturating_sub(half);
    let r1 = (pr + half).min(img.rows);
    let c0 = pc.saturating_sub(half);
    let c1 = (pc + half).min(img.cols);
    let (rows, cols) = (r1 - r0, c1 - c0);
    if rows < 3 || cols < 3 {
        return Err(Error::NoPeak("image too small around the peak".into()));
    }
    let mut patch = Vec::with_capacity(rows * cols);
    for r in r0..r1 {
        patch.extend_from_slice(&img.data[r * img.cols + c0..r * img.cols + c1]);
    }
    let fine = fft_interpolate_2d(&patch, rows, cols, factor);
    let (frows, fcols) = (rows * factor, cols * factor);

    // Only search near the coarse peak: the patch edges can carry other targets.
    let near_r = (pr - r0) * factor;
    let near_c = (pc - c0) * factor;
    let mut best = (near_r, near_c);
    for i in near_r.saturating_sub(factor)..(near_r + factor + 1).min(frows) {
        for j in near_c.saturating_sub(factor)..(near_c + factor + 1).min(fcols) {
            if fine[i * fcols + j].norm() > fine[best.0 * fcols + best.1].norm() {
                best = (i, j);
            }
        }
    }
    let (fr, fc) = best;

    let dr = img.range_spacing() / factor as f64;
    let da = img.azimuth_spacing() / factor as f64;
    let range_start = img.range_axis[c0];
    let az_start = img.azimuth_axis[r0];
    let range_axis: Vec<f64> = (0..fcols).map(|j| range_start + j as f64 * dr).collect();
    let az_axis: Vec<f64> = (0..frows).map(|i| az_start + i as f64 * da).collect();
    let range_vals: Vec<f64> = fine[fr * fcols..(fr + 1) * fcols].iter().map(|v| v.norm()).collect();
    let az_vals: Vec<f64> = (0..frows).map(|i| fine[i * fcols + fc].norm()).collect();

    let peak = PeakLocation {
        row: r0 as f64 + fr as f64 / factor as f64,
        col: c0 as f64 + fc as f64 / factor as f64,
        azimuth_m: az_axis[fr],
        range_m: range_axis[fc],
        magnitude: fine[fr * fcols + fc].norm(),
    };
    Ok(Profiles {
        range: ProfileCut::new(range_axis, range_vals, AxisUnit::Meters)?,
        azimuth: ProfileCut::new(az_axis, az_vals, AxisUnit::Meters)?,
        peak,
    })
}

/// Index of the mainlobe edge walking from the peak in direction `dir`: the
/// first sample below the null level that is not followed by a lower one.
fn null_index(cut: &ProfileCut, dir: isize) -> Option<usize> {
    let v = cut.values();
    let threshold = NULL_LEVEL * cut.peak_value();
    let mut i = cut.peak_index() as isize;
    loop {
        let j = i + dir;
        if j < 0 || j as usize >= v.len() {
            return None;
        }
        let next = j + dir;
        let here = v[j as usize];
        let beyond = if next < 0 || next as usize >= v.len() {
            f64::INFINITY
        } else {
            v[next as usize]
        };
        if here < threshold && beyond >= here {
            return Some(j as usize);
        }
        i = j;
    }
}

/// Inclusive index range of the mainlobe.
fn mainlobe(cut: &ProfileCut) -> Result<(usize, usize)> {
    let left = null_index(cut, -1);
    let right = null_index(cut, 1);
    if let (Some(l), Some(r)) = (left, right) {
        return Ok((l, r));
    }
    let width = measure_cut_resolution(cut)?;
    let half = (FALLBACK_WIDTHS * width / cut.step()).round() as usize;
    let p = cut.peak_index();
    let n = cut.values().len();
    let l = left.or_else(|| p.checked_sub(half));
    let r = right.or_else(|| Some(p + half).filter(|&r| r < n));
    match (l, r) {
        (Some(l), Some(r)) => Ok((l, r)),
        _ => Err(Error::Measurement("mainlobe nulls not found inside the profile".into())),
    }
}

fn floor_db(db: f64) -> f64 {
    if db.is_nan() {
        RATIO_FLOOR_DB
    } else {
        db.max(RATIO_FLOOR_DB)
    }
}

/// Highest sidelobe relative to the peak, in dB.
pub fn pslr(cut: &ProfileCut) -> Result<f64> {
    let (l, r) = mainlobe(cut)?;
    let v = cut.values();
    let side = v[..l].iter().chain(&v[r + 1..]).cloned().fold(0.0, f64::max);
    Ok(floor_db(20.0 * (side / cut.peak_value()).log10()))
}

/// Sidelobe energy over mainlobe energy across the whole cut, in dB.
pub fn islr(cut: &ProfileCut) -> Result<f64> {
    let (l, r) = mainlobe(cut)?;
    let v = cut.values();
    let main: f64 = v[l..=r].iter().map(|x| x * x).sum();
    let side: f64 = v[..l].iter().chain(&v[r + 1..]).map(|x| x * x).sum();
    Ok(floor_db(10.0 * (side / main).log10()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetReport {
    pub id: String,
    pub range_resolution_m: f64,
    pub azimuth_resolution_m: f64,
    pub range_pslr_db: f64,
    pub azimuth_pslr_db: f64,
    pub range_islr_db: f64,
    pub azimuth_islr_db: f64,
    pub peak: PeakLocation,
}

impl TargetReport {
    /// CSV column order.
    pub const HEADER: [&'static str; 12] = [
        "target",
        "range_resolution_m",
        "azimuth_resolution_m",
        "range_pslr_db",
        "azimuth_pslr_db",
        "range_islr_db",
        "azimuth_islr_db",
        "peak_row",
        "peak_col",
        "peak_azimuth_m",
        "peak_range_m",
        "peak_magnitude",
    ];

    pub fn record(&self) -> Vec<String> {
        let mut out = vec![self.id.clone()];
        out.extend(
            [
                self.range_resolution_m,
                self.azimuth_resolution_m,
                self.range_pslr_db,
                self.azimuth_pslr_db,
                self.range_islr_db,
                self.azimuth_islr_db,
                self.peak.row,
                self.peak.col,
                self.peak.azimuth_m,
                self.peak.range_m,
                self.peak.magnitude,
            ]
            .iter()
            .map(|x| format!("{x:.6}")),
        );
        out
    }
}

pub fn report_from_profiles(id: &str, profiles: &Profiles) -> Result<TargetReport> {
    Ok(TargetReport {
        id: id.to_string(),
        range_resolution_m: measure_cut_resolution(&profiles.range)?,
        azimuth_resolution_m: measure_cut_resolution(&profiles.azimuth)?,
        range_pslr_db: pslr(&profiles.range)?,
        azimuth_pslr_db: pslr(&profiles.azimuth)?,
        range_islr_db: islr(&profiles.range)?,
        azimuth_islr_db: islr(&profiles.azimuth)?,
        peak: profiles.peak,
    })
}

/// Measures the response of `target`, looking for it where the geometry
/// says it should be.
pub fn report_target(img: &SarImage, target: &PointTarget, geom: &Geometry, opts: &ExtractOptions) -> Result<TargetReport> {
    let hint = img.nearest_bin(target.azimuth_m, target.closest_range(geom));
    let profiles = extract_profiles(img, hint, opts)?;
    report_from_profiles(&target.id, &profiles)
}

pub fn report_targets(
    img: &SarImage,
    targets: &[PointTarget],
    geom: &Geometry,
    opts: &ExtractOptions,
) -> Result<Vec<TargetReport>> {
    targets.par_iter().map(|t| report_target(img, t, geom, opts)).collect()
}
