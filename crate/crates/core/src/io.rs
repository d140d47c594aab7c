//! File formats: binary complex matrices with a text sidecar, 16-bit PGM
//! magnitude images, and CSV tables.
//!
//! Matrix layout, all little-endian:
//! `b"FIMLFMCM"`, `u32` version, `u32` zero, `u64` rows, `u64` cols, then
//! `rows * cols` pairs of `f32` (re, im) in row-major order. The sidecar
//! `<file>.meta` holds `key = value` lines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::echo::{EchoCube, ReceiveWindow};
use crate::error::{Error, Result};
use crate::imaging::SarImage;
use crate::waveform::FimFrame;

pub const MAGIC: &[u8; 8] = b"FIMLFMCM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, data: &[Complex64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!("{} values for a {rows}x{cols} matrix", data.len())));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[..8] != MAGIC {
        return Err(format_err(path, "not a complex matrix file"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let long = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    if word(8) != VERSION {
        return Err(format_err(path, format!("unsupported version {}", word(8))));
    }
    let (rows, cols) = (long(16) as usize, long(24) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    let body = &bytes[32..];
    if body.len() != expected {
        return Err(format_err(path, format!("{rows}x{cols} needs {expected} data bytes, found {}", body.len())));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(Matrix { rows, cols, data })
}

/// Ordered `key = value` pairs. Floats are written in shortest round-trip
/// form so reading them back is exact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta(pub Vec<(String, String)>);

impl Meta {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, format!("{value:?}"))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| format_err(path, format!("missing `{key}`")))?;
        raw.parse().map_err(|_| format_err(path, format!("bad value for `{key}`: {raw}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (k, v) in &self.0 {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut out = Meta::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format_err(path, format!("line {} is not `key = value`", i + 1)))?;
            out.push(k.trim(), v.trim());
        }
        Ok(out)
    }
}

/// Writes the image matrix plus a sidecar with its axes.
pub fn write_image(path: &Path, img: &SarImage, extra: &Meta) -> Result<()> {
    write_matrix(path, img.rows, img.cols, &img.data)?;
    let mut meta = Meta::default();
    meta.push("kind", "sar_image")
        .push("rows", "azimuth")
        .push("cols", "slant_range")
        .push_f64("range_start_m", img.range_axis[0])
        .push_f64("range_step_m", img.range_spacing())
        .push_f64("azimuth_start_m", img.azimuth_axis[0])
        .push_f64("azimuth_step_m", img.azimuth_spacing());
    meta.0.extend(extra.0.iter().cloned());
    meta.write(&meta_path(path))
}

pub fn read_image(path: &Path) -> Result<SarImage> {
    let m = read_matrix(path)?;
    let mp = meta_path(path);
    let meta = Meta::read(&mp)?;
    if meta.get("kind") != Some("sar_image") {
        return Err(format_err(&mp, "not the sidecar of an image"));
    }
    if m.rows < 2 || m.cols < 2 {
        return Err(format_err(path, "image needs at least 2x2 pixels"));
    }
    let r0: f64 = meta.parsed("range_start_m", &mp)?;
    let dr: f64 = meta.parsed("range_step_m", &mp)?;
    let a0: f64 = meta.parsed("azimuth_start_m", &mp)?;
    let da: f64 = meta.parsed("azimuth_step_m", &mp)?;
    let range_axis = (0..m.cols).map(|i| r0 + i as f64 * dr).collect();
    let azimuth_axis = (0..m.rows).map(|i| a0 + i as f64 * da).collect();
    Ok(SarImage::new(m.rows, m.cols, m.data, range_axis, azimuth_axis))
}

/// Writes the cube as a `(K M) x N` matrix, one row per sub-pulse echo,
/// with the window and the transmitted frame in the sidecar.
pub fn write_echo(path: &Path, cube: &EchoCube) -> Result<()> {
    let rows = cube.pulses * cube.subpulses;
    write_matrix(path, rows, cube.samples(), cube.data())?;
    let join = |items: Vec<String>| items.join(" ");
    let mut meta = Meta::default();
    meta.push("kind", "echo_cube")
        .push("pulses", cube.pulses)
        .push("subpulses", cube.subpulses)
        .push_f64("window_start_s", cube.window.start_s)
        .push_f64("sample_rate_hz", cube.sample_rate)
        .push_f64("prf_hz", cube.prf_hz)
        .push("frame_indices", join(cube.frame.indices().iter().map(|a| a.to_string()).collect()))
        .push(
            "frame_symbols",
            join(cube.frame.symbols().iter().map(|c| format!("{:?},{:?}", c.re, c.im)).collect()),
        );
    meta.write(&meta_path(path))
}

pub fn read_echo(path: &Path) -> Result<EchoCube> {
    let m = read_matrix(path)?;
    let mp = meta_path(path);
    let meta = Meta::read(&mp)?;
    if meta.get("kind") != Some("echo_cube") {
        return Err(format_err(&mp, "not the sidecar of an echo cube"));
    }
    let pulses: usize = meta.parsed("pulses", &mp)?;
    let subpulses: usize = meta.parsed("subpulses", &mp)?;
    if pulses * subpulses != m.rows {
        return Err(format_err(&mp, "pulse and sub-pulse counts do not match the matrix"));
    }
    let bad = |what: &str| format_err(&mp, format!("malformed `{what}`"));
    let indices = meta
        .get("frame_indices")
        .ok_or_else(|| bad("frame_indices"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("frame_indices")))
        .collect::<Result<Vec<usize>>>()?;
    let symbols = meta
        .get("frame_symbols")
        .ok_or_else(|| bad("frame_symbols"))?
        .split_whitespace()
        .map(|t| {
            let (re, im) = t.split_once(',').ok_or_else(|| bad("frame_symbols"))?;
            Ok(Complex64::new(
                re.parse().map_err(|_| bad("frame_symbols"))?,
                im.parse().map_err(|_| bad("frame_symbols"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let frame = FimFrame::new(subpulses, indices, symbols)?;
    let window = ReceiveWindow {
        start_s: meta.parsed("window_start_s", &mp)?,
        samples: m.cols,
    };
    EchoCube::from_data(
        pulses,
        subpulses,
        window,
        meta.parsed("sample_rate_hz", &mp)?,
        meta.parsed("prf_hz", &mp)?,
        frame,
        m.data,
    )
}

/// Binary 16-bit graymap of `|data|` in dB relative to the maximum, clipped
/// at `floor_db` (black) and mapped linearly up to 0 dB (white).
pub fn write_pgm_db(path: &Path, rows: usize, cols: usize, magnitudes: &[f64], floor_db: f64) -> Result<()> {
    if magnitudes.len() != rows * cols {
        return Err(Error::Dimension(format!("{} values for a {rows}x{cols} image", magnitudes.len())));
    }
    let peak = magnitudes.iter().cloned().fold(0.0, f64::max);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n65535\n")?;
    for &m in magnitudes {
        let db = if peak > 0.0 && m > 0.0 { 20.0 * (m / peak).log10() } else { floor_db };
        let level = ((db.max(floor_db) - floor_db) / -floor_db * 65535.0).round().clamp(0.0, 65535.0) as u16;
        // PGM stores 16-bit samples most significant byte first.
        w.write_all(&level.to_be_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_pgm_db`] as raw levels.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let bad = || format_err(path, "bad graymap header");
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad());
    }
    let cols: usize = fields[1].parse().map_err(|_| bad())?;
    let rows: usize = fields[2].parse().map_err(|_| bad())?;
    let body = bytes.get(pos..).ok_or_else(bad)?;
    if body.len() != rows * cols * 2 {
        return Err(format_err(path, "pixel data has the wrong length"));
    }
    let levels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((rows, cols, levels))
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], records: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
