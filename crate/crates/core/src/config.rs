//! Run configuration: a strict reader for TOML `.cfg` files.
//!
//! Every key is addressed by its dotted path (`waveform.Bw`). Unknown keys
//! and values of the wrong type are errors; optional keys fall back to the
//! defaults listed in `configs/hap_default.cfg`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toml::{Table, Value};

use crate::comm::{BerMethod, ChannelConfig};
use crate::echo::{Acquisition, Geometry, PointTarget, Separation};
use crate::error::{Error, Result};
use crate::imaging::{FilterKind, FocusOptions};
use crate::waveform::{FimFrame, Waveform, WaveformConfig};

/// Stream of the master seed reserved for frame bits; channel trials use
/// streams counted up from zero.
const FRAME_STREAM: u64 = u64::MAX;

/// Where the transmitted indices and symbols come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Uniformly random bits drawn from the master seed.
    Random,
    /// The same index pattern in every pulse, with unit symbols.
    Pattern(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Scene size along ground range and azimuth, m. Targets must lie inside.
    pub extent_ground_m: f64,
    pub extent_azimuth_m: f64,
    pub targets: Vec<PointTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguitySettings {
    pub delay_stride: usize,
    pub max_doppler_hz: f64,
    pub doppler_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommSettings {
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub method: BerMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub waveform: WaveformConfig,
    pub geometry: Geometry,
    pub acquisition: Acquisition,
    pub channel: ChannelConfig,
    pub frame: FrameSource,
    pub scene: Scene,
    pub pipeline: FocusOptions,
    pub ambiguity: AmbiguitySettings,
    pub comm: CommSettings,
    /// Floor of the dB images, relative to the peak.
    pub image_floor_db: f64,
}

/// A table plus the keys read from it, so leftovers can be reported.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: Option<&'a Table>) -> Self {
        Self {
            path: path.to_string(),
            table,
            used: BTreeSet::new(),
        }
    }

    fn key(&self, name: &str) -> String {
        if self.path.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.path)
        }
    }

    fn raw(&mut self, name: &str) -> Option<&'a Value> {
        self.used.insert(name.to_string());
        self.table.and_then(|t| t.get(name))
    }

    fn wrong_type(&self, name: &str, expected: &str) -> Error {
        Error::config(self.key(name), format!("expected {expected}"))
    }

    fn opt_f64(&mut self, name: &str) -> Result<Option<f64>> {
        match self.raw(name) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.wrong_type(name, "a number")),
        }
    }

    fn f64_or(&mut self, name: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(name)?.unwrap_or(default))
    }

    fn req_f64(&mut self, name: &str) -> Result<f64> {
        self.opt_f64(name)?.ok_or_else(|| Error::MissingKey(self.key(name)))
    }

    fn opt_u64(&mut self, name: &str) -> Result<Option<u64>> {
        match self.raw(name) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.wrong_type(name, "a non-negative integer")),
        }
    }

    fn u64_or(&mut self, name: &str, default: u64) -> Result<u64> {
        Ok(self.opt_u64(name)?.unwrap_or(default))
    }

    fn req_usize(&mut self, name: &str) -> Result<usize> {
        self.opt_u64(name)?
            .map(|v| v as usize)
            .ok_or_else(|| Error::MissingKey(self.key(name)))
    }

    fn bool_or(&mut self, name: &str, default: bool) -> Result<bool> {
        match self.raw(name) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.wrong_type(name, "true or false")),
        }
    }

    fn opt_str(&mut self, name: &str) -> Result<Option<&'a str>> {
        match self.raw(name) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.wrong_type(name, "a string")),
        }
    }

    fn opt_array(&mut self, name: &str) -> Result<Option<&'a Vec<Value>>> {
        match self.raw(name) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(self.wrong_type(name, "an array")),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            if let Some(extra) = t.keys().find(|k| !self.used.contains(*k)) {
                return Err(Error::UnknownKey(self.key(extra)));
            }
        }
        Ok(())
    }
}

fn subtable<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::config(name, "expected a table")),
    }
}

const SECTIONS: [&str; 9] = [
    "waveform",
    "geometry",
    "acquisition",
    "channel",
    "frame",
    "scene",
    "pipeline",
    "ambiguity",
    "comm",
];

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let root: Table = toml::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?;

    let mut top = Section::new("", Some(&root));
    let seed = top.u64_or("seed", 0)?;
    let output_dir = PathBuf::from(top.opt_str("output_dir")?.unwrap_or("out"));
    let image_floor_db = top.f64_or("image_floor_db", -60.0)?;
    for s in SECTIONS {
        top.used.insert(s.to_string());
    }
    top.finish()?;

    let mut w = Section::new("waveform", subtable(&root, "waveform")?);
    if w.table.is_none() {
        return Err(Error::MissingKey("waveform".into()));
    }
    let defaults = WaveformConfig::default();
    let waveform = WaveformConfig {
        carrier_hz: w.req_f64("fc")?,
        bandwidth_hz: w.req_f64("Bw")?,
        pulse_width_s: w.req_f64("Tw")?,
        subpulses: w.req_usize("M")?,
        qam_order: w.req_usize("J")?,
        power: w.f64_or("P", defaults.power)?,
        oversampling: w.f64_or("osf", defaults.oversampling)?,
    };
    w.finish()?;

    let mut g = Section::new("geometry", subtable(&root, "geometry")?);
    let gd = Geometry::default();
    let geometry = Geometry {
        altitude_m: g.f64_or("h", gd.altitude_m)?,
        speed_mps: g.f64_or("v", gd.speed_mps)?,
        depression_deg: g.f64_or("depression", gd.depression_deg)?,
        antenna_len_m: g.f64_or("antenna_len", gd.antenna_len_m)?,
    };
    g.finish()?;

    let mut a = Section::new("acquisition", subtable(&root, "acquisition")?);
    let ad = Acquisition::default();
    let separation = match a.opt_str("separation")? {
        None | Some("ideal") => Separation::Ideal,
        Some("gated") => Separation::Gated,
        Some(other) => return Err(Error::config("acquisition.separation", format!("`{other}` is not `ideal` or `gated`"))),
    };
    let acquisition = Acquisition {
        prf_hz: a.f64_or("prf", ad.prf_hz)?,
        pulses: a.u64_or("K", ad.pulses as u64)? as usize,
        guard_s: a.f64_or("guard", ad.guard_s)?,
        noise_power: a.f64_or("noise_power", ad.noise_power)?,
        seed,
        separation,
    };
    a.finish()?;

    let mut c = Section::new("channel", subtable(&root, "channel")?);
    let cd = ChannelConfig::default();
    let channel = ChannelConfig {
        sigma2: c.f64_or("sigma2", cd.sigma2)?,
        snr_db: c.f64_or("snr_db", cd.snr_db)?,
        csi: c.bool_or("csi", cd.csi)?,
        seed,
    };
    c.finish()?;

    let mut f = Section::new("frame", subtable(&root, "frame")?);
    let frame = match f.opt_array("pattern")? {
        None => FrameSource::Random,
        Some(values) => FrameSource::Pattern(
            values
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => Err(Error::config("frame.pattern", "expected non-negative integers")),
                })
                .collect::<Result<_>>()?,
        ),
    };
    f.finish()?;

    let scene = parse_scene(subtable(&root, "scene")?, &geometry)?;

    let mut p = Section::new("pipeline", subtable(&root, "pipeline")?);
    let filter = match p.opt_str("filter")? {
        None | Some("exact") => FilterKind::Exact,
        Some("stationary_phase") => FilterKind::StationaryPhase,
        Some(other) => {
            return Err(Error::config("pipeline.filter", format!("`{other}` is not `exact` or `stationary_phase`")))
        }
    };
    let pipeline = FocusOptions {
        remove_qam: p.bool_or("remove_qam", true)?,
        compensate: p.bool_or("compensate", true)?,
        filter,
        rcmc: p.bool_or("rcmc", true)?,
    };
    p.finish()?;

    let mut amb = Section::new("ambiguity", subtable(&root, "ambiguity")?);
    let ambiguity = AmbiguitySettings {
        delay_stride: amb.u64_or("delay_stride", 10)? as usize,
        max_doppler_hz: amb.f64_or("max_doppler", 200e3)?,
        doppler_points: amb.u64_or("doppler_points", 401)? as usize,
    };
    amb.finish()?;

    let mut cm = Section::new("comm", subtable(&root, "comm")?);
    let snr_db = match cm.opt_array("snr_db")? {
        None => (0..=6).map(|i| 5.0 * i as f64).collect(),
        Some(values) => values
            .iter()
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Error::config("comm.snr_db", "expected numbers")),
            })
            .collect::<Result<_>>()?,
    };
    let method = match cm.opt_str("method")? {
        None | Some("statistic") => BerMethod::Statistic,
        Some("waveform") => BerMethod::Waveform,
        Some(other) => return Err(Error::config("comm.method", format!("`{other}` is not `statistic` or `waveform`"))),
    };
    let comm = CommSettings {
        snr_db,
        trials: cm.u64_or("trials", 10_000)?,
        method,
    };
    cm.finish()?;

    let cfg = RunConfig {
        seed,
        output_dir,
        waveform,
        geometry,
        acquisition,
        channel,
        frame,
        scene,
        pipeline,
        ambiguity,
        comm,
        image_floor_db,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_scene(table: Option<&Table>, geom: &Geometry) -> Result<Scene> {
    let mut s = Section::new("scene", table);
    let extent_ground_m = s.f64_or("extent_ground", 1000.0)?;
    let extent_azimuth_m = s.f64_or("extent_azimuth", 300.0)?;
    let targets = match s.opt_array("targets")? {
        None => vec![PointTarget::relative("C", geom, 0.0, 0.0, Complex64::new(1.0, 0.0))],
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let path = format!("scene.targets[{i}]");
                let Value::Table(t) = v else {
                    return Err(Error::config(path, "expected a table"));
                };
                let mut ts = Section::new(&path, Some(t));
                let id = ts.opt_str("id")?.map(str::to_string).unwrap_or_else(|| format!("T{i}"));
                let d_ground = ts.f64_or("d_ground", 0.0)?;
                let azimuth = ts.f64_or("azimuth", 0.0)?;
                let amplitude = ts.f64_or("amplitude", 1.0)?;
                let phase = ts.f64_or("phase_deg", 0.0)?;
                ts.finish()?;
                let refl = Complex64::from_polar(amplitude, phase.to_radians());
                Ok(PointTarget::relative(id, geom, d_ground, azimuth, refl))
            })
            .collect::<Result<_>>()?,
    };
    s.finish()?;
    Ok(Scene {
        extent_ground_m,
        extent_azimuth_m,
        targets,
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let wf = Waveform::new(self.waveform.clone())?;
        self.geometry.validate()?;
        self.acquisition.validate(&wf)?;
        self.channel.validate()?;
        if let FrameSource::Pattern(p) = &self.frame {
            if p.len() != wf.subpulses() {
                return Err(Error::config("frame.pattern", format!("needs {} indices", wf.subpulses())));
            }
            if let Some(a) = p.iter().find(|&&a| a >= wf.subpulses()) {
                return Err(Error::config("frame.pattern", format!("index {a} is not below M")));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.scene.extent_ground_m) {
            return Err(Error::config("scene.extent_ground", "must be positive"));
        }
        if !positive(self.scene.extent_azimuth_m) {
            return Err(Error::config("scene.extent_azimuth", "must be positive"));
        }
        let center = self.geometry.center_ground_range();
        for t in &self.scene.targets {
            let inside = (t.ground_range_m - center).abs() <= self.scene.extent_ground_m / 2.0
                && t.azimuth_m.abs() <= self.scene.extent_azimuth_m / 2.0;
            if !inside {
                return Err(Error::config("scene.targets", format!("target `{}` lies outside the scene", t.id)));
            }
        }
        if self.ambiguity.delay_stride == 0 {
            return Err(Error::config("ambiguity.delay_stride", "must be at least 1"));
        }
        if !positive(self.ambiguity.max_doppler_hz) {
            return Err(Error::config("ambiguity.max_doppler", "must be positive"));
        }
        if self.ambiguity.doppler_points < 3 {
            return Err(Error::config("ambiguity.doppler_points", "must be at least 3"));
        }
        if self.comm.trials == 0 {
            return Err(Error::config("comm.trials", "must be at least 1"));
        }
        if self.comm.snr_db.iter().any(|x| x.is_nan()) {
            return Err(Error::config("comm.snr_db", "must be numbers"));
        }
        if !(self.image_floor_db < 0.0) {
            return Err(Error::config("image_floor_db", "must be negative"));
        }
        Ok(())
    }

    pub fn waveform(&self) -> Result<Waveform> {
        Waveform::new(self.waveform.clone())
    }

    /// Transmitted frame for `pulses` pulses. Random frames use their own
    /// stream of the master seed.
    pub fn frame(&self, wf: &Waveform, pulses: usize) -> Result<FimFrame> {
        match &self.frame {
            FrameSource::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(FRAME_STREAM);
                Ok(FimFrame::random(wf, pulses, &mut rng))
            }
            FrameSource::Pattern(p) => FimFrame::repeated(p, pulses, Complex64::new(1.0, 0.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[waveform]\nfc = 3.2e9\nBw = 80e6\nTw = 40e-6\nM = 4\nJ = 4\n";

    #[test]
    fn minimal_config_takes_documented_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.waveform, WaveformConfig::default());
        assert_eq!(cfg.geometry, Geometry::default());
        assert_eq!(cfg.acquisition, Acquisition::default());
        assert_eq!(cfg.frame, FrameSource::Random);
        assert_eq!(cfg.scene.targets.len(), 1);
        assert_eq!(cfg.pipeline, FocusOptions::default());
    }

    #[test]
    fn missing_bandwidth_is_named() {
        let text = MINIMAL.replace("Bw = 80e6\n", "");
        match parse_config_str(&text) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "waveform.Bw"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_subpulses_fail_validation() {
        let text = MINIMAL.replace("M = 4", "M = 0");
        match parse_config_str(&text) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "waveform.M"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        for (extra, path) in [
            ("[geometry]\nheight = 1.0\n", "geometry.height"),
            ("colour = 1\n", "colour"),
            ("[scene]\ntargets = [{ id = \"A\", x = 1 }]\n", "scene.targets[0].x"),
        ] {
            let text = if extra.starts_with('[') {
                format!("{MINIMAL}{extra}")
            } else {
                format!("{extra}{MINIMAL}")
            };
            match parse_config_str(&text) {
                Err(Error::UnknownKey(k)) => assert_eq!(k, path),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn wrong_types_and_syntax_are_config_errors() {
        let e = parse_config_str(&MINIMAL.replace("J = 4", "J = \"four\"")).unwrap_err();
        assert!(e.is_config_error() && e.to_string().contains("waveform.J"));
        let e = parse_config_str("[waveform\n").unwrap_err();
        assert!(matches!(e, Error::ConfigSyntax(_)));
    }

    #[test]
    fn targets_outside_the_scene_are_rejected() {
        let text = format!("{MINIMAL}[scene]\ntargets = [{{ id = \"far\", d_ground = 900.0 }}]\n");
        assert!(parse_config_str(&text).unwrap_err().is_config_error());
    }

    #[test]
    fn shipped_config_holds_the_reference_parameters() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/hap_default.cfg");
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.waveform.carrier_hz, 3.2e9);
        assert_eq!(cfg.waveform.bandwidth_hz, 80e6);
        assert_eq!(cfg.waveform.pulse_width_s, 40e-6);
        assert_eq!(cfg.waveform.subpulses, 4);
        assert_eq!(cfg.geometry.altitude_m, 20e3);
        assert_eq!(cfg.geometry.speed_mps, 100.0);
        assert_eq!(cfg.geometry.depression_deg, 60.0);
        assert_eq!(cfg.geometry.antenna_len_m, 2.0);
        assert_eq!((cfg.scene.extent_ground_m, cfg.scene.extent_azimuth_m), (1000.0, 300.0));
        assert_eq!(cfg.scene.targets.len(), 5);
    }
}
