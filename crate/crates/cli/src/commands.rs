use std::fmt;
use std::path::{Path, PathBuf};

use fimlfm::ambiguity::{
    ambiguity_numeric, ambiguity_principal_closed_form, doppler_cut_closed_form, measure_cut_resolution,
    range_cut_closed_form, symmetric_axis, unit_pulse, AxisUnit, GridSpec, ProfileCut,
};
use fimlfm::comm::{run_ber, BerMethod, BerPoint};
use fimlfm::config::{parse_config, RunConfig};
use fimlfm::dsp::spectrogram;
use fimlfm::echo::simulate_echo;
use fimlfm::imaging::focus_rda;
use fimlfm::io::{self, Meta};
use fimlfm::quality::{report_targets, ExtractOptions, TargetReport, WIDTH_CONVENTION};
use fimlfm::waveform::synthesize_train;
use fimlfm::SPEED_OF_LIGHT;
use num_complex::Complex64;

use crate::outputs::Outputs;
use crate::Cut;

const SPECTROGRAM_WINDOW: usize = 64;
const SPECTROGRAM_HOP: usize = 16;

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<fimlfm::Error> for CliError {
    fn from(e: fimlfm::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Config plus the directory its outputs go to.
fn load(path: &Path, out: Option<PathBuf>) -> CliResult<(RunConfig, PathBuf)> {
    // An unreadable file is a configuration problem, not a runtime one.
    let cfg = parse_config(path).map_err(|e| match e {
        fimlfm::Error::Io(io) => CliError::Config(format!("{}: {io}", path.display())),
        other => other.into(),
    })?;
    cfg.validate()?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, dir))
}

/// Prints to stdout, ignoring a closed pipe: the outputs are already on disk.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn finish(outputs: Outputs) {
    for p in outputs.keep() {
        say!("wrote {}", p.display());
    }
}

pub fn waveform(config: &Path, out: Option<PathBuf>) -> CliResult {
    let (cfg, dir) = load(config, out)?;
    let wf = cfg.waveform()?;
    let acq = &cfg.acquisition;
    let frame = cfg.frame(&wf, acq.pulses)?;
    let train = synthesize_train(&wf, &frame, 1.0 / acq.prf_hz)?;

    let mut outputs = Outputs::new(&dir)?;
    let bin = outputs.file("waveform.bin");
    let cols = train.pulses[0].len();
    let data: Vec<Complex64> = train.pulses.concat();
    io::write_matrix(&bin, train.pulses.len(), cols, &data)?;
    let mut meta = Meta::default();
    meta.push("kind", "pulse_train")
        .push("rows", "pulse")
        .push("cols", "fast_time")
        .push_f64("sample_rate_hz", train.sample_rate)
        .push_f64("pri_s", 1.0 / acq.prf_hz)
        .push("subpulses", wf.subpulses())
        .push("subpulse_samples", wf.params.subpulse_samples);
    meta.write(&io::meta_path(&bin))?;

    let (rows, cols, power) = spectrogram(&train.pulses[0], SPECTROGRAM_WINDOW, SPECTROGRAM_HOP);
    let magnitude: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
    let pgm = outputs.file("spectrogram.pgm");
    io::write_pgm_db(&pgm, rows, cols, &magnitude, cfg.image_floor_db)?;
    let mut meta = Meta::default();
    meta.push("rows", "frequency_bin")
        .push("cols", "frame")
        .push("window", SPECTROGRAM_WINDOW)
        .push("hop", SPECTROGRAM_HOP)
        .push_f64("floor_db", cfg.image_floor_db);
    meta.write(&io::meta_path(&pgm))?;

    finish(outputs);
    Ok(())
}

fn cut_records(cut: &ProfileCut, to_meters: Option<f64>) -> Vec<Vec<String>> {
    cut.axis()
        .iter()
        .zip(cut.values())
        .map(|(&x, &v)| {
            let mut r = vec![format!("{x:.9e}")];
            if let Some(scale) = to_meters {
                r.push(format!("{:.6}", x * scale));
            }
            r.push(format!("{v:.9e}"));
            r
        })
        .collect()
}

pub fn ambiguity(config: &Path, out: Option<PathBuf>, closed_form: bool, cut: Option<Cut>) -> CliResult {
    let (cfg, dir) = load(config, out)?;
    let wf = cfg.waveform()?;
    let p = &wf.params;
    let indices = cfg.frame(&wf, 1)?.pulse_indices(0).to_vec();
    let settings = cfg.ambiguity;
    let max_delay = p.subpulse_samples as i64 - 1;
    let mut outputs = Outputs::new(&dir)?;
    let mode = if closed_form { "closed_form" } else { "numeric" };

    match cut {
        Some(Cut::Xi0) => {
            let delays: Vec<f64> = (-max_delay..=max_delay).map(|d| d as f64 / p.sample_rate).collect();
            let profile = if closed_form {
                range_cut_closed_form(p, &indices, &delays)?
            } else {
                let grid = GridSpec::from_delays(&delays, vec![0.0], p.sample_rate)?;
                let g = ambiguity_numeric(&unit_pulse(&wf, &indices)?, p, &grid)?;
                ProfileCut::new(g.delay_axis, g.values, AxisUnit::Seconds)?
            };
            let path = outputs.file("ambiguity_range_cut.csv");
            io::write_csv(&path, &["delay_s", "range_m", "magnitude"], cut_records(&profile, Some(SPEED_OF_LIGHT / 2.0)))?;
            let width = measure_cut_resolution(&profile)?;
            say!("range resolution {:.4} m ({mode})", width * SPEED_OF_LIGHT / 2.0);
        }
        Some(Cut::Tau0) => {
            let doppler = symmetric_axis(settings.max_doppler_hz, settings.doppler_points);
            let profile = if closed_form {
                doppler_cut_closed_form(p, &doppler)?
            } else {
                let grid = GridSpec {
                    delay_samples: vec![0],
                    doppler_hz: doppler,
                };
                let g = ambiguity_numeric(&unit_pulse(&wf, &indices)?, p, &grid)?;
                ProfileCut::new(g.doppler_axis, g.values, AxisUnit::Hertz)?
            };
            let path = outputs.file("ambiguity_doppler_cut.csv");
            io::write_csv(&path, &["doppler_hz", "magnitude"], cut_records(&profile, None))?;
            let width = measure_cut_resolution(&profile)?;
            say!("doppler resolution {width:.4} Hz ({mode})");
        }
        None => {
            let stride = settings.delay_stride as i64;
            let half = max_delay / stride * stride;
            let grid = GridSpec {
                delay_samples: (-half..=half).step_by(settings.delay_stride).collect(),
                doppler_hz: symmetric_axis(settings.max_doppler_hz, settings.doppler_points),
            };
            let values: Vec<f64> = if closed_form {
                let mut v = Vec::with_capacity(grid.delay_samples.len() * grid.doppler_hz.len());
                for &xi in &grid.doppler_hz {
                    for &d in &grid.delay_samples {
                        v.push(ambiguity_principal_closed_form(p, &indices, d as f64 / p.sample_rate, xi)?);
                    }
                }
                v
            } else {
                ambiguity_numeric(&unit_pulse(&wf, &indices)?, p, &grid)?.values
            };
            let cols = grid.delay_samples.len();
            let rows = grid.doppler_hz.len();
            let path = outputs.file("ambiguity.csv");
            let records = values.iter().enumerate().map(|(i, v)| {
                let xi = grid.doppler_hz[i / cols];
                let tau = grid.delay_samples[i % cols] as f64 / p.sample_rate;
                [format!("{xi:.9e}"), format!("{tau:.9e}"), format!("{v:.9e}")]
            });
            io::write_csv(&path, &["doppler_hz", "delay_s", "magnitude"], records)?;
            let pgm = outputs.file("ambiguity.pgm");
            io::write_pgm_db(&pgm, rows, cols, &values, cfg.image_floor_db)?;
            let mut meta = Meta::default();
            meta.push("rows", "doppler")
                .push("cols", "delay")
                .push("mode", mode)
                .push_f64("doppler_start_hz", grid.doppler_hz[0])
                .push_f64("delay_start_s", grid.delay_samples[0] as f64 / p.sample_rate)
                .push_f64("delay_step_s", stride as f64 / p.sample_rate);
            meta.write(&io::meta_path(&pgm))?;
        }
    }
    finish(outputs);
    Ok(())
}

pub fn sar_sim(config: &Path, out: Option<PathBuf>) -> CliResult {
    let (cfg, dir) = load(config, out)?;
    let wf = cfg.waveform()?;
    let frame = cfg.frame(&wf, cfg.acquisition.pulses)?;
    let cube = simulate_echo(&wf, &cfg.geometry, &cfg.acquisition, &frame, &cfg.scene.targets)?;
    let mut outputs = Outputs::new(&dir)?;
    io::write_echo(&outputs.file("echo.bin"), &cube)?;
    finish(outputs);
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Skips {
    pub qam_removal: bool,
    pub compensation: bool,
    pub rcmc: bool,
}

pub fn sar_focus(config: &Path, out: Option<PathBuf>, echo: Option<&Path>, skips: Skips) -> CliResult {
    let (cfg, dir) = load(config, out)?;
    let wf = cfg.waveform()?;
    let cube = match echo {
        Some(path) => {
            let cube = io::read_echo(path)?;
            if cube.subpulses != wf.subpulses() || (cube.sample_rate - wf.params.sample_rate).abs() > 1e-6 {
                return Err(CliError::Config(format!(
                    "{} was recorded with a different waveform",
                    path.display()
                )));
            }
            cube
        }
        None => {
            let frame = cfg.frame(&wf, cfg.acquisition.pulses)?;
            simulate_echo(&wf, &cfg.geometry, &cfg.acquisition, &frame, &cfg.scene.targets)?
        }
    };
    let mut options = cfg.pipeline;
    options.remove_qam &= !skips.qam_removal;
    options.compensate &= !skips.compensation;
    options.rcmc &= !skips.rcmc;
    let img = focus_rda(&cube, &wf, &cfg.geometry, options)?;

    let mut outputs = Outputs::new(&dir)?;
    let mut extra = Meta::default();
    extra
        .push("qam_removed", options.remove_qam)
        .push("compensated", options.compensate)
        .push("rcmc", options.rcmc)
        .push("filter", format!("{:?}", options.filter).to_lowercase());
    io::write_image(&outputs.file("image.bin"), &img, &extra)?;
    let magnitude: Vec<f64> = img.data.iter().map(|v| v.norm()).collect();
    io::write_pgm_db(&outputs.file("image.pgm"), img.rows, img.cols, &magnitude, cfg.image_floor_db)?;
    finish(outputs);
    Ok(())
}

pub fn metrics(image: &Path, targets: &Path, out: Option<PathBuf>) -> CliResult {
    let (cfg, dir) = load(targets, out)?;
    let img = io::read_image(image)?;
    let reports = report_targets(&img, &cfg.scene.targets, &cfg.geometry, &ExtractOptions::default())?;

    let mut outputs = Outputs::new(&dir)?;
    let path = outputs.file("metrics.csv");
    io::write_csv(&path, &TargetReport::HEADER, reports.iter().map(TargetReport::record))?;
    let mut meta = Meta::default();
    meta.push("image", image.file_name().map(|n| n.to_string_lossy()).unwrap_or_default())
        .push("resolution", WIDTH_CONVENTION);
    meta.write(&io::meta_path(&path))?;
    for r in &reports {
        say!(
            "{}: range {:.3} m, azimuth {:.3} m, PSLR {:.2}/{:.2} dB, ISLR {:.2}/{:.2} dB",
            r.id,
            r.range_resolution_m,
            r.azimuth_resolution_m,
            r.range_pslr_db,
            r.azimuth_pslr_db,
            r.range_islr_db,
            r.azimuth_islr_db
        );
    }
    finish(outputs);
    Ok(())
}

pub fn comm_ber(
    config: &Path,
    out: Option<PathBuf>,
    snr: Option<Vec<f64>>,
    trials: Option<u64>,
    waveform_level: bool,
) -> CliResult {
    let (cfg, dir) = load(config, out)?;
    let wf = cfg.waveform()?;
    let snr = snr.unwrap_or_else(|| cfg.comm.snr_db.clone());
    if snr.is_empty() {
        return Err(CliError::Config("no SNR points".into()));
    }
    let method = if waveform_level { BerMethod::Waveform } else { cfg.comm.method };
    let report = run_ber(&wf, &cfg.channel, &snr, trials.unwrap_or(cfg.comm.trials), method)?;

    let mut outputs = Outputs::new(&dir)?;
    let path = outputs.file("ber.csv");
    io::write_csv(&path, &BerPoint::HEADER, report.points.iter().map(BerPoint::record))?;
    let mut meta = Meta::default();
    meta.push("M", report.subpulses)
        .push("J", report.qam_order)
        .push_f64("sigma2", report.sigma2)
        .push("csi", report.csi)
        .push("seed", report.seed)
        .push("method", format!("{:?}", report.method).to_lowercase());
    meta.write(&io::meta_path(&path))?;
    finish(outputs);
    Ok(())
}
