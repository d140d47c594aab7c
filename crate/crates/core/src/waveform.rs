//! Waveform parameters, bit-to-frame mapping and pulse synthesis.
//!
//! Samples are the analytic baseband with the carrier removed: sub-band `a`
//! of a pulse sweeps `[a Bs, (a + 1) Bs]`, so the whole pulse lives in `[0, Bw]`.

use num_complex::Complex64;
use rand::{Rng, RngExt};

use crate::dsp::cis_cycles;
use crate::error::{Error, Result};
use crate::qam::Constellation;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub pulse_width_s: f64,
    pub subpulses: usize,
    pub qam_order: usize,
    pub power: f64,
    /// Fast-time oversampling relative to the total bandwidth.
    pub oversampling: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 3.2e9,
            bandwidth_hz: 80e6,
            pulse_width_s: 40e-6,
            subpulses: 4,
            qam_order: 4,
            power: 1.0,
            oversampling: 1.25,
        }
    }
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.carrier_hz) {
            return Err(Error::config("waveform.fc", "must be positive"));
        }
        if !positive(self.bandwidth_hz) {
            return Err(Error::config("waveform.Bw", "must be positive"));
        }
        if !positive(self.pulse_width_s) {
            return Err(Error::config("waveform.Tw", "must be positive"));
        }
        if self.subpulses == 0 {
            return Err(Error::config("waveform.M", "must be at least 1"));
        }
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(Error::config("waveform.J", "must be 4, 16 or 64"));
        }
        if !positive(self.power) {
            return Err(Error::config("waveform.P", "must be positive"));
        }
        if !(self.oversampling.is_finite() && self.oversampling >= 1.0) {
            return Err(Error::config("waveform.osf", "must be at least 1"));
        }
        Ok(())
    }
}

/// Quantities that follow from a [`WaveformConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub subband_hz: f64,
    pub subpulse_s: f64,
    pub chirp_rate: f64,
    pub sample_rate: f64,
    /// Sample rate as a multiple of the sub-band width.
    pub rate_multiple: usize,
    /// Time-bandwidth product of one sub-pulse. Always an integer.
    pub subpulse_tbp: usize,
    pub subpulse_samples: usize,
    pub pulse_samples: usize,
    pub index_bits: usize,
    pub qam_bits: usize,
}

impl DerivedParams {
    pub fn bits_per_subpulse(&self) -> usize {
        self.index_bits + self.qam_bits
    }

    pub fn bits_per_pulse(&self) -> usize {
        self.bits_per_subpulse() * self.subpulses()
    }

    pub fn subpulses(&self) -> usize {
        self.pulse_samples / self.subpulse_samples
    }

    /// Number of sub-band indices actually reachable from bits.
    pub fn index_alphabet(&self) -> usize {
        1 << self.index_bits
    }
}

pub fn derive_params(cfg: &WaveformConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let m = cfg.subpulses;
    let subband_hz = cfg.bandwidth_hz / m as f64;
    let subpulse_s = cfg.pulse_width_s / m as f64;
    let tbp = subband_hz * subpulse_s;
    if tbp < 1.0 {
        return Err(Error::config(
            "waveform.M",
            format!("sub-pulse time-bandwidth product {tbp} is below 1"),
        ));
    }
    let tbp_int = tbp.round();
    if (tbp - tbp_int).abs() > 1e-6 * tbp {
        // Without an integer number of sub-band cycles per sub-pulse the
        // index tones are not orthogonal and the sub-band shifts do not land
        // on the sample grid.
        return Err(Error::config(
            "waveform.M",
            format!("sub-pulse time-bandwidth product {tbp} is not an integer"),
        ));
    }
    let rate_multiple = (cfg.oversampling * m as f64 - 1e-9).ceil() as usize;
    let subpulse_samples = rate_multiple * tbp_int as usize;
    let qam = Constellation::new(cfg.qam_order)?;
    Ok(DerivedParams {
        subband_hz,
        subpulse_s,
        chirp_rate: subband_hz / subpulse_s,
        sample_rate: rate_multiple as f64 * subband_hz,
        rate_multiple,
        subpulse_tbp: tbp_int as usize,
        subpulse_samples,
        pulse_samples: m * subpulse_samples,
        index_bits: m.ilog2() as usize,
        qam_bits: qam.bits_per_symbol(),
    })
}

/// Validated configuration bundled with everything derived from it.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub config: WaveformConfig,
    pub params: DerivedParams,
    pub constellation: Constellation,
}

impl Waveform {
    pub fn new(config: WaveformConfig) -> Result<Self> {
        let params = derive_params(&config)?;
        let constellation = Constellation::new(config.qam_order)?;
        Ok(Self {
            config,
            params,
            constellation,
        })
    }

    pub fn subpulses(&self) -> usize {
        self.config.subpulses
    }

    pub fn amplitude(&self) -> f64 {
        self.config.power.sqrt()
    }
}

/// Frequency indices and QAM symbols for every sub-pulse of a pulse train,
/// stored pulse-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FimFrame {
    subpulses: usize,
    indices: Vec<usize>,
    symbols: Vec<Complex64>,
}

impl FimFrame {
    pub fn new(subpulses: usize, indices: Vec<usize>, symbols: Vec<Complex64>) -> Result<Self> {
        if subpulses == 0 {
            return Err(Error::InvalidFrame("zero sub-pulses per pulse".into()));
        }
        if indices.len() != symbols.len() || !indices.len().is_multiple_of(subpulses) {
            return Err(Error::InvalidFrame(format!(
                "{} indices and {} symbols do not form whole pulses of {subpulses}",
                indices.len(),
                symbols.len()
            )));
        }
        if let Some(&a) = indices.iter().find(|&&a| a >= subpulses) {
            return Err(Error::InvalidFrame(format!(
                "index {a} outside 0..{subpulses}"
            )));
        }
        Ok(Self {
            subpulses,
            indices,
            symbols,
        })
    }

    /// `pulses` repetitions of one index pattern, all carrying `symbol`.
    pub fn repeated(pattern: &[usize], pulses: usize, symbol: Complex64) -> Result<Self> {
        let indices: Vec<usize> = pattern.iter().copied().cycle().take(pattern.len() * pulses).collect();
        let symbols = vec![symbol; indices.len()];
        Self::new(pattern.len(), indices, symbols)
    }

    /// Frame carrying uniformly random bits.
    pub fn random<R: Rng + ?Sized>(wf: &Waveform, pulses: usize, rng: &mut R) -> Self {
        let bits = BitStream::random(wf.params.bits_per_pulse(), pulses, rng);
        map_bits_to_frame(&bits, wf, pulses).expect("random bit stream has the right length")
    }

    pub fn pulses(&self) -> usize {
        self.indices.len() / self.subpulses
    }

    pub fn subpulses(&self) -> usize {
        self.subpulses
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn pulse_indices(&self, k: usize) -> &[usize] {
        &self.indices[k * self.subpulses..(k + 1) * self.subpulses]
    }

    pub fn pulse_symbols(&self, k: usize) -> &[Complex64] {
        &self.symbols[k * self.subpulses..(k + 1) * self.subpulses]
    }

    pub fn with_symbols(&self, symbols: Vec<Complex64>) -> Result<Self> {
        Self::new(self.subpulses, self.indices.clone(), symbols)
    }

    pub fn with_indices(&self, indices: Vec<usize>) -> Result<Self> {
        Self::new(self.subpulses, indices, self.symbols.clone())
    }

    fn check_against(&self, wf: &Waveform) -> Result<()> {
        if self.subpulses != wf.subpulses() {
            return Err(Error::InvalidFrame(format!(
                "frame has {} sub-pulses per pulse, waveform has {}",
                self.subpulses,
                wf.subpulses()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
    bits_per_pulse: usize,
}

impl BitStream {
    pub fn new(bits: Vec<u8>, bits_per_pulse: usize) -> Result<Self> {
        if bits_per_pulse == 0 || !bits.len().is_multiple_of(bits_per_pulse) {
            return Err(Error::LengthMismatch {
                expected: bits.len().div_ceil(bits_per_pulse.max(1)) * bits_per_pulse,
                got: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidFrame("bit values must be 0 or 1".into()));
        }
        Ok(Self {
            bits,
            bits_per_pulse,
        })
    }

    pub fn random<R: Rng + ?Sized>(bits_per_pulse: usize, pulses: usize, rng: &mut R) -> Self {
        let bits = (0..bits_per_pulse * pulses)
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        Self {
            bits,
            bits_per_pulse,
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bits_per_pulse(&self) -> usize {
        self.bits_per_pulse
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn read_msb_first(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn write_msb_first(value: usize, out: &mut Vec<u8>, width: usize) {
    for i in (0..width).rev() {
        out.push(((value >> i) & 1) as u8);
    }
}

/// Splits `bits` into per-sub-pulse groups: the first `index_bits` choose the
/// sub-band (natural binary), the remaining bits the Gray-labelled QAM point.
pub fn map_bits_to_frame(bits: &BitStream, wf: &Waveform, pulses: usize) -> Result<FimFrame> {
    let p = &wf.params;
    let expected = pulses * p.bits_per_pulse();
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: bits.len(),
        });
    }
    let per_sub = p.bits_per_subpulse();
    let count = pulses * wf.subpulses();
    let mut indices = Vec::with_capacity(count);
    let mut symbols = Vec::with_capacity(count);
    for group in bits.bits().chunks_exact(per_sub) {
        let (index_bits, qam_bits) = group.split_at(p.index_bits);
        indices.push(read_msb_first(index_bits));
        symbols.push(wf.constellation.point(read_msb_first(qam_bits)));
    }
    FimFrame::new(wf.subpulses(), indices, symbols)
}

pub fn frame_to_bits(frame: &FimFrame, wf: &Waveform) -> Result<BitStream> {
    frame.check_against(wf)?;
    let p = &wf.params;
    let mut bits = Vec::with_capacity(frame.pulses() * p.bits_per_pulse());
    for (&a, &c) in frame.indices().iter().zip(frame.symbols()) {
        if a >= p.index_alphabet() {
            return Err(Error::InvalidFrame(format!(
                "index {a} cannot be expressed with {} index bits",
                p.index_bits
            )));
        }
        let label = wf
            .constellation
            .label_of(c)
            .ok_or_else(|| Error::InvalidFrame(format!("symbol {c} is not a constellation point")))?;
        write_msb_first(a, &mut bits, p.index_bits);
        write_msb_first(label, &mut bits, p.qam_bits);
    }
    BitStream::new(bits, p.bits_per_pulse())
}

/// Phase in cycles of the unit sub-chirp in sub-band `index` at local sample
/// `n`, reduced to `[0, 1)`. Evaluated in integer arithmetic so that long
/// pulses keep full phase precision.
pub fn subchirp_phase_cycles(params: &DerivedParams, index: usize, n: usize) -> f64 {
    // a Bs t + Kc t^2 / 2 with t = n / fs collapses to
    // (2 a n Ns + n^2) / (2 q Ns).
    let ns = params.subpulse_samples as u128;
    let den = 2 * params.rate_multiple as u128 * ns;
    let n = n as u128;
    let num = (2 * index as u128 * n * ns + n * n) % den;
    num as f64 / den as f64
}

/// Unit-amplitude sub-chirp of sub-band `index`, `Ns` samples.
pub fn subchirp(params: &DerivedParams, index: usize) -> Vec<Complex64> {
    (0..params.subpulse_samples)
        .map(|n| cis_cycles(subchirp_phase_cycles(params, index, n)))
        .collect()
}

/// Unit sub-chirp of sub-band `index` at continuous local time `t` in seconds.
/// Zero outside `[0, Ts)`.
pub fn subchirp_at(params: &DerivedParams, index: usize, t: f64) -> Complex64 {
    if !(0.0..params.subpulse_s).contains(&t) {
        return Complex64::new(0.0, 0.0);
    }
    let cycles = index as f64 * params.subband_hz * t + 0.5 * params.chirp_rate * t * t;
    cis_cycles(cycles)
}

/// Baseband samples of pulse `k`, `Npulse` long.
pub fn synthesize_pulse(wf: &Waveform, frame: &FimFrame, k: usize) -> Result<Vec<Complex64>> {
    frame.check_against(wf)?;
    if k >= frame.pulses() {
        return Err(Error::InvalidFrame(format!(
            "pulse {k} requested from a frame of {} pulses",
            frame.pulses()
        )));
    }
    let p = &wf.params;
    let amp = wf.amplitude();
    let mut out = Vec::with_capacity(p.pulse_samples);
    for (&a, &c) in frame.pulse_indices(k).iter().zip(frame.pulse_symbols(k)) {
        let gain = c * amp;
        out.extend((0..p.subpulse_samples).map(|n| gain * cis_cycles(subchirp_phase_cycles(p, a, n))));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PulseTrain {
    pub pulses: Vec<Vec<Complex64>>,
    /// Emission time of each pulse in seconds.
    pub emission_times: Vec<f64>,
    pub sample_rate: f64,
}

pub fn synthesize_train(wf: &Waveform, frame: &FimFrame, pri: f64) -> Result<PulseTrain> {
    if frame.pulses() == 0 {
        return Err(Error::InvalidFrame("empty frame".into()));
    }
    if !(pri.is_finite() && pri >= wf.config.pulse_width_s) {
        return Err(Error::config(
            "acquisition.prf",
            format!("pulse repetition interval {pri} s is shorter than the pulse"),
        ));
    }
    let pulses = (0..frame.pulses())
        .map(|k| synthesize_pulse(wf, frame, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(PulseTrain {
        pulses,
        emission_times: (0..frame.pulses()).map(|k| k as f64 * pri).collect(),
        sample_rate: wf.params.sample_rate,
    })
}
