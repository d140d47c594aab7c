//! Communication downlink: block Rayleigh fading plus white noise, de-chirp,
//! and two-step detection (sub-band index, then QAM symbol).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dsp::cis_cycles;
use crate::error::{Error, Result};
use crate::waveform::{frame_to_bits, map_bits_to_frame, subchirp, synthesize_pulse, BitStream, DerivedParams, FimFrame, Waveform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Variance of the complex fading gain.
    pub sigma2: f64,
    /// `10 log10(P^2 / N0)`. Infinity disables the noise.
    pub snr_db: f64,
    /// Whether the receiver knows the fading gain. Without it the receiver
    /// assumes `h = 1`.
    pub csi: bool,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            snr_db: 10.0,
            csi: true,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config("channel.sigma2", "must be positive and finite"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::config("channel.snr_db", "must be a number"));
        }
        Ok(())
    }

    /// Per-sample complex noise variance.
    pub fn noise_variance(&self, power: f64) -> f64 {
        noise_variance(power, self.snr_db)
    }
}

fn noise_variance(power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        power * power / 10f64.powf(snr_db / 10.0)
    }
}

/// One received sub-pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct RxSubpulse {
    pub samples: Vec<Complex64>,
    /// Fading gain that was applied.
    pub h: Complex64,
    /// Pulse and slot of this sub-pulse.
    pub pulse: usize,
    pub slot: usize,
}

/// Draw of a circular complex Gaussian with `E|z|^2 = 1`.
pub fn unit_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `h * tx + n` with `h ~ CN(0, sigma2)` and white `n ~ CN(0, N0)`.
pub fn apply_channel<R: Rng + ?Sized>(
    tx: &[Complex64],
    chan: &ChannelConfig,
    power: f64,
    (pulse, slot): (usize, usize),
    rng: &mut R,
) -> RxSubpulse {
    let h = unit_complex_normal(rng) * chan.sigma2.sqrt();
    let std = chan.noise_variance(power).sqrt();
    let samples = tx
        .iter()
        .map(|&x| {
            let v = h * x;
            if std > 0.0 {
                v + unit_complex_normal(rng) * std
            } else {
                v
            }
        })
        .collect();
    RxSubpulse { samples, h, pulse, slot }
}

/// Removes the chirp: what is left of a sub-chirp in sub-band `a` is a tone
/// at `a Bs`.
pub fn dechirp(rx: &RxSubpulse, params: &DerivedParams) -> Result<Vec<Complex64>> {
    if rx.samples.len() != params.subpulse_samples {
        return Err(Error::LengthMismatch {
            expected: params.subpulse_samples,
            got: rx.samples.len(),
        });
    }
    Ok(rx
        .samples
        .iter()
        .zip(subchirp(params, 0))
        .map(|(x, r)| x * r.conj())
        .collect())
}

/// `(1/Ns) sum x[n] exp(-j 2 pi a Bs n / fs)`. Since `fs = q Bs` the phase is
/// `a n / q` turns, reduced exactly.
fn tone_correlation(x: &[Complex64], index: usize, q: usize) -> Complex64 {
    let sum: Complex64 = x
        .iter()
        .enumerate()
        .map(|(n, v)| v * cis_cycles(-(((index * n) % q) as f64) / q as f64))
        .sum();
    sum / x.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexDecision {
    pub index: usize,
    /// Detection statistic of every sub-band `0..M`.
    pub statistics: Vec<f64>,
}

/// Picks the sub-band with the largest tone energy among the indices the
/// transmitter can use. Ties go to the smaller index.
pub fn detect_index(dechirped: &[Complex64], params: &DerivedParams) -> IndexDecision {
    let q = params.rate_multiple;
    let statistics: Vec<f64> = (0..params.subpulses())
        .map(|a| tone_correlation(dechirped, a, q).norm_sqr())
        .collect();
    let index = argmax_first(&statistics[..params.index_alphabet()]);
    IndexDecision { index, statistics }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Label of the constellation point closest to the tone at `index`, after
/// scaling by the channel `h` and the amplitude.
pub fn detect_qam(dechirped: &[Complex64], index: usize, h: Complex64, wf: &Waveform) -> usize {
    let z = tone_correlation(dechirped, index, wf.params.rate_multiple);
    wf.constellation.nearest_scaled(z, h * wf.amplitude())
}

/// Recovers the bits of `pulses` pulses from their received sub-pulses,
/// given in pulse-major order.
pub fn demodulate_frame(rx: &[RxSubpulse], pulses: usize, chan: &ChannelConfig, wf: &Waveform) -> Result<BitStream> {
    let m = wf.subpulses();
    if rx.len() != pulses * m {
        return Err(Error::LengthMismatch {
            expected: pulses * m,
            got: rx.len(),
        });
    }
    let mut indices = Vec::with_capacity(rx.len());
    let mut symbols = Vec::with_capacity(rx.len());
    for sub in rx {
        let y = dechirp(sub, &wf.params)?;
        let a = detect_index(&y, &wf.params).index;
        let h = if chan.csi { sub.h } else { Complex64::new(1.0, 0.0) };
        indices.push(a);
        symbols.push(wf.constellation.point(detect_qam(&y, a, h, wf)));
    }
    frame_to_bits(&FimFrame::new(m, indices, symbols)?, wf)
}

/// Counts for one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCounts {
    pub trials: u64,
    pub index_bits: u64,
    pub qam_bits: u64,
    pub index_errors: u64,
    pub qam_errors: u64,
}

impl ErrorCounts {
    fn merge(self, o: Self) -> Self {
        Self {
            trials: self.trials + o.trials,
            index_bits: self.index_bits + o.index_bits,
            qam_bits: self.qam_bits + o.qam_bits,
            index_errors: self.index_errors + o.index_errors,
            qam_errors: self.qam_errors + o.qam_errors,
        }
    }

    fn ratio(errors: u64, bits: u64) -> f64 {
        if bits == 0 {
            0.0
        } else {
            errors as f64 / bits as f64
        }
    }

    pub fn index_ber(&self) -> f64 {
        Self::ratio(self.index_errors, self.index_bits)
    }

    pub fn qam_ber(&self) -> f64 {
        Self::ratio(self.qam_errors, self.qam_bits)
    }

    pub fn total_errors(&self) -> u64 {
        self.index_errors + self.qam_errors
    }

    pub fn total_bits(&self) -> u64 {
        self.index_bits + self.qam_bits
    }

    pub fn total_ber(&self) -> f64 {
        Self::ratio(self.total_errors(), self.total_bits())
    }

    /// Tallies bit errors between transmitted and received streams, split by
    /// the index and QAM fields of each sub-pulse.
    pub fn tally(tx: &BitStream, rx: &BitStream, params: &DerivedParams) -> Self {
        let per_sub = params.bits_per_subpulse();
        let mut out = Self::default();
        for (t, r) in tx.bits().chunks_exact(per_sub).zip(rx.bits().chunks_exact(per_sub)) {
            let (ti, tq) = t.split_at(params.index_bits);
            let (ri, rq) = r.split_at(params.index_bits);
            out.index_bits += ti.len() as u64;
            out.qam_bits += tq.len() as u64;
            out.index_errors += ti.iter().zip(ri).filter(|(a, b)| a != b).count() as u64;
            out.qam_errors += tq.iter().zip(rq).filter(|(a, b)| a != b).count() as u64;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub counts: ErrorCounts,
}

impl BerPoint {
    pub const HEADER: [&'static str; 5] = ["snr_db", "trials", "index_ber", "qam_ber", "total_ber"];

    pub fn record(&self) -> Vec<String> {
        vec![
            format!("{}", self.snr_db),
            self.counts.trials.to_string(),
            format!("{:.9e}", self.counts.index_ber()),
            format!("{:.9e}", self.counts.qam_ber()),
            format!("{:.9e}", self.counts.total_ber()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub subpulses: usize,
    pub qam_order: usize,
    pub sigma2: f64,
    pub csi: bool,
    pub seed: u64,
    pub method: BerMethod,
    pub points: Vec<BerPoint>,
}

/// How a trial's received statistics are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BerMethod {
    /// Draw the tone correlations directly. With `Ns` a multiple of `q` the
    /// candidate tones are orthogonal, so white noise projects onto them as
    /// independent `CN(0, N0 / Ns)` draws; this is exact in distribution.
    #[default]
    Statistic,
    /// Synthesize every sample, pass it through the channel and de-chirp.
    Waveform,
}

/// Independent generators for one trial: bits, fading and noise. They depend
/// only on the seed and the trial number, so every SNR point and every
/// thread sees the same draws for the same trial.
fn trial_rngs(seed: u64, trial: u64) -> [ChaCha8Rng; 3] {
    std::array::from_fn(|j| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial * 4 + j as u64);
        rng
    })
}

/// One pulse of random data through the channel at per-sample noise
/// variance `n0`.
fn run_trial(wf: &Waveform, chan: &ChannelConfig, n0: f64, trial: u64, method: BerMethod) -> Result<ErrorCounts> {
    let [mut bit_rng, mut fade_rng, mut noise_rng] = trial_rngs(chan.seed, trial);
    let p = &wf.params;
    let tx = BitStream::random(p.bits_per_pulse(), 1, &mut bit_rng);
    let frame = map_bits_to_frame(&tx, wf, 1)?;
    let m = wf.subpulses();
    let rx = match method {
        BerMethod::Statistic => {
            let sigma = chan.sigma2.sqrt();
            let std = (n0 / p.subpulse_samples as f64).sqrt();
            let alphabet = p.index_alphabet();
            let mut indices = Vec::with_capacity(m);
            let mut symbols = Vec::with_capacity(m);
            for (&a, &c) in frame.indices().iter().zip(frame.symbols()) {
                let h = unit_complex_normal(&mut fade_rng) * sigma;
                let tones: Vec<Complex64> = (0..alphabet)
                    .map(|l| {
                        let signal = if l == a { h * c * wf.amplitude() } else { Complex64::new(0.0, 0.0) };
                        signal + unit_complex_normal(&mut noise_rng) * std
                    })
                    .collect();
                let energies: Vec<f64> = tones.iter().map(|z| z.norm_sqr()).collect();
                let a_hat = argmax_first(&energies);
                let gain = if chan.csi { h } else { Complex64::new(1.0, 0.0) } * wf.amplitude();
                indices.push(a_hat);
                symbols.push(wf.constellation.point(wf.constellation.nearest_scaled(tones[a_hat], gain)));
            }
            frame_to_bits(&FimFrame::new(m, indices, symbols)?, wf)?
        }
        BerMethod::Waveform => {
            let pulse = synthesize_pulse(wf, &frame, 0)?;
            let sigma = chan.sigma2.sqrt();
            let std = n0.sqrt();
            let subs: Vec<RxSubpulse> = pulse
                .chunks_exact(p.subpulse_samples)
                .enumerate()
                .map(|(slot, tx)| {
                    // Fading and noise come from separate streams, so both
                    // methods see the same fading draws.
                    let h = unit_complex_normal(&mut fade_rng) * sigma;
                    let samples = tx.iter().map(|&x| h * x + unit_complex_normal(&mut noise_rng) * std).collect();
                    RxSubpulse { samples, h, pulse: 0, slot }
                })
                .collect();
            demodulate_frame(&subs, 1, chan, wf)?
        }
    };
    let mut counts = ErrorCounts::tally(&tx, &rx, p);
    counts.trials = 1;
    Ok(counts)
}

/// Monte-Carlo bit error rates over an SNR sweep. Trials run in parallel;
/// integer error counts make the result independent of scheduling.
pub fn run_ber(
    wf: &Waveform,
    chan: &ChannelConfig,
    snr_db: &[f64],
    trials: u64,
    method: BerMethod,
) -> Result<BerReport> {
    chan.validate()?;
    if trials == 0 {
        return Err(Error::config("comm.trials", "must be at least 1"));
    }
    let mut points = Vec::with_capacity(snr_db.len());
    for &snr in snr_db {
        if snr.is_nan() {
            return Err(Error::config("comm.snr_db", "must be a number"));
        }
        let n0 = noise_variance(wf.config.power, snr);
        let counts = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(wf, chan, n0, t, method))
            .try_reduce(ErrorCounts::default, |a, b| Ok(a.merge(b)))?;
        points.push(BerPoint { snr_db: snr, counts });
    }
    Ok(BerReport {
        subpulses: wf.subpulses(),
        qam_order: wf.constellation.order(),
        sigma2: chan.sigma2,
        csi: chan.csi,
        seed: chan.seed,
        method,
        points,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::waveform::WaveformConfig;

    fn waveform(m: usize, j: usize) -> Waveform {
        Waveform::new(WaveformConfig {
            subpulses: m,
            qam_order: j,
            ..WaveformConfig::default()
        })
        .unwrap()
    }

    fn noiseless() -> ChannelConfig {
        ChannelConfig {
            snr_db: f64::INFINITY,
            ..ChannelConfig::default()
        }
    }

    fn rx_of(wf: &Waveform, a: usize, c: Complex64, h: Complex64) -> RxSubpulse {
        let samples = subchirp(&wf.params, a).iter().map(|s| s * c * h * wf.amplitude()).collect();
        RxSubpulse { samples, h, pulse: 0, slot: 0 }
    }

    #[test]
    fn noiseless_channel_is_pure_gain() {
        let wf = waveform(4, 4);
        let tx = subchirp(&wf.params, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rx = apply_channel(&tx, &noiseless(), 1.0, (0, 0), &mut rng);
        for (y, x) in rx.samples.iter().zip(&tx) {
            assert_eq!(*y, rx.h * x);
        }
    }

    #[test]
    fn fading_has_requested_power() {
        let chan = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| apply_channel(&[], &chan, 1.0, (0, 0), &mut rng).h.norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn dechirp_leaves_a_constant_for_the_lowest_band() {
        let wf = waveform(4, 4);
        let y = dechirp(&rx_of(&wf, 0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)), &wf.params).unwrap();
        for v in y {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dechirp_tone_lands_on_its_bin() {
        // a = 2, Bs = 20 MHz over Ts = 10 us: 200 cycles per sub-band step,
        // so the tone sits at DFT bin 400 of the 1000-sample sub-pulse.
        let wf = waveform(4, 4);
        let y = dechirp(&rx_of(&wf, 2, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)), &wf.params).unwrap();
        let mut spec = y.clone();
        crate::dsp::FftPair::new(spec.len()).forward(&mut spec);
        let peak = (0..spec.len()).max_by(|&i, &j| spec[i].norm().total_cmp(&spec[j].norm())).unwrap();
        let bin = 2.0 * wf.params.subband_hz / (wf.params.sample_rate / wf.params.subpulse_samples as f64);
        assert_eq!(peak, bin.round() as usize);
        assert_eq!(peak, 400);
        // Flat instantaneous frequency: every phase step is the same.
        let step = (y[1] * y[0].conj()).arg();
        for w in y.windows(2) {
            assert!(((w[1] * w[0].conj()).arg() - step).abs() < 1e-9);
        }
    }

    #[test]
    fn detection_statistics_are_one_hot() {
        for (m, j) in [(2, 4), (4, 4), (5, 16), (8, 4)] {
            let wf = waveform(m, j);
            for a in 0..m {
                let h = Complex64::from_polar(0.7, 1.1);
                let c = wf.constellation.point(1);
                let y = dechirp(&rx_of(&wf, a, c, h), &wf.params).unwrap();
                let d = detect_index(&y, &wf.params);
                let expected = h.norm_sqr() * wf.config.power * c.norm_sqr();
                assert!((d.statistics[a] - expected).abs() < 1e-12);
                for (l, s) in d.statistics.iter().enumerate() {
                    if l != a {
                        assert!(*s < 1e-20 * expected, "M={m} a={a} l={l}: {s}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_input_detects_index_zero() {
        let wf = waveform(4, 4);
        let d = detect_index(&vec![Complex64::new(0.0, 0.0); wf.params.subpulse_samples], &wf.params);
        assert_eq!(d.index, 0);
        assert!(d.statistics.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn index_statistic_ignores_symbol_phase() {
        let wf = waveform(4, 16);
        let base = dechirp(&rx_of(&wf, 3, wf.constellation.point(5), Complex64::new(1.0, 0.0)), &wf.params).unwrap();
        let turned =
            dechirp(&rx_of(&wf, 3, wf.constellation.point(5) * Complex64::from_polar(1.0, 2.0), Complex64::new(1.0, 0.0)), &wf.params)
                .unwrap();
        let (a, b) = (detect_index(&base, &wf.params), detect_index(&turned, &wf.params));
        for (x, y) in a.statistics.iter().zip(&b.statistics) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn csi_undoes_channel_rotation() {
        let wf = waveform(4, 16);
        for label in 0..16 {
            let h = Complex64::from_polar(0.3, -2.4);
            let y = dechirp(&rx_of(&wf, 1, wf.constellation.point(label), h), &wf.params).unwrap();
            assert_eq!(detect_qam(&y, 1, h, &wf), label);
        }
    }

    #[test]
    fn qam_boundary_ties_go_to_the_lower_label() {
        let wf = waveform(4, 4);
        let c = &wf.constellation;
        // Midpoint between two neighbouring points is equidistant from both.
        let (i, j) = (0, 1);
        let mid = (c.point(i) + c.point(j)) / 2.0;
        let y = vec![mid; wf.params.subpulse_samples];
        assert_eq!(detect_qam(&y, 0, Complex64::new(1.0, 0.0), &wf), i.min(j));
    }

    #[test]
    fn sixteen_bits_per_pulse_at_m4_j4() {
        let wf = waveform(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frame = FimFrame::random(&wf, 1, &mut rng);
        let tx = frame_to_bits(&frame, &wf).unwrap();
        let pulse = synthesize_pulse(&wf, &frame, 0).unwrap();
        let ns = wf.params.subpulse_samples;
        let rx: Vec<RxSubpulse> = (0..4)
            .map(|m| apply_channel(&pulse[m * ns..(m + 1) * ns], &noiseless(), 1.0, (0, m), &mut rng))
            .collect();
        let bits = demodulate_frame(&rx, 1, &noiseless(), &wf).unwrap();
        assert_eq!(bits.len(), 16);
        assert_eq!(bits, tx);
    }

    #[test]
    fn wrong_index_leaves_qam_to_chance() {
        // With the index forced onto an empty sub-band the QAM statistic is
        // noise only, so Gray-coded 4-QAM bits are wrong half the time.
        let wf = waveform(4, 4);
        let chan = ChannelConfig { snr_db: 0.0, ..ChannelConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut errors, mut bits) = (0u32, 0u32);
        for _ in 0..4000 {
            let label = rng.random_range(0..4);
            let tx: Vec<Complex64> = subchirp(&wf.params, 0).iter().map(|s| s * wf.constellation.point(label)).collect();
            let rx = apply_channel(&tx, &chan, 1.0, (0, 0), &mut rng);
            let y = dechirp(&rx, &wf.params).unwrap();
            let got = detect_qam(&y, 2, rx.h, &wf);
            errors += (got ^ label).count_ones();
            bits += 2;
        }
        let ber = errors as f64 / bits as f64;
        assert!((ber - 0.5).abs() < 0.03, "{ber}");
    }

    #[test]
    fn noiseless_ber_is_zero() {
        let wf = waveform(4, 16);
        for method in [BerMethod::Statistic, BerMethod::Waveform] {
            let r = run_ber(&wf, &noiseless(), &[f64::INFINITY], 50, method).unwrap();
            assert_eq!(r.points[0].counts.total_errors(), 0);
            assert_eq!(r.points[0].counts.total_bits(), 50 * 4 * 6);
        }
    }

    #[test]
    fn statistic_and_waveform_methods_agree() {
        // Same fading draws, equivalent noise: error rates agree within
        // Monte-Carlo noise. Low SNR keeps the counts large.
        let wf = waveform(2, 16);
        let chan = ChannelConfig { seed: 4, ..ChannelConfig::default() };
        let snr = [-30.0, -25.0];
        let a = run_ber(&wf, &chan, &snr, 3000, BerMethod::Statistic).unwrap();
        let b = run_ber(&wf, &chan, &snr, 3000, BerMethod::Waveform).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            let (p, q) = (x.counts.total_ber(), y.counts.total_ber());
            let sigma = (p * (1.0 - p) / x.counts.total_bits() as f64).sqrt();
            assert!((p - q).abs() < 5.0 * sigma * 2f64.sqrt(), "{p} vs {q}");
            assert!(p > 0.01);
        }
    }

    #[test]
    fn error_accounting_adds_up() {
        let wf = waveform(5, 4);
        let r = run_ber(&wf, &ChannelConfig::default(), &[-25.0, -15.0], 2000, BerMethod::Statistic).unwrap();
        for pt in &r.points {
            let c = pt.counts;
            assert_eq!(c.total_errors(), c.index_errors + c.qam_errors);
            assert_eq!(c.index_bits, 2000 * 5 * 2);
            assert_eq!(c.qam_bits, 2000 * 5 * 2);
            assert!(c.index_errors <= c.index_bits && c.qam_errors <= c.qam_bits);
            assert!((0.0..=1.0).contains(&c.total_ber()));
        }
    }

    #[test]
    fn global_phase_rotation_leaves_ber_unchanged() {
        // Rotating every point at both ends is equivalent to rotating the
        // fading gain, which is circularly symmetric.
        let wf = waveform(4, 16);
        let trials = 20_000;
        let run = |phi: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let rot = Complex64::from_polar(1.0, phi);
            let std = (noise_variance(1.0, -25.0) / wf.params.subpulse_samples as f64).sqrt();
            let mut errors = 0u32;
            for _ in 0..trials {
                let label = rng.random_range(0..16);
                let h = unit_complex_normal(&mut rng);
                let z = h * wf.constellation.point(label) * rot + unit_complex_normal(&mut rng) * std;
                let got = wf.constellation.nearest_scaled(z, h * rot);
                errors += (got ^ label).count_ones();
            }
            errors as f64 / (4 * trials) as f64
        };
        let (a, b) = (run(0.0), run(0.9));
        let sigma = (a * (1.0 - a) / (4 * trials) as f64).sqrt();
        assert!((a - b).abs() < 5.0 * sigma * 2f64.sqrt(), "{a} vs {b}");
    }

    #[test]
    fn ber_is_independent_of_thread_count() {
        let wf = waveform(4, 4);
        let chan = ChannelConfig { seed: 21, ..ChannelConfig::default() };
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| run_ber(&wf, &chan, &[-20.0, 0.0], 3000, BerMethod::Statistic).unwrap());
        let b = wide.install(|| run_ber(&wf, &chan, &[-20.0, 0.0], 3000, BerMethod::Statistic).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn noiseless_loopback_recovers_bits(seed in any::<u64>(), pick in 0usize..4) {
            let (m, j) = [(2, 4), (4, 16), (5, 4), (4, 64)][pick];
            let wf = waveform(m, j);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = FimFrame::random(&wf, 2, &mut rng);
            let tx = frame_to_bits(&frame, &wf).unwrap();
            let ns = wf.params.subpulse_samples;
            let mut rx = Vec::new();
            for k in 0..2 {
                let pulse = synthesize_pulse(&wf, &frame, k).unwrap();
                for slot in 0..m {
                    rx.push(apply_channel(&pulse[slot * ns..(slot + 1) * ns], &noiseless(), 1.0, (k, slot), &mut rng));
                }
            }
            prop_assert_eq!(demodulate_frame(&rx, 2, &noiseless(), &wf).unwrap(), tx);
        }
    }
}
