//! Audio ingestion, desk-scale corpus synthesis, SNR mixing, and dynamic
//! noise streams.

use std::path::Path;

use rand::Rng;

use crate::error::Error;
use crate::rng::{self, ChaCha8Rng};
use crate::Result;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono waveform with amplitudes nominally in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample_rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "waveform contains non-finite samples".into(),
            ));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean squared amplitude over the full extent, silence included.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct LabeledClip {
    pub waveform: Waveform,
    pub label: String,
    pub source_id: String,
}

/// Three-sinusoid noise modulator.
#[derive(Clone, Debug)]
pub struct ModulatorParams {
    pub frequencies: [f64; 3],
    pub amplitudes: [f64; 3],
    pub phases: [f64; 3],
}

impl ModulatorParams {
    pub fn new(frequencies: [f64; 3], amplitudes: [f64; 3], phases: [f64; 3]) -> Result<Self> {
        if frequencies.iter().any(|f| *f <= 0.0) {
            return Err(Error::InvalidParameter(
                "modulator frequencies must be positive".into(),
            ));
        }
        if amplitudes.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidParameter(
                "modulator amplitudes must be in [0, 1]".into(),
            ));
        }
        Ok(ModulatorParams {
            frequencies,
            amplitudes,
            phases,
        })
    }

    /// Fixed component frequencies of 0.5, 1 and 1.5 Hz with random
    /// amplitudes in [0, 1] and phases in [0, 2pi).
    pub fn sample(rng: &mut impl Rng) -> Self {
        ModulatorParams {
            frequencies: [0.5, 1.0, 1.5],
            amplitudes: [rng.random(), rng.random(), rng.random()],
            phases: [
                rng.random::<f64>() * std::f64::consts::TAU,
                rng.random::<f64>() * std::f64::consts::TAU,
                rng.random::<f64>() * std::f64::consts::TAU,
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AudioFormat {
    WavPcm16,
    RawPcm16,
}

/// Load a 16-bit PCM file. Raw input is little-endian mono at `sample_rate`
/// (16 kHz when unspecified); WAV headers override the rate and channel
/// count, and multi-channel content is averaged to mono. Samples are scaled
/// to [-1, 1] by dividing by 32768.
pub fn load_audio(path: &Path, format: AudioFormat, sample_rate: Option<u32>) -> Result<Waveform> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() == 0 {
        return Err(Error::EmptyAudio(path.display().to_string()));
    }
    match format {
        AudioFormat::RawPcm16 => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() % 2 != 0 {
                return Err(Error::MalformedHeader {
                    path: path.to_path_buf(),
                    detail: "raw pcm16 byte count is odd".into(),
                });
            }
            let samples = bytes
                .chunks_exact(2)
                .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                .collect();
            Waveform::new(samples, sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE))
        }
        AudioFormat::WavPcm16 => {
            let reader = hound::WavReader::open(path).map_err(|e| Error::MalformedHeader {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            let spec = reader.spec();
            if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
                return Err(Error::UnsupportedBitDepth {
                    path: path.to_path_buf(),
                    bits: spec.bits_per_sample,
                });
            }
            let channels = usize::from(spec.channels.max(1));
            let raw: Vec<i16> = reader
                .into_samples::<i16>()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedHeader {
                    path: path.to_path_buf(),
                    detail: e.to_string(),
                })?;
            if raw.is_empty() {
                return Err(Error::EmptyAudio(path.display().to_string()));
            }
            let samples = raw
                .chunks(channels)
                .map(|frame| {
                    frame.iter().map(|&s| f64::from(s) / 32768.0).sum::<f64>()
                        / frame.len() as f64
                })
                .collect();
            Waveform::new(samples, spec.sample_rate)
        }
    }
}

/// Write mono PCM16 WAV. Samples are scaled by 32768 and clamped, so values
/// produced by `load_audio` round-trip exactly.
pub fn save_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| {
        Error::io(
            path,
            std::io::Error::other(e.to_string()),
        )
    })?;
    for &s in &wave.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    Ok(())
}

/// Add a noise segment to `signal` scaled so the result has the requested
/// SNR. The segment start is drawn from `rng`; power is measured over the
/// full extents actually used.
pub fn mix_at_snr(
    signal: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<Waveform> {
    if signal.sample_rate != noise.sample_rate {
        return Err(Error::InvalidParameter(format!(
            "sample rate mismatch: signal {} Hz vs noise {} Hz",
            signal.sample_rate, noise.sample_rate
        )));
    }
    if noise.len() < signal.len() {
        return Err(Error::InvalidParameter(
            "noise must be at least as long as the signal".into(),
        ));
    }
    let max_off = noise.len() - signal.len();
    let off = if max_off == 0 {
        0
    } else {
        rng.random_range(0..=max_off)
    };
    let seg = &noise.samples[off..off + signal.len()];
    let p_sig = signal.power();
    let p_noise = seg.iter().map(|s| s * s).sum::<f64>() / seg.len().max(1) as f64;
    if p_sig <= 0.0 {
        return Err(Error::ZeroPower("signal"));
    }
    if p_noise <= 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    let alpha = (p_sig / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = signal
        .samples
        .iter()
        .zip(seg)
        .map(|(s, n)| s + alpha * n)
        .collect();
    Waveform::new(samples, signal.sample_rate)
}

/// Evaluate the modulator `m(t)` per sample and rescale it so its minimum
/// maps to 0.0 and its maximum to 1.0.
pub fn modulator_signal(params: &ModulatorParams, n: usize, sample_rate: u32) -> Result<Vec<f64>> {
    let mut m: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(sample_rate);
            (0..3)
                .map(|c| {
                    params.amplitudes[c]
                        * (std::f64::consts::TAU * params.frequencies[c] * t + params.phases[c])
                            .sin()
                })
                .sum()
        })
        .collect();
    let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::ConstantModulator);
    }
    let span = hi - lo;
    for v in &mut m {
        *v = (*v - lo) / span;
    }
    Ok(m)
}

/// Multiply noise by the rescaled modulator, sample by sample.
pub fn modulated_noise(noise: &Waveform, params: &ModulatorParams) -> Result<Waveform> {
    if noise.is_empty() {
        return Err(Error::EmptyAudio("modulated_noise input".into()));
    }
    let m = modulator_signal(params, noise.len(), noise.sample_rate)?;
    let samples = noise
        .samples
        .iter()
        .zip(&m)
        .map(|(s, g)| s * g)
        .collect();
    Waveform::new(samples, noise.sample_rate)
}

const CLASS_NAMES: [&str; 10] = [
    "whistle", "ring", "phone", "metal", "clap", "horn", "cymbal", "buzzer", "bottle", "bell",
];

pub fn class_label(idx: usize) -> String {
    if idx < CLASS_NAMES.len() {
        CLASS_NAMES[idx].to_string()
    } else {
        format!("{}-{}", CLASS_NAMES[idx % 10], idx / 10)
    }
}

/// Deterministic labeled corpus: each class is a distinct parameterized
/// generator with per-file perturbation of pitch, onset, and amplitude.
pub fn synth_corpus(
    n_classes: usize,
    files_per_class: usize,
    duration: f64,
    seed: u64,
) -> Result<Vec<LabeledClip>> {
    if n_classes < 2 {
        return Err(Error::InvalidParameter("need at least 2 classes".into()));
    }
    let mut out = Vec::with_capacity(n_classes * files_per_class);
    for class in 0..n_classes {
        let label = class_label(class);
        for file in 0..files_per_class {
            let mut rng = rng::rng_for(seed, "clip", (class * 1_000_000 + file) as u64);
            let samples = synth_clip(class, duration, DEFAULT_SAMPLE_RATE, &mut rng);
            out.push(LabeledClip {
                waveform: Waveform::new(samples, DEFAULT_SAMPLE_RATE)?,
                label: label.clone(),
                source_id: format!("{label}-{file:03}"),
            });
        }
    }
    Ok(out)
}

fn synth_clip(class: usize, duration: f64, rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = (duration * f64::from(rate)).round() as usize;
    let dt = 1.0 / f64::from(rate);
    // Per-file perturbations shared by all families.
    let pitch = (rng.random::<f64>() - 0.5).mul_add(0.10, 1.0);
    let amp = 0.35 + 0.25 * rng.random::<f64>();
    let onset = rng.random::<f64>() * 0.04;
    // Higher class indices above the base families move up one semitone-ish
    // register per wrap so arbitrarily many classes stay separable.
    let register = 1.0 + 0.12 * (class / 10) as f64;
    let f_scale = pitch * register;

    let mut s = vec![0.0f64; n];
    let tone = |t: f64, f: f64, ph: f64| (std::f64::consts::TAU * f * t + ph).sin();
    match class % 10 {
        0 => {
            // whistle: high tone with slow vibrato plus overblown partial
            let f0 = 2600.0 * f_scale;
            let vib = 5.0 + 2.0 * rng.random::<f64>();
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let wob = (std::f64::consts::TAU * vib * t).sin();
                let f = f0 * (1.0 + 0.015 * wob);
                let am = 1.0 - 0.3 * (std::f64::consts::TAU * 9.0 * t).sin().powi(2);
                *v = am * (tone(t, f, 0.0) + 0.45 * tone(t, 2.0 * f, 0.8));
            }
        }
        1 => {
            // ring: two close tones with tremolo beat
            let f0 = 1150.0 * f_scale;
            let f1 = 1310.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let trem = 1.0 - 0.55 * (std::f64::consts::TAU * 16.0 * t).sin().powi(2);
                *v = trem * 0.5 * (tone(t, f0, 0.0) + tone(t, f1, 1.3) + 0.5 * tone(t, 2.0 * f0, 0.4));
            }
        }
        2 => {
            // phone: harmonic tone gated on/off with soft edges
            let f0 = 440.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let phase = (t / 0.1).fract();
                let gate = if phase < 0.05 {
                    0.5 - 0.5 * (std::f64::consts::PI * phase / 0.05).cos()
                } else if phase < 0.55 {
                    1.0
                } else if phase < 0.6 {
                    0.5 + 0.5 * (std::f64::consts::PI * (phase - 0.55) / 0.05).cos()
                } else {
                    0.0
                };
                let mut x = 0.0;
                for h in [1.0, 3.0, 5.0] {
                    x += tone(t, f0 * h, 0.0) / h;
                }
                *v = gate * x * 0.6;
            }
        }
        3 => {
            // metal strike: inharmonic partials, fast decay
            let f0 = 620.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let env = (-t / 0.18).exp();
                let mut x = 0.0;
                for (j, r) in [1.0, 2.76, 5.40, 8.93].iter().enumerate() {
                    x += tone(t, f0 * r, j as f64) / (1.0 + j as f64);
                }
                *v = env * x * 0.5;
            }
        }
        4 => {
            // clap: short bright transients at irregular gaps, each a pair
            // of damped high resonances
            let mut t0 = onset + 0.01;
            while t0 < duration - 0.02 {
                let start = (t0 / dt) as usize;
                let f1 = (2400.0 + 700.0 * rng.random::<f64>()) * f_scale;
                let f2 = f1 * 1.43;
                let ph = rng.random::<f64>() * std::f64::consts::TAU;
                for j in 0..n.saturating_sub(start) {
                    let t = j as f64 * dt;
                    let env = (-t / 0.008).exp();
                    if env < 1e-4 {
                        break;
                    }
                    s[start + j] += env * (tone(t, f1, ph) + 0.6 * tone(t, f2, 0.0));
                }
                t0 += 0.07 + 0.06 * rng.random::<f64>();
            }
        }
        5 => {
            // horn: low harmonic stack, slow attack
            let f0 = 320.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let env = (t / 0.08).min(1.0);
                let mut x = 0.0;
                for h in 1..=4 {
                    x += tone(t, f0 * h as f64, 0.4 * h as f64) / h as f64;
                }
                *v = env * x * 0.5;
            }
        }
        6 => {
            // cymbal: shimmer of detuned high inharmonic partials with
            // partial-dependent decay
            let partials: Vec<(f64, f64, f64)> = (0..6)
                .map(|j| {
                    let f = (2100.0 + 640.0 * j as f64 * (1.0 + 0.04 * rng.random::<f64>()))
                        * f_scale;
                    let tau = 0.22 / (1.0 + 0.3 * j as f64);
                    (f, tau, rng.random::<f64>() * std::f64::consts::TAU)
                })
                .collect();
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let mut x = 0.0;
                for &(f, tau, ph) in &partials {
                    x += (-t / tau).exp() * tone(t, f, ph);
                }
                *v = x;
            }
        }
        7 => {
            // buzzer: saw-like stack with hard amplitude modulation
            let f0 = 180.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let am = if (t * 25.0).fract() < 0.5 { 1.0 } else { 0.35 };
                let mut x = 0.0;
                for h in 1..=14 {
                    x += tone(t, f0 * h as f64, 0.0) / h as f64;
                }
                *v = am * x * 0.4;
            }
        }
        8 => {
            // bottle: damped two-mode resonance, struck three times
            let f0 = 580.0 * f_scale;
            for k in 0..3 {
                let t0 = onset + 0.02 + 0.15 * k as f64;
                let start = (t0 / dt) as usize;
                for j in 0..n.saturating_sub(start) {
                    let t = j as f64 * dt;
                    let env = (-t / 0.08).exp();
                    if env < 1e-4 {
                        break;
                    }
                    s[start + j] += env * (tone(t, f0, 0.0) + 0.5 * tone(t, 2.3 * f0, 0.9));
                }
            }
        }
        _ => {
            // bell: spread partials with partial-dependent decay
            let f0 = 880.0 * f_scale;
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 * dt - onset;
                if t < 0.0 {
                    continue;
                }
                let mut x = 0.0;
                for (j, r) in [1.0, 2.0, 2.4, 3.0, 4.5].iter().enumerate() {
                    x += (-t / (0.4 / (1.0 + j as f64 * 0.7))).exp()
                        * tone(t, f0 * r, 0.7 * j as f64)
                        / (1.0 + j as f64);
                }
                *v = x;
            }
        }
    }
    let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = amp / peak;
        for v in &mut s {
            *v *= g;
        }
    }
    s
}

/// Babble-like noise: several independent voice-like streams of short
/// harmonic bursts summed together.
pub fn babble_noise(duration: f64, sample_rate: u32, seed: u64) -> Waveform {
    let n = (duration * f64::from(sample_rate)).round() as usize;
    let dt = 1.0 / f64::from(sample_rate);
    let mut s = vec![0.0f64; n];
    for voice in 0..12u64 {
        let mut rng = rng::rng_for(seed, "babble", voice);
        let mut t0 = rng.random::<f64>() * 0.1;
        while t0 < duration {
            let syl = 0.08 + 0.17 * rng.random::<f64>();
            let f0 = 120.0 + 230.0 * rng.random::<f64>();
            let nh = 2 + (rng.random::<f64>() * 3.0) as usize;
            // spectral tilt: higher harmonics fall off as in voiced speech
            let amps: Vec<f64> = (0..nh)
                .map(|h| rng.random::<f64>() / (1.0 + h as f64).sqrt())
                .collect();
            let phs: Vec<f64> =
                (0..nh).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            let start = (t0 / dt) as usize;
            let len = ((syl / dt) as usize).min(n.saturating_sub(start));
            let mut lp = 0.0f64;
            for j in 0..len {
                let t = j as f64 * dt;
                let env = (std::f64::consts::PI * t / syl).sin().powi(2);
                let mut x = 0.0;
                for h in 0..nh {
                    x += amps[h]
                        * (std::f64::consts::TAU * f0 * (h + 1) as f64 * t + phs[h]).sin()
                        / (h + 1) as f64;
                }
                // speech-band aspiration: low-passed noise, not white
                lp = 0.88 * lp + 0.12 * (rng.random::<f64>() * 2.0 - 1.0);
                x += 1.2 * lp;
                s[start + j] += env * x;
            }
            t0 += syl + 0.02 + 0.06 * rng.random::<f64>();
        }
    }
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = 0.1 / rms;
        for v in &mut s {
            *v *= g;
        }
    }
    Waveform {
        samples: s,
        sample_rate,
    }
}

#[derive(Clone, Debug)]
pub struct StreamEvent {
    pub onset: f64,
    pub offset: f64,
    pub label: String,
}

/// Place target and distractor clips at seeded non-overlapping onsets over a
/// modulated-noise background mixed at `snr_db` against the concatenated
/// clip power. Returns the stream and the ground-truth event intervals.
pub fn build_stream(
    targets: &[LabeledClip],
    distractors: &[LabeledClip],
    noise: &Waveform,
    snr_db: f64,
    duration: f64,
    seed: u64,
) -> Result<(Waveform, Vec<StreamEvent>)> {
    let mut rng = rng::rng_for(seed, "stream", 0);
    let clips: Vec<&LabeledClip> = targets.iter().chain(distractors.iter()).collect();
    let rate = clips
        .first()
        .map(|c| c.waveform.sample_rate)
        .unwrap_or(noise.sample_rate);
    if noise.sample_rate != rate {
        return Err(Error::InvalidParameter(
            "noise sample rate does not match clips".into(),
        ));
    }
    let n = (duration * f64::from(rate)).round() as usize;
    for c in &clips {
        if c.waveform.len() >= n {
            return Err(Error::InvalidParameter(format!(
                "clip {} is not shorter than the stream",
                c.source_id
            )));
        }
    }

    // Tile the noise to stream length from a random offset. The SNR is set
    // against the unmodulated noise power; the modulator then scales the
    // instantaneous power down from that level.
    let mut bg = Vec::with_capacity(n);
    if noise.is_empty() {
        return Err(Error::EmptyAudio("stream noise".into()));
    }
    let mut idx = rng.random_range(0..noise.len());
    for _ in 0..n {
        bg.push(noise.samples[idx]);
        idx = (idx + 1) % noise.len();
    }
    let bg = Waveform::new(bg, rate)?;
    let p_noise_raw = bg.power();
    let params = ModulatorParams::sample(&mut rng);
    let bg = modulated_noise(&bg, &params)?;

    // Seeded random non-overlapping placement.
    let mut placements: Vec<(usize, &LabeledClip)> = Vec::new();
    const ATTEMPTS: usize = 1000;
    for c in &clips {
        let len = c.waveform.len();
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let start = rng.random_range(0..n - len);
            if placements
                .iter()
                .all(|(s, p)| start + len <= *s || start >= *s + p.waveform.len())
            {
                placements.push((start, c));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::StreamPlacement { attempts: ATTEMPTS });
        }
    }

    let mut out = vec![0.0f64; n];
    let mut clip_power_sum = 0.0;
    let mut clip_samples = 0usize;
    for (start, c) in &placements {
        for (j, v) in c.waveform.samples.iter().enumerate() {
            out[start + j] += v;
        }
        clip_power_sum += c.waveform.samples.iter().map(|v| v * v).sum::<f64>();
        clip_samples += c.waveform.len();
    }
    let mut events: Vec<(usize, usize, String)> = placements
        .iter()
        .map(|(s, c)| (*s, s + c.waveform.len(), c.label.clone()))
        .collect();
    events.sort_by_key(|(s, _, _)| *s);

    let alpha = if clip_samples == 0 {
        1.0
    } else {
        let p_clips = clip_power_sum / clip_samples as f64;
        if p_noise_raw <= 0.0 {
            return Err(Error::ZeroPower("noise"));
        }
        (p_clips / (p_noise_raw * 10f64.powf(snr_db / 10.0))).sqrt()
    };
    for (v, b) in out.iter_mut().zip(&bg.samples) {
        *v += alpha * b;
    }

    let events = events
        .into_iter()
        .map(|(s, e, label)| StreamEvent {
            onset: s as f64 / f64::from(rate),
            offset: e as f64 / f64::from(rate),
            label,
        })
        .collect();
    Ok((Waveform::new(out, rate)?, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn raw_pcm16_scaling() {
        let dir = std::env::temp_dir().join("spikesound_audio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("raw4.pcm");
        let vals: [i16; 4] = [0, 16384, -16384, 32767];
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&path, bytes).unwrap();
        let w = load_audio(&path, AudioFormat::RawPcm16, None).unwrap();
        assert_eq!(w.sample_rate, 16000);
        assert_abs_diff_eq!(w.samples[0], 0.0);
        assert_abs_diff_eq!(w.samples[1], 0.5);
        assert_abs_diff_eq!(w.samples[2], -0.5);
        assert_abs_diff_eq!(w.samples[3], 32767.0 / 32768.0);
    }

    #[test]
    fn empty_file_is_empty_audio() {
        let dir = std::env::temp_dir().join("spikesound_audio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.pcm");
        std::fs::write(&path, b"").unwrap();
        let err = load_audio(&path, AudioFormat::RawPcm16, None).unwrap_err();
        assert!(matches!(err, Error::EmptyAudio(_)), "{err}");
    }

    #[test]
    fn wav_round_trip() {
        let dir = std::env::temp_dir().join("spikesound_audio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.wav");
        let src = Waveform::new(
            (0..500)
                .map(|i| ((i as f64 * 0.13).sin() * 12000.0).round() / 32768.0)
                .collect(),
            16000,
        )
        .unwrap();
        save_wav(&path, &src).unwrap();
        let back = load_audio(&path, AudioFormat::WavPcm16, None).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.samples, src.samples);
    }

    #[test]
    fn mix_alpha_equal_power() {
        let sig = Waveform::new(vec![1.0, -1.0, 1.0, -1.0], 16000).unwrap();
        let noise = Waveform::new(vec![1.0, 1.0, -1.0, -1.0], 16000).unwrap();
        let mut rng = rng::rng_from(1);
        // snr 0 dB, equal powers -> alpha = 1
        let mixed = mix_at_snr(&sig, &noise, 0.0, &mut rng).unwrap();
        assert_abs_diff_eq!(mixed.samples[0], 2.0, epsilon = 1e-12);
        // snr 20 dB -> alpha = 0.1
        let mixed = mix_at_snr(&sig, &noise, 20.0, &mut rng).unwrap();
        assert_abs_diff_eq!(mixed.samples[0], 1.1, epsilon = 1e-12);
    }

    #[test]
    fn mix_achieved_snr_matches_request() {
        let mut rng = rng::rng_from(3);
        let sig = babble_noise(0.2, 16000, 10);
        let noise = babble_noise(0.5, 16000, 11);
        for snr in [-5.0, 0.0, 10.0, 20.0] {
            let mixed = mix_at_snr(&sig, &noise, snr, &mut rng).unwrap();
            // The added noise component is mixed - signal.
            let p_sig = sig.power();
            let p_add = mixed
                .samples
                .iter()
                .zip(&sig.samples)
                .map(|(m, s)| (m - s) * (m - s))
                .sum::<f64>()
                / sig.len() as f64;
            let achieved = 10.0 * (p_sig / p_add).log10();
            assert_abs_diff_eq!(achieved, snr, epsilon = 1e-9);
        }
    }

    #[test]
    fn mix_zero_power_errors() {
        let sig = Waveform::new(vec![0.0; 8], 16000).unwrap();
        let noise = Waveform::new(vec![1.0; 8], 16000).unwrap();
        let mut rng = rng::rng_from(1);
        assert!(matches!(
            mix_at_snr(&sig, &noise, 0.0, &mut rng),
            Err(Error::ZeroPower("signal"))
        ));
        assert!(matches!(
            mix_at_snr(&noise, &sig, 0.0, &mut rng),
            Err(Error::ZeroPower("noise"))
        ));
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = synth_corpus(10, 3, 0.25, 7).unwrap();
        let b = synth_corpus(10, 3, 0.25, 7).unwrap();
        assert_eq!(a.len(), 30);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.waveform.samples, y.waveform.samples);
        }
        let frame = 1.0 / 16000.0;
        for c in &a {
            assert!((c.waveform.duration() - 0.25).abs() <= frame);
        }
    }

    #[test]
    fn modulator_closed_form_and_range() {
        // Single active component: m(t) = (sin(pi t) + 1) / 2 over 2 s.
        let p = ModulatorParams::new([0.5, 1.0, 1.5], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]).unwrap();
        let rate = 1000u32;
        let m = modulator_signal(&p, 2000, rate).unwrap();
        assert_abs_diff_eq!(m[500], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m[1500], 0.0, epsilon = 1e-6);
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn modulator_degenerate_errors() {
        let p = ModulatorParams::new([0.5, 1.0, 1.5], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            modulator_signal(&p, 100, 1000),
            Err(Error::ConstantModulator)
        ));
    }

    #[test]
    fn stream_zero_clips_is_pure_noise() {
        let noise = babble_noise(0.3, 16000, 5);
        let (w, events) = build_stream(&[], &[], &noise, 0.0, 1.0, 9).unwrap();
        assert!(events.is_empty());
        assert_eq!(w.len(), 16000);
    }

    #[test]
    fn stream_events_do_not_overlap() {
        let corpus = synth_corpus(3, 4, 0.2, 2).unwrap();
        let noise = babble_noise(0.5, 16000, 5);
        let (w, events) =
            build_stream(&corpus[0..4], &corpus[4..8], &noise, 0.0, 4.0, 3).unwrap();
        assert_eq!(w.len(), 64000);
        assert_eq!(events.len(), 8);
        for (i, a) in events.iter().enumerate() {
            assert!((a.offset - a.onset - 0.2).abs() < 1e-6);
            for b in events.iter().skip(i + 1) {
                assert!(a.offset <= b.onset || b.offset <= a.onset);
            }
        }
    }
}
