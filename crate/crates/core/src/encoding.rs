//! Sparse key-point spike encoding.
//!
//! A waveform becomes a spectrogram (Hamming-windowed STFT power), is
//! log-scaled and min-max normalized, and its local maxima along time or
//! frequency become key-points. Two masks (absolute value and relative
//! background) prune the set, and each surviving key-point maps directly to
//! one spike: afferent = frequency bin, spike time = frame center time.

use std::fmt::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::Waveform;
use crate::error::Error;
use crate::Result;

#[derive(Clone, Debug)]
pub struct EncodingConfig {
    pub window_samples: usize,
    /// Sliding step between frames, seconds.
    pub hop: f64,
    pub epsilon: f64,
    pub d_t: usize,
    pub d_f: usize,
    pub beta_a: f64,
    pub beta_r: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            window_samples: 256,
            hop: 0.010,
            epsilon: 1e-5,
            d_t: 4,
            d_f: 4,
            beta_a: 0.15,
            beta_r: 0.85,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_samples == 0 || self.hop <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::InvalidParameter(
                "window, hop and epsilon must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta_a) {
            return Err(Error::InvalidParameter("beta_a must be in [0, 1]".into()));
        }
        if !(self.beta_r > 0.0 && self.beta_r <= 1.0) {
            return Err(Error::InvalidParameter("beta_r must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Time-frequency power matrix, frame-major.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    values: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    /// Center time of each frame, seconds.
    pub frame_times: Vec<f64>,
}

impl Spectrogram {
    pub fn new(values: Vec<f64>, n_frames: usize, n_bins: usize, frame_times: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_frames * n_bins);
        assert_eq!(frame_times.len(), n_frames);
        Spectrogram {
            values,
            n_frames,
            n_bins,
            frame_times,
        }
    }

    #[inline]
    pub fn at(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.n_bins + f]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Short-Time Fourier Transform power spectrogram: Hamming window, one-sided
/// spectrum of `window_samples/2 + 1` bins, trailing partial frame dropped.
pub fn stft(w: &Waveform, cfg: &EncodingConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let win = cfg.window_samples;
    if w.len() < win {
        return Err(Error::ClipTooShort {
            samples: w.len(),
            window: win,
        });
    }
    let rate = f64::from(w.sample_rate);
    let hop = ((cfg.hop * rate).round() as usize).max(1);
    let n_frames = (w.len() - win) / hop + 1;
    let n_bins = win / 2 + 1;

    let hamming: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (std::f64::consts::TAU * n as f64 / (win - 1) as f64).cos())
        .collect();
    // Normalize by the coherent window gain so a unit-amplitude sine peaks
    // near 0.25 regardless of the window length; epsilon then acts as a
    // fixed dynamic-range floor in the log step.
    let gain = hamming.iter().sum::<f64>();
    let scale = 1.0 / (gain * gain);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(win);
    let mut buf = vec![Complex::new(0.0, 0.0); win];

    let mut values = Vec::with_capacity(n_frames * n_bins);
    let mut frame_times = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let start = frame * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(w.samples[start + i] * hamming[i], 0.0);
        }
        fft.process(&mut buf);
        for c in buf.iter().take(n_bins) {
            values.push(c.norm_sqr() * scale);
        }
        frame_times.push((start as f64 + win as f64 / 2.0) / rate);
    }
    Ok(Spectrogram::new(values, n_frames, n_bins, frame_times))
}

/// Log compression `log(v + eps) - log(eps)` followed by min-max rescaling
/// of the whole matrix to [0, 1]. A constant matrix maps to all zeros.
pub fn log_normalize(s: &Spectrogram, epsilon: f64) -> Spectrogram {
    let mut values: Vec<f64> = s
        .values
        .iter()
        .map(|&v| (v + epsilon).ln() - epsilon.ln())
        .collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let span = hi - lo;
        for v in &mut values {
            *v = (*v - lo) / span;
        }
    } else {
        log::warn!("constant spectrogram: log-normalization emits all zeros");
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Spectrogram::new(values, s.n_frames, s.n_bins, s.frame_times.clone())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyPoint {
    pub t: usize,
    pub f: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default)]
pub struct KeyPointSet {
    pub points: Vec<KeyPoint>,
}

/// A cell is a key-point when it attains the maximum of its time
/// neighborhood `t-D_t..=t+D_t` or of its frequency neighborhood
/// `f-D_f..=f+D_f` (clamped at borders; ties count, so plateaus yield
/// multiple key-points).
pub fn extract_keypoints(s: &Spectrogram, d_t: usize, d_f: usize) -> KeyPointSet {
    let mut points = Vec::new();
    for t in 0..s.n_frames {
        let t_lo = t.saturating_sub(d_t);
        let t_hi = (t + d_t).min(s.n_frames - 1);
        for f in 0..s.n_bins {
            let v = s.at(t, f);
            let time_max = (t_lo..=t_hi).all(|tt| s.at(tt, f) <= v);
            let is_kp = time_max || {
                let f_lo = f.saturating_sub(d_f);
                let f_hi = (f + d_f).min(s.n_bins - 1);
                (f_lo..=f_hi).all(|ff| s.at(t, ff) <= v)
            };
            if is_kp {
                points.push(KeyPoint { t, f, value: v });
            }
        }
    }
    KeyPointSet { points }
}

/// Apply the absolute-value and relative-background masks. A key-point is
/// dropped when `value < beta_a` or when `value * beta_r` falls below the
/// mean of the surrounding `(2 d_t + 1) x (2 d_f + 1)` rectangle (clamped at
/// borders, center included).
pub fn mask_keypoints(
    k: &KeyPointSet,
    s: &Spectrogram,
    beta_a: f64,
    beta_r: f64,
    d_t: usize,
    d_f: usize,
) -> KeyPointSet {
    let points = k
        .points
        .iter()
        .filter(|p| {
            if p.value < beta_a {
                return false;
            }
            let t_lo = p.t.saturating_sub(d_t);
            let t_hi = (p.t + d_t).min(s.n_frames - 1);
            let f_lo = p.f.saturating_sub(d_f);
            let f_hi = (p.f + d_f).min(s.n_bins - 1);
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in t_lo..=t_hi {
                for f in f_lo..=f_hi {
                    sum += s.at(t, f);
                    count += 1;
                }
            }
            p.value * beta_r >= sum / count as f64
        })
        .copied()
        .collect();
    KeyPointSet { points }
}

/// Spatiotemporal spike pattern: per-afferent sorted spike times in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikePattern {
    pub n_afferents: usize,
    pub spikes: Vec<Vec<f64>>,
    pub duration: f64,
}

impl SpikePattern {
    pub fn empty(n_afferents: usize, duration: f64) -> Self {
        SpikePattern {
            n_afferents,
            spikes: vec![Vec::new(); n_afferents],
            duration,
        }
    }

    /// Build from (afferent, time) events; sorts and deduplicates.
    pub fn from_events(
        n_afferents: usize,
        events: impl IntoIterator<Item = (usize, f64)>,
        duration: f64,
    ) -> Self {
        let mut spikes = vec![Vec::new(); n_afferents];
        for (aff, t) in events {
            spikes[aff].push(t);
        }
        for s in &mut spikes {
            s.sort_by(f64::total_cmp);
            s.dedup();
        }
        SpikePattern {
            n_afferents,
            spikes,
            duration,
        }
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// All spikes as (time, afferent), sorted by time then afferent.
    pub fn events(&self) -> Vec<(f64, usize)> {
        let mut ev: Vec<(f64, usize)> = self
            .spikes
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, i)))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ev
    }

    /// Keep only spikes up to `ratio * duration` (early-decision evaluation).
    pub fn truncated(&self, ratio: f64) -> SpikePattern {
        let cut = ratio * self.duration;
        let spikes = self
            .spikes
            .iter()
            .map(|ts| ts.iter().copied().filter(|&t| t <= cut).collect())
            .collect();
        SpikePattern {
            n_afferents: self.n_afferents,
            spikes,
            duration: self.duration,
        }
    }

    pub fn to_spkpat_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "SPKPAT v1 {} {}",
            self.n_afferents,
            fmt9(self.duration)
        );
        for (t, aff) in self.events() {
            let _ = writeln!(out, "{} {}", aff, fmt9(t));
        }
        out
    }

    pub fn from_spkpat_string(text: &str) -> Result<SpikePattern> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Truncated("empty spike pattern file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "SPKPAT" || fields[1] != "v1" {
            return Err(Error::BadPatternMagic(header.to_string()));
        }
        let n_afferents: usize = fields[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad afferent count {:?}", fields[2])))?;
        let duration: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad duration {:?}", fields[3])))?;
        let mut events = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let aff: usize = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad spike line {line:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad afferent in {line:?}")))?;
            let t: f64 = it
                .next()
                .ok_or_else(|| Error::Parse(format!("bad spike line {line:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad time in {line:?}")))?;
            if aff >= n_afferents {
                return Err(Error::Parse(format!(
                    "afferent {aff} out of range (n_afferents = {n_afferents})"
                )));
            }
            events.push((aff, t));
        }
        Ok(SpikePattern::from_events(n_afferents, events, duration))
    }

    pub fn write_spkpat(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_spkpat_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_spkpat(path: &Path) -> Result<SpikePattern> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_spkpat_string(&text)
    }
}

/// 9 significant digits, round-trip stable through f64 parsing.
pub(crate) fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Map key-points to spikes: afferent index = frequency bin, spike time =
/// frame time; duplicates collapse.
pub fn to_spike_pattern(k: &KeyPointSet, s: &Spectrogram) -> SpikePattern {
    let duration = s.frame_times.last().copied().unwrap_or(0.0);
    SpikePattern::from_events(
        s.n_bins,
        k.points.iter().map(|p| (p.f, s.frame_times[p.t])),
        duration,
    )
}

/// Full frontend: STFT, log-normalize, key-points, masks, spike pattern.
pub fn encode_clip(w: &Waveform, cfg: &EncodingConfig) -> Result<SpikePattern> {
    let spec = log_normalize(&stft(w, cfg)?, cfg.epsilon);
    let kp = extract_keypoints(&spec, cfg.d_t, cfg.d_f);
    let kp = mask_keypoints(&kp, &spec, cfg.beta_a, cfg.beta_r, cfg.d_t, cfg.d_f);
    Ok(to_spike_pattern(&kp, &spec))
}

/// Encode a long waveform in sliding blocks (50% overlap) so the per-block
/// normalization window matches the training regime, then merge the block
/// patterns on the stream timeline.
pub fn encode_stream(
    w: &Waveform,
    cfg: &EncodingConfig,
    block_duration: f64,
) -> Result<SpikePattern> {
    let rate = f64::from(w.sample_rate);
    let block = ((block_duration * rate).round() as usize).max(cfg.window_samples);
    if w.len() <= block {
        return encode_clip(w, cfg);
    }
    let hop = (block / 2).max(1);
    let n_bins = cfg.window_samples / 2 + 1;
    let mut events: Vec<(usize, f64)> = Vec::new();
    let mut start = 0usize;
    while start < w.len() {
        let end = (start + block).min(w.len());
        if end - start >= cfg.window_samples {
            let chunk = Waveform {
                samples: w.samples[start..end].to_vec(),
                sample_rate: w.sample_rate,
            };
            let pat = encode_clip(&chunk, cfg)?;
            let offset = start as f64 / rate;
            for (aff, ts) in pat.spikes.iter().enumerate() {
                for &t in ts {
                    events.push((aff, t + offset));
                }
            }
        }
        if end == w.len() {
            break;
        }
        start += hop;
    }
    Ok(SpikePattern::from_events(n_bins, events, w.duration()))
}
