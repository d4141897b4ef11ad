//! Readout schemes, evaluation harnesses, and the streaming burst detector.
//!
//! `abs` predicts the unique class whose neuron meets a critical response
//! (fire-or-not for the tempotron, a critical spike count otherwise) and
//! rejects on zero or multiple qualifiers. `wta` takes the maximal response:
//! maximal potential for the tempotron, minimal spike-train distance to the
//! desired train for PSD, maximal output spike count for TDP.

use std::collections::VecDeque;

use crate::audio::{babble_noise, mix_at_snr, LabeledClip, Waveform};
use crate::encoding::{encode_clip, encode_stream, EncodingConfig, SpikePattern};
use crate::error::Error;
use crate::learning::{
    spike_distance, train, FixedSource, LearningConfig, Model, Rule, TrainingSource,
};
use crate::neuron::{simulate, simulate_reset_free};
use crate::par::par_map;
use crate::rng::{self, ChaCha8Rng};
use crate::Result;

/// Per-class response to one pattern.
#[derive(Clone, Debug)]
pub struct Response {
    pub n_out: usize,
    pub v_max: f64,
    pub output_spikes: Vec<f64>,
}

/// Simulate every class neuron against the pattern. Tempotron neurons use
/// the reset-free potential (binary response plus maximal potential); the
/// multi-spike rules use the full dynamics.
pub fn respond(model: &Model, pattern: &SpikePattern) -> Result<Vec<Response>> {
    let mut out = Vec::with_capacity(model.classes.len());
    for w in &model.weights {
        let r = match model.rule {
            Rule::Tempotron => {
                let (v_max, _) = simulate_reset_free(pattern, w, &model.params)?;
                Response {
                    n_out: usize::from(v_max >= model.params.threshold),
                    v_max,
                    output_spikes: Vec::new(),
                }
            }
            _ => {
                let sim = simulate(pattern, w, &model.params, false)?;
                Response {
                    n_out: sim.n_out(),
                    v_max: sim.v_max,
                    output_spikes: sim.output_spikes,
                }
            }
        };
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Class(usize),
    Reject,
}

/// Absolute readout: the unique neuron whose response reaches the critical
/// one wins; zero or multiple qualifiers reject.
pub fn classify_abs(responses: &[Response], rule: Rule, critical: u32) -> Decision {
    let bar = match rule {
        Rule::Tempotron => 1,
        _ => critical.max(1) as usize,
    };
    let mut winner = None;
    for (i, r) in responses.iter().enumerate() {
        if r.n_out >= bar {
            if winner.is_some() {
                return Decision::Reject;
            }
            winner = Some(i);
        }
    }
    winner.map_or(Decision::Reject, Decision::Class)
}

#[derive(Clone, Copy, Debug)]
pub struct WtaOutcome {
    pub class: usize,
    /// The top response was tied and broken by policy (logged, never
    /// silently hidden).
    pub tie: bool,
}

/// Winner-take-all readout. TDP: maximal spike count, ties broken by higher
/// maximal potential, then by lowest class index. Tempotron: maximal
/// potential. PSD: minimal spike-train distance to the desired train.
pub fn classify_wta(responses: &[Response], rule: Rule, desired_times: &[f64], tau: f64) -> WtaOutcome {
    debug_assert!(!responses.is_empty());
    match rule {
        Rule::Tempotron => {
            let mut best = 0usize;
            let mut tie = false;
            for (i, r) in responses.iter().enumerate().skip(1) {
                if r.v_max > responses[best].v_max {
                    best = i;
                    tie = false;
                } else if r.v_max == responses[best].v_max {
                    tie = true;
                }
            }
            WtaOutcome { class: best, tie }
        }
        Rule::Psd => {
            let dist: Vec<f64> = responses
                .iter()
                .map(|r| spike_distance(&r.output_spikes, desired_times, tau))
                .collect();
            let mut best = 0usize;
            let mut tie = false;
            for (i, &d) in dist.iter().enumerate().skip(1) {
                if d < dist[best] {
                    best = i;
                    tie = false;
                } else if d == dist[best] {
                    tie = true;
                }
            }
            WtaOutcome { class: best, tie }
        }
        Rule::Tdp => {
            let mut best = 0usize;
            let mut tie = false;
            for (i, r) in responses.iter().enumerate().skip(1) {
                let b = &responses[best];
                if r.n_out > b.n_out || (r.n_out == b.n_out && r.v_max > b.v_max) {
                    best = i;
                    tie = false;
                } else if r.n_out == b.n_out && r.v_max == b.v_max {
                    tie = true;
                }
            }
            WtaOutcome { class: best, tie }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Readout {
    Abs { critical: u32 },
    Wta,
}

impl Readout {
    pub fn decide(&self, responses: &[Response], model: &Model) -> Decision {
        match self {
            Readout::Abs { critical } => classify_abs(responses, model.rule, *critical),
            Readout::Wta => Decision::Class(
                classify_wta(responses, model.rule, &model.desired_times, model.params.tau_m)
                    .class,
            ),
        }
    }

    /// Conventional critical responses: fire-or-not, 2 spikes for PSD,
    /// 10 spikes for TDP.
    pub fn default_abs(rule: Rule) -> Readout {
        Readout::Abs {
            critical: match rule {
                Rule::Tempotron => 1,
                Rule::Psd => 2,
                Rule::Tdp => 10,
            },
        }
    }
}

/// An evaluation condition: clean audio or noise mixed at a given SNR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Condition {
    Clean,
    Snr(f64),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Clean => "clean".into(),
            Condition::Snr(db) => format!("{db}dB"),
        }
    }

    pub fn parse(s: &str) -> Result<Condition> {
        if s.eq_ignore_ascii_case("clean") {
            return Ok(Condition::Clean);
        }
        let t = s.trim_end_matches("dB").trim_end_matches("db");
        t.parse()
            .map(Condition::Snr)
            .map_err(|_| Error::Parse(format!("bad condition {s:?}")))
    }

    /// The mismatched-condition evaluation set.
    pub fn standard_set() -> Vec<Condition> {
        vec![
            Condition::Clean,
            Condition::Snr(20.0),
            Condition::Snr(10.0),
            Condition::Snr(0.0),
            Condition::Snr(-5.0),
        ]
    }
}

/// Where mixing noise comes from: the synthetic babble generator or a
/// caller-supplied waveform (tiled when shorter than the clip).
#[derive(Clone, Debug)]
pub enum NoiseSource {
    Babble,
    Wave(Waveform),
}

impl NoiseSource {
    fn sample(&self, min_len: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Waveform {
        match self {
            NoiseSource::Babble => {
                use rand::Rng as _;
                let seed: u64 = rng.random();
                let duration = (min_len + usize::min(min_len, sample_rate as usize)) as f64
                    / f64::from(sample_rate);
                babble_noise(duration, sample_rate, seed)
            }
            NoiseSource::Wave(w) => {
                use rand::Rng as _;
                if w.len() >= min_len + 1 {
                    return w.clone();
                }
                let mut samples = Vec::with_capacity(min_len + 1);
                let mut idx = rng.random_range(0..w.len().max(1));
                while samples.len() <= min_len {
                    samples.push(w.samples[idx]);
                    idx = (idx + 1) % w.len();
                }
                Waveform {
                    samples,
                    sample_rate: w.sample_rate,
                }
            }
        }
    }
}

/// Mix a clip per the condition, deterministically from the given rng.
pub fn apply_condition(
    clip: &Waveform,
    condition: Condition,
    noise: &NoiseSource,
    rng: &mut ChaCha8Rng,
) -> Result<Waveform> {
    match condition {
        Condition::Clean => Ok(clip.clone()),
        Condition::Snr(db) => {
            let n = noise.sample(clip.len(), clip.sample_rate, rng);
            mix_at_snr(clip, &n, db, rng)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub conditions: Vec<Condition>,
    pub runs: usize,
    pub readout: Readout,
    pub seed: u64,
    pub threads: usize,
    /// Present only this leading fraction of each pattern (early decision).
    pub presentation_ratio: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            conditions: Condition::standard_set(),
            runs: 10,
            readout: Readout::Wta,
            seed: 0,
            threads: 1,
            presentation_ratio: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub condition_labels: Vec<String>,
    /// accuracy\[condition\]\[run\] in percent
    pub accuracy: Vec<Vec<f64>>,
    /// confusion\[condition\]\[true\]\[pred\]; the extra final column counts
    /// rejects
    pub confusion: Vec<Vec<Vec<u32>>>,
}

impl EvalReport {
    pub fn mean_accuracy(&self, condition_idx: usize) -> f64 {
        let runs = &self.accuracy[condition_idx];
        runs.iter().sum::<f64>() / runs.len() as f64
    }

    /// Arithmetic mean over all conditions of the per-condition means.
    pub fn avg(&self) -> f64 {
        (0..self.condition_labels.len())
            .map(|c| self.mean_accuracy(c))
            .sum::<f64>()
            / self.condition_labels.len() as f64
    }

    /// `condition,run,accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,run,accuracy\n");
        for (c, label) in self.condition_labels.iter().enumerate() {
            for (r, acc) in self.accuracy[c].iter().enumerate() {
                out.push_str(&format!("{label},{r},{acc:.4}\n"));
            }
        }
        out
    }

    pub fn confusion_csv(&self, condition_idx: usize) -> String {
        let mut out = String::from("true\\pred");
        for c in &self.classes {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(",reject\n");
        for (i, row) in self.confusion[condition_idx].iter().enumerate() {
            out.push_str(&self.classes[i]);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate a model over clips and conditions: per run and condition, each
/// clip is mixed (seeded), encoded, simulated against every class neuron,
/// and classified with the configured readout. Rejects count as errors.
pub fn evaluate(
    model: &Model,
    clips: &[LabeledClip],
    enc: &EncodingConfig,
    noise: &NoiseSource,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if clips.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_classes = model.classes.len();
    let labels: Vec<usize> = clips
        .iter()
        .map(|c| {
            model
                .class_index(&c.label)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown label {}", c.label)))
        })
        .collect::<Result<_>>()?;

    let mut accuracy = vec![Vec::with_capacity(cfg.runs); cfg.conditions.len()];
    let mut confusion = vec![vec![vec![0u32; n_classes + 1]; n_classes]; cfg.conditions.len()];
    for run in 0..cfg.runs {
        for (ci, &cond) in cfg.conditions.iter().enumerate() {
            let decisions = par_map(clips, cfg.threads, |idx, clip| -> Result<Decision> {
                let item = (run * cfg.conditions.len() + ci) as u64 * 1_000_000 + idx as u64;
                let mut rng = rng::rng_for(cfg.seed, "mix", item);
                let wf = apply_condition(&clip.waveform, cond, noise, &mut rng)?;
                let mut pattern = encode_clip(&wf, enc)?;
                if let Some(ratio) = cfg.presentation_ratio {
                    pattern = pattern.truncated(ratio);
                }
                let responses = respond(model, &pattern)?;
                Ok(cfg.readout.decide(&responses, model))
            });
            let mut correct = 0usize;
            for (idx, d) in decisions.into_iter().enumerate() {
                let truth = labels[idx];
                match d? {
                    Decision::Class(pred) => {
                        confusion[ci][truth][pred] += 1;
                        if pred == truth {
                            correct += 1;
                        }
                    }
                    Decision::Reject => confusion[ci][truth][n_classes] += 1,
                }
            }
            accuracy[ci].push(100.0 * correct as f64 / clips.len() as f64);
        }
    }
    Ok(EvalReport {
        classes: model.classes.clone(),
        condition_labels: cfg.conditions.iter().map(Condition::label).collect(),
        accuracy,
        confusion,
    })
}

/// Early-decision curve: evaluate with only the leading `ratio` of each
/// pattern present. Returns (ratio, mean accuracy in percent).
pub fn early_decision_eval(
    model: &Model,
    clips: &[LabeledClip],
    enc: &EncodingConfig,
    noise: &NoiseSource,
    ratios: &[f64],
    condition: Condition,
    cfg: &EvalConfig,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "presentation ratio {ratio} outside (0, 1]"
            )));
        }
        let cfg = EvalConfig {
            conditions: vec![condition],
            presentation_ratio: Some(ratio),
            ..cfg.clone()
        };
        let report = evaluate(model, clips, enc, noise, &cfg)?;
        out.push((ratio, report.mean_accuracy(0)));
    }
    Ok(out)
}

/// Encode a labeled corpus, in parallel, preserving order.
pub fn encode_corpus(
    clips: &[LabeledClip],
    enc: &EncodingConfig,
    threads: usize,
) -> Result<Vec<(String, SpikePattern)>> {
    par_map(clips, threads, |_, clip| {
        encode_clip(&clip.waveform, enc).map(|p| (clip.label.clone(), p))
    })
    .into_iter()
    .collect()
}

/// Training source that re-encodes each clip per visit under a condition
/// sampled from the configured set (multi-condition training).
pub struct AudioSource<'a> {
    pub clips: &'a [LabeledClip],
    pub enc: &'a EncodingConfig,
    pub conditions: Vec<Condition>,
    pub noise: &'a NoiseSource,
}

impl TrainingSource for AudioSource<'_> {
    fn len(&self) -> usize {
        self.clips.len()
    }
    fn label(&self, idx: usize) -> &str {
        &self.clips[idx].label
    }
    fn n_afferents(&self) -> usize {
        self.enc.window_samples / 2 + 1
    }
    fn pattern(&self, idx: usize, visit_rng: &mut ChaCha8Rng) -> SpikePattern {
        use rand::Rng as _;
        let cond = self.conditions[visit_rng.random_range(0..self.conditions.len())];
        let wf = apply_condition(&self.clips[idx].waveform, cond, self.noise, visit_rng)
            .expect("condition mixing failed");
        encode_clip(&wf, self.enc).expect("encoding failed")
    }
}

/// Train a model on audio clips. With `train_conditions = [Clean]` the
/// corpus is encoded once up front; otherwise each visit samples a
/// condition and re-encodes (multi-condition training).
pub fn train_on_audio(
    clips: &[LabeledClip],
    enc: &EncodingConfig,
    params: &crate::neuron::NeuronParams,
    learn: &LearningConfig,
    train_conditions: &[Condition],
    noise: &NoiseSource,
    threads: usize,
) -> Result<Model> {
    if train_conditions == [Condition::Clean] {
        let items = encode_corpus(clips, enc, threads)?;
        let source = FixedSource::new(items)?;
        train(&source, params, learn, threads)
    } else {
        let source = AudioSource {
            clips,
            enc,
            conditions: train_conditions.to_vec(),
            noise,
        };
        train(&source, params, learn, threads)
    }
}

/// Target-spike-number sweep: full retrain per `n_d` with shared seeds.
pub fn nd_sweep(
    train_clips: &[LabeledClip],
    test_clips: &[LabeledClip],
    enc: &EncodingConfig,
    params: &crate::neuron::NeuronParams,
    base: &LearningConfig,
    nd_list: &[u32],
    noise: &NoiseSource,
    eval_cfg: &EvalConfig,
) -> Result<Vec<(u32, EvalReport)>> {
    let mut out = Vec::with_capacity(nd_list.len());
    for &nd in nd_list {
        if nd < 1 {
            return Err(Error::InvalidParameter("n_d must be >= 1".into()));
        }
        let learn = LearningConfig {
            desired_range: (nd, if nd == 1 { Some(1) } else { None }),
            ..base.clone()
        };
        let model = train_on_audio(
            train_clips,
            enc,
            params,
            &learn,
            &[Condition::Clean],
            noise,
            eval_cfg.threads,
        )?;
        let report = evaluate(&model, test_clips, enc, noise, eval_cfg)?;
        out.push((nd, report));
    }
    Ok(out)
}

/// Training-set-size sweep: seeded per-class subsampling (at least one clip
/// per class), retrain, evaluate.
pub fn train_ratio_eval(
    train_clips: &[LabeledClip],
    test_clips: &[LabeledClip],
    enc: &EncodingConfig,
    params: &crate::neuron::NeuronParams,
    base: &LearningConfig,
    ratios: &[f64],
    noise: &NoiseSource,
    eval_cfg: &EvalConfig,
) -> Result<Vec<(f64, EvalReport)>> {
    let mut classes: Vec<&str> = Vec::new();
    for c in train_clips {
        if !classes.contains(&c.label.as_str()) {
            classes.push(&c.label);
        }
    }
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "training ratio {ratio} outside (0, 1]"
            )));
        }
        let mut subset: Vec<LabeledClip> = Vec::new();
        for class in &classes {
            let of_class: Vec<&LabeledClip> = train_clips
                .iter()
                .filter(|c| c.label == *class)
                .collect();
            let keep = ((of_class.len() as f64 * ratio).round() as usize)
                .clamp(1, of_class.len());
            let mut order: Vec<usize> = (0..of_class.len()).collect();
            let mut rng = rng::rng_for(base.seed, "subsample", keep as u64);
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            for &i in order.iter().take(keep) {
                subset.push(of_class[i].clone());
            }
        }
        let model = train_on_audio(
            &subset,
            enc,
            params,
            base,
            &[Condition::Clean],
            noise,
            eval_cfg.threads,
        )?;
        let report = evaluate(&model, test_clips, enc, noise, eval_cfg)?;
        out.push((ratio, report));
    }
    Ok(out)
}

/// Burst-detector defaults, desk-tuned on synthetic streams.
pub const DEFAULT_BURST_K: usize = 5;
pub const DEFAULT_BURST_W_MS: f64 = 250.0;

/// Extend a training corpus with noise-only clips under a reserved label,
/// hardening stream detectors against firing on the background itself.
pub const NOISE_LABEL: &str = "_noise";

pub fn with_noise_negatives(
    clips: &[LabeledClip],
    per_existing_class: usize,
    seed: u64,
) -> Vec<LabeledClip> {
    let mut out = clips.to_vec();
    let duration = clips
        .iter()
        .map(|c| c.waveform.duration())
        .fold(0.5f64, f64::max);
    let rate = clips
        .first()
        .map(|c| c.waveform.sample_rate)
        .unwrap_or(crate::audio::DEFAULT_SAMPLE_RATE);
    let mut classes: Vec<&str> = Vec::new();
    for c in clips {
        if !classes.contains(&c.label.as_str()) {
            classes.push(&c.label);
        }
    }
    let n = per_existing_class * classes.len().max(1);
    for i in 0..n {
        let wf = babble_noise(duration, rate, rng::sub_seed(seed, "noise-neg", i as u64));
        out.push(LabeledClip {
            waveform: wf,
            label: NOISE_LABEL.into(),
            source_id: format!("{NOISE_LABEL}-{i:03}"),
        });
    }
    out
}

/// A detected sound event on a stream.
#[derive(Clone, Debug)]
pub struct Detection {
    pub onset: f64,
    pub offset: f64,
    pub label: String,
    pub spike_count_in_window: usize,
}

/// Burst detector over a continuous stream: the stream is encoded in
/// sliding blocks of the training-clip duration (50% overlap), the target
/// neuron is simulated over the merged pattern, and a detection opens when
/// at least `burst_k` output spikes fall inside a `burst_w` window, closing
/// when the windowed count drops below half of `burst_k`. Overlapping
/// detections merge.
pub fn stream_detect(
    model: &Model,
    stream: &Waveform,
    enc: &EncodingConfig,
    block_duration: f64,
    burst_k: usize,
    burst_w: f64,
    target: &str,
) -> Result<Vec<Detection>> {
    if burst_k < 1 {
        return Err(Error::InvalidParameter("burst_k must be >= 1".into()));
    }
    let target_idx = model
        .class_index(target)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown target class {target:?}")))?;
    let pattern = encode_stream(stream, enc, block_duration)?;
    let sim = simulate(&pattern, &model.weights[target_idx], &model.params, false)?;
    Ok(burst_scan(&sim.output_spikes, burst_k, burst_w)
        .into_iter()
        .map(|(onset, offset, peak)| Detection {
            onset,
            offset,
            label: target.to_string(),
            spike_count_in_window: peak,
        })
        .collect())
}

/// Sliding-window burst scan over sorted spike times: open at `burst_k`
/// spikes within `burst_w` ms, close when the windowed count drops below
/// `burst_k / 2`, merge overlapping intervals. Returns (onset, offset,
/// peak windowed count).
pub fn burst_scan(spikes: &[f64], burst_k: usize, burst_w: f64) -> Vec<(f64, f64, usize)> {
    let w_s = burst_w * 1e-3;
    let close_bar = burst_k as f64 / 2.0;
    let mut bursts: Vec<(f64, f64, usize)> = Vec::new();
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut open: Option<(f64, f64, usize)> = None; // onset, last spike, peak count
    for &s in spikes {
        while window.front().is_some_and(|&f| f <= s - w_s) {
            window.pop_front();
        }
        // Between the previous spike and this one the windowed count only
        // decays; its minimum is the residue left at this spike.
        if let Some(burst) = open {
            if (window.len() as f64) < close_bar {
                bursts.push(burst);
                open = None;
            }
        }
        window.push_back(s);
        match &mut open {
            None => {
                if window.len() >= burst_k {
                    open = Some((*window.front().unwrap(), s, window.len()));
                }
            }
            Some((_, last, peak)) => {
                *last = s;
                *peak = (*peak).max(window.len());
            }
        }
    }
    if let Some(burst) = open {
        bursts.push(burst);
    }
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for b in bursts {
        match merged.last_mut() {
            Some(prev) if b.0 <= prev.1 => {
                prev.1 = prev.1.max(b.1);
                prev.2 = prev.2.max(b.2);
            }
            _ => merged.push(b),
        }
    }
    merged
}

/// Compose a seeded evaluation stream (targets plus distractors over
/// modulated babble at `snr_db`) and run the burst detector on it.
#[allow(clippy::too_many_arguments)]
pub fn build_stream_detections(
    model: &Model,
    clips: &[LabeledClip],
    target: &str,
    enc: &EncodingConfig,
    snr_db: f64,
    duration: f64,
    seed: u64,
    burst_k: usize,
    burst_w: f64,
) -> Result<(Waveform, Vec<crate::audio::StreamEvent>, Vec<Detection>)> {
    let targets: Vec<LabeledClip> = clips
        .iter()
        .filter(|c| c.label == target)
        .take(4)
        .cloned()
        .collect();
    if targets.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no clips labeled {target:?}"
        )));
    }
    let distractors: Vec<LabeledClip> = clips
        .iter()
        .filter(|c| c.label != target)
        .take(6)
        .cloned()
        .collect();
    let rate = targets[0].waveform.sample_rate;
    let noise = babble_noise(10.0, rate, rng::sub_seed(seed, "stream-noise", 0));
    let (stream, events) = crate::audio::build_stream(
        &targets,
        &distractors,
        &noise,
        snr_db,
        duration,
        rng::sub_seed(seed, "stream-build", 0),
    )?;
    let block = targets[0].waveform.duration();
    let detections = stream_detect(model, &stream, enc, block, burst_k, burst_w, target)?;
    Ok((stream, events, detections))
}

/// Load a labeled corpus from `<dir>/<class>/<file>.{wav,raw}`, taking the
/// first `per_class` files of each class directory in name order.
pub fn load_corpus_dir(dir: &std::path::Path, per_class: usize) -> Result<Vec<LabeledClip>> {
    use crate::audio::{load_audio, AudioFormat};
    let mut classes: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::new();
    for class_dir in &classes {
        let label = class_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(class_dir)
            .map_err(|e| Error::io(class_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|x| x == "wav" || x == "raw" || x == "pcm")
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        for path in files.iter().take(per_class) {
            let format = if path.extension().is_some_and(|x| x == "wav") {
                AudioFormat::WavPcm16
            } else {
                AudioFormat::RawPcm16
            };
            out.push(LabeledClip {
                waveform: load_audio(path, format, None)?,
                label: label.clone(),
                source_id: path.display().to_string(),
            });
        }
    }
    Ok(out)
}

pub fn detections_csv(detections: &[Detection]) -> String {
    let mut out = String::from("onset_s,offset_s,label,score\n");
    for d in detections {
        out.push_str(&format!(
            "{:.6},{:.6},{},{}\n",
            d.onset, d.offset, d.label, d.spike_count_in_window
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(n_out: usize, v_max: f64) -> Response {
        Response {
            n_out,
            v_max,
            output_spikes: Vec::new(),
        }
    }

    #[test]
    fn abs_readout_cases() {
        let r = vec![resp(12, 1.0), resp(0, 0.2), resp(0, 0.1)];
        assert_eq!(classify_abs(&r, Rule::Tdp, 10), Decision::Class(0));
        let r = vec![resp(12, 1.0), resp(11, 0.9), resp(0, 0.1)];
        assert_eq!(classify_abs(&r, Rule::Tdp, 10), Decision::Reject);
        let r = vec![resp(0, 0.0), resp(0, 0.0), resp(0, 0.0)];
        assert_eq!(classify_abs(&r, Rule::Tdp, 10), Decision::Reject);
        // tempotron: binary fire-or-not
        let r = vec![resp(0, 0.4), resp(1, 1.2), resp(0, 0.9)];
        assert_eq!(classify_abs(&r, Rule::Tempotron, 1), Decision::Class(1));
    }

    #[test]
    fn wta_readout_cases() {
        let r = vec![resp(3, 0.5), resp(5, 0.4), resp(2, 0.9)];
        assert_eq!(classify_wta(&r, Rule::Tdp, &[], 20.0).class, 1);
        // count tie broken by v_max
        let r = vec![resp(5, 0.9), resp(5, 1.4), resp(2, 0.9)];
        let out = classify_wta(&r, Rule::Tdp, &[], 20.0);
        assert_eq!(out.class, 1);
        assert!(!out.tie);
        let r = vec![resp(0, 0.2), resp(0, 0.8), resp(0, 0.5)];
        assert_eq!(classify_wta(&r, Rule::Tempotron, &[], 20.0).class, 1);
        // PSD: closest to the desired train wins
        let desired = [0.1, 0.2];
        let mut a = resp(2, 0.0);
        a.output_spikes = vec![0.1, 0.2];
        let mut b = resp(2, 0.0);
        b.output_spikes = vec![0.4];
        let out = classify_wta(&[b, a], Rule::Psd, &desired, 20.0);
        assert_eq!(out.class, 1);
    }

    #[test]
    fn burst_scan_basic() {
        // Two clear bursts of 5 spikes at 10 ms spacing, 1 s apart.
        let mut spikes = Vec::new();
        for burst in 0..2 {
            for j in 0..5 {
                spikes.push(1.0 + burst as f64 + j as f64 * 0.01);
            }
        }
        let out = burst_scan(&spikes, 5, 200.0);
        assert_eq!(out.len(), 2);
        assert!((out[0].0 - 1.0).abs() < 1e-9);
        assert!((out[0].1 - 1.04).abs() < 1e-9);
        assert_eq!(out[0].2, 5);
        assert!((out[1].0 - 2.0).abs() < 1e-9);

        // Too few spikes in the window: nothing opens.
        assert!(burst_scan(&spikes, 6, 200.0).is_empty());

        // Degenerate parameters: one detection iff any spike.
        let all = burst_scan(&spikes, 1, f64::INFINITY);
        assert_eq!(all.len(), 1);
        assert!((all[0].0 - 1.0).abs() < 1e-9);
        assert!((all[0].1 - 2.04).abs() < 1e-9);
        assert!(burst_scan(&[], 1, f64::INFINITY).is_empty());
    }

    #[test]
    fn burst_scan_intervals_never_overlap() {
        let mut rng = crate::rng::rng_from(8);
        use rand::Rng as _;
        let mut spikes: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 10.0).collect();
        spikes.sort_by(f64::total_cmp);
        let out = burst_scan(&spikes, 4, 150.0);
        for pair in out.windows(2) {
            assert!(pair[0].1 < pair[1].0);
        }
        for (onset, offset, peak) in &out {
            assert!(onset <= offset);
            assert!(*peak >= 4);
        }
    }

    #[test]
    fn detection_csv_format() {
        let d = vec![Detection {
            onset: 1.0,
            offset: 2.0,
            label: "t".into(),
            spike_count_in_window: 5,
        }];
        let csv = detections_csv(&d);
        assert!(csv.starts_with("onset_s,offset_s,label,score\n"));
        assert!(csv.contains("1.000000,2.000000,t,5"));
    }
}
