//! Supervised spike learning rules and the training loop.
//!
//! Three rules are implemented. The tempotron treats the neuron as a binary
//! unit and moves the reset-free maximal potential across the threshold.
//! PSD trains toward desired output spike times with LTP at missed desired
//! times and LTD at erroneous output times, with a coincidence margin. TDP
//! is the multi-spike rule: it moves critical threshold values of the
//! spike-threshold-surface across the firing threshold until the output
//! spike count falls into a desired range.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::encoding::{fmt9, SpikePattern};
use crate::error::Error;
use crate::neuron::{psp_kernel, simulate, simulate_reset_free, NeuronParams, Weights};
use crate::rng::{self, ChaCha8Rng};
use crate::sts::CriticalSolver;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Tempotron,
    Psd,
    Tdp,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Tempotron => "tempotron",
            Rule::Psd => "psd",
            Rule::Tdp => "tdp",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tempotron" => Ok(Rule::Tempotron),
            "psd" => Ok(Rule::Psd),
            "tdp" => Ok(Rule::Tdp),
            other => Err(Error::Parse(format!("unknown rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearningConfig {
    pub rule: Rule,
    /// Learning rate.
    pub lambda: f64,
    /// Momentum coefficient.
    pub momentum: f64,
    /// PSD coincidence margin, ms.
    pub zeta: f64,
    /// Desired output spike range for target patterns; null patterns are
    /// always held at (0, 0).
    pub desired_range: (u32, Option<u32>),
    /// Desired output spike times for PSD target patterns, seconds.
    pub desired_times: Vec<f64>,
    pub max_epochs: u32,
    pub seed: u64,
    pub init_mean: f64,
    pub init_std: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            rule: Rule::Tdp,
            lambda: 1e-4,
            momentum: 0.9,
            zeta: 10.0,
            desired_range: (20, None),
            desired_times: Vec::new(),
            max_epochs: 100,
            seed: 0,
            init_mean: 0.0,
            init_std: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorType {
    None,
    TargetMiss,
    NullFalseFire,
}

#[derive(Clone, Debug)]
pub struct UpdateResult {
    pub delta_w: Vec<f64>,
    pub applied: bool,
    pub error_type: ErrorType,
}

impl UpdateResult {
    fn none(n: usize, error_type: ErrorType) -> Self {
        UpdateResult {
            delta_w: vec![0.0; n],
            applied: false,
            error_type,
        }
    }
}

/// PSP sum of every afferent at time `t` (seconds): the tempotron update
/// direction evaluated at the potential maximum.
fn kappa_all(pattern: &SpikePattern, t: f64, params: &NeuronParams) -> Vec<f64> {
    pattern
        .spikes
        .iter()
        .map(|ts| {
            ts.iter()
                .map(|&ti| psp_kernel((t - ti) * 1e3, params))
                .sum()
        })
        .collect()
}

/// Tempotron rule: on a target miss, potentiate by the PSP sums at the time
/// of the maximal (reset-free) potential; on a null false fire, depress.
pub fn tempotron_update(
    pattern: &SpikePattern,
    label_is_target: bool,
    w: &Weights,
    params: &NeuronParams,
    lambda: f64,
) -> Result<UpdateResult> {
    let (v_max, t_max) = simulate_reset_free(pattern, w, params)?;
    let fired = v_max >= params.threshold;
    let (sign, error_type) = match (label_is_target, fired) {
        (true, false) => (1.0, ErrorType::TargetMiss),
        (false, true) => (-1.0, ErrorType::NullFalseFire),
        _ => return Ok(UpdateResult::none(pattern.n_afferents, ErrorType::None)),
    };
    let delta_w: Vec<f64> = kappa_all(pattern, t_max, params)
        .into_iter()
        .map(|k| sign * lambda * k)
        .collect();
    let applied = delta_w.iter().any(|d| *d != 0.0);
    Ok(UpdateResult {
        delta_w,
        applied,
        error_type,
    })
}

/// Greedy nearest-time one-to-one matching; only pairs within `zeta_s` are
/// accepted. Returns (unmatched desired, unmatched actual).
fn match_spikes(desired: &[f64], actual: &[f64], zeta_s: f64) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (di, &d) in desired.iter().enumerate() {
        for (ai, &a) in actual.iter().enumerate() {
            let gap = (d - a).abs();
            if gap <= zeta_s {
                pairs.push((gap, di, ai));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut d_used = vec![false; desired.len()];
    let mut a_used = vec![false; actual.len()];
    for (_, di, ai) in pairs {
        if !d_used[di] && !a_used[ai] {
            d_used[di] = true;
            a_used[ai] = true;
        }
    }
    let ud = desired
        .iter()
        .zip(&d_used)
        .filter(|(_, &u)| !u)
        .map(|(&t, _)| t)
        .collect();
    let ua = actual
        .iter()
        .zip(&a_used)
        .filter(|(_, &u)| !u)
        .map(|(&t, _)| t)
        .collect();
    (ud, ua)
}

/// PSD rule: LTP at unmatched desired times, LTD at unmatched actual output
/// times; matches within the `zeta` margin (ms) contribute nothing.
pub fn psd_update(
    pattern: &SpikePattern,
    desired_times: &[f64],
    w: &Weights,
    params: &NeuronParams,
    lambda: f64,
    zeta: f64,
) -> Result<UpdateResult> {
    let sim = simulate(pattern, w, params, false)?;
    let (ltp_times, ltd_times) = match_spikes(desired_times, &sim.output_spikes, zeta * 1e-3);
    if ltp_times.is_empty() && ltd_times.is_empty() {
        return Ok(UpdateResult::none(pattern.n_afferents, ErrorType::None));
    }
    let error_type = if ltp_times.is_empty() {
        ErrorType::NullFalseFire
    } else {
        ErrorType::TargetMiss
    };
    let mut delta_w = vec![0.0; pattern.n_afferents];
    for (i, ts) in pattern.spikes.iter().enumerate() {
        let mut acc = 0.0;
        for &td in &ltp_times {
            acc += ts
                .iter()
                .map(|&ti| psp_kernel((td - ti) * 1e3, params))
                .sum::<f64>();
        }
        for &to in &ltd_times {
            acc -= ts
                .iter()
                .map(|&ti| psp_kernel((to - ti) * 1e3, params))
                .sum::<f64>();
        }
        delta_w[i] = lambda * acc;
    }
    let applied = delta_w.iter().any(|d| *d != 0.0);
    Ok(UpdateResult {
        delta_w,
        applied,
        error_type,
    })
}

/// van Rossum distance between two spike trains (times in seconds, `tau` in
/// ms): `(1/tau) * integral of the squared difference of the trains filtered
/// by a causal exponential`, evaluated in closed form.
pub fn spike_distance(a: &[f64], b: &[f64], tau: f64) -> f64 {
    let tau_s = tau * 1e-3;
    let pair_sum = |x: &[f64], y: &[f64]| -> f64 {
        let mut s = 0.0;
        for &ti in x {
            for &tj in y {
                s += (-(ti - tj).abs() / tau_s).exp();
            }
        }
        s
    };
    0.5 * (pair_sum(a, a) + pair_sum(b, b) - 2.0 * pair_sum(a, b))
}

/// TDP rule with range training: if the output count is below the desired
/// range, potentiate along `d theta*_{n_o + 1} / dw`; if above, depress
/// along `d theta*_{n_o} / dw`. Non-differentiable configurations fall back
/// to the finite-difference gradient.
pub fn tdp_update(
    pattern: &SpikePattern,
    label_is_target: bool,
    w: &Weights,
    params: &NeuronParams,
    lambda: f64,
    desired_range: (u32, Option<u32>),
) -> Result<UpdateResult> {
    let (lo, hi) = if label_is_target {
        desired_range
    } else {
        (0, Some(0))
    };
    let n_o = simulate(pattern, w, params, false)?.n_out() as u32;
    let (sign, k, error_type) = if n_o < lo {
        (1.0, n_o as usize + 1, ErrorType::TargetMiss)
    } else if hi.is_some_and(|h| n_o > h) {
        (-1.0, n_o as usize, ErrorType::NullFalseFire)
    } else {
        return Ok(UpdateResult::none(pattern.n_afferents, ErrorType::None));
    };
    let solver = CriticalSolver::new(pattern, params);
    let grad = match solver.grad(w, k) {
        Ok(g) => g.dtheta_dw,
        Err(Error::NonDifferentiable(_)) => solver
            .fd_grad(w, k, 1e-6)?
            .into_iter()
            .map(|g| g.unwrap_or(0.0))
            .collect(),
        Err(Error::InvalidParameter(_)) => {
            // theta*_k undefined. On a target miss with an everywhere
            // negative potential, climb the reset-free maximum until the
            // spike-threshold surface exists; otherwise no step is possible.
            if sign > 0.0 {
                match solver.max_potential_grad(w) {
                    Some(g) => g,
                    None => return Ok(UpdateResult::none(pattern.n_afferents, error_type)),
                }
            } else {
                return Ok(UpdateResult::none(pattern.n_afferents, error_type));
            }
        }
        Err(e) => return Err(e),
    };
    let delta_w: Vec<f64> = grad.into_iter().map(|g| sign * lambda * g).collect();
    let applied = delta_w.iter().any(|d| *d != 0.0);
    Ok(UpdateResult {
        delta_w,
        applied,
        error_type,
    })
}

/// Produces training items. Generative tasks return a fresh instantiation
/// on every visit; fixed datasets return stored patterns.
pub trait TrainingSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn label(&self, idx: usize) -> &str;
    fn n_afferents(&self) -> usize;
    fn pattern(&self, idx: usize, visit_rng: &mut ChaCha8Rng) -> SpikePattern;
}

/// In-memory labeled patterns.
pub struct FixedSource {
    items: Vec<(String, SpikePattern)>,
    n_afferents: usize,
}

impl FixedSource {
    pub fn new(items: Vec<(String, SpikePattern)>) -> Result<Self> {
        let n_afferents = items
            .first()
            .map(|(_, p)| p.n_afferents)
            .ok_or(Error::EmptyDataset)?;
        if items.iter().any(|(_, p)| p.n_afferents != n_afferents) {
            return Err(Error::InvalidParameter(
                "inconsistent afferent counts in dataset".into(),
            ));
        }
        Ok(FixedSource { items, n_afferents })
    }
}

impl TrainingSource for FixedSource {
    fn len(&self) -> usize {
        self.items.len()
    }
    fn label(&self, idx: usize) -> &str {
        &self.items[idx].0
    }
    fn n_afferents(&self) -> usize {
        self.n_afferents
    }
    fn pattern(&self, idx: usize, _visit_rng: &mut ChaCha8Rng) -> SpikePattern {
        self.items[idx].1.clone()
    }
}

/// Regenerates an item from its label on every visit.
pub struct FnSource<F>
where
    F: Fn(usize, &mut ChaCha8Rng) -> SpikePattern + Sync,
{
    pub labels: Vec<String>,
    pub n_afferents: usize,
    pub generate: F,
}

impl<F> TrainingSource for FnSource<F>
where
    F: Fn(usize, &mut ChaCha8Rng) -> SpikePattern + Sync,
{
    fn len(&self) -> usize {
        self.labels.len()
    }
    fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }
    fn n_afferents(&self) -> usize {
        self.n_afferents
    }
    fn pattern(&self, idx: usize, visit_rng: &mut ChaCha8Rng) -> SpikePattern {
        (self.generate)(idx, visit_rng)
    }
}

/// One trained neuron per class, plus everything needed to reload and
/// evaluate the ensemble.
#[derive(Clone, Debug)]
pub struct Model {
    pub classes: Vec<String>,
    pub weights: Vec<Weights>,
    pub params: NeuronParams,
    pub rule: Rule,
    /// PSD target train (empty for other rules).
    pub desired_times: Vec<f64>,
    pub epochs_run: Vec<u32>,
    pub seed: u64,
    pub n_afferents: usize,
}

fn rule_update(
    pattern: &SpikePattern,
    is_target: bool,
    w: &Weights,
    params: &NeuronParams,
    cfg: &LearningConfig,
) -> Result<UpdateResult> {
    match cfg.rule {
        Rule::Tempotron => tempotron_update(pattern, is_target, w, params, cfg.lambda),
        Rule::Psd => {
            let desired: &[f64] = if is_target { &cfg.desired_times } else { &[] };
            psd_update(pattern, desired, w, params, cfg.lambda, cfg.zeta)
        }
        Rule::Tdp => tdp_update(pattern, is_target, w, params, cfg.lambda, cfg.desired_range),
    }
}

/// Train one neuron online against every item of the source, treating items
/// of `class` as targets. Returns the weights and the number of epochs run.
pub fn train_one_neuron(
    source: &dyn TrainingSource,
    class: &str,
    class_idx: usize,
    params: &NeuronParams,
    cfg: &LearningConfig,
) -> Result<(Weights, u32)> {
    let mut rng = rng::rng_for(cfg.seed, "neuron", class_idx as u64);
    let mut w = Weights::gaussian(source.n_afferents(), cfg.init_mean, cfg.init_std, &mut rng);
    let mut velocity = vec![0.0f64; w.len()];
    let mut order: Vec<usize> = (0..source.len()).collect();
    let mut epochs = 0;
    for _ in 0..cfg.max_epochs {
        epochs += 1;
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut any_update = false;
        for &idx in &order {
            let pattern = source.pattern(idx, &mut rng);
            let is_target = source.label(idx) == class;
            let update = rule_update(&pattern, is_target, &w, params, cfg)?;
            any_update |= update.applied;
            for ((v, w_i), d) in velocity.iter_mut().zip(w.iter_mut()).zip(&update.delta_w) {
                *v = cfg.momentum * *v + d;
                *w_i += *v;
            }
        }
        if !any_update {
            break;
        }
    }
    Ok((w, epochs))
}

/// Train one neuron per class over the source; classes are the unique
/// labels in order of first appearance. Per-class training is independent
/// and runs on `threads` worker threads with deterministic results.
pub fn train(
    source: &dyn TrainingSource,
    params: &NeuronParams,
    cfg: &LearningConfig,
    threads: usize,
) -> Result<Model> {
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut classes: Vec<String> = Vec::new();
    for i in 0..source.len() {
        let l = source.label(i);
        if !classes.iter().any(|c| c == l) {
            classes.push(l.to_string());
        }
    }
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(
            "training needs at least 2 classes".into(),
        ));
    }
    let results = crate::par::par_map(&classes, threads, |idx, class| {
        train_one_neuron(source, class, idx, params, cfg)
    });
    let mut weights = Vec::with_capacity(classes.len());
    let mut epochs_run = Vec::with_capacity(classes.len());
    for r in results {
        let (w, e) = r?;
        weights.push(w);
        epochs_run.push(e);
    }
    Ok(Model {
        classes,
        weights,
        params: *params,
        rule: cfg.rule,
        desired_times: cfg.desired_times.clone(),
        epochs_run,
        seed: cfg.seed,
        n_afferents: source.n_afferents(),
    })
}

impl Model {
    pub fn to_spkmodel_string(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "SPKMODEL v1");
        let _ = writeln!(
            out,
            "params {} {} {}",
            fmt9(self.params.tau_m),
            fmt9(self.params.tau_s),
            fmt9(self.params.threshold)
        );
        let _ = writeln!(
            out,
            "meta {} {} {}",
            self.rule, self.seed, self.n_afferents
        );
        if !self.desired_times.is_empty() {
            let times: Vec<String> = self.desired_times.iter().map(|&t| fmt9(t)).collect();
            let _ = writeln!(out, "desired {}", times.join(" "));
        }
        for ((class, w), epochs) in self.classes.iter().zip(&self.weights).zip(&self.epochs_run) {
            let _ = writeln!(out, "class {class} {epochs}");
            let ws: Vec<String> = w.iter().map(|&x| fmt9(x)).collect();
            let _ = writeln!(out, "{}", ws.join(" "));
        }
        out
    }

    pub fn from_spkmodel_string(text: &str) -> Result<Model> {
        let mut lines = text.lines().peekable();
        let magic = lines
            .next()
            .ok_or_else(|| Error::Truncated("empty model file".into()))?;
        if magic.trim() != "SPKMODEL v1" {
            return Err(Error::BadModelMagic(magic.to_string()));
        }
        let params_line = lines
            .next()
            .ok_or_else(|| Error::Truncated("missing params line".into()))?;
        let p: Vec<&str> = params_line.split_whitespace().collect();
        if p.len() != 4 || p[0] != "params" {
            return Err(Error::Parse(format!("bad params line {params_line:?}")));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad number {s:?}")))
        };
        let params = NeuronParams::new(parse_f(p[1])?, parse_f(p[2])?, parse_f(p[3])?)?;
        let meta_line = lines
            .next()
            .ok_or_else(|| Error::Truncated("missing meta line".into()))?;
        let m: Vec<&str> = meta_line.split_whitespace().collect();
        if m.len() != 4 || m[0] != "meta" {
            return Err(Error::Parse(format!("bad meta line {meta_line:?}")));
        }
        let rule = Rule::from_str(m[1])?;
        let seed: u64 = m[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed {:?}", m[2])))?;
        let n_afferents: usize = m[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad afferent count {:?}", m[3])))?;
        let mut desired_times = Vec::new();
        if let Some(l) = lines.peek() {
            if l.starts_with("desired ") {
                let l = lines.next().unwrap();
                for tok in l.split_whitespace().skip(1) {
                    desired_times.push(parse_f(tok)?);
                }
            }
        }
        let mut classes = Vec::new();
        let mut weights = Vec::new();
        let mut epochs_run = Vec::new();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let c: Vec<&str> = line.split_whitespace().collect();
            if c.len() != 3 || c[0] != "class" {
                return Err(Error::Parse(format!("bad class line {line:?}")));
            }
            let class = c[1].to_string();
            let epochs: u32 = c[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad epoch count {:?}", c[2])))?;
            let w_line = lines
                .next()
                .ok_or_else(|| Error::Truncated(format!("missing weights for class {class}")))?;
            let mut w = Vec::new();
            for tok in w_line.split_whitespace() {
                w.push(parse_f(tok)?);
            }
            if w.len() != n_afferents {
                return Err(Error::WeightCountMismatch {
                    class,
                    expected: n_afferents,
                    found: w.len(),
                });
            }
            classes.push(class);
            weights.push(Weights(w));
            epochs_run.push(epochs);
        }
        if classes.is_empty() {
            return Err(Error::Truncated("model file has no classes".into()));
        }
        Ok(Model {
            classes,
            weights,
            params,
            rule,
            desired_times,
            epochs_run,
            seed,
            n_afferents,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_spkmodel_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_spkmodel_string(&text)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns;
    use crate::sts::critical_threshold;
    use approx::assert_abs_diff_eq;

    fn params() -> NeuronParams {
        NeuronParams::synthetic(1.0)
    }

    #[test]
    fn tempotron_silent_null_no_update() {
        let pat = patterns::poisson_pattern(10, 5.0, 0.3, 1);
        let w = Weights::zeros(10);
        let u = tempotron_update(&pat, false, &w, &params(), 1e-3).unwrap();
        assert!(!u.applied);
        assert_eq!(u.error_type, ErrorType::None);
        assert!(u.delta_w.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn tempotron_target_miss_single_afferent() {
        // One spike, weight below threshold: t_max is the kernel peak where
        // K = 1, so the update is exactly lambda.
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![0.5]);
        let u = tempotron_update(&pat, true, &w, &params(), 1e-3).unwrap();
        assert!(u.applied);
        assert_eq!(u.error_type, ErrorType::TargetMiss);
        assert_abs_diff_eq!(u.delta_w[0], 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn tempotron_update_raises_vmax() {
        for seed in 0..10u64 {
            let pat = patterns::poisson_pattern(30, 8.0, 0.4, 600 + seed);
            let mut r = rng::rng_from(seed);
            let w = Weights::gaussian(30, 0.02, 0.01, &mut r);
            let u = tempotron_update(&pat, true, &w, &params(), 1e-3).unwrap();
            if !u.applied {
                continue;
            }
            let (v0, _) = simulate_reset_free(&pat, &w, &params()).unwrap();
            let w2 = Weights(w.iter().zip(&u.delta_w).map(|(a, d)| a + d).collect());
            let (v1, _) = simulate_reset_free(&pat, &w2, &params()).unwrap();
            assert!(v1 > v0, "seed {seed}: v_max did not increase");
        }
    }

    #[test]
    fn psd_no_error_no_update() {
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![0.0]);
        let u = psd_update(&pat, &[], &w, &params(), 1e-3, 10.0).unwrap();
        assert!(!u.applied);
    }

    #[test]
    fn psd_ltp_single_term() {
        // Desired spike at 100 ms, silent neuron, single input at 50 ms:
        // delta = lambda * K(50 ms).
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![0.0]);
        let u = psd_update(&pat, &[0.1], &w, &params(), 1e-3, 10.0).unwrap();
        assert!(u.applied);
        assert_eq!(u.error_type, ErrorType::TargetMiss);
        assert_abs_diff_eq!(
            u.delta_w[0],
            1e-3 * psp_kernel(50.0, &params()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn psd_pure_ltd_on_spurious_spike() {
        // Strong weight makes the neuron fire with no desired times.
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![2.0]);
        let u = psd_update(&pat, &[], &w, &params(), 1e-3, 10.0).unwrap();
        assert!(u.applied);
        assert_eq!(u.error_type, ErrorType::NullFalseFire);
        assert!(u.delta_w[0] < 0.0);
    }

    #[test]
    fn spike_distance_identities() {
        assert_eq!(spike_distance(&[], &[], 10.0), 0.0);
        let a = [0.05, 0.12, 0.31];
        assert_abs_diff_eq!(spike_distance(&a, &a, 10.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spike_distance(&[0.1], &[], 10.0), 0.5, epsilon = 1e-12);
        // symmetry and positivity
        let b = [0.06, 0.2];
        let d_ab = spike_distance(&a, &b, 10.0);
        assert_abs_diff_eq!(d_ab, spike_distance(&b, &a, 10.0), epsilon = 1e-12);
        assert!(d_ab > 0.0);
    }

    #[test]
    fn spike_distance_matches_quadrature() {
        let a = [0.03, 0.11, 0.40];
        let b = [0.05, 0.12];
        let tau = 10.0;
        let tau_s = tau * 1e-3;
        // numerical quadrature at 1 microsecond
        let dt = 1e-6;
        let t_end: f64 = 1.0;
        let mut acc = 0.0;
        let mut t = 0.0;
        while t < t_end {
            let f: f64 = a
                .iter()
                .map(|&ti| if t >= ti { (-(t - ti) / tau_s).exp() } else { 0.0 })
                .sum();
            let g: f64 = b
                .iter()
                .map(|&ti| if t >= ti { (-(t - ti) / tau_s).exp() } else { 0.0 })
                .sum();
            acc += (f - g) * (f - g) * dt;
            t += dt;
        }
        let quad = acc / tau_s;
        assert_abs_diff_eq!(spike_distance(&a, &b, tau), quad, epsilon = 1e-3);
    }

    #[test]
    fn tdp_inside_range_no_update() {
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        // w = 1.5 with threshold 1.0 fires at least once.
        let w = Weights(vec![1.5]);
        let n = simulate(&pat, &w, &params(), false).unwrap().n_out() as u32;
        let u = tdp_update(&pat, true, &w, &params(), 1e-3, (1, None)).unwrap();
        assert!(n >= 1);
        assert!(!u.applied);
        assert_eq!(u.error_type, ErrorType::None);
    }

    #[test]
    fn tdp_target_miss_single_afferent_analytic() {
        // Silent neuron (w = 0.5 < threshold 1): theta*_1 = 0.5 with
        // gradient exactly 1, so the step is +lambda.
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![0.5]);
        let u = tdp_update(&pat, true, &w, &params(), 1e-3, (1, None)).unwrap();
        assert!(u.applied);
        assert_eq!(u.error_type, ErrorType::TargetMiss);
        assert_abs_diff_eq!(u.delta_w[0], 1e-3, epsilon = 1e-9);
    }

    #[test]
    fn tdp_null_false_fire_depresses() {
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.3);
        let w = Weights(vec![1.5]);
        let u = tdp_update(&pat, false, &w, &params(), 1e-3, (20, None)).unwrap();
        assert!(u.applied);
        assert_eq!(u.error_type, ErrorType::NullFalseFire);
        assert!(u.delta_w[0] < 0.0);
    }

    #[test]
    fn tdp_ltp_step_raises_critical_threshold() {
        for seed in 0..8u64 {
            let pat = patterns::poisson_pattern(25, 6.0, 0.4, 80 + seed);
            let mut r = rng::rng_from(10 + seed);
            let w = Weights::gaussian(25, 0.05, 0.02, &mut r);
            let n_o = simulate(&pat, &w, &params(), false).unwrap().n_out() as u32;
            let u = tdp_update(&pat, true, &w, &params(), 1e-3, (n_o + 3, None)).unwrap();
            if !u.applied {
                continue;
            }
            let k = n_o as usize + 1;
            let before = critical_threshold(&pat, &w, k, &params()).unwrap();
            let w2 = Weights(w.iter().zip(&u.delta_w).map(|(a, d)| a + d).collect());
            let after = critical_threshold(&pat, &w2, k, &params()).unwrap();
            if let (Some(b), Some(a)) = (before, after) {
                assert!(a > b, "seed {seed}: theta*_{k} {b} -> {a}");
            }
        }
    }

    #[test]
    fn init_weights_statistics() {
        let mut r = rng::rng_from(123);
        let n = 50_000;
        let w = Weights::gaussian(n, 0.02, 0.01, &mut r);
        let mean = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - 0.02).abs() < 3.0 * 0.01 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.01).abs() < 3e-4);
    }

    #[test]
    fn train_converges_and_is_deterministic() {
        // Two well-separated fixed patterns; TDP to fire >= 2 for target,
        // 0 for null.
        let pat_a = patterns::poisson_pattern(40, 8.0, 0.3, 1);
        let pat_b = patterns::poisson_pattern(40, 8.0, 0.3, 2);
        let source = FixedSource::new(vec![
            ("a".into(), pat_a.clone()),
            ("b".into(), pat_b.clone()),
        ])
        .unwrap();
        let cfg = LearningConfig {
            rule: Rule::Tdp,
            lambda: 5e-3,
            momentum: 0.9,
            desired_range: (2, None),
            max_epochs: 200,
            seed: 5,
            init_mean: 0.01,
            init_std: 0.01,
            ..LearningConfig::default()
        };
        let m1 = train(&source, &params(), &cfg, 1).unwrap();
        let m2 = train(&source, &params(), &cfg, 2).unwrap();
        assert_eq!(m1.to_spkmodel_string(), m2.to_spkmodel_string());
        // converged: target fires >= 2, null silent
        for (ci, class) in m1.classes.iter().enumerate() {
            let (target, null) = if class == "a" {
                (&pat_a, &pat_b)
            } else {
                (&pat_b, &pat_a)
            };
            let nt = simulate(target, &m1.weights[ci], &m1.params, false)
                .unwrap()
                .n_out();
            let nn = simulate(null, &m1.weights[ci], &m1.params, false)
                .unwrap()
                .n_out();
            assert!(nt >= 2, "class {class}: target count {nt}");
            assert_eq!(nn, 0, "class {class}: null count {nn}");
        }
    }

    #[test]
    fn model_round_trip_and_errors() {
        let mut r = rng::rng_from(3);
        let model = Model {
            classes: vec!["bell".into(), "horn".into()],
            weights: vec![
                Weights::gaussian(5, 0.0, 0.01, &mut r),
                Weights::gaussian(5, 0.0, 0.01, &mut r),
            ],
            params: NeuronParams::sound(1.0),
            rule: Rule::Tdp,
            desired_times: vec![],
            epochs_run: vec![12, 9],
            seed: 44,
            n_afferents: 5,
        };
        let text = model.to_spkmodel_string();
        let back = Model::from_spkmodel_string(&text).unwrap();
        // weights reproduce exactly at the 9-significant-digit format
        assert_eq!(back.to_spkmodel_string(), text);
        assert_eq!(back.classes, model.classes);
        for (a, b) in back.weights.iter().zip(&model.weights) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-9));
            }
        }

        assert!(matches!(
            Model::from_spkmodel_string("NOTMODEL\n"),
            Err(Error::BadModelMagic(_))
        ));
        // hand-edited weight vector with the wrong count names the class
        let bad = "SPKMODEL v1\nparams 4.0e1 1.0e1 1.0e0\nmeta tdp 0 5\n\
                   class bell 3\n0.1 0.2 0.3 0.4 0.5\nclass horn 2\n0.1 0.2\n";
        match Model::from_spkmodel_string(bad) {
            Err(Error::WeightCountMismatch { class, .. }) => assert_eq!(class, "horn"),
            other => panic!("expected weight count mismatch, got {other:?}"),
        }
    }
}
