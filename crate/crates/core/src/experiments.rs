//! Synthetic-task harnesses: learning-efficiency benchmarking of the
//! multi-spike rules, spatiotemporal pattern classification under jitter and
//! deletion noise, and learning of inhomogeneous firing statistics.

use rand::Rng as _;

use crate::learning::{
    train, train_one_neuron, FixedSource, FnSource, LearningConfig, Model, Rule,
};
use crate::neuron::{simulate, NeuronParams};
use crate::par::par_map;
use crate::patterns::{
    evenly_spaced_times, inhomogeneous_pattern, matched_homogeneous_rate, perturb,
    poisson_pattern, NoiseSpec, RateProfile,
};
use crate::readout::{classify_abs, classify_wta, respond, Decision};
use crate::rng;
use crate::Result;

/// Learning-efficiency benchmark: train a neuron to emit an exact number of
/// output spikes from one Poisson pattern, sweeping the initial mean weight.
#[derive(Clone, Debug)]
pub struct RuleBenchConfig {
    pub n_afferents: usize,
    pub rate: f64,
    pub duration: f64,
    pub n_desired: usize,
    pub means: Vec<f64>,
    pub n_seeds: u64,
    pub lambda: f64,
    pub max_epochs: u32,
    pub init_std: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RuleBenchConfig {
    fn default() -> Self {
        // Desk scale: 100 afferents at 40 Hz preserves the full task's total
        // input spike rate (500 afferents at 8 Hz).
        RuleBenchConfig {
            n_afferents: 100,
            rate: 40.0,
            duration: 1.0,
            n_desired: 20,
            means: vec![0.001, 0.0048, 0.0086, 0.0124, 0.0162, 0.02],
            n_seeds: 20,
            lambda: 1e-4,
            max_epochs: 500,
            init_std: 0.01,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RuleBenchRow {
    pub rule: String,
    pub mean: f64,
    pub seed: u64,
    /// Epochs with updates before the zero-update epoch.
    pub epochs: u32,
    pub converged: bool,
}

pub fn bench_rules(cfg: &RuleBenchConfig) -> Result<Vec<RuleBenchRow>> {
    let variants: [(&str, Rule, f64); 3] = [
        ("tdp", Rule::Tdp, 0.0),
        ("psd-z5", Rule::Psd, 5.0),
        ("psd-z10", Rule::Psd, 10.0),
    ];
    let mut jobs = Vec::new();
    for (label, rule, zeta) in variants {
        for &mean in &cfg.means {
            for seed in 0..cfg.n_seeds {
                jobs.push((label.to_string(), rule, zeta, mean, seed));
            }
        }
    }
    par_map(&jobs, cfg.threads, |_, (label, rule, zeta, mean, seed)| {
        let pattern = poisson_pattern(
            cfg.n_afferents,
            cfg.rate,
            cfg.duration,
            rng::sub_seed(cfg.seed, "bench-pattern", *seed),
        );
        let source = FixedSource::new(vec![("target".into(), pattern)])?;
        let learn = LearningConfig {
            rule: *rule,
            lambda: cfg.lambda,
            momentum: 0.0,
            zeta: *zeta,
            desired_range: (cfg.n_desired as u32, Some(cfg.n_desired as u32)),
            desired_times: evenly_spaced_times(cfg.n_desired, cfg.duration),
            max_epochs: cfg.max_epochs,
            seed: rng::sub_seed(cfg.seed, "bench-init", *seed),
            init_mean: *mean,
            init_std: cfg.init_std,
        };
        let (_, epochs) = train_one_neuron(&source, "target", 0, &NeuronParams::synthetic(1.0), &learn)?;
        let converged = epochs < cfg.max_epochs;
        Ok(RuleBenchRow {
            rule: label.clone(),
            mean: *mean,
            seed: *seed,
            epochs: if converged { epochs.saturating_sub(1) } else { epochs },
            converged,
        })
    })
    .into_iter()
    .collect()
}

pub fn bench_rows_csv(rows: &[RuleBenchRow]) -> String {
    let mut out = String::from("rule,mean,seed,epochs,converged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.rule, r.mean, r.seed, r.epochs, r.converged
        ));
    }
    out
}

/// Template-plus-noise classification of spatiotemporal spike patterns with
/// both readout schemes.
#[derive(Clone, Debug)]
pub struct SyntheticClassifyConfig {
    pub n_classes: usize,
    pub n_afferents: usize,
    pub rate: f64,
    pub duration: f64,
    pub train_noise: NoiseSpec,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub max_epochs: u32,
    pub lambda: f64,
    pub momentum: f64,
    pub eval_sigmas: Vec<f64>,
    pub eval_p_dels: Vec<f64>,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SyntheticClassifyConfig {
    fn default() -> Self {
        SyntheticClassifyConfig {
            n_classes: 3,
            n_afferents: 500,
            rate: 2.0,
            duration: 0.5,
            train_noise: NoiseSpec {
                sigma_jit: 2.0,
                p_del: 0.1,
            },
            train_per_class: 5,
            test_per_class: 30,
            max_epochs: 100,
            lambda: 1e-4,
            momentum: 0.9,
            eval_sigmas: vec![0.0, 1.0, 2.0, 4.0, 6.0, 8.0],
            eval_p_dels: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassifyRow {
    pub rule: String,
    pub scheme: String,
    /// "jitter" (sigma in ms) or "deletion" (probability).
    pub noise_kind: String,
    pub level: f64,
    pub accuracy: f64,
}

fn classify_accuracy(
    model: &Model,
    templates: &[crate::encoding::SpikePattern],
    noise: &NoiseSpec,
    test_per_class: usize,
    abs_critical: u32,
    eval_seed: u64,
) -> Result<(f64, f64)> {
    let mut correct_abs = 0usize;
    let mut correct_wta = 0usize;
    let mut total = 0usize;
    for (class, template) in templates.iter().enumerate() {
        for i in 0..test_per_class {
            let pat = perturb(
                template,
                noise,
                rng::sub_seed(eval_seed, "test-noise", (class * test_per_class + i) as u64),
            );
            let responses = respond(model, &pat)?;
            if classify_abs(&responses, model.rule, abs_critical) == Decision::Class(class) {
                correct_abs += 1;
            }
            let wta = classify_wta(&responses, model.rule, &model.desired_times, model.params.tau_m);
            if wta.class == class {
                correct_wta += 1;
            }
            total += 1;
        }
    }
    Ok((
        100.0 * correct_abs as f64 / total as f64,
        100.0 * correct_wta as f64 / total as f64,
    ))
}

/// Train all three rules on one template set and evaluate both readout
/// schemes over jitter and deletion sweeps.
pub fn classify_synthetic(cfg: &SyntheticClassifyConfig) -> Result<Vec<ClassifyRow>> {
    let params = NeuronParams::synthetic(1.0);
    let templates: Vec<crate::encoding::SpikePattern> = (0..cfg.n_classes)
        .map(|c| {
            poisson_pattern(
                cfg.n_afferents,
                cfg.rate,
                cfg.duration,
                rng::sub_seed(cfg.seed, "template", c as u64),
            )
        })
        .collect();
    let labels: Vec<String> = (0..cfg.n_classes)
        .flat_map(|c| std::iter::repeat_n(format!("c{c}"), cfg.train_per_class))
        .collect();

    let variants: [(Rule, u32); 3] = [(Rule::Tempotron, 1), (Rule::Psd, 2), (Rule::Tdp, 10)];
    let mut rows = Vec::new();
    for (rule, abs_critical) in variants {
        let source = FnSource {
            labels: labels.clone(),
            n_afferents: cfg.n_afferents,
            generate: |idx: usize, rng: &mut rng::ChaCha8Rng| {
                let class = idx / cfg.train_per_class;
                perturb(&templates[class], &cfg.train_noise, rng.random())
            },
        };
        let learn = LearningConfig {
            rule,
            lambda: cfg.lambda,
            momentum: cfg.momentum,
            zeta: 10.0,
            desired_range: (20, None),
            desired_times: evenly_spaced_times(4, cfg.duration),
            max_epochs: cfg.max_epochs,
            seed: rng::sub_seed(cfg.seed, "train", rule as u64),
            init_mean: 0.0,
            init_std: 0.001,
        };
        let model = train(&source, &params, &learn, cfg.threads)?;

        for &sigma in &cfg.eval_sigmas {
            let noise = NoiseSpec {
                sigma_jit: sigma,
                p_del: 0.0,
            };
            let (abs_acc, wta_acc) = classify_accuracy(
                &model,
                &templates,
                &noise,
                cfg.test_per_class,
                abs_critical,
                rng::sub_seed(cfg.seed, "eval-jit", (sigma * 1000.0) as u64),
            )?;
            rows.push(ClassifyRow {
                rule: learn.rule.to_string(),
                scheme: "abs".into(),
                noise_kind: "jitter".into(),
                level: sigma,
                accuracy: abs_acc,
            });
            rows.push(ClassifyRow {
                rule: learn.rule.to_string(),
                scheme: "wta".into(),
                noise_kind: "jitter".into(),
                level: sigma,
                accuracy: wta_acc,
            });
        }
        for &p_del in &cfg.eval_p_dels {
            let noise = NoiseSpec {
                sigma_jit: 0.0,
                p_del,
            };
            let (abs_acc, wta_acc) = classify_accuracy(
                &model,
                &templates,
                &noise,
                cfg.test_per_class,
                abs_critical,
                rng::sub_seed(cfg.seed, "eval-del", (p_del * 1000.0) as u64),
            )?;
            rows.push(ClassifyRow {
                rule: learn.rule.to_string(),
                scheme: "abs".into(),
                noise_kind: "deletion".into(),
                level: p_del,
                accuracy: abs_acc,
            });
            rows.push(ClassifyRow {
                rule: learn.rule.to_string(),
                scheme: "wta".into(),
                noise_kind: "deletion".into(),
                level: p_del,
                accuracy: wta_acc,
            });
        }
    }
    Ok(rows)
}

pub fn classify_rows_csv(rows: &[ClassifyRow]) -> String {
    let mut out = String::from("rule,scheme,noise,level,accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4}\n",
            r.rule, r.scheme, r.noise_kind, r.level, r.accuracy
        ));
    }
    out
}

/// Inhomogeneous-firing experiment: train a neuron to fire at least `n_d`
/// spikes for time-varying-rate patterns and stay silent for rate-matched
/// homogeneous ones; fresh instantiations on every visit.
#[derive(Clone, Debug)]
pub struct InhomogConfig {
    pub profile: RateProfile,
    pub n_afferents: usize,
    pub n_d: u32,
    pub runs: usize,
    pub train_per_class: usize,
    pub eval_draws: usize,
    pub max_epochs: u32,
    pub lambda: f64,
    pub momentum: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for InhomogConfig {
    fn default() -> Self {
        InhomogConfig {
            profile: RateProfile::two_bump(),
            n_afferents: 500,
            n_d: 2,
            runs: 100,
            train_per_class: 8,
            eval_draws: 10,
            max_epochs: 100,
            lambda: 1e-4,
            momentum: 0.9,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct InhomogResult {
    pub n_d: u32,
    pub runs: usize,
    /// All output spike times on fresh target patterns, pooled over runs.
    pub target_spike_times: Vec<f64>,
    pub target_mean_count: f64,
    pub null_mean_count: f64,
    /// Fraction of target spikes within +-3 widths of a bump center.
    pub near_center_fraction: f64,
}

pub fn inhomog_eval(cfg: &InhomogConfig) -> Result<InhomogResult> {
    let params = NeuronParams::synthetic(1.0);
    let null_rate = matched_homogeneous_rate(&cfg.profile);
    let duration = cfg.profile.duration;
    let runs: Vec<usize> = (0..cfg.runs).collect();
    let per_run = par_map(&runs, cfg.threads, |_, &run| -> Result<(Vec<f64>, usize, usize)> {
        let labels: Vec<String> = std::iter::repeat_n("target".to_string(), cfg.train_per_class)
            .chain(std::iter::repeat_n("null".to_string(), cfg.train_per_class))
            .collect();
        let source = FnSource {
            labels,
            n_afferents: cfg.n_afferents,
            generate: |idx: usize, rng: &mut rng::ChaCha8Rng| {
                if idx < cfg.train_per_class {
                    inhomogeneous_pattern(&cfg.profile, cfg.n_afferents, rng.random())
                } else {
                    poisson_pattern(cfg.n_afferents, null_rate, duration, rng.random())
                }
            },
        };
        let learn = LearningConfig {
            rule: Rule::Tdp,
            lambda: cfg.lambda,
            momentum: cfg.momentum,
            desired_range: (cfg.n_d, None),
            max_epochs: cfg.max_epochs,
            seed: rng::sub_seed(cfg.seed, "inhomog-run", run as u64),
            init_mean: 0.0,
            init_std: 0.01,
            ..LearningConfig::default()
        };
        let (w, _) = train_one_neuron(&source, "target", 0, &params, &learn)?;
        let mut spike_times = Vec::new();
        let mut null_count = 0usize;
        let mut target_count = 0usize;
        for draw in 0..cfg.eval_draws {
            let t_pat = inhomogeneous_pattern(
                &cfg.profile,
                cfg.n_afferents,
                rng::sub_seed(cfg.seed, "eval-t", (run * cfg.eval_draws + draw) as u64),
            );
            let sim = simulate(&t_pat, &w, &params, false)?;
            target_count += sim.n_out();
            spike_times.extend(sim.output_spikes);
            let n_pat = poisson_pattern(
                cfg.n_afferents,
                null_rate,
                duration,
                rng::sub_seed(cfg.seed, "eval-n", (run * cfg.eval_draws + draw) as u64),
            );
            null_count += simulate(&n_pat, &w, &params, false)?.n_out();
        }
        Ok((spike_times, target_count, null_count))
    });

    let mut result = InhomogResult {
        n_d: cfg.n_d,
        runs: cfg.runs,
        ..InhomogResult::default()
    };
    let mut target_total = 0usize;
    let mut null_total = 0usize;
    for r in per_run {
        let (times, tc, nc) = r?;
        result.target_spike_times.extend(times);
        target_total += tc;
        null_total += nc;
    }
    let draws = (cfg.runs * cfg.eval_draws) as f64;
    result.target_mean_count = target_total as f64 / draws;
    result.null_mean_count = null_total as f64 / draws;
    let near = result
        .target_spike_times
        .iter()
        .filter(|&&t| {
            cfg.profile
                .peaks
                .iter()
                .any(|&(c, b, _)| (t - c).abs() <= 3.0 * b)
        })
        .count();
    result.near_center_fraction = if result.target_spike_times.is_empty() {
        0.0
    } else {
        near as f64 / result.target_spike_times.len() as f64
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_rows_are_deterministic() {
        let cfg = RuleBenchConfig {
            n_afferents: 20,
            rate: 20.0,
            n_desired: 3,
            means: vec![0.01],
            n_seeds: 2,
            max_epochs: 50,
            threads: 2,
            ..RuleBenchConfig::default()
        };
        let a = bench_rules(&cfg).unwrap();
        let b = bench_rules(&cfg).unwrap();
        assert_eq!(bench_rows_csv(&a), bench_rows_csv(&b));
        assert_eq!(a.len(), 3 * 2);
    }

    #[test]
    fn inhomog_small_smoke() {
        let cfg = InhomogConfig {
            n_afferents: 100,
            runs: 3,
            train_per_class: 4,
            eval_draws: 3,
            max_epochs: 60,
            lambda: 1e-3,
            threads: 2,
            ..InhomogConfig::default()
        };
        let r = inhomog_eval(&cfg).unwrap();
        assert!(r.target_mean_count >= 1.0, "target count {}", r.target_mean_count);
        assert!(r.null_mean_count < 2.0, "null count {}", r.null_mean_count);
    }
}
