//! Synthetic spike-pattern generators: homogeneous Poisson afferents,
//! template perturbation (jitter and deletion), and inhomogeneous firing
//! profiles sampled by thinning.

use rand::Rng;

use crate::encoding::SpikePattern;
use crate::rng;

/// Baseline firing rate plus Gaussian bumps `h * exp(-((t - c) / b)^2)`.
#[derive(Clone, Debug)]
pub struct RateProfile {
    pub baseline: f64,
    /// (center s, width s, height Hz)
    pub peaks: Vec<(f64, f64, f64)>,
    pub duration: f64,
}

impl RateProfile {
    pub fn rate_at(&self, t: f64) -> f64 {
        self.baseline
            + self
                .peaks
                .iter()
                .map(|&(c, b, h)| h * (-((t - c) / b).powi(2)).exp())
                .sum::<f64>()
    }

    fn rate_bound(&self) -> f64 {
        self.baseline + self.peaks.iter().map(|p| p.2).sum::<f64>()
    }

    /// The two-bump profile used by the inhomogeneous-firing experiment:
    /// 1 Hz baseline, 4 Hz bumps of width 20 ms at 150 and 350 ms, 0.5 s.
    pub fn two_bump() -> Self {
        RateProfile {
            baseline: 1.0,
            peaks: vec![(0.150, 0.020, 4.0), (0.350, 0.020, 4.0)],
            duration: 0.5,
        }
    }
}

/// Jitter and deletion noise applied to template patterns.
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    /// Gaussian jitter standard deviation, ms.
    pub sigma_jit: f64,
    /// Per-spike deletion probability.
    pub p_del: f64,
}

/// Homogeneous Poisson pattern: every afferent fires at `rate` Hz over
/// `[0, duration]`.
pub fn poisson_pattern(n_afferents: usize, rate: f64, duration: f64, seed: u64) -> SpikePattern {
    let mut rng = rng::rng_for(seed, "poisson", 0);
    let mut spikes = Vec::with_capacity(n_afferents);
    for _ in 0..n_afferents {
        let mut ts = Vec::new();
        if rate > 0.0 {
            let mut t = 0.0;
            loop {
                t += -rng.random::<f64>().max(f64::MIN_POSITIVE).ln() / rate;
                if t > duration {
                    break;
                }
                ts.push(t);
            }
        }
        spikes.push(ts);
    }
    SpikePattern {
        n_afferents,
        spikes,
        duration,
    }
}

/// Delete each spike with probability `p_del`, then jitter survivors by
/// `N(0, sigma_jit^2)` clipped to the pattern window.
pub fn perturb(template: &SpikePattern, noise: &NoiseSpec, seed: u64) -> SpikePattern {
    let mut rng = rng::rng_for(seed, "perturb", 0);
    let sigma_s = noise.sigma_jit * 1e-3;
    let spikes = template
        .spikes
        .iter()
        .map(|ts| {
            let mut out = Vec::with_capacity(ts.len());
            for &t in ts {
                if rng.random::<f64>() < noise.p_del {
                    continue;
                }
                out.push((t + sigma_s * rng::gauss(&mut rng)).clamp(0.0, template.duration));
            }
            out.sort_by(f64::total_cmp);
            out
        })
        .collect();
    SpikePattern {
        n_afferents: template.n_afferents,
        spikes,
        duration: template.duration,
    }
}

/// Inhomogeneous Poisson pattern via thinning against the profile's rate
/// bound; a fresh draw on every call for the same seed arguments.
pub fn inhomogeneous_pattern(profile: &RateProfile, n_afferents: usize, seed: u64) -> SpikePattern {
    let mut rng = rng::rng_for(seed, "inhomog", 0);
    let bound = profile.rate_bound();
    let mut spikes = Vec::with_capacity(n_afferents);
    for _ in 0..n_afferents {
        let mut ts = Vec::new();
        if bound > 0.0 {
            let mut t = 0.0;
            loop {
                t += -rng.random::<f64>().max(f64::MIN_POSITIVE).ln() / bound;
                if t > profile.duration {
                    break;
                }
                if rng.random::<f64>() * bound < profile.rate_at(t) {
                    ts.push(t);
                }
            }
        }
        spikes.push(ts);
    }
    SpikePattern {
        n_afferents,
        spikes,
        duration: profile.duration,
    }
}

/// Homogeneous rate with the same time-integral as the profile:
/// `(1/T) \int_0^T r(t) dt`, adaptive Simpson quadrature at 1e-9 relative.
pub fn matched_homogeneous_rate(profile: &RateProfile) -> f64 {
    let f = |t: f64| profile.rate_at(t);
    let integral = adaptive_simpson(&f, 0.0, profile.duration, 1e-12, 40);
    integral / profile.duration
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol * (1.0 + (left + right).abs()) {
        left + right + err / 15.0
    } else {
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

/// Evenly distributed desired spike times: `k * T / (n + 1)` for `k = 1..n`.
pub fn evenly_spaced_times(n: usize, duration: f64) -> Vec<f64> {
    (1..=n)
        .map(|k| k as f64 * duration / (n + 1) as f64)
        .collect()
}
