//! Spike-threshold-surface computation.
//!
//! For a fixed pattern and weight vector, the critical threshold `theta*_k`
//! is the threshold value at which the output spike count transitions from
//! at least `k` (just below) to fewer than `k` (just above). Spike count is
//! monotone non-increasing in the threshold, so each critical value is
//! located by bisection with the event-driven simulator as the counting
//! oracle. `theta*_1` is exactly the reset-free maximal potential.
//!
//! The gradient `d theta*_k / dw` comes from implicit differentiation of the
//! crossing conditions: at `theta = theta*_k` the k-th output spike is a
//! tangency (`V(t*) = theta`, `V'(t*) = 0`) while each earlier output time
//! satisfies a transversal crossing `V(t_m) = theta`. Differentiating the
//! crossings in order gives a forward recursion for `dt_m/dw_i`, and the
//! tangency closes the system. Configurations where a crossing is nearly
//! tangent, or an output spike coincides with an input event, are reported
//! as non-differentiable; callers fall back to the finite-difference value.

use crate::encoding::SpikePattern;
use crate::error::Error;
use crate::neuron::{
    count_spikes, psp_kernel, reset_free_max, run_sim, EventTimeline, NeuronParams, SimOptions,
    WeightedEvents, Weights,
};
use crate::Result;

/// Default relative bisection tolerance for critical thresholds.
pub const CRITICAL_REL_TOL: f64 = 1e-8;
/// Tolerance used for finite-difference oracle evaluations.
pub const ORACLE_REL_TOL: f64 = 1e-13;
/// Default number of critical values in a profile.
pub const DEFAULT_PROFILE_K: usize = 64;

/// Critical threshold values for one (pattern, weights) pair; `None` marks
/// spike counts the neuron cannot reach at any positive threshold.
#[derive(Clone, Debug)]
pub struct STSProfile {
    pub critical: Vec<Option<f64>>,
}

impl STSProfile {
    pub fn k_max(&self) -> usize {
        self.critical.len()
    }

    /// theta*_k, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        self.critical.get(k - 1).copied().flatten()
    }
}

#[derive(Clone, Debug)]
pub struct CriticalGradient {
    pub k: usize,
    pub dtheta_dw: Vec<f64>,
}

/// Reusable solver for one pattern: caches the merged event timeline.
pub struct CriticalSolver {
    timeline: EventTimeline,
    pattern_spikes: Vec<Vec<f64>>,
    n_afferents: usize,
    params: NeuronParams,
}

#[derive(Clone, Copy, Debug)]
struct Bracket {
    lo: f64,
    hi: f64,
}

impl Bracket {
    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl CriticalSolver {
    pub fn new(pattern: &SpikePattern, params: &NeuronParams) -> Self {
        CriticalSolver {
            timeline: EventTimeline::from_pattern(pattern),
            pattern_spikes: pattern.spikes.clone(),
            n_afferents: pattern.n_afferents,
            params: *params,
        }
    }

    fn weighted(&self, w: &Weights) -> WeightedEvents {
        self.timeline.weighted(w)
    }

    /// Bisect for theta*_k in (0, hi]; `hi` must satisfy count(hi) < k.
    fn bracket(
        &self,
        ev: &WeightedEvents,
        k: usize,
        rel_tol: f64,
        hi: f64,
        lo_start: f64,
    ) -> Option<Bracket> {
        debug_assert!(k >= 2);
        let mut lo = lo_start;
        let mut found = false;
        for _ in 0..90 {
            if count_spikes(ev, &self.params, lo, k) >= k {
                found = true;
                break;
            }
            lo *= 0.5;
        }
        if !found {
            return None;
        }
        let mut b = Bracket { lo, hi };
        while b.hi - b.lo > rel_tol * b.hi {
            let mid = b.mid();
            if count_spikes(ev, &self.params, mid, k) >= k {
                b.lo = mid;
            } else {
                b.hi = mid;
            }
        }
        Some(b)
    }

    fn critical_bracket(&self, ev: &WeightedEvents, k: usize, rel_tol: f64) -> Option<Bracket> {
        let theta1 = reset_free_max(ev, &self.params).0;
        if !(theta1 > 0.0) {
            return None;
        }
        if k == 1 {
            return Some(Bracket {
                lo: theta1,
                hi: theta1,
            });
        }
        self.bracket(ev, k, rel_tol, theta1, theta1 * 0.5)
    }

    /// theta*_k, or `None` when the neuron cannot fire k spikes.
    pub fn critical(&self, w: &Weights, k: usize, rel_tol: f64) -> Result<Option<f64>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let ev = self.weighted(w);
        Ok(self.critical_bracket(&ev, k, rel_tol).map(|b| b.mid()))
    }

    /// Critical values for k = 1..=k_max, reusing brackets downward.
    pub fn profile(&self, w: &Weights, k_max: usize, rel_tol: f64) -> STSProfile {
        let ev = self.weighted(w);
        let mut critical = Vec::with_capacity(k_max);
        let theta1 = reset_free_max(&ev, &self.params).0;
        if !(theta1 > 0.0) {
            return STSProfile {
                critical: vec![None; k_max],
            };
        }
        critical.push(Some(theta1));
        let mut prev = Bracket {
            lo: theta1,
            hi: theta1,
        };
        for k in 2..=k_max {
            // theta*_k <= theta*_{k-1}: reuse the previous lower edge as the
            // next upper bound unless the values tie within the bracket.
            let next = if count_spikes(&ev, &self.params, prev.lo, k) >= k {
                let mut b = Bracket {
                    lo: prev.lo,
                    hi: prev.hi.max(prev.lo * (1.0 + rel_tol)),
                };
                while b.hi - b.lo > rel_tol * b.hi {
                    let mid = b.mid();
                    if count_spikes(&ev, &self.params, mid, k) >= k {
                        b.lo = mid;
                    } else {
                        b.hi = mid;
                    }
                }
                Some(b)
            } else {
                self.bracket(&ev, k, rel_tol, prev.lo, prev.lo * 0.5)
            };
            match next {
                Some(b) => {
                    // ties can invert by the bisection tolerance; clamp
                    let last = critical.last().copied().flatten().unwrap_or(theta1);
                    critical.push(Some(b.mid().min(last)));
                    prev = b;
                }
                None => {
                    critical.extend(std::iter::repeat_n(None, k_max - k + 1));
                    break;
                }
            }
        }
        STSProfile { critical }
    }

    /// PSP sum of afferent `i` at time `t` (seconds).
    fn kappa(&self, i: usize, t: f64) -> f64 {
        self.pattern_spikes[i]
            .iter()
            .map(|&ts| psp_kernel((t - ts) * 1e3, &self.params))
            .sum()
    }

    /// Nearest input-event distance, seconds.
    fn event_distance(&self, t: f64) -> f64 {
        let times = &self.timeline.times;
        match times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(_) => 0.0,
            Err(pos) => {
                let mut d = f64::INFINITY;
                if pos > 0 {
                    d = d.min(t - times[pos - 1]);
                }
                if pos < times.len() {
                    d = d.min(times[pos] - t);
                }
                d
            }
        }
    }

    /// Analytic gradient of theta*_k with respect to the weights.
    pub fn grad(&self, w: &Weights, k: usize) -> Result<CriticalGradient> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let ev = self.weighted(w);
        // Crossing times inherit an error of order beta * bracket width, so
        // the probe bisects well past the reporting tolerance.
        let bracket = self
            .critical_bracket(&ev, k, 1e-12)
            .ok_or_else(|| Error::InvalidParameter(format!("theta*_{k} is undefined")))?;
        // Simulate just above theta*_k: exactly k-1 transversal crossings
        // remain and the nascent k-th spike shows up as the largest
        // non-crossing local maximum (the tangency).
        let theta = bracket.hi;
        let raw = run_sim(
            &ev,
            &self.params,
            if k == 1 { f64::INFINITY } else { theta },
            SimOptions {
                track_subcritical: true,
                record_derivs: true,
                ..SimOptions::default()
            },
        );
        if raw.spikes.len() + 1 != k {
            return Err(Error::NonDifferentiable(format!(
                "adjacent critical thresholds tie: {} spikes just above theta*_{k}",
                raw.spikes.len()
            )));
        }
        if !raw.sub_max.is_finite() {
            return Err(Error::NonDifferentiable(
                "probe lost the critical excursion".into(),
            ));
        }
        // A maximum pinned on an event-boundary kink is stable under weight
        // perturbations (its time does not move), so the envelope formula
        // still applies there; only smooth interior maxima need curvature.
        let t_star = raw.sub_argmax;
        if (raw.sub_max - theta).abs() > 1e-8 * theta.abs().max(1e-12) {
            return Err(Error::NonDifferentiable(
                "tangency level drifted from the critical threshold".into(),
            ));
        }
        if raw.sub_max - raw.sub_second < 1e-6 * theta {
            return Err(Error::NonDifferentiable(
                "two local maxima compete for the tangency".into(),
            ));
        }
        let tau_m = self.params.tau_m * 1e-3;
        let tau_s = self.params.tau_s * 1e-3;
        if !raw.sub_at_event && raw.sub_curvature.abs() < 1e-8 * theta / (tau_s * tau_s) {
            return Err(Error::NonDifferentiable("flat tangency".into()));
        }
        // Only crossings before the tangency influence theta*_k.
        let cut = raw.spikes.partition_point(|&t| t < t_star);
        let t_cross = &raw.spikes[..cut];
        let derivs = &raw.derivs[..cut];
        let slope_scale = theta / tau_m;
        for (&tm, &dv) in t_cross.iter().zip(derivs) {
            if dv.abs() < 1e-6 * slope_scale {
                return Err(Error::NonDifferentiable(format!(
                    "near-tangent crossing at t = {tm}"
                )));
            }
            if self.event_distance(tm) < 1e-10 {
                return Err(Error::NonDifferentiable(format!(
                    "output spike at t = {tm} coincides with an input event"
                )));
            }
        }

        // Reset-decay couplings between output spikes.
        let decay = |from: f64, to: f64| (-(to - from) / tau_m).exp();
        let e_star: f64 = t_cross.iter().map(|&tl| decay(tl, t_star)).sum();

        // beta_m: sensitivity of t_m to theta*, independent of the afferent.
        let mut beta: Vec<f64> = Vec::with_capacity(t_cross.len());
        for (m, (&tm, &dv)) in t_cross.iter().zip(derivs).enumerate() {
            let e_m: f64 = t_cross[..m].iter().map(|&tl| decay(tl, tm)).sum();
            let c_beta: f64 = t_cross[..m]
                .iter()
                .zip(beta.iter())
                .map(|(&tl, &bl)| decay(tl, tm) * bl)
                .sum();
            beta.push(((1.0 + e_m) + slope_scale * c_beta) / dv);
        }
        let c_beta_star: f64 = t_cross
            .iter()
            .zip(beta.iter())
            .map(|(&tl, &bl)| decay(tl, t_star) * bl)
            .sum();
        let denom = 1.0 + e_star + slope_scale * c_beta_star;
        if denom.abs() < 1e-12 {
            return Err(Error::NonDifferentiable("singular tangency system".into()));
        }

        let mut dtheta_dw = Vec::with_capacity(self.n_afferents);
        let mut alpha = vec![0.0f64; t_cross.len()];
        for i in 0..self.n_afferents {
            for m in 0..t_cross.len() {
                let tm = t_cross[m];
                let dv = derivs[m];
                let c_alpha: f64 = t_cross[..m]
                    .iter()
                    .zip(alpha[..m].iter())
                    .map(|(&tl, &al)| decay(tl, tm) * al)
                    .sum();
                alpha[m] = (slope_scale * c_alpha - self.kappa(i, tm)) / dv;
            }
            let c_alpha_star: f64 = t_cross
                .iter()
                .zip(alpha.iter())
                .map(|(&tl, &al)| decay(tl, t_star) * al)
                .sum();
            dtheta_dw.push((self.kappa(i, t_star) - slope_scale * c_alpha_star) / denom);
        }
        Ok(CriticalGradient { k, dtheta_dw })
    }

    /// Ascent direction for the reset-free potential when theta*_1 is
    /// undefined (potential never positive): PSP sums at the best candidate
    /// time strictly after stimulus onset, where kernels are active. Raising
    /// that value eventually makes the spike-threshold surface exist.
    pub fn max_potential_grad(&self, w: &Weights) -> Option<Vec<f64>> {
        let ev = self.weighted(w);
        if ev.times.is_empty() {
            return None;
        }
        let tau_m = self.params.tau_m_s();
        let tau_s = self.params.tau_s_s();
        let v0 = self.params.v0();
        let (mut a, mut b) = (0.0f64, 0.0f64);
        let mut best: Option<(f64, f64)> = None;
        let consider = |v: f64, t: f64, best: &mut Option<(f64, f64)>| {
            if best.is_none_or(|(bv, _)| v > bv) {
                *best = Some((v, t));
            }
        };
        for i in 0..ev.times.len() {
            let d = if i == 0 {
                0.0
            } else {
                ev.times[i] - ev.times[i - 1]
            };
            a *= (-d / tau_m).exp();
            b *= (-d / tau_s).exp();
            if i > 0 {
                consider(a - b, ev.times[i], &mut best);
            }
            let dw = v0 * ev.w[i];
            a += dw;
            b += dw;
        }
        // Candidate one kernel-peak past the last event.
        let t_peak_s = self.params.t_peak() * 1e-3;
        let tail = a * (-t_peak_s / tau_m).exp() - b * (-t_peak_s / tau_s).exp();
        let t_last = *ev.times.last().unwrap();
        consider(tail, t_last + t_peak_s, &mut best);
        best.map(|(_, t)| {
            (0..self.n_afferents)
                .map(|i| self.kappa(i, t))
                .collect()
        })
    }

    /// Central finite differences of theta*_k; `None` marks coordinates
    /// where the critical value became undefined under perturbation.
    pub fn fd_grad(&self, w: &Weights, k: usize, h_base: f64) -> Result<Vec<Option<f64>>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(w.len());
        for i in 0..w.len() {
            let h = h_base * w[i].abs().max(1.0);
            let mut wp = w.clone();
            wp[i] += h;
            let plus = self.critical(&wp, k, ORACLE_REL_TOL)?;
            wp[i] = w[i] - h;
            let minus = self.critical(&wp, k, ORACLE_REL_TOL)?;
            out.push(match (plus, minus) {
                (Some(p), Some(m)) => Some((p - m) / (2.0 * h)),
                _ => None,
            });
        }
        Ok(out)
    }
}

/// theta*_k for one (pattern, weights) pair, bisected to 1e-8 relative;
/// `None` when the neuron cannot fire k spikes at any positive threshold.
pub fn critical_threshold(
    pattern: &SpikePattern,
    w: &Weights,
    k: usize,
    params: &NeuronParams,
) -> Result<Option<f64>> {
    crate::neuron::check_inputs(pattern, w)?;
    CriticalSolver::new(pattern, params).critical(w, k, CRITICAL_REL_TOL)
}

/// Critical thresholds for k = 1..=k_max.
pub fn sts_profile(
    pattern: &SpikePattern,
    w: &Weights,
    k_max: usize,
    params: &NeuronParams,
) -> Result<STSProfile> {
    crate::neuron::check_inputs(pattern, w)?;
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    Ok(CriticalSolver::new(pattern, params).profile(w, k_max, CRITICAL_REL_TOL))
}

/// Analytic gradient of theta*_k; errors with `NonDifferentiable` at
/// degenerate configurations.
pub fn critical_threshold_grad(
    pattern: &SpikePattern,
    w: &Weights,
    k: usize,
    params: &NeuronParams,
) -> Result<CriticalGradient> {
    crate::neuron::check_inputs(pattern, w)?;
    CriticalSolver::new(pattern, params).grad(w, k)
}

/// Central-difference gradient oracle with step `h = h_base * max(1, |w_i|)`
/// per coordinate (default `h_base` 1e-6) and bisection at 1e-13 relative.
pub fn fd_gradient_oracle(
    pattern: &SpikePattern,
    w: &Weights,
    k: usize,
    params: &NeuronParams,
    h_base: Option<f64>,
) -> Result<Vec<Option<f64>>> {
    crate::neuron::check_inputs(pattern, w)?;
    CriticalSolver::new(pattern, params).fd_grad(w, k, h_base.unwrap_or(1e-6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::simulate;
    use crate::patterns;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn params() -> NeuronParams {
        NeuronParams::synthetic(1.0)
    }

    #[test]
    fn single_spike_theta1_equals_weight() {
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.5);
        let w = Weights(vec![0.7]);
        let t1 = critical_threshold(&pat, &w, 1, &params()).unwrap().unwrap();
        assert_abs_diff_eq!(t1, 0.7, epsilon = 1e-9);
        let g = critical_threshold_grad(&pat, &w, 1, &params()).unwrap();
        assert_abs_diff_eq!(g.dtheta_dw[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn superposed_spikes_theta1_sums_weights() {
        let pat = SpikePattern::from_events(2, [(0usize, 0.05), (1usize, 0.05)], 0.5);
        let w = Weights(vec![0.3, 0.4]);
        let t1 = critical_threshold(&pat, &w, 1, &params()).unwrap().unwrap();
        assert_abs_diff_eq!(t1, 0.7, epsilon = 1e-9);
        let g = critical_threshold_grad(&pat, &w, 1, &params()).unwrap();
        assert_abs_diff_eq!(g.dtheta_dw[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g.dtheta_dw[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_pattern_all_undefined() {
        let pat = SpikePattern::empty(4, 0.5);
        let prof = sts_profile(&pat, &Weights::zeros(4), 8, &params()).unwrap();
        assert!(prof.critical.iter().all(Option::is_none));
    }

    #[test]
    fn profile_non_increasing_and_count_readback() {
        for seed in 0..6u64 {
            let pat = patterns::poisson_pattern(30, 6.0, 0.4, 100 + seed);
            let mut r = rng::rng_from(seed);
            let w = Weights::gaussian(30, 0.1, 0.05, &mut r);
            let prof = sts_profile(&pat, &w, 8, &params()).unwrap();
            let defined: Vec<f64> = prof.critical.iter().flatten().copied().collect();
            for pair in defined.windows(2) {
                assert!(pair[0] >= pair[1] * (1.0 - 1e-7));
            }
            // Between consecutive critical values the simulator must count
            // exactly k spikes.
            for k in 1..defined.len() {
                let hi = defined[k - 1];
                let lo = defined[k];
                if hi - lo > 1e-4 * hi {
                    let theta = 0.5 * (hi + lo);
                    let n = simulate(&pat, &w, &params().with_threshold(theta), false)
                        .unwrap()
                        .n_out();
                    assert_eq!(n, k, "seed {seed} k {k}");
                }
            }
        }
    }

    #[test]
    fn bracketing_property() {
        for seed in 0..4u64 {
            let pat = patterns::poisson_pattern(25, 5.0, 0.4, 300 + seed);
            let mut r = rng::rng_from(40 + seed);
            let w = Weights::gaussian(25, 0.15, 0.08, &mut r);
            for k in 1..=6usize {
                if let Some(theta) = critical_threshold(&pat, &w, k, &params()).unwrap() {
                    let below = simulate(
                        &pat,
                        &w,
                        &params().with_threshold(theta * (1.0 - 1e-4)),
                        false,
                    )
                    .unwrap()
                    .n_out();
                    let above = simulate(
                        &pat,
                        &w,
                        &params().with_threshold(theta * (1.0 + 1e-4)),
                        false,
                    )
                    .unwrap()
                    .n_out();
                    assert!(below >= k, "seed {seed} k {k}: below={below}");
                    assert!(above < k, "seed {seed} k {k}: above={above}");
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let pat = patterns::poisson_pattern(20, 6.0, 0.4, 9);
        let mut r = rng::rng_from(2);
        let w = Weights::gaussian(20, 0.2, 0.1, &mut r);
        let c = 3.7;
        let wc = Weights(w.iter().map(|x| x * c).collect());
        for k in 1..=4usize {
            let a = critical_threshold(&pat, &w, k, &params()).unwrap();
            let b = critical_threshold(&pat, &wc, k, &params()).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => assert_abs_diff_eq!(b, c * a, epsilon = 1e-6 * b.abs()),
                (None, None) => {}
                other => panic!("definedness changed under scaling: {other:?}"),
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let mut checked = 0;
        let mut degenerate = 0;
        for seed in 0..8u64 {
            let pat = patterns::poisson_pattern(12, 6.0, 0.3, 500 + seed);
            let mut r = rng::rng_from(70 + seed);
            let w = Weights::gaussian(12, 0.18, 0.07, &mut r);
            for k in 1..=4usize {
                if critical_threshold(&pat, &w, k, &params())
                    .unwrap()
                    .is_none()
                {
                    continue;
                }
                let analytic = match critical_threshold_grad(&pat, &w, k, &params()) {
                    Ok(g) => g,
                    Err(Error::NonDifferentiable(_)) => {
                        degenerate += 1;
                        continue;
                    }
                    Err(e) => panic!("{e}"),
                };
                let fd = fd_gradient_oracle(&pat, &w, k, &params(), None).unwrap();
                for (i, fd_i) in fd.iter().enumerate() {
                    if let Some(fd_i) = fd_i {
                        let a = analytic.dtheta_dw[i];
                        let err = (a - fd_i).abs();
                        assert!(
                            err <= 0.01 * fd_i.abs() || err <= 1e-6,
                            "seed {seed} k {k} i {i}: analytic {a} vs fd {fd_i}"
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 50, "only {checked} gradient entries checked");
        assert!(degenerate <= 3, "{degenerate} degenerate cases");
    }

    #[test]
    fn fd_oracle_richardson_consistency() {
        let pat = patterns::poisson_pattern(8, 8.0, 0.25, 33);
        let mut r = rng::rng_from(5);
        let w = Weights::gaussian(8, 0.25, 0.05, &mut r);
        let g1 = fd_gradient_oracle(&pat, &w, 2, &params(), Some(2e-5)).unwrap();
        let g2 = fd_gradient_oracle(&pat, &w, 2, &params(), Some(1e-5)).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            if let (Some(a), Some(b)) = (a, b) {
                assert!((a - b).abs() < 1e-3 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn single_input_spike_second_critical() {
        // A single input spike still admits theta*_2: at low thresholds the
        // soft reset lets the still-rising kernel cross repeatedly.
        let pat = SpikePattern::from_events(1, [(0usize, 0.05)], 0.5);
        let w = Weights(vec![0.7]);
        let p = params();
        let t2 = critical_threshold(&pat, &w, 2, &p).unwrap();
        if let Some(t2) = t2 {
            assert!(t2 < 0.7);
            let below = simulate(&pat, &w, &p.with_threshold(t2 * (1.0 - 1e-4)), false)
                .unwrap()
                .n_out();
            let above = simulate(&pat, &w, &p.with_threshold(t2 * (1.0 + 1e-4)), false)
                .unwrap()
                .n_out();
            assert!(below >= 2 && above < 2, "below {below}, above {above}");
        }
    }
}
