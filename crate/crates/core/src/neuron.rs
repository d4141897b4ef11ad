//! Current-based leaky integrate-and-fire neuron with event-driven
//! simulation.
//!
//! The membrane potential is a weighted sum of double-exponential PSP
//! kernels minus threshold-scaled reset exponentials, one per output spike.
//! Between input events the state reduces to two exponential accumulators
//! (`a` on the membrane constant, `b` on the synaptic constant), so the
//! potential over an inter-event interval is `a e^{-d/tau_m} - b e^{-d/tau_s}`.
//! Threshold crossings and interval maxima are solved analytically or with a
//! safeguarded Newton/bisection iteration at sub-nanosecond tolerance.

use std::ops::{Deref, DerefMut};

use crate::encoding::SpikePattern;
use crate::error::Error;
use crate::Result;

/// Crossing times are refined to this many seconds (1e-11 ms). Reset-time
/// error propagates into downstream potentials roughly as theta/tau_s per
/// crossing, so this needs to sit far below the critical-threshold
/// bisection tolerances.
const CROSSING_TOL_S: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant, ms.
    pub tau_m: f64,
    /// Synaptic time constant, ms.
    pub tau_s: f64,
    /// Firing threshold (dimensionless potential).
    pub threshold: f64,
    v0: f64,
}

impl NeuronParams {
    pub fn new(tau_m: f64, tau_s: f64, threshold: f64) -> Result<Self> {
        if !(tau_m > tau_s && tau_s > 0.0) {
            return Err(Error::InvalidParameter(
                "need tau_m > tau_s > 0".into(),
            ));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        let t_peak = tau_m * tau_s / (tau_m - tau_s) * (tau_m / tau_s).ln();
        let v0 = 1.0 / ((-t_peak / tau_m).exp() - (-t_peak / tau_s).exp());
        Ok(NeuronParams {
            tau_m,
            tau_s,
            threshold,
            v0,
        })
    }

    /// tau_m = 20 ms, tau_s = 5 ms: the synthetic-pattern experiments.
    pub fn synthetic(threshold: f64) -> Self {
        Self::new(20.0, 5.0, threshold).unwrap()
    }

    /// tau_m = 40 ms, tau_s = 10 ms: the sound-recognition experiments.
    pub fn sound(threshold: f64) -> Self {
        Self::new(40.0, 10.0, threshold).unwrap()
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        NeuronParams {
            threshold,
            ..*self
        }
    }

    /// Normalizer that makes the kernel peak exactly 1.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Time of the kernel peak, ms.
    pub fn t_peak(&self) -> f64 {
        self.tau_m * self.tau_s / (self.tau_m - self.tau_s) * (self.tau_m / self.tau_s).ln()
    }

    pub(crate) fn tau_m_s(&self) -> f64 {
        self.tau_m * 1e-3
    }

    pub(crate) fn tau_s_s(&self) -> f64 {
        self.tau_s * 1e-3
    }
}

/// Peak-normalized double-exponential PSP kernel; `dt` in ms, zero for
/// `dt <= 0`.
pub fn psp_kernel(dt: f64, params: &NeuronParams) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    params.v0 * ((-dt / params.tau_m).exp() - (-dt / params.tau_s).exp())
}

/// Per-afferent synaptic efficacies.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights(pub Vec<f64>);

impl Weights {
    pub fn zeros(n: usize) -> Self {
        Weights(vec![0.0; n])
    }

    pub fn gaussian(n: usize, mean: f64, std: f64, rng: &mut impl rand::Rng) -> Self {
        Weights((0..n).map(|_| mean + std * crate::rng::gauss(rng)).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

impl Deref for Weights {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for Weights {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

/// Outcome of one simulation run.
#[derive(Clone, Debug)]
pub struct SimResult {
    /// Output spike times, seconds, ascending.
    pub output_spikes: Vec<f64>,
    /// Global maximum of the membrane potential.
    pub v_max: f64,
    /// Time of the maximum, seconds.
    pub t_max: f64,
    /// Optional sampled (time, voltage) trace.
    pub trace: Option<Vec<(f64, f64)>>,
}

impl SimResult {
    pub fn n_out(&self) -> usize {
        self.output_spikes.len()
    }
}

/// Input events merged across afferents: strictly increasing times with the
/// summed synaptic weight delivered at each.
#[derive(Clone, Debug)]
pub(crate) struct WeightedEvents {
    pub times: Vec<f64>,
    pub w: Vec<f64>,
}

/// (time, afferent) events of a pattern, time-sorted, with simultaneous
/// spikes grouped. Reused across weight vectors.
#[derive(Clone, Debug)]
pub(crate) struct EventTimeline {
    pub times: Vec<f64>,
    offsets: Vec<usize>,
    affs: Vec<u32>,
}

impl EventTimeline {
    pub fn from_pattern(p: &SpikePattern) -> Self {
        let ev = p.events();
        let mut times = Vec::new();
        let mut offsets = vec![0usize];
        let mut affs = Vec::with_capacity(ev.len());
        for (t, aff) in ev {
            if times.last().is_none_or(|&last| t > last) {
                times.push(t);
                offsets.push(affs.len());
            }
            affs.push(aff as u32);
            *offsets.last_mut().unwrap() = affs.len();
        }
        EventTimeline {
            times,
            offsets,
            affs,
        }
    }

    pub fn weighted(&self, w: &[f64]) -> WeightedEvents {
        let we = (0..self.times.len())
            .map(|i| {
                self.affs[self.offsets[i]..self.offsets[i + 1]]
                    .iter()
                    .map(|&a| w[a as usize])
                    .sum()
            })
            .collect();
        WeightedEvents {
            times: self.times.clone(),
            w: we,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SimOptions {
    /// Stop after this many output spikes.
    pub max_out: Option<usize>,
    /// Track the largest non-crossing local maximum (tangency candidate).
    pub track_subcritical: bool,
    /// Record V'(t^-) at each output spike (per second).
    pub record_derivs: bool,
    /// Sample the voltage every this many seconds.
    pub trace_dt: Option<f64>,
    /// How far past the last event to run tracking/tracing, seconds.
    pub horizon: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct RawSim {
    pub spikes: Vec<f64>,
    pub derivs: Vec<f64>,
    pub v_max: f64,
    pub t_max: f64,
    /// Largest local maximum of V excluding the threshold crossings: the
    /// tangency candidate when simulating just above a critical threshold.
    pub sub_max: f64,
    pub sub_argmax: f64,
    /// The subcritical maximum sits on an event-boundary kink rather than a
    /// smooth interior extremum.
    pub sub_at_event: bool,
    /// Curvature V'' at the subcritical maximum, per second squared.
    pub sub_curvature: f64,
    /// Best subcritical candidate temporally separated from the winner
    /// (competing hump detector).
    pub sub_second: f64,
    pub trace: Vec<(f64, f64)>,
}

struct Engine<'a> {
    ev: &'a WeightedEvents,
    tau_m: f64,
    tau_s: f64,
    v0: f64,
    theta: f64,
    opts: SimOptions,
    // state
    t: f64,
    a: f64,
    b: f64,
    next_trace: f64,
    out: RawSim,
}

impl<'a> Engine<'a> {
    fn new(ev: &'a WeightedEvents, params: &NeuronParams, theta: f64, opts: SimOptions) -> Self {
        Engine {
            ev,
            tau_m: params.tau_m_s(),
            tau_s: params.tau_s_s(),
            v0: params.v0(),
            theta,
            opts,
            t: 0.0,
            a: 0.0,
            b: 0.0,
            next_trace: 0.0,
            out: RawSim {
                sub_max: f64::NEG_INFINITY,
                sub_second: f64::NEG_INFINITY,
                ..RawSim::default()
            },
        }
    }

    #[inline]
    fn v_at(&self, d: f64) -> f64 {
        self.a * (-d / self.tau_m).exp() - self.b * (-d / self.tau_s).exp()
    }

    #[inline]
    fn consider_max(&mut self, v: f64, t: f64, crossing: bool, interior: bool, curvature: f64) {
        if v > self.out.v_max {
            self.out.v_max = v;
            self.out.t_max = t;
        }
        if !self.opts.track_subcritical || crossing {
            return;
        }
        // Candidates within one synaptic constant of the current best belong
        // to the same hump; farther ones compete.
        let gap = self.tau_s;
        if v > self.out.sub_max {
            if (t - self.out.sub_argmax).abs() > gap && self.out.sub_max > f64::NEG_INFINITY {
                self.out.sub_second = self.out.sub_second.max(self.out.sub_max);
            }
            self.out.sub_max = v;
            self.out.sub_argmax = t;
            self.out.sub_at_event = !interior;
            self.out.sub_curvature = curvature;
        } else if (t - self.out.sub_argmax).abs() > gap && v > self.out.sub_second {
            self.out.sub_second = v;
        }
    }

    /// Interior critical point of the current two-exponential segment, if it
    /// is a maximum (requires a > 0 and b > 0).
    #[inline]
    fn d_star(&self) -> Option<f64> {
        if self.a > 0.0 && self.b > 0.0 {
            let r = (self.b * self.tau_m) / (self.a * self.tau_s);
            Some(r.ln() * self.tau_m * self.tau_s / (self.tau_m - self.tau_s))
        } else {
            None
        }
    }

    fn record_trace_until(&mut self, d_end: f64) {
        if self.opts.trace_dt.is_none() {
            return;
        }
        let step = self.opts.trace_dt.unwrap();
        while self.next_trace <= self.t + d_end {
            let d = self.next_trace - self.t;
            if d >= 0.0 {
                self.out.trace.push((self.next_trace, self.v_at(d)));
            }
            self.next_trace += step;
        }
    }

    /// First upward threshold crossing in (0, hi] of the rising segment;
    /// precondition: V(0) < theta <= V(hi), V increasing on [0, hi].
    fn solve_crossing(&self, hi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, hi);
        let mut x = hi;
        for _ in 0..200 {
            let em = (-x / self.tau_m).exp();
            let es = (-x / self.tau_s).exp();
            let f = self.a * em - self.b * es - self.theta;
            if f >= 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo < CROSSING_TOL_S {
                break;
            }
            let fp = -self.a / self.tau_m * em + self.b / self.tau_s * es;
            let step = if fp != 0.0 { x - f / fp } else { f64::NAN };
            x = if step.is_finite() && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
        }
        0.5 * (lo + hi)
    }

    /// Process the open interval (t, t + d_end] with the current state,
    /// firing as needed. Does not advance state past d_end.
    fn span(&mut self, mut d_end: f64) {
        loop {
            let d_star = self.d_star();
            if self.theta.is_finite() {
                if let Some(ds) = d_star {
                    if ds > 0.0 {
                        let hi = ds.min(d_end);
                        if hi > 0.0 && self.v_at(hi) >= self.theta {
                            let dc = self.solve_crossing(hi).min(d_end);
                            self.record_trace_until(dc);
                            self.a *= (-dc / self.tau_m).exp();
                            self.b *= (-dc / self.tau_s).exp();
                            self.t += dc;
                            if d_end.is_finite() {
                                d_end -= dc;
                            }
                            self.out.spikes.push(self.t);
                            if self.opts.record_derivs {
                                self.out.derivs.push(
                                    -self.a / self.tau_m + self.b / self.tau_s,
                                );
                            }
                            self.consider_max(self.theta, self.t, true, false, 0.0);
                            self.a -= self.theta;
                            if let Some(cap) = self.opts.max_out {
                                if self.out.spikes.len() >= cap {
                                    return;
                                }
                            }
                            continue;
                        }
                    }
                }
            }
            // No further crossing in this interval: track the interior
            // maximum if present, then leave.
            if let Some(ds) = d_star {
                if ds > 0.0 && ds < d_end {
                    let v = self.v_at(ds);
                    // V'' at the peak: a/tau_m^2 e - b/tau_s^2 e
                    let curv = self.a / (self.tau_m * self.tau_m) * (-ds / self.tau_m).exp()
                        - self.b / (self.tau_s * self.tau_s) * (-ds / self.tau_s).exp();
                    self.consider_max(v, self.t + ds, false, true, curv);
                }
            }
            break;
        }
    }

    fn stopped(&self) -> bool {
        self.opts
            .max_out
            .is_some_and(|cap| self.out.spikes.len() >= cap)
    }

    fn run(mut self) -> RawSim {
        let n = self.ev.times.len();
        for i in 0..n {
            let te = self.ev.times[i];
            self.span(te - self.t);
            if self.stopped() {
                return self.out;
            }
            // span may have advanced t past output spikes
            let d = te - self.t;
            self.record_trace_until(d);
            self.a *= (-d / self.tau_m).exp();
            self.b *= (-d / self.tau_s).exp();
            self.t = te;
            let dw = self.v0 * self.ev.w[i];
            self.a += dw;
            self.b += dw;
            // Boundary value: same immediately before and after the event.
            self.consider_max(self.a - self.b, self.t, false, false, 0.0);
        }
        // Tail after the last event: crossings and the final decay.
        let horizon = self.opts.horizon.unwrap_or(20.0 * self.tau_m);
        self.span(f64::INFINITY);
        if self.stopped() {
            return self.out;
        }
        self.record_trace_until(horizon);
        self.out
    }
}

pub(crate) fn run_sim(
    ev: &WeightedEvents,
    params: &NeuronParams,
    theta: f64,
    opts: SimOptions,
) -> RawSim {
    Engine::new(ev, params, theta, opts).run()
}

/// Output spike count at threshold `theta`, stopping early at `cap`.
pub(crate) fn count_spikes(
    ev: &WeightedEvents,
    params: &NeuronParams,
    theta: f64,
    cap: usize,
) -> usize {
    run_sim(
        ev,
        params,
        theta,
        SimOptions {
            max_out: Some(cap),
            ..SimOptions::default()
        },
    )
    .spikes
    .len()
}

/// Maximum of the reset-free potential and its time: the tempotron's
/// operating quantity and the first critical threshold.
pub(crate) fn reset_free_max(ev: &WeightedEvents, params: &NeuronParams) -> (f64, f64) {
    let raw = run_sim(ev, params, f64::INFINITY, SimOptions::default());
    (raw.v_max, raw.t_max)
}

pub(crate) fn check_inputs(pattern: &SpikePattern, w: &Weights) -> Result<()> {
    if w.len() != pattern.n_afferents {
        return Err(Error::InvalidParameter(format!(
            "weight length {} != afferent count {}",
            w.len(),
            pattern.n_afferents
        )));
    }
    if !w.all_finite() {
        return Err(Error::NonFiniteWeights);
    }
    Ok(())
}

/// Event-driven simulation of the full multi-spike dynamics. The optional
/// trace samples the voltage every 0.1 ms for plotting only.
pub fn simulate(
    pattern: &SpikePattern,
    w: &Weights,
    params: &NeuronParams,
    record_trace: bool,
) -> Result<SimResult> {
    check_inputs(pattern, w)?;
    let ev = EventTimeline::from_pattern(pattern).weighted(w);
    let raw = run_sim(
        &ev,
        params,
        params.threshold,
        SimOptions {
            trace_dt: record_trace.then_some(1e-4),
            horizon: record_trace.then(|| pattern.duration + 5.0 * params.tau_m_s()),
            ..SimOptions::default()
        },
    );
    Ok(SimResult {
        output_spikes: raw.spikes,
        v_max: raw.v_max,
        t_max: raw.t_max,
        trace: record_trace.then_some(raw.trace),
    })
}

/// Reset-free maximal potential and its time (tempotron decision variable).
pub fn simulate_reset_free(
    pattern: &SpikePattern,
    w: &Weights,
    params: &NeuronParams,
) -> Result<(f64, f64)> {
    check_inputs(pattern, w)?;
    let ev = EventTimeline::from_pattern(pattern).weighted(w);
    Ok(reset_free_max(&ev, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns;
    use approx::assert_abs_diff_eq;

    fn single_spike_pattern(t: f64) -> SpikePattern {
        SpikePattern::from_events(1, [(0usize, t)], t.max(0.5))
    }

    #[test]
    fn kernel_zero_peak_and_decay() {
        let p = NeuronParams::synthetic(1.0);
        assert_eq!(psp_kernel(0.0, &p), 0.0);
        assert_eq!(psp_kernel(-3.0, &p), 0.0);
        assert_abs_diff_eq!(p.t_peak(), 9.2419624074, epsilon = 1e-9);
        assert_abs_diff_eq!(psp_kernel(p.t_peak(), &p), 1.0, epsilon = 1e-12);
        assert!(psp_kernel(10.0 * p.tau_m, &p) < 1e-4);
    }

    #[test]
    fn empty_pattern() {
        let p = NeuronParams::synthetic(1.0);
        let pat = SpikePattern::empty(3, 0.5);
        let r = simulate(&pat, &Weights::zeros(3), &p, false).unwrap();
        assert_eq!(r.n_out(), 0);
        assert_eq!(r.v_max, 0.0);
        assert_eq!(r.t_max, 0.0);
    }

    #[test]
    fn subthreshold_peak_at_kernel_peak() {
        let p = NeuronParams::synthetic(2.0);
        let pat = single_spike_pattern(0.1);
        let r = simulate(&pat, &Weights(vec![1.0]), &p, false).unwrap();
        assert_eq!(r.n_out(), 0);
        assert_abs_diff_eq!(r.v_max, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.t_max, 0.1 + p.t_peak() * 1e-3, epsilon = 1e-9);
    }

    #[test]
    fn suprathreshold_fires_and_time_shifts() {
        let p = NeuronParams::synthetic(0.5);
        let pat = single_spike_pattern(0.1);
        let r = simulate(&pat, &Weights(vec![1.0]), &p, false).unwrap();
        assert!(r.n_out() >= 1);
        let shifted = single_spike_pattern(0.35);
        let r2 = simulate(&shifted, &Weights(vec![1.0]), &p, false).unwrap();
        assert_eq!(r.n_out(), r2.n_out());
        for (a, b) in r.output_spikes.iter().zip(&r2.output_spikes) {
            assert_abs_diff_eq!(b - a, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn count_monotone_in_threshold() {
        let pat = patterns::poisson_pattern(20, 10.0, 0.4, 77);
        let mut rng = crate::rng::rng_from(3);
        let w = Weights::gaussian(20, 0.2, 0.1, &mut rng);
        let mut prev = usize::MAX;
        for i in 1..=40 {
            let theta = 0.05 * i as f64;
            let p = NeuronParams::synthetic(theta);
            let n = simulate(&pat, &w, &p, false).unwrap().n_out();
            assert!(n <= prev, "count increased from {prev} to {n} at theta {theta}");
            prev = n;
        }
    }

    #[test]
    fn linearity_below_threshold_matches_double_sum() {
        let pat = patterns::poisson_pattern(10, 8.0, 0.3, 5);
        let mut rng = crate::rng::rng_from(9);
        let w = Weights::gaussian(10, 0.05, 0.02, &mut rng);
        // Unreachable threshold: the trace is the raw double sum.
        let p = NeuronParams::new(20.0, 5.0, 1e12).unwrap();
        let r = simulate(&pat, &w, &p, true).unwrap();
        for &(t, v) in r.trace.as_ref().unwrap().iter().step_by(7) {
            let direct: f64 = (0..10)
                .map(|i| {
                    pat.spikes[i]
                        .iter()
                        .map(|&ts| w[i] * psp_kernel((t - ts) * 1e3, &p))
                        .sum::<f64>()
                })
                .sum();
            assert_abs_diff_eq!(v, direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn reset_free_equals_huge_threshold_sim() {
        let pat = patterns::poisson_pattern(15, 10.0, 0.3, 21);
        let mut rng = crate::rng::rng_from(4);
        let w = Weights::gaussian(15, 0.1, 0.05, &mut rng);
        let p = NeuronParams::synthetic(1.0);
        let (vmax, tmax) = simulate_reset_free(&pat, &w, &p).unwrap();
        let r = simulate(&pat, &w, &NeuronParams::new(20.0, 5.0, 1e12).unwrap(), false).unwrap();
        assert_abs_diff_eq!(vmax, r.v_max, epsilon = 1e-12);
        assert_abs_diff_eq!(tmax, r.t_max, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_weights_error() {
        let pat = single_spike_pattern(0.1);
        let p = NeuronParams::synthetic(1.0);
        assert!(matches!(
            simulate(&pat, &Weights(vec![f64::NAN]), &p, false),
            Err(Error::NonFiniteWeights)
        ));
    }
}
