//! Shared oracles for the integration suites.

use spikesound_core::encoding::SpikePattern;
use spikesound_core::neuron::{NeuronParams, Weights};

/// Fixed-step reference simulation of the multi-spike dynamics.
///
/// Input spikes are applied at their exact times (decaying the two synaptic
/// accumulators analytically up to each event), threshold crossings are
/// detected by scanning the fixed grid, and each detected crossing is
/// localized by linear interpolation between the two bracketing grid
/// samples. This shares the model's algebra with the event-driven engine
/// but none of its decision logic (no root finding, no interval analysis),
/// so it serves as an independent oracle for spike counts and times.
pub fn dense_grid_sim(
    pattern: &SpikePattern,
    w: &Weights,
    params: &NeuronParams,
    theta: f64,
    dt: f64,
    t_end: f64,
) -> Vec<f64> {
    let tau_m = params.tau_m * 1e-3;
    let tau_s = params.tau_s * 1e-3;
    let v0 = params.v0();

    let mut events: Vec<(f64, f64)> = pattern
        .spikes
        .iter()
        .enumerate()
        .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, v0 * w[i])))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n_steps = (t_end / dt).ceil() as usize;
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut t_state = 0.0f64;
    let mut v_prev = 0.0f64;
    let mut next_event = 0usize;
    let mut spikes = Vec::new();
    for step in 1..=n_steps {
        let t_grid = step as f64 * dt;
        while next_event < events.len() && events[next_event].0 <= t_grid {
            let (te, we) = events[next_event];
            let d = te - t_state;
            a *= (-d / tau_m).exp();
            b *= (-d / tau_s).exp();
            a += we;
            b += we;
            t_state = te;
            next_event += 1;
        }
        let d = t_grid - t_state;
        a *= (-d / tau_m).exp();
        b *= (-d / tau_s).exp();
        t_state = t_grid;
        let mut first_in_step = true;
        while a - b >= theta {
            let v_now = a - b;
            let t_cross = if first_in_step && v_now > v_prev {
                let f = ((theta - v_prev) / (v_now - v_prev)).clamp(0.0, 1.0);
                t_grid - dt + f * dt
            } else {
                t_grid
            };
            spikes.push(t_cross);
            // reset decayed from the localized crossing to the grid point
            a -= theta * (-(t_grid - t_cross) / tau_m).exp();
            first_in_step = false;
        }
        v_prev = a - b;
    }
    spikes
}
