//! Stimulus-response probes built on [`simulate`].

use super::channel::HHParams;
use super::trace::{simulate, sinusoid, PointModel};
use crate::error::{Error, Result};

/// Spike times (ms) of one neuron driven by `amplitude * sin(2 pi f t)`.
///
/// The drive is sampled on the model's own `dt`; `time_scale` slows the
/// kinetics by that factor (see [`PointModel::time_scaled`]).
pub fn sine_spike_times(
    model: &PointModel,
    time_scale: f64,
    freq_hz: f64,
    amplitude: f64,
    duration_ms: f64,
) -> Result<Vec<f64>> {
    if !(time_scale > 0.0) {
        return Err(Error::Config(format!(
            "time scale must be > 0, got {time_scale}"
        )));
    }
    let dt = model.dt();
    let steps = (duration_ms / dt).round() as usize;
    let inputs: Vec<Vec<f64>> = sinusoid(freq_hz, amplitude, steps, dt)
        .into_iter()
        .map(|x| vec![x])
        .collect();
    let scaled = model.time_scaled(time_scale);
    let trace = simulate(&scaled, &inputs, &scaled.resting_state(1))?;
    Ok(trace
        .spikes
        .iter()
        .enumerate()
        .filter(|(_, s)| s[0])
        .map(|(k, _)| (k + 1) as f64 * dt)
        .collect())
}

/// Single-neuron firing rate (Hz) under a sinusoidal drive.
pub fn sine_response_rate(
    model: &PointModel,
    freq_hz: f64,
    amplitude: f64,
    duration_ms: f64,
) -> Result<f64> {
    let n = sine_spike_times(model, 1.0, freq_hz, amplitude, duration_ms)?.len();
    Ok(n as f64 / (duration_ms * 1e-3))
}

/// Lowest and highest frequency of `freqs` that evoke at least one spike.
pub fn firing_band(
    model: &PointModel,
    time_scale: f64,
    amplitude: f64,
    freqs: &[f64],
    duration_ms: f64,
) -> Result<Option<(f64, f64)>> {
    let mut band: Option<(f64, f64)> = None;
    for &f in freqs {
        if !sine_spike_times(model, time_scale, f, amplitude, duration_ms)?.is_empty() {
            band = Some(match band {
                None => (f, f),
                Some((lo, hi)) => (lo.min(f), hi.max(f)),
            });
        }
    }
    Ok(band)
}

/// Spike counts with and without a step perturbation.
///
/// The neuron first settles for `settle_ms` under `baseline`; spikes are then
/// counted over `window_ms` with the drive held at `baseline` and, in a second
/// run, stepped to `baseline + delta`.
pub fn step_perturbation_counts(
    params: &HHParams,
    baseline: f64,
    delta: f64,
    settle_ms: f64,
    window_ms: f64,
) -> Result<(usize, usize)> {
    let model = PointModel::Hh(params.clone());
    let settle = (settle_ms / params.dt).round() as usize;
    let window = (window_ms / params.dt).round() as usize;
    let count = |level: f64| -> Result<usize> {
        let mut inputs = vec![vec![baseline]; settle];
        inputs.extend(std::iter::repeat_n(vec![level], window));
        let trace = simulate(&model, &inputs, &model.resting_state(1))?;
        Ok(trace.spikes[settle..].iter().filter(|s| s[0]).count())
    };
    Ok((count(baseline)?, count(baseline + delta)?))
}
