use std::io::Write;

use serde::{Deserialize, Serialize};

use super::channel::{HHParams, LIFParams};
use super::hh::{hh_step_in_place, NeuronState};
use super::lif::lif_step_in_place;
use crate::error::{Error, Result};

/// A point-neuron model the simulator can iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PointModel {
    Hh(HHParams),
    Lif(LIFParams),
}

impl PointModel {
    pub fn dt(&self) -> f64 {
        match self {
            PointModel::Hh(p) => p.dt,
            PointModel::Lif(p) => p.dt,
        }
    }

    pub fn resting_state(&self, n: usize) -> NeuronState {
        match self {
            PointModel::Hh(p) => NeuronState::resting(p, n),
            PointModel::Lif(p) => NeuronState::gateless(vec![p.v_reset; n]),
        }
    }

    /// Same neuron with kinetics slowed by `factor` relative to the sampling
    /// clock: each step advances the dynamics by `dt / factor`.
    pub fn time_scaled(&self, factor: f64) -> PointModel {
        let mut m = self.clone();
        match &mut m {
            PointModel::Hh(p) => p.dt /= factor,
            PointModel::Lif(p) => p.dt /= factor,
        }
        m
    }

    pub fn step_in_place(
        &self,
        state: &mut NeuronState,
        input: &[f64],
        spikes: &mut [bool],
    ) -> Result<()> {
        match self {
            PointModel::Hh(p) => hh_step_in_place(state, input, p, spikes),
            PointModel::Lif(p) => lif_step_in_place(state, input, p, spikes),
        }
    }
}

/// Time-major record of a simulation. Entry `k` holds the state after step
/// `k`, i.e. at `t = (k + 1) * dt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub v: Vec<Vec<f64>>,
    pub spikes: Vec<Vec<bool>>,
    pub dt: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn neurons(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    pub fn spike_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.neurons()];
        for row in &self.spikes {
            for (c, &s) in counts.iter_mut().zip(row) {
                *c += s as usize;
            }
        }
        counts
    }

    /// Spike times of neuron `n`, ms.
    pub fn spike_times(&self, n: usize) -> Vec<f64> {
        self.spikes
            .iter()
            .enumerate()
            .filter(|(_, row)| row[n])
            .map(|(k, _)| (k + 1) as f64 * self.dt)
            .collect()
    }

    pub fn voltage_of(&self, n: usize) -> Vec<f64> {
        self.v.iter().map(|row| row[n]).collect()
    }

    /// CSV with columns `t_ms,neuron_id,v_mV,spike`, one row per (step, neuron).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_ms,neuron_id,v_mV,spike")?;
        for (k, (vrow, srow)) in self.v.iter().zip(&self.spikes).enumerate() {
            let t = (k + 1) as f64 * self.dt;
            for (n, (v, s)) in vrow.iter().zip(srow).enumerate() {
                writeln!(out, "{t:.6},{n},{v:.9},{}", *s as u8)?;
            }
        }
        Ok(())
    }
}

/// Iterates `model` over a time-major input series starting from `state0`.
pub fn simulate(model: &PointModel, inputs: &[Vec<f64>], state0: &NeuronState) -> Result<Trace> {
    let mut state = state0.clone();
    let n = state.len();
    let mut trace = Trace {
        v: Vec::with_capacity(inputs.len()),
        spikes: Vec::with_capacity(inputs.len()),
        dt: model.dt(),
    };
    for (k, input) in inputs.iter().enumerate() {
        if input.len() != n {
            return Err(Error::Usage(format!(
                "input row {k} has {} entries for {n} neurons",
                input.len()
            )));
        }
        let mut spikes = vec![false; n];
        model.step_in_place(&mut state, input, &mut spikes)?;
        trace.v.push(state.v.clone());
        trace.spikes.push(spikes);
    }
    Ok(trace)
}

/// `amplitude * sin(2 pi f t)` sampled at `t = k * dt` for `steps` steps.
/// `freq_hz` is in Hz, `dt` in ms.
pub fn sinusoid(freq_hz: f64, amplitude: f64, steps: usize, dt: f64) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI * freq_hz * 1e-3;
    (0..steps)
        .map(|k| amplitude * (w * k as f64 * dt).sin())
        .collect()
}

/// Coefficient of variation of inter-spike intervals, or `None` with fewer
/// than two intervals.
pub fn isi_cv(spike_times: &[f64]) -> Option<f64> {
    if spike_times.len() < 3 {
        return None;
    }
    let isis: Vec<f64> = spike_times.windows(2).map(|w| w[1] - w[0]).collect();
    let m = isis.iter().sum::<f64>() / isis.len() as f64;
    let var = isis.iter().map(|x| (x - m).powi(2)).sum::<f64>() / isis.len() as f64;
    Some(var.sqrt() / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_empty_trace() {
        let m = PointModel::Hh(HHParams::default());
        let t = simulate(&m, &[], &m.resting_state(4)).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.spike_counts(), Vec::<usize>::new());
    }

    #[test]
    fn csv_has_one_row_per_step_and_neuron() {
        let m = PointModel::Hh(HHParams::default());
        let inputs = vec![vec![0.0, 5.0]; 7];
        let t = simulate(&m, &inputs, &m.resting_state(2)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_ms,neuron_id,v_mV,spike"));
        assert_eq!(lines.count(), 14);
    }

    #[test]
    fn isi_cv_of_regular_train_is_zero() {
        assert_eq!(isi_cv(&[1.0, 2.0, 3.0, 4.0]), Some(0.0));
        assert_eq!(isi_cv(&[1.0, 2.0]), None);
    }
}
