//! Backpropagation through time with segment recomputation.

use serde::{Deserialize, Serialize};

use super::checkpoint::CheckpointPlan;
use super::step::{AdjointState, Differentiable};
use super::surrogate::SurrogateSpec;
use crate::dynamics::NeuronState;
use crate::error::{Error, Result};

/// Instrumentation collected over a forward/backward pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeStats {
    /// Forward step evaluations, including recomputation.
    pub forward_steps: usize,
    /// Largest number of [`NeuronState`]s held at once.
    pub peak_live_states: usize,
}

#[derive(Debug, Default)]
struct StateCounter {
    live: usize,
    peak: usize,
}

impl StateCounter {
    fn add(&mut self) {
        self.live += 1;
        self.peak = self.peak.max(self.live);
    }

    fn remove(&mut self) {
        self.live -= 1;
    }
}

/// Outputs of a checkpointed forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub plan: CheckpointPlan,
    checkpoints: Vec<NeuronState>,
    /// Potential after each step, `[T][N]`.
    pub v: Vec<Vec<f64>>,
    pub spikes: Vec<Vec<bool>>,
    pub stats: TapeStats,
    counter_live: usize,
}

/// Per-step loss gradients: `d_v[t]` is dL/dV after step `t`; `d_spike[t]`
/// seeds the spike outputs of step `t`.
#[derive(Debug, Clone, Default)]
pub struct LossSeeds {
    pub d_v: Vec<Vec<f64>>,
    pub d_spike: Option<Vec<Vec<f64>>>,
}

impl LossSeeds {
    pub fn potential(d_v: Vec<Vec<f64>>) -> Self {
        LossSeeds { d_v, d_spike: None }
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// dL/dI for every step and neuron.
    pub d_inputs: Vec<Vec<f64>>,
    /// Gradient w.r.t. the initial state; `d_params` holds the parameter
    /// gradients.
    pub d_state0: AdjointState,
    pub stats: TapeStats,
}

impl Gradients {
    pub fn d_params(&self) -> &[f64] {
        &self.d_state0.d_params
    }
}

pub fn forward_checkpointed<M: Differentiable>(
    model: &M,
    state0: &NeuronState,
    inputs: &[Vec<f64>],
    plan: &CheckpointPlan,
) -> Result<ForwardPass> {
    if plan.total_steps != inputs.len() {
        return Err(Error::Usage(format!(
            "plan covers {} steps, input has {}",
            plan.total_steps,
            inputs.len()
        )));
    }
    let n = state0.len();
    let mut counter = StateCounter::default();
    let mut checkpoints = Vec::with_capacity(plan.stored_indices.len());
    let mut state = state0.clone();
    let mut spikes = vec![false; n];
    let mut v = Vec::with_capacity(inputs.len());
    let mut spike_rec = Vec::with_capacity(inputs.len());
    let mut next_cp = plan.stored_indices.iter().peekable();
    let mut forward_steps = 0;
    for (t, input) in inputs.iter().enumerate() {
        if next_cp.peek() == Some(&&t) {
            next_cp.next();
            checkpoints.push(state.clone());
            counter.add();
        }
        model.forward(&mut state, input, &mut spikes)?;
        forward_steps += 1;
        v.push(state.v.clone());
        spike_rec.push(spikes.clone());
    }
    Ok(ForwardPass {
        plan: plan.clone(),
        checkpoints,
        v,
        spikes: spike_rec,
        stats: TapeStats {
            forward_steps,
            peak_live_states: counter.peak,
        },
        counter_live: counter.live,
    })
}

fn check_seeds(seeds: &LossSeeds, steps: usize, n: usize) -> Result<()> {
    let bad_rows = |rows: &Vec<Vec<f64>>| rows.len() != steps || rows.iter().any(|r| r.len() != n);
    if bad_rows(&seeds.d_v) {
        return Err(Error::Usage(format!(
            "loss seed series must be {steps} x {n}, got {} rows",
            seeds.d_v.len()
        )));
    }
    if let Some(ds) = &seeds.d_spike {
        if bad_rows(ds) {
            return Err(Error::Usage("spike seed series has the wrong shape".into()));
        }
    }
    Ok(())
}

/// Reverse sweep over a [`ForwardPass`], recomputing each segment from its
/// checkpoint.
pub fn backward_through_time<M: Differentiable>(
    model: &M,
    forward: ForwardPass,
    inputs: &[Vec<f64>],
    seeds: &LossSeeds,
    surrogate: &SurrogateSpec,
) -> Result<Gradients> {
    let steps = forward.plan.total_steps;
    if inputs.len() != steps {
        return Err(Error::Usage(
            "input series does not match forward pass".into(),
        ));
    }
    let n = forward.v.first().map_or(0, Vec::len);
    check_seeds(seeds, steps, n)?;

    let ForwardPass {
        plan,
        mut checkpoints,
        stats,
        counter_live,
        ..
    } = forward;
    let mut counter = StateCounter {
        live: counter_live,
        peak: stats.peak_live_states,
    };
    let mut forward_steps = stats.forward_steps;
    let neurons = checkpoints.first().map_or(0, NeuronState::len);
    let mut adj = model.zero_adjoint(neurons);
    let mut d_inputs = vec![vec![0.0; neurons]; steps];
    let mut scratch_spikes = vec![false; neurons];

    for (start, end) in plan.segments().rev() {
        if start >= end {
            continue;
        }
        let first = checkpoints
            .pop()
            .ok_or_else(|| Error::Usage("forward pass is missing checkpoints".into()))?;
        let mut buffer = Vec::with_capacity(end - start);
        buffer.push(first);
        for input in &inputs[start..end - 1] {
            let mut next = buffer.last().expect("nonempty").clone();
            model.forward(&mut next, input, &mut scratch_spikes)?;
            forward_steps += 1;
            buffer.push(next);
            counter.add();
        }
        for t in (start..end).rev() {
            for (a, s) in adj.d_v.iter_mut().zip(&seeds.d_v[t]) {
                *a += s;
            }
            let state_in = buffer.pop().expect("segment state");
            let d_spike = seeds.d_spike.as_ref().map(|ds| ds[t].as_slice());
            model.backward(
                &state_in,
                &inputs[t],
                &mut adj,
                d_spike,
                surrogate,
                &mut d_inputs[t],
            )?;
            counter.remove();
        }
    }

    Ok(Gradients {
        d_inputs,
        d_state0: adj,
        stats: TapeStats {
            forward_steps,
            peak_live_states: counter.peak,
        },
    })
}
