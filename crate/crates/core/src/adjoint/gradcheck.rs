//! Adjoint gradients against central finite differences.

use serde::{Deserialize, Serialize};

use super::bptt::{backward_through_time, forward_checkpointed, LossSeeds};
use super::checkpoint::CheckpointPlan;
use super::step::Differentiable;
use super::surrogate::SurrogateSpec;
use crate::dynamics::{HHParams, NeuronState};
use crate::error::Result;

/// Stencil step balancing truncation against roundoff for chains of up to a
/// few hundred steps.
pub const DEFAULT_FD_STEP: f64 = 3e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub quantity: String,
    pub adjoint: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }
}

/// Discrepancies at or below this magnitude count as agreement.
pub const FD_ABS_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|)`, or 0 when `|a - b| <= FD_ABS_FLOOR`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d <= FD_ABS_FLOOR {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Loss `sum_t sum_n weights[t][n] * V_t[n]` after running `inputs`.
pub fn potential_loss<M: Differentiable>(
    model: &M,
    state0: &NeuronState,
    inputs: &[Vec<f64>],
    weights: &[Vec<f64>],
) -> Result<f64> {
    let mut s = state0.clone();
    let mut spikes = vec![false; s.len()];
    let mut loss = 0.0;
    for (x, w) in inputs.iter().zip(weights) {
        model.forward(&mut s, x, &mut spikes)?;
        loss += s.v.iter().zip(w).map(|(v, w)| v * w).sum::<f64>();
    }
    Ok(loss)
}

/// Checks input, initial-potential and parameter gradients of an HH chain
/// under [`potential_loss`].
pub fn grad_check_hh(
    params: &HHParams,
    state0: &NeuronState,
    inputs: &[Vec<f64>],
    weights: &[Vec<f64>],
    h: f64,
) -> Result<GradCheckReport> {
    let fwd = forward_checkpointed(
        params,
        state0,
        inputs,
        &CheckpointPlan::full_storage(inputs.len()),
    )?;
    let seeds = LossSeeds::potential(weights.to_vec());
    let grads = backward_through_time(params, fwd, inputs, &seeds, &SurrogateSpec::default())?;

    // sixth-order central stencil; `eval(s)` evaluates the loss at offset s*h
    let stencil = |eval: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let d1 = eval(1.0)? - eval(-1.0)?;
        let d2 = eval(2.0)? - eval(-2.0)?;
        let d3 = eval(3.0)? - eval(-3.0)?;
        Ok((45.0 * d1 - 9.0 * d2 + d3) / (60.0 * h))
    };
    let mut raw = Vec::new();
    for t in 0..inputs.len() {
        for n in 0..state0.len() {
            let fd = stencil(&|s| {
                let mut x = inputs.to_vec();
                x[t][n] += s * h;
                potential_loss(params, state0, &x, weights)
            })?;
            raw.push((format!("i_ext[{t}][{n}]"), grads.d_inputs[t][n], fd));
        }
    }
    for n in 0..state0.len() {
        let fd = stencil(&|s| {
            let mut s0 = state0.clone();
            s0.v[n] += s * h;
            potential_loss(params, &s0, inputs, weights)
        })?;
        raw.push((format!("v0[{n}]"), grads.d_state0.d_v[n], fd));
    }
    let fd = stencil(&|s| {
        let mut p = params.clone();
        p.c_m += s * h;
        potential_loss(&p, state0, inputs, weights)
    })?;
    raw.push(("c_m".into(), grads.d_params()[0], fd));
    for c in 0..params.channels.len() {
        let fd = stencil(&|s| {
            let mut p = params.clone();
            p.channels[c].g_max += s * h;
            potential_loss(&p, state0, inputs, weights)
        })?;
        raw.push((
            format!("g_max.{}", params.channels[c].name),
            grads.d_params()[1 + c],
            fd,
        ));
    }

    Ok(GradCheckReport {
        entries: raw
            .into_iter()
            .map(|(quantity, adjoint, numeric)| GradCheckEntry {
                rel_error: relative_error(adjoint, numeric),
                quantity,
                adjoint,
                numeric,
            })
            .collect(),
    })
}
