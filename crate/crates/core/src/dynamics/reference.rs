//! Unfused multi-pass HH step.
//!
//! Each stage materializes full-batch buffers (rates, steady states, per-gate
//! powers, per-channel currents) the way a tensor framework evaluates the
//! update op by op. Used as an oracle for the fused step and as the baseline
//! of the throughput benchmark.

use super::channel::HHParams;
use super::hh::NeuronState;
use crate::error::{Error, Result};

pub fn hh_step_naive(
    state: &NeuronState,
    i_ext: &[f64],
    params: &HHParams,
) -> Result<(NeuronState, Vec<bool>)> {
    state.check_layout(params)?;
    let n = state.v.len();
    if i_ext.len() != n {
        return Err(Error::Usage("input length mismatch".into()));
    }
    let gates: Vec<_> = params.gates().collect();

    let alphas: Vec<Vec<f64>> = gates
        .iter()
        .map(|g| state.v.iter().map(|&v| g.alpha.eval(v)).collect())
        .collect();
    let betas: Vec<Vec<f64>> = gates
        .iter()
        .map(|g| state.v.iter().map(|&v| g.beta.eval(v)).collect())
        .collect();
    let rate_sums: Vec<Vec<f64>> = alphas
        .iter()
        .zip(&betas)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    let p_infs: Vec<Vec<f64>> = alphas
        .iter()
        .zip(&rate_sums)
        .map(|(a, s)| {
            a.iter()
                .zip(s)
                .map(|(x, y)| if *y == 0.0 { 0.0 } else { x / y })
                .collect()
        })
        .collect();
    let decays: Vec<Vec<f64>> = rate_sums
        .iter()
        .map(|s| s.iter().map(|y| (-params.dt * y).exp()).collect())
        .collect();
    let powered: Vec<Vec<f64>> = gates
        .iter()
        .zip(&state.gates)
        .map(|(g, p)| p.iter().map(|x| x.powi(g.exponent as i32)).collect())
        .collect();

    let mut channel_currents: Vec<Vec<f64>> = Vec::with_capacity(params.channels.len());
    let mut offset = 0;
    for ch in &params.channels {
        let mut eta = vec![1.0; n];
        for k in 0..ch.gates.len() {
            for (e, p) in eta.iter_mut().zip(&powered[offset + k]) {
                *e *= p;
            }
        }
        let cur: Vec<f64> = eta
            .iter()
            .zip(&state.v)
            .map(|(e, v)| ch.g_max * e * (v - ch.e_rev))
            .collect();
        channel_currents.push(cur);
        offset += ch.gates.len();
    }
    let mut i_ion = vec![0.0; n];
    for cur in &channel_currents {
        for (acc, c) in i_ion.iter_mut().zip(cur) {
            *acc += c;
        }
    }

    let new_gates: Vec<Vec<f64>> = (0..gates.len())
        .map(|g| {
            (0..n)
                .map(|i| {
                    if rate_sums[g][i] == 0.0 {
                        state.gates[g][i]
                    } else {
                        let pi = p_infs[g][i];
                        (pi + (state.gates[g][i] - pi) * decays[g][i]).clamp(0.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    let k = params.dt / params.c_m;
    let v_new: Vec<f64> = (0..n)
        .map(|i| state.v[i] + k * (i_ext[i] - i_ion[i]))
        .collect();
    let spikes = state
        .v
        .iter()
        .zip(&v_new)
        .map(|(&a, &b)| a < params.v_theta && params.v_theta <= b)
        .collect();
    if v_new.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalOverflow {
            step: state.step,
            what: "membrane potential".into(),
        });
    }
    Ok((
        NeuronState {
            v: v_new,
            gates: new_gates,
            step: state.step + 1,
        },
        spikes,
    ))
}
