//! Fused Hodgkin–Huxley state update.
//!
//! One step advances every neuron in a batch:
//!
//! ```text
//! I_ion = sum_X g_X * prod_i p_i^k_i * (V - E_X)
//! p'    = p_inf + (p - p_inf) * exp(-dt * (alpha + beta))     (exponential Euler, V pre-update)
//! V'    = V + dt / C_m * (I_ext - I_ion)                      (explicit Euler)
//! ```
//!
//! The fused path visits each neuron once and keeps every intermediate in
//! registers; [`super::reference`] holds the multi-pass formulation used as an
//! oracle and benchmark baseline.

use serde::{Deserialize, Serialize};

use super::channel::{ChannelSpec, HHParams};
use crate::error::{Error, Result};

/// Potentials and gating variables for a batch of neurons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    /// Membrane potential per neuron, mV.
    pub v: Vec<f64>,
    /// `gates[g][n]`: open probability of gate `g` (layout order of
    /// [`HHParams::gates`]) for neuron `n`.
    pub gates: Vec<Vec<f64>>,
    /// Number of steps taken since initialization.
    pub step: usize,
}

impl NeuronState {
    /// All neurons at `v_rest` with gates at their steady state.
    pub fn resting(params: &HHParams, n: usize) -> Self {
        Self::at_potential(params, &vec![params.v_rest; n])
    }

    /// Neurons at the given potentials with gates at the matching steady state.
    pub fn at_potential(params: &HHParams, v: &[f64]) -> Self {
        let gates = params
            .gates()
            .map(|g| v.iter().map(|&vi| g.steady_state(vi)).collect())
            .collect();
        NeuronState {
            v: v.to_vec(),
            gates,
            step: 0,
        }
    }

    /// State without gating variables (LIF).
    pub fn gateless(v: Vec<f64>) -> Self {
        NeuronState {
            v,
            gates: Vec::new(),
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn check_layout(&self, params: &HHParams) -> Result<()> {
        let expected = params.gate_count();
        if self.gates.len() != expected {
            return Err(Error::Config(format!(
                "state has {} gate vectors, channel set expects {expected}",
                self.gates.len()
            )));
        }
        if let Some(g) = self.gates.iter().find(|g| g.len() != self.v.len()) {
            return Err(Error::Config(format!(
                "gate vector length {} does not match {} neurons",
                g.len(),
                self.v.len()
            )));
        }
        Ok(())
    }
}

/// Exponential-Euler update of one gating variable.
///
/// Returns `p_inf + (p - p_inf) * exp(-dt * (alpha + beta))`, or `p`
/// unchanged when both rates vanish.
#[inline]
pub fn gate_step(p: f64, alpha: f64, beta: f64, dt: f64) -> f64 {
    let s = alpha + beta;
    if s == 0.0 {
        return p;
    }
    let p_inf = alpha / s;
    (p_inf + (p - p_inf) * (-dt * s).exp()).clamp(0.0, 1.0)
}

/// Upward threshold crossing: `v_prev < v_theta <= v_new`.
#[inline]
pub fn spike_detect(v_prev: f64, v_new: f64, v_theta: f64) -> bool {
    v_prev < v_theta && v_theta <= v_new
}

/// Open probability `prod p_i^k_i` of `channel` for neuron `n`, reading its
/// gates starting at `offset`.
#[inline]
fn open_fraction(channel: &ChannelSpec, gates: &[Vec<f64>], offset: usize, n: usize) -> f64 {
    let mut eta = 1.0;
    for (k, g) in channel.gates.iter().enumerate() {
        eta *= gates[offset + k][n].powi(g.exponent as i32);
    }
    eta
}

/// Total ionic current `sum_X g_X eta_X (V - E_X)` per neuron (uA/cm^2,
/// outward positive).
pub fn ionic_current(state: &NeuronState, channels: &[ChannelSpec]) -> Result<Vec<f64>> {
    let expected: usize = channels.iter().map(|c| c.gates.len()).sum();
    if state.gates.len() != expected || state.gates.iter().any(|g| g.len() != state.v.len()) {
        return Err(Error::Config(format!(
            "gate layout mismatch: state has {} gate vectors, channels expect {expected}",
            state.gates.len()
        )));
    }
    Ok((0..state.v.len())
        .map(|n| ionic_current_at(state, channels, n))
        .collect())
}

#[inline]
fn ionic_current_at(state: &NeuronState, channels: &[ChannelSpec], n: usize) -> f64 {
    let v = state.v[n];
    let mut offset = 0;
    let mut total = 0.0;
    for ch in channels {
        let eta = open_fraction(ch, &state.gates, offset, n);
        total += ch.g_max * eta * (v - ch.e_rev);
        offset += ch.gates.len();
    }
    total
}

/// Advances `state` by one step in place. `spikes[n]` receives the threshold
/// crossing flag of neuron `n`.
pub fn hh_step_in_place(
    state: &mut NeuronState,
    i_ext: &[f64],
    params: &HHParams,
    spikes: &mut [bool],
) -> Result<()> {
    let n = state.v.len();
    if i_ext.len() != n || spikes.len() != n {
        return Err(Error::Usage(format!(
            "input length {} / spike buffer {} for {n} neurons",
            i_ext.len(),
            spikes.len()
        )));
    }
    state.check_layout(params)?;
    let dt = params.dt;
    let k = dt / params.c_m;
    let step = state.step;
    for i in 0..n {
        let v = state.v[i];
        let mut i_ion = 0.0;
        let mut offset = 0;
        for ch in &params.channels {
            let mut eta = 1.0;
            for (j, g) in ch.gates.iter().enumerate() {
                let p = state.gates[offset + j][i];
                eta *= p.powi(g.exponent as i32);
            }
            i_ion += ch.g_max * eta * (v - ch.e_rev);
            for (j, g) in ch.gates.iter().enumerate() {
                let slot = &mut state.gates[offset + j][i];
                let (a, b) = g.rates(v);
                *slot = gate_step(*slot, a, b, dt);
                if !slot.is_finite() {
                    return Err(Error::NumericalOverflow {
                        step,
                        what: format!("gate {}.{} of neuron {i}", ch.name, g.name),
                    });
                }
            }
            offset += ch.gates.len();
        }
        let v_new = v + k * (i_ext[i] - i_ion);
        if !v_new.is_finite() {
            return Err(Error::NumericalOverflow {
                step,
                what: format!("membrane potential of neuron {i}"),
            });
        }
        state.v[i] = v_new;
        spikes[i] = spike_detect(v, v_new, params.v_theta);
    }
    state.step += 1;
    Ok(())
}

/// Functional form of [`hh_step_in_place`].
pub fn hh_step(
    state: &NeuronState,
    i_ext: &[f64],
    params: &HHParams,
) -> Result<(NeuronState, Vec<bool>)> {
    let mut next = state.clone();
    let mut spikes = vec![false; state.len()];
    hh_step_in_place(&mut next, i_ext, params, &mut spikes)?;
    Ok((next, spikes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_step_fixed_point_and_identity_limit() {
        let (a, b) = (0.5, 1.5);
        let p_inf = a / (a + b);
        assert!((gate_step(p_inf, a, b, 0.1) - p_inf).abs() < 1e-16);
        let p = 0.73;
        assert!((gate_step(p, a, b, 1e-12) - p).abs() <= 1e-12);
        assert_eq!(gate_step(0.4, 0.0, 0.0, 0.1), 0.4);
    }

    #[test]
    fn gate_step_worked_example() {
        // p_inf = 0.25, rate sum 2.0
        let expected = 0.25 + (0.2_f64 - 0.25) * (-0.2_f64).exp();
        assert!((gate_step(0.2, 0.5, 1.5, 0.1) - expected).abs() < 1e-15);
    }

    #[test]
    fn leak_current_worked_example() {
        let params = HHParams::leak_only(1.0, 0.3, -54.4, 0.1);
        let state = NeuronState::gateless(vec![-65.0]);
        let i = ionic_current(&state, &params.channels).unwrap();
        assert!((i[0] - (-3.18)).abs() < 1e-12);
    }

    #[test]
    fn zero_conductance_and_reversal_give_zero_current() {
        let p = HHParams::default().passive_zero();
        let s = NeuronState::resting(&p, 3);
        assert!(ionic_current(&s, &p.channels)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));

        let mut p = HHParams::default();
        for c in &mut p.channels {
            c.e_rev = 12.5;
        }
        let s = NeuronState::at_potential(&p, &[12.5]);
        assert_eq!(ionic_current(&s, &p.channels).unwrap()[0], 0.0);
    }

    #[test]
    fn layout_mismatch_is_config_error() {
        let p = HHParams::default();
        let mut s = NeuronState::resting(&p, 2);
        s.gates.pop();
        assert!(matches!(
            ionic_current(&s, &p.channels),
            Err(Error::Config(_))
        ));
        assert!(hh_step(&s, &[0.0, 0.0], &p).is_err());
    }

    #[test]
    fn isolated_membrane_holds_potential() {
        let p = HHParams::default().passive_zero();
        let s = NeuronState::resting(&p, 1);
        let (next, spikes) = hh_step(&s, &[0.0], &p).unwrap();
        assert_eq!(next.v, s.v);
        assert!(!spikes[0]);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn doubling_capacitance_halves_the_voltage_increment() {
        let p1 = HHParams::default();
        let mut p2 = p1.clone();
        p2.c_m *= 2.0;
        let s = NeuronState::at_potential(&p1, &[-60.0]);
        let (a, _) = hh_step(&s, &[7.0], &p1).unwrap();
        let (b, _) = hh_step(&s, &[7.0], &p2).unwrap();
        let dv1 = a.v[0] - s.v[0];
        let dv2 = b.v[0] - s.v[0];
        // exact up to the rounding of V itself
        assert!((dv1 - 2.0 * dv2).abs() <= 4.0 * f64::EPSILON * 60.0);
    }

    #[test]
    fn overflow_names_step() {
        let p = HHParams::default();
        let mut s = NeuronState::resting(&p, 1);
        s.step = 17;
        match hh_step(&s, &[f64::INFINITY], &p) {
            Err(Error::NumericalOverflow { step, .. }) => assert_eq!(step, 17),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn spike_detect_is_upward_only() {
        assert!(!spike_detect(-70.0, -69.0, 0.0));
        assert!(spike_detect(-10.0, 10.0, 0.0));
        assert!(spike_detect(-10.0, 0.0, 0.0));
        assert!(!spike_detect(10.0, -10.0, 0.0));
        assert!(!spike_detect(0.0, 5.0, 0.0));
    }
}
