//! Adjoints of single fused steps.
//!
//! Each backward call re-derives the forward intermediates of its step from
//! the step's input state, so nothing beyond the state itself has to be kept
//! on the tape.

use serde::{Deserialize, Serialize};

use super::surrogate::SurrogateSpec;
use crate::dynamics::{hh_step_in_place, lif_step_in_place, HHParams, LIFParams, NeuronState};
use crate::error::{Error, Result};

/// Gradient of a loss with respect to a [`NeuronState`], plus running
/// parameter-gradient accumulators.
///
/// `d_params` layout: for HH `[c_m, g_max of each channel...]`, for LIF
/// `[tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointState {
    pub d_v: Vec<f64>,
    pub d_gates: Vec<Vec<f64>>,
    pub d_params: Vec<f64>,
}

impl AdjointState {
    pub fn zeros(neurons: usize, gates: usize, params: usize) -> Self {
        AdjointState {
            d_v: vec![0.0; neurons],
            d_gates: vec![vec![0.0; neurons]; gates],
            d_params: vec![0.0; params],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_v.iter().all(|x| x.is_finite())
            && self.d_gates.iter().flatten().all(|x| x.is_finite())
            && self.d_params.iter().all(|x| x.is_finite())
    }
}

/// A recurrent neuron update with a hand-derived adjoint.
pub trait Differentiable {
    fn neuron_gates(&self) -> usize;
    fn param_count(&self) -> usize;
    fn v_theta(&self) -> f64;

    fn zero_adjoint(&self, neurons: usize) -> AdjointState {
        AdjointState::zeros(neurons, self.neuron_gates(), self.param_count())
    }

    fn forward(&self, state: &mut NeuronState, input: &[f64], spikes: &mut [bool]) -> Result<()>;

    /// Replaces `adj` (gradient w.r.t. the step's output state) with the
    /// gradient w.r.t. its input state, accumulates parameter gradients into
    /// `adj.d_params`, and writes the input-current gradient to `d_input`.
    ///
    /// `d_spike` seeds the spike outputs; their derivative with respect to the
    /// new potential is taken from `surrogate`.
    fn backward(
        &self,
        state_in: &NeuronState,
        input: &[f64],
        adj: &mut AdjointState,
        d_spike: Option<&[f64]>,
        surrogate: &SurrogateSpec,
        d_input: &mut [f64],
    ) -> Result<()>;
}

impl Differentiable for HHParams {
    fn neuron_gates(&self) -> usize {
        self.gate_count()
    }

    fn param_count(&self) -> usize {
        1 + self.channels.len()
    }

    fn v_theta(&self) -> f64 {
        self.v_theta
    }

    fn forward(&self, state: &mut NeuronState, input: &[f64], spikes: &mut [bool]) -> Result<()> {
        hh_step_in_place(state, input, self, spikes)
    }

    fn backward(
        &self,
        state_in: &NeuronState,
        input: &[f64],
        adj: &mut AdjointState,
        d_spike: Option<&[f64]>,
        surrogate: &SurrogateSpec,
        d_input: &mut [f64],
    ) -> Result<()> {
        hh_step_backward(self, state_in, input, adj, d_spike, surrogate, d_input)
    }
}

/// Exact adjoint of [`hh_step_in_place`].
pub fn hh_step_backward(
    params: &HHParams,
    state_in: &NeuronState,
    i_ext: &[f64],
    adj: &mut AdjointState,
    d_spike: Option<&[f64]>,
    surrogate: &SurrogateSpec,
    d_input: &mut [f64],
) -> Result<()> {
    let n = state_in.v.len();
    state_in.check_layout(params)?;
    if i_ext.len() != n
        || d_input.len() != n
        || adj.d_v.len() != n
        || adj.d_gates.len() != params.gate_count()
        || adj.d_params.len() != 1 + params.channels.len()
        || d_spike.is_some_and(|s| s.len() != n)
    {
        return Err(Error::Usage("adjoint shape does not match state".into()));
    }
    let dt = params.dt;
    let c_m = params.c_m;
    let k = dt / c_m;
    let max_gates = params
        .channels
        .iter()
        .map(|c| c.gates.len())
        .max()
        .unwrap_or(0);
    // per-channel scratch, reused across neurons
    let mut powered = vec![0.0; max_gates];
    let mut d_eta = vec![0.0; max_gates];

    for i in 0..n {
        let v = state_in.v[i];

        // forward recompute: ionic current and total conductance
        let mut i_ion = 0.0;
        let mut g_total = 0.0;
        let mut offset = 0;
        for ch in &params.channels {
            let mut eta = 1.0;
            for (j, g) in ch.gates.iter().enumerate() {
                eta *= state_in.gates[offset + j][i].powi(g.exponent as i32);
            }
            i_ion += ch.g_max * eta * (v - ch.e_rev);
            g_total += ch.g_max * eta;
            offset += ch.gates.len();
        }
        let drive = i_ext[i] - i_ion;
        let v_new = v + k * drive;

        let mut gv = adj.d_v[i];
        if let Some(ds) = d_spike {
            gv += ds[i] * surrogate.grad(v_new - params.v_theta);
        }

        d_input[i] = k * gv;
        let mut dv_in = gv * (1.0 - k * g_total);
        adj.d_params[0] += gv * (-k * drive / c_m);

        let mut offset = 0;
        for (c, ch) in params.channels.iter().enumerate() {
            let gates = &ch.gates;
            let mut eta = 1.0;
            for (j, g) in gates.iter().enumerate() {
                powered[j] = state_in.gates[offset + j][i].powi(g.exponent as i32);
                eta *= powered[j];
            }
            adj.d_params[1 + c] += gv * (-k * eta * (v - ch.e_rev));

            for (j, g) in gates.iter().enumerate() {
                let p = state_in.gates[offset + j][i];
                let mut others = 1.0;
                for (m, pw) in powered.iter().enumerate().take(gates.len()) {
                    if m != j {
                        others *= pw;
                    }
                }
                let e = g.exponent as i32;
                let dpow = if e == 0 {
                    0.0
                } else {
                    e as f64 * p.powi(e - 1)
                };
                d_eta[j] = dpow * others;
            }

            for (j, g) in gates.iter().enumerate() {
                let slot = offset + j;
                let p = state_in.gates[slot][i];
                let g_out = adj.d_gates[slot][i];
                let (a, da) = g.alpha.eval_with_derivative(v);
                let (b, db) = g.beta.eval_with_derivative(v);
                let s = a + b;
                let (dp_dp, dp_dv) = if s == 0.0 {
                    (1.0, 0.0)
                } else {
                    let decay = (-dt * s).exp();
                    let p_inf = a / s;
                    let p_new = p_inf + (p - p_inf) * decay;
                    if !(0.0..=1.0).contains(&p_new) {
                        // clamped in the forward pass
                        (0.0, 0.0)
                    } else {
                        let ds = da + db;
                        let dpinf = (da * b - a * db) / (s * s);
                        (decay, (1.0 - decay) * dpinf - (p - p_inf) * dt * decay * ds)
                    }
                };
                dv_in += g_out * dp_dv;
                adj.d_gates[slot][i] =
                    g_out * dp_dp + gv * (-k * ch.g_max * (v - ch.e_rev) * d_eta[j]);
            }
            offset += gates.len();
        }
        adj.d_v[i] = dv_in;
    }
    if !adj.is_finite() || d_input.iter().any(|x| !x.is_finite()) {
        return Err(Error::GradientOverflow {
            step: state_in.step,
            what: "non-finite adjoint".into(),
        });
    }
    Ok(())
}

impl Differentiable for LIFParams {
    fn neuron_gates(&self) -> usize {
        0
    }

    fn param_count(&self) -> usize {
        1
    }

    fn v_theta(&self) -> f64 {
        self.v_theta
    }

    fn forward(&self, state: &mut NeuronState, input: &[f64], spikes: &mut [bool]) -> Result<()> {
        lif_step_in_place(state, input, self, spikes)
    }

    /// Reset is treated as detached: the potential gradient does not flow
    /// through the reset branch, only through the surrogate spike output.
    fn backward(
        &self,
        state_in: &NeuronState,
        input: &[f64],
        adj: &mut AdjointState,
        d_spike: Option<&[f64]>,
        surrogate: &SurrogateSpec,
        d_input: &mut [f64],
    ) -> Result<()> {
        let n = state_in.v.len();
        if input.len() != n || d_input.len() != n || adj.d_v.len() != n {
            return Err(Error::Usage("adjoint shape does not match state".into()));
        }
        let k = self.dt / self.tau;
        for i in 0..n {
            let v = state_in.v[i];
            let pre = v + k * (-v + input[i]);
            let fired = pre >= self.v_theta;
            let mut g = if fired { 0.0 } else { adj.d_v[i] };
            if let Some(ds) = d_spike {
                g += ds[i] * surrogate.grad(pre - self.v_theta);
            }
            d_input[i] = k * g;
            adj.d_params[0] += g * (-k / self.tau) * (input[i] - v);
            adj.d_v[i] = g * (1.0 - k);
        }
        if !adj.is_finite() {
            return Err(Error::GradientOverflow {
                step: state_in.step,
                what: "non-finite LIF adjoint".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_seed_gives_zero_adjoint() {
        let p = HHParams::default();
        let s = NeuronState::at_potential(&p, &[-60.0, -20.0]);
        let mut adj = p.zero_adjoint(2);
        let mut di = [1.0, 1.0];
        hh_step_backward(
            &p,
            &s,
            &[3.0, 9.0],
            &mut adj,
            Some(&[0.0, 0.0]),
            &SurrogateSpec::default(),
            &mut di,
        )
        .unwrap();
        assert_eq!(adj, p.zero_adjoint(2));
        assert_eq!(di, [0.0, 0.0]);
    }

    #[test]
    fn zero_conductance_input_gradient_is_dt_over_cm() {
        let mut p = HHParams::default().passive_zero();
        p.c_m = 2.5;
        let s = NeuronState::resting(&p, 1);
        let mut adj = p.zero_adjoint(1);
        adj.d_v[0] = 1.0;
        let mut di = [0.0];
        hh_step_backward(
            &p,
            &s,
            &[4.0],
            &mut adj,
            None,
            &SurrogateSpec::default(),
            &mut di,
        )
        .unwrap();
        assert_eq!(di[0], p.dt / p.c_m);
        assert_eq!(adj.d_v[0], 1.0);
    }

    #[test]
    fn single_step_matches_finite_differences() {
        let p = HHParams::default();
        let s = NeuronState::at_potential(&p, &[-52.0]);
        let mut s = s;
        s.gates[0][0] = 0.3;
        s.gates[1][0] = 0.4;
        s.gates[2][0] = 0.5;
        let input = [6.0];
        // loss = V' + 2 m' + 3 h' + 4 n'
        let w = [2.0, 3.0, 4.0];
        let loss = |st: &NeuronState, inp: &[f64], par: &HHParams| {
            let mut st = st.clone();
            let mut sp = [false];
            hh_step_in_place(&mut st, inp, par, &mut sp).unwrap();
            st.v[0] + (0..3).map(|g| w[g] * st.gates[g][0]).sum::<f64>()
        };
        let mut adj = p.zero_adjoint(1);
        adj.d_v[0] = 1.0;
        for g in 0..3 {
            adj.d_gates[g][0] = w[g];
        }
        let mut di = [0.0];
        hh_step_backward(
            &p,
            &s,
            &input,
            &mut adj,
            None,
            &SurrogateSpec::default(),
            &mut di,
        )
        .unwrap();

        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-8);
        let mut sp = s.clone();
        sp.v[0] += h;
        let mut sm = s.clone();
        sm.v[0] -= h;
        let fd = (loss(&sp, &input, &p) - loss(&sm, &input, &p)) / (2.0 * h);
        assert!(rel(adj.d_v[0], fd) < 1e-6, "{} vs {fd}", adj.d_v[0]);
        for g in 0..3 {
            let mut sp = s.clone();
            sp.gates[g][0] += h;
            let mut sm = s.clone();
            sm.gates[g][0] -= h;
            let fd = (loss(&sp, &input, &p) - loss(&sm, &input, &p)) / (2.0 * h);
            assert!(rel(adj.d_gates[g][0], fd) < 1e-6, "gate {g}");
        }
        let fd = (loss(&s, &[input[0] + h], &p) - loss(&s, &[input[0] - h], &p)) / (2.0 * h);
        assert!(rel(di[0], fd) < 1e-6);
        for c in 0..3 {
            let mut pp = p.clone();
            pp.channels[c].g_max += h;
            let mut pm = p.clone();
            pm.channels[c].g_max -= h;
            let fd = (loss(&s, &input, &pp) - loss(&s, &input, &pm)) / (2.0 * h);
            assert!(rel(adj.d_params[1 + c], fd) < 1e-6, "g_max {c}");
        }
        let mut pp = p.clone();
        pp.c_m += h;
        let mut pm = p.clone();
        pm.c_m -= h;
        let fd = (loss(&s, &input, &pp) - loss(&s, &input, &pm)) / (2.0 * h);
        assert!(rel(adj.d_params[0], fd) < 1e-6);
    }

    #[test]
    fn lif_subthreshold_adjoint_matches_finite_differences() {
        let p = LIFParams::default();
        let s = NeuronState::gateless(vec![0.3]);
        let mut adj = p.zero_adjoint(1);
        adj.d_v[0] = 1.0;
        let mut di = [0.0];
        p.backward(
            &s,
            &[0.5],
            &mut adj,
            None,
            &SurrogateSpec::default(),
            &mut di,
        )
        .unwrap();
        let f = |v: f64, i: f64, tau: f64| {
            let q = LIFParams { tau, ..p };
            let mut st = NeuronState::gateless(vec![v]);
            lif_step_in_place(&mut st, &[i], &q, &mut [false]).unwrap();
            st.v[0]
        };
        let h = 1e-6;
        assert!(
            (adj.d_v[0] - (f(0.3 + h, 0.5, 2.0) - f(0.3 - h, 0.5, 2.0)) / (2.0 * h)).abs() < 1e-8
        );
        assert!((di[0] - (f(0.3, 0.5 + h, 2.0) - f(0.3, 0.5 - h, 2.0)) / (2.0 * h)).abs() < 1e-8);
        assert!(
            (adj.d_params[0] - (f(0.3, 0.5, 2.0 + h) - f(0.3, 0.5, 2.0 - h)) / (2.0 * h)).abs()
                < 1e-8
        );
    }
}
