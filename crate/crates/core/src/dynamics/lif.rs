use super::channel::LIFParams;
use super::hh::NeuronState;
use crate::error::{Error, Result};

/// Leaky integration `V' = V + dt/tau (-V + i)`, spike when `V' >= v_theta`,
/// then hard reset to `v_reset`.
pub fn lif_step_in_place(
    state: &mut NeuronState,
    i: &[f64],
    params: &LIFParams,
    spikes: &mut [bool],
) -> Result<()> {
    if i.len() != state.v.len() || spikes.len() != state.v.len() {
        return Err(Error::Usage("LIF input length mismatch".into()));
    }
    let k = params.dt / params.tau;
    for ((v, &x), s) in state.v.iter_mut().zip(i).zip(spikes.iter_mut()) {
        let v_new = *v + k * (-*v + x);
        *s = v_new >= params.v_theta;
        *v = if *s { params.v_reset } else { v_new };
    }
    state.step += 1;
    Ok(())
}

pub fn lif_step(
    state: &NeuronState,
    i: &[f64],
    params: &LIFParams,
) -> Result<(NeuronState, Vec<bool>)> {
    let mut next = state.clone();
    let mut spikes = vec![false; state.len()];
    lif_step_in_place(&mut next, i, params, &mut spikes)?;
    Ok((next, spikes))
}
