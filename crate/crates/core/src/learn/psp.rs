//! Fixed exponential post-synaptic filters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal exponential kernel `k_j ∝ exp(-j dt / tau_decay)`, `j < length`,
/// normalized to unit sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSPKernel {
    pub tau_decay: f64,
    pub dt: f64,
    pub length: usize,
}

impl PSPKernel {
    pub fn new(tau_decay: f64, dt: f64, length: usize) -> Result<Self> {
        let k = PSPKernel {
            tau_decay,
            dt,
            length,
        };
        k.validate()?;
        Ok(k)
    }

    /// Kernel truncated after `spans` decay constants.
    pub fn spanning(tau_decay: f64, dt: f64, spans: f64) -> Result<Self> {
        let length = ((spans * tau_decay / dt).ceil() as usize).max(1);
        Self::new(tau_decay, dt, length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_decay > 0.0) || !(self.dt > 0.0) || self.length == 0 {
            return Err(Error::Config(format!(
                "PSP kernel needs tau_decay > 0, dt > 0, length > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    fn ratio(&self) -> f64 {
        (-self.dt / self.tau_decay).exp()
    }

    fn head(&self) -> f64 {
        let r = self.ratio();
        (1.0 - r) / (1.0 - r.powi(self.length as i32))
    }

    pub fn taps(&self) -> Vec<f64> {
        let r = self.ratio();
        let mut k = self.head();
        (0..self.length)
            .map(|_| {
                let out = k;
                k *= r;
                out
            })
            .collect()
    }
}

/// Applies `kernel` to every channel of a time-major series.
pub fn psp_filter(spikes: &[Vec<f64>], kernel: &PSPKernel) -> Vec<Vec<f64>> {
    let channels = spikes.first().map_or(0, Vec::len);
    psp_filter_grouped(spikes, std::slice::from_ref(kernel), &vec![0; channels])
        .expect("single group covers every channel")
}

/// Applies `kernels[group_of[c]]` to channel `c`.
///
/// Evaluated recursively: `y_t = r y_{t-1} + k_0 (s_t - r^L s_{t-L})`.
pub fn psp_filter_grouped(
    spikes: &[Vec<f64>],
    kernels: &[PSPKernel],
    group_of: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let channels = group_of.len();
    if let Some(row) = spikes.iter().find(|r| r.len() != channels) {
        return Err(Error::Usage(format!(
            "spike row has {} channels, grouping covers {channels}",
            row.len()
        )));
    }
    if let Some(&g) = group_of.iter().find(|&&g| g >= kernels.len()) {
        return Err(Error::Usage(format!("group {g} has no kernel")));
    }
    let coeffs: Vec<(f64, f64, f64, usize)> = kernels
        .iter()
        .map(|k| {
            let r = k.ratio();
            (r, k.head(), r.powi(k.length as i32), k.length)
        })
        .collect();
    let mut out = vec![vec![0.0; channels]; spikes.len()];
    for c in 0..channels {
        let (r, k0, tail, len) = coeffs[group_of[c]];
        let mut y = 0.0;
        for t in 0..spikes.len() {
            let mut drive = spikes[t][c];
            if t >= len {
                drive -= tail * spikes[t - len][c];
            }
            y = r * y + k0 * drive;
            out[t][c] = y;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_normalized_and_decay() {
        let k = PSPKernel::new(2.0, 0.1, 50).unwrap();
        let taps = k.taps();
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(taps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn impulse_returns_taps() {
        let k = PSPKernel::new(1.5, 0.1, 20).unwrap();
        let mut s = vec![vec![0.0]; 30];
        s[0][0] = 1.0;
        let y = psp_filter(&s, &k);
        for (j, tap) in k.taps().iter().enumerate() {
            assert!((y[j][0] - tap).abs() < 1e-15);
        }
        assert!(y[20..].iter().all(|r| r[0].abs() < 1e-15));
    }

    #[test]
    fn zero_input_zero_output() {
        let k = PSPKernel::new(1.0, 0.1, 5).unwrap();
        let y = psp_filter(&vec![vec![0.0; 3]; 10], &k);
        assert!(y.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_kernels_and_groups() {
        assert!(PSPKernel::new(0.0, 0.1, 5).is_err());
        assert!(PSPKernel::new(1.0, 0.1, 0).is_err());
        let k = PSPKernel::new(1.0, 0.1, 5).unwrap();
        assert!(psp_filter_grouped(&[vec![0.0; 2]], &[k], &[0, 1]).is_err());
    }
}
