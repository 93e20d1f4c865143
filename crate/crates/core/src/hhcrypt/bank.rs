use serde::{Deserialize, Serialize};

use crate::dynamics::{hh_step_in_place, HHParams, NeuronState};
use crate::error::{Error, Result};

/// How one neuron's spike train under a probe is reduced to a single bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Readout {
    /// 1 iff the neuron fires at least once during the probe.
    AnySpike,
    /// Parity of the index of the `bin_ms`-wide time bin holding the first
    /// spike; 0 when the neuron stays silent.
    FirstSpikeBinParity { bin_ms: f64 },
}

/// A bank of HH neurons sharing one channel set and differing in their
/// kinetic time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    /// Channel set; `params.dt` is the probe sampling step.
    pub params: HHParams,
    /// Per-neuron time-scale factors; neuron `j` advances its kinetics by
    /// `dt / taus[j]` per sample.
    pub taus: Vec<f64>,
    pub probe_ms: f64,
    pub readout: Readout,
}

pub const DEFAULT_BANK_SIZE: usize = 8;
pub const DEFAULT_PROBE_MS: f64 = 200.0;
pub const DEFAULT_PROBE_DT: f64 = 0.01;
pub const DEFAULT_TAU_SPAN: f64 = 3.6;
pub const DEFAULT_BIN_MS: f64 = 0.1;

impl Default for FilterBank {
    fn default() -> Self {
        Self::staggered(DEFAULT_BANK_SIZE, DEFAULT_TAU_SPAN)
            .expect("default bank parameters are valid")
    }
}

impl FilterBank {
    /// `n` neurons with time scales spaced geometrically over `[1, span]`.
    pub fn staggered(n: usize, span: f64) -> Result<Self> {
        let taus = (0..n)
            .map(|j| {
                if n == 1 {
                    1.0
                } else {
                    span.powf(j as f64 / (n - 1) as f64)
                }
            })
            .collect();
        Self::with_taus(taus)
    }

    /// Default channel set, probe and readout with the given time scales.
    pub fn with_taus(taus: Vec<f64>) -> Result<Self> {
        let params = HHParams {
            dt: DEFAULT_PROBE_DT,
            ..HHParams::default()
        };
        let bank = FilterBank {
            params,
            taus,
            probe_ms: DEFAULT_PROBE_MS,
            readout: Readout::FirstSpikeBinParity {
                bin_ms: DEFAULT_BIN_MS,
            },
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.taus.is_empty() || self.taus.len() > 8 {
            return Err(Error::Config(format!(
                "filter bank needs 1..=8 neurons, got {}",
                self.taus.len()
            )));
        }
        if self.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("time scales must be finite and > 0".into()));
        }
        if !(self.probe_ms >= self.params.dt) {
            return Err(Error::Config(format!(
                "probe of {} ms is shorter than one step",
                self.probe_ms
            )));
        }
        if let Readout::FirstSpikeBinParity { bin_ms } = self.readout {
            if self.bin_steps(bin_ms) == 0 {
                return Err(Error::Config(format!(
                    "readout bin of {bin_ms} ms is shorter than one step"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn probe_steps(&self) -> usize {
        (self.probe_ms / self.params.dt).round() as usize
    }

    fn bin_steps(&self, bin_ms: f64) -> usize {
        (bin_ms / self.params.dt).round() as usize
    }

    /// Step index `k` of the first spike of neuron `j` (the crossing lands at
    /// `t = (k + 1) dt`), or `None` if it stays silent for the whole probe.
    pub fn first_spike_step(&self, j: usize, freq_hz: f64, amplitude: f64) -> Result<Option<usize>> {
        let tau = *self
            .taus
            .get(j)
            .ok_or_else(|| Error::Usage(format!("neuron {j} of a {}-neuron bank", self.len())))?;
        let dt = self.params.dt;
        let kinetic = HHParams {
            dt: dt / tau,
            ..self.params.clone()
        };
        let w = 2.0 * std::f64::consts::PI * freq_hz * 1e-3;
        let mut state = NeuronState::resting(&kinetic, 1);
        let mut drive = [0.0];
        let mut spike = [false];
        for k in 0..self.probe_steps() {
            drive[0] = amplitude * (w * k as f64 * dt).sin();
            hh_step_in_place(&mut state, &drive, &kinetic, &mut spike)?;
            if spike[0] {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// Bit of neuron `j` under `amplitude * sin(2 pi f t)`.
    pub fn neuron_bit(&self, j: usize, freq_hz: f64, amplitude: f64) -> Result<bool> {
        let first = self.first_spike_step(j, freq_hz, amplitude)?;
        Ok(match (self.readout, first) {
            (_, None) => false,
            (Readout::AnySpike, Some(_)) => true,
            (Readout::FirstSpikeBinParity { bin_ms }, Some(k)) => {
                ((k + 1) / self.bin_steps(bin_ms)) % 2 == 1
            }
        })
    }

    /// The bank's code for one probe; bit `j` is neuron `j`.
    pub fn response(&self, freq_hz: f64, amplitude: f64) -> Result<u8> {
        let mut code = 0u8;
        for j in 0..self.len() {
            if self.neuron_bit(j, freq_hz, amplitude)? {
                code |= 1 << j;
            }
        }
        Ok(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_is_geometric() {
        let b = FilterBank::default();
        assert_eq!(b.len(), 8);
        assert_eq!(b.taus[0], 1.0);
        assert!((b.taus[7] - DEFAULT_TAU_SPAN).abs() < 1e-12);
        let r = b.taus[1] / b.taus[0];
        assert!(b.taus.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
        assert_eq!(b.probe_steps(), 20_000);
    }

    #[test]
    fn null_stimulus_gives_code_zero() {
        let b = FilterBank::default();
        assert_eq!(b.response(50.0, 0.0).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_banks() {
        assert!(FilterBank::with_taus(vec![]).is_err());
        assert!(FilterBank::with_taus(vec![1.0; 9]).is_err());
        assert!(FilterBank::with_taus(vec![1.0, -2.0]).is_err());
        let mut b = FilterBank::default();
        b.readout = Readout::FirstSpikeBinParity { bin_ms: 0.001 };
        assert!(b.validate().is_err());
        assert!(b.first_spike_step(9, 1.0, 1.0).is_err());
    }
}
