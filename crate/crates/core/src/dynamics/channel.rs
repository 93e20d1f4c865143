//! Declarative ion-channel and point-neuron parameter sets.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::rates::RateFn;
use crate::error::{Error, Result};

const DEFAULT_HH: &str = include_str!("../../data/hh1952.toml");

/// One gating subunit of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    pub alpha: RateFn,
    pub beta: RateFn,
    /// Power of this gate in the channel's open probability.
    pub exponent: u32,
}

impl GateSpec {
    /// `(alpha, beta)` at potential `v`.
    #[inline]
    pub fn rates(&self, v: f64) -> (f64, f64) {
        (self.alpha.eval(v), self.beta.eval(v))
    }

    /// Steady-state open probability at `v`.
    pub fn steady_state(&self, v: f64) -> f64 {
        let (a, b) = self.rates(v);
        let s = a + b;
        if s > 0.0 {
            a / s
        } else {
            0.0
        }
    }
}

/// A conductance with reversal potential and zero or more gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    /// Maximal conductance, mS/cm^2.
    pub g_max: f64,
    /// Reversal potential, mV.
    pub e_rev: f64,
    #[serde(default)]
    pub gates: Vec<GateSpec>,
}

fn default_v_rest() -> f64 {
    -65.0
}

/// Parameters of a single-compartment conductance-based neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HHParams {
    /// Membrane capacitance, uF/cm^2.
    pub c_m: f64,
    pub channels: Vec<ChannelSpec>,
    #[serde(default = "default_v_rest")]
    pub v_rest: f64,
    /// Upward-crossing spike threshold, mV.
    pub v_theta: f64,
    /// Step size, ms.
    pub dt: f64,
}

impl Default for HHParams {
    /// Classic squid-axon Na/K/leak set.
    fn default() -> Self {
        static PARSED: OnceLock<HHParams> = OnceLock::new();
        PARSED
            .get_or_init(|| HHParams::from_toml_str(DEFAULT_HH).expect("bundled defaults parse"))
            .clone()
    }
}

impl HHParams {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: HHParams =
            toml::from_str(text).map_err(|e| Error::Config(format!("channel config: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("params serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_m > 0.0) {
            return Err(Error::Config(format!("c_m must be > 0, got {}", self.c_m)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        let mut names = HashSet::new();
        for ch in &self.channels {
            if !names.insert(ch.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate channel name {:?}",
                    ch.name
                )));
            }
            if !(ch.g_max >= 0.0) {
                return Err(Error::Config(format!(
                    "channel {:?}: g_max must be >= 0",
                    ch.name
                )));
            }
            for g in &ch.gates {
                for (which, f) in [("alpha", &g.alpha), ("beta", &g.beta)] {
                    if !(f.prefactor() >= 0.0) {
                        return Err(Error::Config(format!(
                            "gate {}.{}: {which} rate prefactor must be >= 0",
                            ch.name, g.name
                        )));
                    }
                    if f.scale() == Some(0.0) {
                        return Err(Error::Config(format!(
                            "gate {}.{}: {which} scale must be nonzero",
                            ch.name, g.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total number of gating variables across all channels.
    pub fn gate_count(&self) -> usize {
        self.channels.iter().map(|c| c.gates.len()).sum()
    }

    /// All gates in state-layout order.
    pub fn gates(&self) -> impl Iterator<Item = &GateSpec> {
        self.channels.iter().flat_map(|c| c.gates.iter())
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelSpec> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut ChannelSpec> {
        self.channels.iter_mut().find(|c| c.name == name)
    }

    /// Same dynamics with every conductance set to zero (an isolated
    /// capacitor).
    pub fn passive_zero(&self) -> Self {
        let mut p = self.clone();
        for c in &mut p.channels {
            c.g_max = 0.0;
        }
        p
    }

    /// A leak-only membrane.
    pub fn leak_only(c_m: f64, g_leak: f64, e_leak: f64, dt: f64) -> Self {
        HHParams {
            c_m,
            channels: vec![ChannelSpec {
                name: "leak".into(),
                g_max: g_leak,
                e_rev: e_leak,
                gates: vec![],
            }],
            v_rest: e_leak,
            v_theta: 0.0,
            dt,
        }
    }
}

/// Leaky integrate-and-fire parameters in dimensionless units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LIFParams {
    /// Membrane time constant, ms.
    pub tau: f64,
    pub v_theta: f64,
    pub v_reset: f64,
    pub dt: f64,
}

impl Default for LIFParams {
    fn default() -> Self {
        LIFParams {
            tau: 2.0,
            v_theta: 1.0,
            v_reset: 0.0,
            dt: 0.1,
        }
    }
}

impl LIFParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config("LIF tau must be > 0".into()));
        }
        if !(self.v_theta > self.v_reset) {
            return Err(Error::Config("LIF v_theta must exceed v_reset".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("LIF dt must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults_are_classic_hh() {
        let p = HHParams::default();
        assert_eq!(p.c_m, 1.0);
        assert_eq!(p.dt, 0.025);
        assert_eq!(p.v_rest, -65.0);
        assert_eq!(p.channel("na").unwrap().g_max, 120.0);
        assert_eq!(p.channel("k").unwrap().e_rev, -77.0);
        assert_eq!(p.channel("leak").unwrap().e_rev, -54.4);
        assert!(p.channel("leak").unwrap().gates.is_empty());
        assert_eq!(p.gate_count(), 3);
    }

    #[test]
    fn toml_round_trip() {
        let p = HHParams::default();
        let q = HHParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut p = HHParams::default();
        p.c_m = 0.0;
        assert!(p.validate().is_err());

        let mut p = HHParams::default();
        p.channels.push(p.channels[0].clone());
        assert!(matches!(p.validate(), Err(Error::Config(_))));

        let mut p = HHParams::default();
        p.channels[1].g_max = -1.0;
        assert!(p.validate().is_err());

        assert!(HHParams::from_toml_str("c_m = 1.0").is_err());
    }

    #[test]
    fn rates_nonnegative_over_physiological_range() {
        let p = HHParams::default();
        let mut v = -120.0;
        while v <= 80.0 {
            for g in p.gates() {
                let (a, b) = g.rates(v);
                assert!(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite());
            }
            v += 0.05;
        }
    }
}
