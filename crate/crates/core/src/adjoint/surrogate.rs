use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    SigmoidDerivative,
    Rectangular,
}

/// Smooth stand-in for the derivative of the spike indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Kernel width in units of the potential offset.
    pub width: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        SurrogateSpec {
            kind: SurrogateKind::SigmoidDerivative,
            width: 0.25,
        }
    }
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Config(format!(
                "surrogate width must be > 0, got {width}"
            )));
        }
        Ok(SurrogateSpec { kind, width })
    }

    pub fn grad(&self, u: f64) -> f64 {
        surrogate_grad(u, self)
    }
}

/// Gradient factor at offset `u = V - v_theta`. Both kernels integrate to 1.
pub fn surrogate_grad(u: f64, spec: &SurrogateSpec) -> f64 {
    let w = spec.width;
    match spec.kind {
        SurrogateKind::SigmoidDerivative => {
            // s(1-s) written as e/(1+e)^2 with e = exp(-|u|/w)
            let e = (-u.abs() / w).exp();
            e / ((1.0 + e) * (1.0 + e) * w)
        }
        SurrogateKind::Rectangular => {
            if u.abs() <= w {
                1.0 / (2.0 * w)
            } else {
                0.0
            }
        }
    }
}
