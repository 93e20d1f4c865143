//! Voltage-dependent transition-rate expressions for gating variables.
//!
//! Each form carries its analytic derivative so the adjoint pass can
//! differentiate through the gate kinetics without numerical approximation.

use serde::{Deserialize, Serialize};

/// Below this magnitude the `x / (1 - exp(-x))` denominator is treated as
/// vanishing and the series expansion around `x = 0` is used instead.
pub const SINGULARITY_EPS: f64 = 1e-7;

/// A rate function `V (mV) -> 1/ms`.
///
/// All forms use the reduced variable `x = (V - midpoint) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFn {
    /// `rate * x / (1 - exp(-x))`, finite at `x = 0` with limit `rate`.
    ExpLinear {
        rate: f64,
        midpoint: f64,
        scale: f64,
    },
    /// `rate * exp(x)`.
    Exp {
        rate: f64,
        midpoint: f64,
        scale: f64,
    },
    /// `rate / (1 + exp(-x))`.
    Sigmoid {
        rate: f64,
        midpoint: f64,
        scale: f64,
    },
    /// Voltage-independent rate.
    Constant { rate: f64 },
}

impl RateFn {
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            RateFn::ExpLinear {
                rate,
                midpoint,
                scale,
            } => {
                let x = (v - midpoint) / scale;
                let den = -(-x).exp_m1();
                if den.abs() < SINGULARITY_EPS {
                    rate * (1.0 + 0.5 * x)
                } else {
                    rate * (x / den)
                }
            }
            RateFn::Exp {
                rate,
                midpoint,
                scale,
            } => rate * ((v - midpoint) / scale).exp(),
            RateFn::Sigmoid {
                rate,
                midpoint,
                scale,
            } => rate / (1.0 + (-(v - midpoint) / scale).exp()),
            RateFn::Constant { rate } => rate,
        }
    }

    /// Value and `d/dV` of the rate.
    #[inline]
    pub fn eval_with_derivative(&self, v: f64) -> (f64, f64) {
        match *self {
            RateFn::ExpLinear {
                rate,
                midpoint,
                scale,
            } => {
                let x = (v - midpoint) / scale;
                let e = (-x).exp();
                let den = -(-x).exp_m1();
                if den.abs() < SINGULARITY_EPS {
                    (rate * (1.0 + 0.5 * x), rate * (0.5 + x / 6.0) / scale)
                } else {
                    let g = x / den;
                    let dg = (den - x * e) / (den * den);
                    (rate * g, rate * dg / scale)
                }
            }
            RateFn::Exp {
                rate,
                midpoint,
                scale,
            } => {
                let val = rate * ((v - midpoint) / scale).exp();
                (val, val / scale)
            }
            RateFn::Sigmoid {
                rate,
                midpoint,
                scale,
            } => {
                let s = 1.0 / (1.0 + (-(v - midpoint) / scale).exp());
                (rate * s, rate * s * (1.0 - s) / scale)
            }
            RateFn::Constant { rate } => (rate, 0.0),
        }
    }

    /// Multiplicative prefactor; must be non-negative for the rate to be a
    /// valid transition rate.
    pub fn prefactor(&self) -> f64 {
        match *self {
            RateFn::ExpLinear { rate, .. }
            | RateFn::Exp { rate, .. }
            | RateFn::Sigmoid { rate, .. }
            | RateFn::Constant { rate } => rate,
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match *self {
            RateFn::ExpLinear { scale, .. }
            | RateFn::Exp { scale, .. }
            | RateFn::Sigmoid { scale, .. } => Some(scale),
            RateFn::Constant { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const N_ALPHA: RateFn = RateFn::ExpLinear {
        rate: 0.1,
        midpoint: -55.0,
        scale: 10.0,
    };

    #[test]
    fn exp_linear_singular_point_returns_limit() {
        // 0.01 (V + 55) / (1 - exp(-(V + 55)/10)) -> 0.1 as V -> -55
        assert_eq!(N_ALPHA.eval(-55.0), 0.1);
        let (a, da) = N_ALPHA.eval_with_derivative(-55.0);
        assert_eq!(a, 0.1);
        assert!((da - 0.1 * 0.5 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn exp_linear_is_continuous_across_branch() {
        // just outside the branch, the exact form and the series agree
        let v = -55.0 + 10.0 * 1.01 * SINGULARITY_EPS;
        let x = (v + 55.0) / 10.0;
        let series = 0.1 * (1.0 + 0.5 * x);
        assert!((N_ALPHA.eval(v) - series).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let fns = [
            N_ALPHA,
            RateFn::Exp {
                rate: 4.0,
                midpoint: -65.0,
                scale: -18.0,
            },
            RateFn::Sigmoid {
                rate: 1.0,
                midpoint: -35.0,
                scale: 10.0,
            },
        ];
        for f in fns {
            for v in [-110.0, -80.0, -65.0, -40.3, -20.0, 0.0, 35.0] {
                let h = 1e-5;
                let fd = (f.eval(v + h) - f.eval(v - h)) / (2.0 * h);
                let (_, d) = f.eval_with_derivative(v);
                assert!((fd - d).abs() <= 1e-7 * (1.0 + d.abs()), "{f:?} at {v}");
            }
        }
    }

    #[test]
    fn eval_and_eval_with_derivative_agree() {
        for v in [-100.0, -55.0, -40.0, 10.0] {
            assert_eq!(N_ALPHA.eval(v), N_ALPHA.eval_with_derivative(v).0);
        }
    }
}
