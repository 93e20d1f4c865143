use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/microcircuit.toml");

pub const N_POPULATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThalamusTable {
    pub size: usize,
    pub probabilities: Vec<f64>,
    pub rate_hz: f64,
    pub duration_ms: f64,
}

/// Population sizes and connectivity of the layered microcircuit for a
/// reference patch of `area_mm2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrocircuitTable {
    pub populations: Vec<String>,
    pub area_mm2: f64,
    pub sizes: Vec<usize>,
    /// `probabilities[target][source]`.
    pub probabilities: Vec<Vec<f64>>,
    pub k_ext: Vec<usize>,
    pub sigma_mm: f64,
    pub inhibitory_factor: f64,
    pub l4e_to_l23e_factor: f64,
    /// `(mean, std)` in ms.
    pub delay_exc: (f64, f64),
    pub delay_inh: (f64, f64),
    pub thalamus: ThalamusTable,
}

impl Default for MicrocircuitTable {
    fn default() -> Self {
        Self::from_toml_str(BUNDLED).expect("bundled microcircuit table is valid")
    }
}

impl MicrocircuitTable {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let t: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("microcircuit table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = N_POPULATIONS;
        let square = self.probabilities.len() == n && self.probabilities.iter().all(|r| r.len() == n);
        if self.populations.len() != n
            || self.sizes.len() != n
            || self.k_ext.len() != n
            || self.thalamus.probabilities.len() != n
            || !square
        {
            return Err(Error::Config(format!(
                "microcircuit table must describe exactly {n} populations"
            )));
        }
        let probs = self
            .probabilities
            .iter()
            .flatten()
            .chain(&self.thalamus.probabilities);
        if probs.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("connection probabilities must lie in [0, 1]".into()));
        }
        if self.sizes.contains(&0) || !(self.area_mm2 > 0.0) || !(self.sigma_mm > 0.0) {
            return Err(Error::Config(
                "population sizes, area and lateral spread must be positive".into(),
            ));
        }
        for (m, s) in [self.delay_exc, self.delay_inh] {
            if !(m > 0.0) || !(s >= 0.0) {
                return Err(Error::Config("delay mean must be positive, std non-negative".into()));
            }
        }
        Ok(())
    }

    /// Whether population `p` is inhibitory (odd positions).
    pub fn is_inhibitory(&self, p: usize) -> bool {
        p % 2 == 1
    }

    /// Multiplier taking connection probabilities from the reference area to
    /// `area_mm2`, for a Gaussian lateral profile over a disc.
    pub fn area_factor(&self, area_mm2: f64) -> f64 {
        gaussian_pair_mean(area_mm2, self.sigma_mm) / gaussian_pair_mean(self.area_mm2, self.sigma_mm)
    }
}

/// Mean of `exp(-r^2 / (2 sigma^2))` over the distance `r` between two
/// independent uniform points in a disc of the given area.
pub fn gaussian_pair_mean(area: f64, sigma: f64) -> f64 {
    let radius = (area / std::f64::consts::PI).sqrt();
    let d = 2.0 * radius;
    // density of r in a disc of radius R, with u = r / (2R)
    let pdf = |r: f64| {
        let u = (r / d).min(1.0);
        (2.0 * r / (radius * radius))
            * (2.0 / std::f64::consts::PI)
            * (u.acos() - u * (1.0 - u * u).sqrt())
    };
    let n = 20_000;
    let h = d / n as f64;
    let f = |k: usize| {
        let r = k as f64 * h;
        pdf(r) * (-r * r / (2.0 * sigma * sigma)).exp()
    };
    let mut sum = f(0) + f(n);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_loads() {
        let t = MicrocircuitTable::default();
        assert_eq!(t.sizes.iter().sum::<usize>(), 77_169);
        assert!(t.is_inhibitory(1) && !t.is_inhibitory(6));
    }

    #[test]
    fn pair_distance_density_integrates_to_one() {
        // huge sigma makes the kernel 1
        assert!((gaussian_pair_mean(0.7, 1e6) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn smaller_patch_raises_probabilities() {
        let t = MicrocircuitTable::default();
        assert!((t.area_factor(1.0) - 1.0).abs() < 1e-15);
        let f = t.area_factor(0.5);
        assert!(f > 1.0 && f < 2.0, "{f}");
    }

    #[test]
    fn rejects_bad_tables() {
        let mut t = MicrocircuitTable::default();
        t.probabilities[0][0] = 1.5;
        assert!(t.validate().is_err());
        let mut t = MicrocircuitTable::default();
        t.sizes.pop();
        assert!(t.validate().is_err());
    }
}
