use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Poisson drive from external sources, `k_ext` per neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    /// Rate per source, Hz.
    pub rate_hz: f64,
    /// Current jump per event, uA.
    pub w_mean: f64,
    pub w_std: f64,
}

impl BackgroundSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz >= 0.0) || !(self.w_std >= 0.0) || !self.w_mean.is_finite() {
            return Err(Error::Config(format!("invalid background {self:?}")));
        }
        Ok(())
    }
}

/// Sum of `N ~ Poisson(lambda)` Gaussian(mu, sigma) jumps, drawn in closed form
/// as `N mu + sigma sqrt(N) z`.
#[derive(Debug, Clone, Copy)]
pub struct CompoundPoisson {
    count: Option<Poisson<f64>>,
    mu: f64,
    sigma: f64,
}

impl CompoundPoisson {
    pub fn new(lambda: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(sigma >= 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!(
                "compound Poisson needs lambda >= 0, sigma >= 0 (got {lambda}, {sigma})"
            )));
        }
        let count = if lambda > 0.0 {
            Some(Poisson::new(lambda).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(CompoundPoisson { count, mu, sigma })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(dist) = &self.count else {
            return 0.0;
        };
        let n = dist.sample(rng);
        if n == 0.0 {
            return 0.0;
        }
        let z: f64 = if self.sigma > 0.0 {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        n * self.mu + self.sigma * n.sqrt() * z
    }
}

/// One compound-Poisson draw per output slot.
pub fn background_sample<R: Rng + ?Sized>(
    lambda: f64,
    mu: f64,
    sigma: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = CompoundPoisson::new(lambda, mu, sigma)?;
    Ok((0..count).map(|_| d.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(background_sample(0.0, 0.17, 0.017, 100, &mut rng)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn zero_sigma_gives_integer_multiples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for x in background_sample(2.5, 0.25, 0.0, 1000, &mut rng).unwrap() {
            let k = x / 0.25;
            assert_eq!(k, k.round());
        }
    }

    #[test]
    fn rejects_negative_parameters() {
        assert!(CompoundPoisson::new(-1.0, 0.1, 0.1).is_err());
        assert!(CompoundPoisson::new(1.0, 0.1, -0.1).is_err());
    }
}
