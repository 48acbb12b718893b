use std::sync::Arc;

use rand::{CryptoRng, Rng};

use super::{RingContext, RingElement};
use crate::{Error, Result};

/// Truncated discrete Gaussian centred at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseDistribution {
    sigma: f64,
    truncation_bound: u32,
}

impl Default for NoiseDistribution {
    fn default() -> Self {
        Self {
            sigma: 3.2,
            truncation_bound: 20,
        }
    }
}

impl NoiseDistribution {
    pub fn new(sigma: f64, truncation_bound: u32) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be positive, got {sigma}"
            )));
        }
        if (truncation_bound as f64) < (6.0 * sigma).ceil() {
            return Err(Error::InvalidParameter(format!(
                "truncation bound {truncation_bound} below ceil(6 sigma) = {}",
                (6.0 * sigma).ceil()
            )));
        }
        Ok(Self {
            sigma,
            truncation_bound,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truncation_bound(&self) -> u32 {
        self.truncation_bound
    }

    /// One draw by rejection from the uniform proposal on `[-B, B]`.
    pub fn sample<R: CryptoRng + ?Sized>(&self, rng: &mut R) -> i64 {
        let bound = self.truncation_bound as i64;
        let denom = 2.0 * self.sigma * self.sigma;
        loop {
            let x = rng.random_range(-bound..=bound);
            let accept = (-((x * x) as f64) / denom).exp();
            if rng.random::<f64>() < accept {
                return x;
            }
        }
    }
}

/// Coefficients i.i.d. uniform in `[0, m)`.
pub fn sample_uniform<R: CryptoRng + ?Sized>(ctx: &Arc<RingContext>, rng: &mut R) -> RingElement {
    let m = ctx.modulus().value();
    let coeffs = (0..ctx.n()).map(|_| rng.random_range(0..m)).collect();
    RingElement::from_raw(ctx, coeffs)
}

/// Coefficients i.i.d. uniform in `{0, 1}`.
pub fn sample_binary<R: CryptoRng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Signed noise vector of length `n`.
pub fn sample_noise<R: CryptoRng + ?Sized>(
    n: usize,
    dist: &NoiseDistribution,
    rng: &mut R,
) -> Vec<i64> {
    (0..n).map(|_| dist.sample(rng)).collect()
}
