//! Seeded class model standing in for face embeddings: each identity gets a
//! mean direction uniform on the sphere, each sample is that mean plus
//! isotropic Gaussian noise of total scale `sigma_within`, normalized.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::dataset::Dataset;
use super::metrics::normalize;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub identities: usize,
    pub samples_per_identity: usize,
    pub dim: usize,
    pub sigma_within: f64,
    pub seed: u64,
    /// Confine every vector to a random subspace of this dimension.
    pub intrinsic_dim: Option<usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            identities: 200,
            samples_per_identity: 5,
            dim: 512,
            sigma_within: 0.35,
            seed: 42,
            intrinsic_dim: None,
        }
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}",
            self.identities, self.samples_per_identity, self.dim
        )
    }
}

/// Parses `<ids>x<samples>x<dim>`; other fields keep their defaults.
impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('x').collect();
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>();
        match nums.as_deref() {
            Ok(&[ids, samples, dim]) if ids > 0 && samples > 0 && dim > 0 => Ok(Self {
                identities: ids,
                samples_per_identity: samples,
                dim,
                ..Self::default()
            }),
            _ => Err(Error::InvalidParameter(format!(
                "synthetic spec {s:?} is not <ids>x<samples>x<dim>"
            ))),
        }
    }
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<Dataset> {
        if self.identities == 0 || self.samples_per_identity == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "empty synthetic set {self}"
            )));
        }
        if self.sigma_within.is_nan() || self.sigma_within < 0.0 {
            return Err(Error::InvalidParameter(
                "negative within-class spread".into(),
            ));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let space = self.intrinsic_dim.unwrap_or(self.dim);
        if space == 0 || space > self.dim {
            return Err(Error::InvalidParameter(format!(
                "intrinsic dimension {space} for ambient {}",
                self.dim
            )));
        }
        let embed = match self.intrinsic_dim {
            Some(m) => Some(orthonormal_rows(m, self.dim, &mut rng)?),
            None => None,
        };
        let noise = Normal::new(0.0, self.sigma_within / (space as f64).sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let lift = |c: Vec<f64>| -> Vec<f64> {
            match &embed {
                None => c,
                Some(rows) => (0..self.dim)
                    .map(|j| rows.iter().zip(&c).map(|(r, ci)| r[j] * ci).sum())
                    .collect(),
            }
        };
        let mut labels = Vec::new();
        let mut features = Vec::new();
        for id in 0..self.identities {
            let raw: Vec<f64> = (0..space)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let mean = normalize(&raw)?;
            for _ in 0..self.samples_per_identity {
                let s: Vec<f64> = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
                labels.push(format!("id{id:04}"));
                features.push(normalize(&lift(s))?);
            }
        }
        Dataset::new(labels, features)
    }
}

/// `m` orthonormal vectors in `R^d` by Gram-Schmidt on Gaussian draws.
fn orthonormal_rows(m: usize, d: usize, rng: &mut ChaCha20Rng) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    while rows.len() < m {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for r in &rows {
            let p: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, a) in v.iter_mut().zip(r) {
                *x -= p * a;
            }
        }
        if let Ok(u) = normalize(&v) {
            rows.push(u);
        }
    }
    Ok(rows)
}
