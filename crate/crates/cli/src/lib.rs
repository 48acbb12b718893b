//! Operator tooling: key management, enrollment and authentication against a
//! server, the server loop itself, timing sweeps and accuracy evaluation.

pub mod bench;
pub mod cli;
pub mod eval;

use rand::Rng;
use rand_distr::StandardNormal;

/// Uniformly random point on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
