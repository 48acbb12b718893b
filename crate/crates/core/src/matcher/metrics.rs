use std::fmt::Write as _;

use crate::{Error, Result};

/// False-accept operating points reported by [`evaluate_tar_far`].
pub const FAR_POINTS: [f64; 3] = [0.0001, 0.001, 0.01];

pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm <= 1e-12 {
        return Err(Error::Domain(format!(
            "cannot normalize vector of norm {norm}"
        )));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ParameterMismatch(format!(
            "dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum())
}

/// `1 - x.y` for unit vectors.
pub fn cosine_dissimilarity(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(1.0 - dot(x, y)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub far: f64,
    /// Largest dissimilarity still accepted.
    pub threshold: f64,
    pub tar: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub points: Vec<OperatingPoint>,
}

impl VerificationReport {
    pub fn tar_at(&self, far: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.far - far).abs() < 1e-12)
            .map(|p| p.tar)
    }

    /// `far,threshold,tar` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("far,threshold,tar\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.far, p.threshold, p.tar);
        }
        out
    }
}

/// For each FAR point the threshold is the lower empirical quantile of the
/// impostor dissimilarities at that rate; TAR is the fraction of genuine
/// dissimilarities at or below it.
pub fn evaluate_tar_far(
    genuine: &[f64],
    impostor: &[f64],
    far_points: &[f64],
) -> Result<VerificationReport> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Domain(
            "genuine and impostor scores must be non-empty".into(),
        ));
    }
    if genuine.iter().chain(impostor).any(|s| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let mut imp = impostor.to_vec();
    imp.sort_by(f64::total_cmp);
    let mut gen = genuine.to_vec();
    gen.sort_by(f64::total_cmp);
    let points = far_points
        .iter()
        .map(|&far| {
            if !(0.0..=1.0).contains(&far) {
                return Err(Error::InvalidParameter(format!("FAR {far}")));
            }
            let idx = (far * (imp.len() - 1) as f64).floor() as usize;
            let threshold = imp[idx];
            let accepted = gen.partition_point(|&s| s <= threshold);
            Ok(OperatingPoint {
                far,
                threshold,
                tar: accepted as f64 / gen.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport { points })
}
