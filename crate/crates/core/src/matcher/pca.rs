use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::metrics::normalize;
use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Mean and top-`k` principal directions of a gallery.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k x D`, orthonormal rows in order of decreasing variance.
    basis: DMatrix<f64>,
    variances: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Variance captured by each component.
    pub fn explained_variance(&self) -> &[f64] {
        &self.variances
    }
}

pub fn pca_fit(gallery: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = gallery.len();
    let d = gallery.first().map_or(0, Vec::len);
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "target dimension {k} for inputs of dimension {d}"
        )));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "gallery of {n} vectors cannot fit {k} components"
        )));
    }
    if gallery.iter().any(|v| v.len() != d) {
        return Err(Error::ParameterMismatch("gallery dimensions differ".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| gallery[i][j]);
    let mean = x.row_mean();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let achievable = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > top * RANK_TOLERANCE)
        .count();
    if achievable < k {
        return Err(Error::RankDeficient {
            requested: k,
            achievable,
        });
    }
    let mut basis = DMatrix::zeros(k, d);
    for (r, &i) in order[..k].iter().enumerate() {
        basis.set_row(r, &eig.eigenvectors.column(i).transpose());
    }
    Ok(PcaModel {
        mean: mean.iter().copied().collect(),
        basis,
        variances: order[..k].iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}

/// `basis * (v - mean)`, without renormalizing.
pub fn pca_transform(v: &[f64], model: &PcaModel) -> Result<Vec<f64>> {
    if v.len() != model.input_dim() {
        return Err(Error::ParameterMismatch(format!(
            "vector of dimension {} for a model on {}",
            v.len(),
            model.input_dim()
        )));
    }
    let centered = DVector::from_iterator(v.len(), v.iter().zip(&model.mean).map(|(a, m)| a - m));
    Ok((&model.basis * centered).iter().copied().collect())
}

/// Projection onto the model's components, renormalized to unit length.
pub fn pca_project(v: &[f64], model: &PcaModel) -> Result<Vec<f64>> {
    normalize(&pca_transform(v, model)?)
}
