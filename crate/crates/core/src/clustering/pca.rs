use nalgebra::{DMatrix, SymmetricEigen};

use super::Matrix;
use crate::error::{Error, Result};

/// Top principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// `k × d`, rows orthonormal, ordered by decreasing explained variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

/// Identity when the data is already narrow enough, otherwise a PCA projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Identity,
    Pca(PcaBasis),
}

impl Projection {
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Projection::Identity => input_dim,
            Projection::Pca(b) => b.components.rows(),
        }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        match self {
            Projection::Identity => out.copy_from_slice(row),
            Projection::Pca(b) => {
                for (k, o) in out.iter_mut().enumerate() {
                    let comp = b.components.row(k);
                    let mut acc = 0.0;
                    for j in 0..row.len() {
                        acc += (row[j] - b.mean[j]) * comp[j];
                    }
                    *o = acc;
                }
            }
        }
    }

    pub fn apply(&self, data: &Matrix) -> Result<Matrix> {
        match self {
            Projection::Identity => Ok(data.clone()),
            Projection::Pca(b) => {
                if data.cols() != b.mean.len() {
                    return Err(Error::Contract("projection width mismatch".into()));
                }
                let k = b.components.rows();
                let mut out = Matrix::zeros(data.rows(), k);
                for i in 0..data.rows() {
                    self.apply_row(data.row(i), out.row_mut(i));
                }
                Ok(out)
            }
        }
    }
}

/// Keeps the top `max_components` eigenvectors of the sample covariance when
/// `data` has more than `max_components` columns.
pub fn fit_pca(data: &Matrix, max_components: usize) -> Result<Projection> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::Contract("PCA needs at least 2 rows".into()));
    }
    if d <= max_components {
        return Ok(Projection::Identity);
    }
    let mut mean = vec![0.0; d];
    for row in data.iter_rows() {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| data.get(i, j) - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Matrix::zeros(max_components, d);
    let mut explained_variance = Vec::with_capacity(max_components);
    for (k, &idx) in order.iter().take(max_components).enumerate() {
        let v = eig.eigenvectors.column(idx);
        // Sign convention: largest-magnitude entry positive.
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(k, j, sign * v[j]);
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(Projection::Pca(PcaBasis {
        mean,
        components,
        explained_variance,
    }))
}
