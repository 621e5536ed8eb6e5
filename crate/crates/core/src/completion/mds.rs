use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{RblError, Result};
use crate::geometry::check_supported_dim;

/// Largest tolerated negative Gram eigenvalue, relative to the largest positive one.
pub const MAX_NEGATIVE_EIGEN_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    /// D x N coordinates, centered at the origin.
    pub points: DMatrix<f64>,
    /// All Gram eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// True when one of the leading D eigenvalues was negative and clamped to 0.
    pub clamped: bool,
}

/// Double-centered Gram matrix `-½ J E J` of a squared EDM.
pub fn gram_from_edm(squared: &DMatrix<f64>) -> DMatrix<f64> {
    let n = squared.nrows();
    let row_means: DVector<f64> = DVector::from_fn(n, |i, _| squared.row(i).mean());
    let col_means: DVector<f64> = DVector::from_fn(n, |j, _| squared.column(j).mean());
    let total = squared.mean();
    DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (squared[(i, j)] - row_means[i] - col_means[j] + total)
    })
}

/// Eigen-decomposition sorted by descending eigenvalue.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Classical MDS: coordinates in R^D reproducing a complete squared EDM, up
/// to rigid motion and reflection.
pub fn edm_to_points(squared: &DMatrix<f64>, dim: usize) -> Result<MdsEmbedding> {
    check_supported_dim(dim)?;
    if !squared.is_square() {
        return Err(RblError::invalid("EDM must be square"));
    }
    if squared.iter().any(|v| !v.is_finite()) {
        return Err(RblError::invalid("EDM must be complete and finite"));
    }
    let n = squared.nrows();
    if n == 0 {
        return Err(RblError::invalid("EDM is empty"));
    }
    let (values, vectors) = sorted_eigen(gram_from_edm(squared));
    let top = values[0];
    let bottom = *values.last().expect("non-empty");
    let scale = squared.abs().max();
    if top <= 1e-12 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
        return Err(RblError::Degenerate("EDM has no positive Gram eigenvalue".into()));
    }
    if -bottom > MAX_NEGATIVE_EIGEN_RATIO * top {
        return Err(RblError::invalid(format!(
            "matrix is far from Euclidean: Gram eigenvalue {bottom:.3e} vs largest {top:.3e}"
        )));
    }
    let mut points = DMatrix::zeros(dim, n);
    let mut clamped = false;
    for k in 0..dim.min(n) {
        let lambda = values[k];
        if lambda < 0.0 {
            clamped = true;
        }
        let s = lambda.max(0.0).sqrt();
        for i in 0..n {
            points[(k, i)] = s * vectors[(i, k)];
        }
    }
    Ok(MdsEmbedding {
        points,
        eigenvalues: values,
        clamped,
    })
}
