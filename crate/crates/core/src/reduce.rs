//! PCA feature selection backed by a cyclic Jacobi eigendecomposition of the
//! sample covariance matrix. Feature dimensions here are tiny (at most a few
//! dozen columns), where Jacobi is simple and accurate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ColumnMeta, FeatureMatrix};
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("num_components {requested} out of range (features: {features}, windows: {windows})")]
    ComponentsOutOfRange { requested: usize, features: usize, windows: usize },
    #[error("covariance needs at least 2 windows, got {0}")]
    TooFewWindows(usize),
    #[error("feature count {got} does not match model ({expected})")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Fitted PCA basis: rows of `components` are orthonormal principal axes in
/// order of decreasing explained variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean_vector: Vec<f64>,
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns (eigenvalues,
/// eigenvector columns).
fn jacobi_eigen(mut a: Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a.get(p, q).abs();
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // smaller-angle root keeps the rotation stable
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    (eigenvalues, v)
}

/// Fits PCA on the feature matrix: top eigenvectors of the sample covariance
/// (divisor n - 1), deterministic sign convention (the largest-magnitude
/// entry of each component is positive).
pub fn pca_fit(features: &FeatureMatrix, num_components: usize) -> Result<PcaModel, PcaError> {
    let n = features.num_windows();
    let d = features.num_columns();
    if n < 2 {
        return Err(PcaError::TooFewWindows(n));
    }
    if num_components == 0 || num_components > d || d > n {
        return Err(PcaError::ComponentsOutOfRange {
            requested: num_components,
            features: d,
            windows: n,
        });
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (c, m) in mean.iter_mut().enumerate() {
            *m += features.values.get(r, c);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    for r in 0..n {
        let row = features.values.row(r);
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                let dj = row[j] - mean[j];
                cov.set(i, j, cov.get(i, j) + di * dj);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    let (eigenvalues, vectors) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap().then(a.cmp(&b)));

    let mut components = Matrix::zeros(num_components, d);
    let mut explained = Vec::with_capacity(num_components);
    for (row, &idx) in order.iter().take(num_components).enumerate() {
        let mut comp: Vec<f64> = (0..d).map(|k| vectors.get(k, idx)).collect();
        // pin the sign: largest-magnitude entry positive, first on ties
        let mut pivot = 0;
        for (k, &v) in comp.iter().enumerate() {
            if v.abs() > comp[pivot].abs() {
                pivot = k;
            }
        }
        if comp[pivot] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.row_mut(row).copy_from_slice(&comp);
        explained.push(eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel { mean_vector: mean, components, explained_variance: explained })
}

/// Projects a feature matrix onto the fitted components. Column provenance is
/// replaced by principal-component descriptors; labels are carried through.
pub fn pca_transform(
    model: &PcaModel,
    features: &FeatureMatrix,
) -> Result<FeatureMatrix, PcaError> {
    let d = features.num_columns();
    if d != model.components.cols() {
        return Err(PcaError::DimensionMismatch { expected: model.components.cols(), got: d });
    }
    let n = features.num_windows();
    let k = model.components.rows();
    let mut values = Matrix::zeros(n, k);
    for r in 0..n {
        let row = features.values.row(r);
        for comp in 0..k {
            let axis = model.components.row(comp);
            let mut acc = 0.0;
            for i in 0..d {
                acc += (row[i] - model.mean_vector[i]) * axis[i];
            }
            values.set(r, comp, acc);
        }
    }
    let column_meta = (0..k).map(|index| ColumnMeta::Principal { index }).collect();
    Ok(FeatureMatrix {
        values,
        column_meta,
        labels: features.labels.clone(),
        num_classes: features.num_classes,
        degenerate_counts: vec![0; k],
    })
}
