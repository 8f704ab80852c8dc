//! Gaussian mixture fitting by expectation-maximization with diagonal
//! covariances. Responsibilities are computed in log space; covariance
//! entries are clamped to a floor so near-degenerate columns cannot collapse
//! the model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_plus_plus;
use super::{check_finite, AlgorithmTag, ClusterAssignment, ClusterError};
use crate::matrix::Matrix;

pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Fitted mixture state. `log_likelihood_history` records the total data
/// log-likelihood after every EM iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Matrix,
    /// One diagonal covariance vector per component, entries >= the floor.
    pub covariances: Matrix,
    pub log_likelihood: f64,
    pub seed: u64,
    pub converged: bool,
    pub log_likelihood_history: Vec<f64>,
}

/// log N(x | mean, diag(cov)) for one component.
fn log_gaussian(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(cov) {
        let d = xi - mi;
        acc += vi.ln() + d * d / vi + std::f64::consts::TAU.ln();
    }
    -0.5 * acc
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fits a k-component diagonal GMM. Means start from a k-means++ pass,
/// weights uniform, covariances at the per-dimension data variance.
/// Deterministic for a fixed seed; if EM has not converged after `max_iter`
/// iterations the best state is returned with `converged = false`.
pub fn gmm_fit(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(GmmModel, ClusterAssignment), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    let n = points.rows();
    let d = points.cols();
    if k > n {
        return Err(ClusterError::TooManyClusters { k, points: n });
    }
    check_finite(points)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means_init = kmeans_plus_plus(points, k, &mut rng);

    // per-dimension population variance of the whole data set
    let mut dim_mean = vec![0.0; d];
    for r in 0..n {
        for (m, &x) in dim_mean.iter_mut().zip(points.row(r)) {
            *m += x;
        }
    }
    for m in &mut dim_mean {
        *m /= n as f64;
    }
    let mut dim_var = vec![0.0; d];
    for r in 0..n {
        for (v, (&x, &m)) in dim_var.iter_mut().zip(points.row(r).iter().zip(&dim_mean)) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut dim_var {
        *v = (*v / n as f64).max(COVARIANCE_FLOOR);
    }

    let mut weights = vec![1.0 / k as f64; k];
    let mut means = means_init;
    let mut covariances = Matrix::zeros(k, d);
    for c in 0..k {
        covariances.row_mut(c).copy_from_slice(&dim_var);
    }

    let mut responsibilities = Matrix::zeros(n, k);
    let mut history = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut converged = false;

    for _ in 0..max_iter {
        // E step
        let mut total_ll = 0.0;
        for i in 0..n {
            let x = points.row(i);
            let joint: Vec<f64> = (0..k)
                .map(|c| weights[c].ln() + log_gaussian(x, means.row(c), covariances.row(c)))
                .collect();
            let lse = log_sum_exp(&joint);
            total_ll += lse;
            for (c, &j) in joint.iter().enumerate() {
                responsibilities.set(i, c, (j - lse).exp());
            }
        }
        history.push(total_ll);

        if (total_ll - prev_ll).abs() < tol {
            converged = true;
            prev_ll = total_ll;
            break;
        }
        prev_ll = total_ll;

        // M step
        let mut component_mass = vec![0.0; k];
        for i in 0..n {
            for c in 0..k {
                component_mass[c] += responsibilities.get(i, c);
            }
        }
        for m in &mut component_mass {
            *m = m.max(1e-12);
        }
        let total_mass: f64 = component_mass.iter().sum();
        for (w, &m) in weights.iter_mut().zip(&component_mass) {
            *w = m / total_mass;
        }
        for c in 0..k {
            let mut new_mean = vec![0.0; d];
            for i in 0..n {
                let r = responsibilities.get(i, c);
                for (nm, &x) in new_mean.iter_mut().zip(points.row(i)) {
                    *nm += r * x;
                }
            }
            for nm in &mut new_mean {
                *nm /= component_mass[c];
            }
            let mut new_cov = vec![0.0; d];
            for i in 0..n {
                let r = responsibilities.get(i, c);
                for (nc, (&x, &m)) in new_cov.iter_mut().zip(points.row(i).iter().zip(&new_mean)) {
                    *nc += r * (x - m) * (x - m);
                }
            }
            for nc in &mut new_cov {
                *nc = (*nc / component_mass[c]).max(COVARIANCE_FLOOR);
            }
            means.row_mut(c).copy_from_slice(&new_mean);
            covariances.row_mut(c).copy_from_slice(&new_cov);
        }
    }

    // assignment by maximum responsibility, ties to the lowest component
    let mut assignments = vec![0usize; n];
    for i in 0..n {
        let mut best = 0usize;
        let mut best_r = responsibilities.get(i, 0);
        for c in 1..k {
            let r = responsibilities.get(i, c);
            if r > best_r {
                best_r = r;
                best = c;
            }
        }
        assignments[i] = best;
    }
    let model = GmmModel {
        weights,
        means,
        covariances,
        log_likelihood: prev_ll,
        seed,
        converged,
        log_likelihood_history: history,
    };
    let assignment =
        ClusterAssignment { assignments, num_clusters: k, algorithm: AlgorithmTag::Gmm };
    Ok((model, assignment))
}
