//! Lloyd's algorithm with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, AlgorithmTag, ClusterAssignment, ClusterError};
use crate::matrix::{sq_dist, Matrix};

/// Fitted K-means state. `wcss_history` records the objective after every
/// assignment step, so descent is checkable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Matrix,
    pub wcss: f64,
    pub iterations_run: usize,
    pub seed: u64,
    pub wcss_history: Vec<f64>,
}

/// k-means++ seeding: first centroid uniform, the rest sampled with
/// probability proportional to squared distance from the nearest chosen one.
pub(crate) fn kmeans_plus_plus(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut best_sq: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = best_sq.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in best_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all remaining mass is zero (duplicate points); pick uniformly
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(chosen));
        for i in 0..n {
            let d = sq_dist(points.row(i), points.row(chosen));
            if d < best_sq[i] {
                best_sq[i] = d;
            }
        }
    }
    centroids
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Donors are restricted to clusters with at least two members, so the pass
/// terminates even on degenerate duplicate-point inputs. Returns the updated
/// objective (the moved point sits exactly on its new centroid).
fn reseed_empty_clusters(
    points: &Matrix,
    centroids: &mut Matrix,
    assignments: &mut [usize],
    mut wcss: f64,
) -> f64 {
    let k = centroids.rows();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let farthest = (0..points.rows())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(points.row(a), centroids.row(assignments[a]));
                let db = sq_dist(points.row(b), centroids.row(assignments[b]));
                da.partial_cmp(&db).unwrap().then(b.cmp(&a))
            })
            .expect("k <= n guarantees a donor cluster with >= 2 members");
        wcss -= sq_dist(points.row(farthest), centroids.row(assignments[farthest]));
        counts[assignments[farthest]] -= 1;
        counts[empty] += 1;
        assignments[farthest] = empty;
        centroids.row_mut(empty).copy_from_slice(points.row(farthest));
    }
    wcss
}

fn assign_nearest(points: &Matrix, centroids: &Matrix, assignments: &mut [usize]) -> f64 {
    let mut wcss = 0.0;
    for (i, a) in assignments.iter_mut().enumerate() {
        let mut best = 0usize;
        let mut best_d = sq_dist(points.row(i), centroids.row(0));
        for c in 1..centroids.rows() {
            let d = sq_dist(points.row(i), centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *a = best;
        wcss += best_d;
    }
    wcss
}

/// Runs Lloyd iterations from a k-means++ start until centroid movement
/// drops below `tol` or `max_iter` is reached. Deterministic for a fixed
/// seed; empty clusters are reseeded to the point farthest from its assigned
/// centroid.
pub fn kmeans_fit(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(KMeansModel, ClusterAssignment), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    let n = points.rows();
    if k > n {
        return Err(ClusterError::TooManyClusters { k, points: n });
    }
    check_finite(points)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut wcss_history = Vec::new();
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        let mut wcss = assign_nearest(points, &centroids, &mut assignments);
        wcss = reseed_empty_clusters(points, &mut centroids, &mut assignments, wcss);
        wcss_history.push(wcss);

        // means of the assigned points
        let mut sums = Matrix::zeros(k, points.cols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let old: Vec<f64> = centroids.row(c).to_vec();
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
            movement = movement.max(crate::matrix::dist(&old, centroids.row(c)));
        }
        if movement < tol {
            break;
        }
    }
    // final assignment against the converged centroids
    let mut wcss = assign_nearest(points, &centroids, &mut assignments);
    wcss = reseed_empty_clusters(points, &mut centroids, &mut assignments, wcss);
    wcss_history.push(wcss);
    let model =
        KMeansModel { centroids, wcss, iterations_run: iterations, seed, wcss_history };
    let assignment =
        ClusterAssignment { assignments, num_clusters: k, algorithm: AlgorithmTag::KMeans };
    Ok((model, assignment))
}

/// Lloyd iterations from caller-provided centroids; used by restart searches.
pub fn kmeans_fit_from(
    points: &Matrix,
    initial_centroids: Matrix,
    max_iter: usize,
    tol: f64,
) -> Result<(KMeansModel, ClusterAssignment), ClusterError> {
    let k = initial_centroids.rows();
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > points.rows() {
        return Err(ClusterError::TooManyClusters { k, points: points.rows() });
    }
    check_finite(points)?;
    let n = points.rows();
    let mut centroids = initial_centroids;
    let mut assignments = vec![0usize; n];
    let mut wcss_history = Vec::new();
    let mut wcss;
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        wcss = assign_nearest(points, &centroids, &mut assignments);
        wcss_history.push(wcss);
        let mut sums = Matrix::zeros(k, points.cols());
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let old: Vec<f64> = centroids.row(c).to_vec();
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
            movement = movement.max(crate::matrix::dist(&old, centroids.row(c)));
        }
        if movement < tol || iterations >= max_iter {
            break;
        }
    }
    wcss = assign_nearest(points, &centroids, &mut assignments);
    let model =
        KMeansModel { centroids, wcss, iterations_run: iterations, seed: 0, wcss_history };
    let assignment =
        ClusterAssignment { assignments, num_clusters: k, algorithm: AlgorithmTag::KMeans };
    Ok((model, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_1d(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    #[test]
    fn k_equals_n_is_identity() {
        let points = matrix_1d(&[0.0, 1.0, 5.0, 9.0]);
        let (model, assignment) = kmeans_fit(&points, 4, 7, 300, 1e-6).unwrap();
        assert!(model.wcss < 1e-12);
        let mut seen: Vec<usize> = assignment.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_well_separated_pairs() {
        let points = matrix_1d(&[0.0, 0.1, 10.0, 10.1]);
        let (model, assignment) = kmeans_fit(&points, 2, 3, 300, 1e-6).unwrap();
        assert_eq!(assignment.assignments[0], assignment.assignments[1]);
        assert_eq!(assignment.assignments[2], assignment.assignments[3]);
        assert_ne!(assignment.assignments[0], assignment.assignments[2]);
        let mut centers: Vec<f64> = (0..2).map(|c| model.centroids.get(c, 0)).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centers[0] - 0.05).abs() < 1e-12);
        assert!((centers[1] - 10.05).abs() < 1e-12);
        // exhaustive check over the three 2-partitions of 4 ordered points
        let wcss_of = |split: usize| -> f64 {
            let vals = [0.0, 0.1, 10.0, 10.1];
            let (a, b) = vals.split_at(split);
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            let ssd = |s: &[f64]| {
                let m = mean(s);
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            };
            ssd(a) + ssd(b)
        };
        let best = [1, 2, 3].map(wcss_of).into_iter().fold(f64::MAX, f64::min);
        assert!((model.wcss - best).abs() < 1e-12);
    }

    #[test]
    fn wcss_history_non_increasing() {
        let mut values = Vec::new();
        let mut state = 88u64;
        for _ in 0..60 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            values.push((state >> 11) as f64 / (1u64 << 53) as f64 * 10.0);
        }
        let points = matrix_1d(&values);
        for seed in 0..5 {
            let (model, _) = kmeans_fit(&points, 4, seed, 300, 1e-9).unwrap();
            for w in model.wcss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", model.wcss_history);
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let points = matrix_1d(&[1.0, 2.0, 3.5, 7.0, 7.5, 20.0]);
        let (m1, a1) = kmeans_fit(&points, 3, 42, 300, 1e-6).unwrap();
        let (m2, a2) = kmeans_fit(&points, 3, 42, 300, 1e-6).unwrap();
        assert_eq!(m1.centroids, m2.centroids);
        assert_eq!(a1, a2);
    }

    #[test]
    fn wcss_field_matches_definition() {
        let points = matrix_1d(&[0.0, 1.0, 2.0, 10.0, 11.0]);
        let (model, assignment) = kmeans_fit(&points, 2, 0, 300, 1e-6).unwrap();
        let manual: f64 = (0..5)
            .map(|i| sq_dist(points.row(i), model.centroids.row(assignment.assignments[i])))
            .sum();
        assert!((model.wcss - manual).abs() < 1e-9 * (1.0 + manual));
    }

    #[test]
    fn each_point_assigned_to_nearest_centroid() {
        let points = matrix_1d(&[0.0, 0.5, 4.0, 4.5, 9.0, 9.5, 14.0]);
        let (model, assignment) = kmeans_fit(&points, 3, 11, 300, 1e-6).unwrap();
        for i in 0..points.rows() {
            let assigned = sq_dist(points.row(i), model.centroids.row(assignment.assignments[i]));
            for c in 0..3 {
                assert!(assigned <= sq_dist(points.row(i), model.centroids.row(c)) + 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let points = matrix_1d(&[1.0, 2.0]);
        assert!(matches!(
            kmeans_fit(&points, 3, 0, 10, 1e-6),
            Err(ClusterError::TooManyClusters { .. })
        ));
        let bad = Matrix::from_vec(2, 1, vec![f64::NAN, 1.0]);
        assert!(matches!(kmeans_fit(&bad, 1, 0, 10, 1e-6), Err(ClusterError::NonFiniteInput)));
    }
}
