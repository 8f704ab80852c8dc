//! Elbow rule for picking a cluster count from the WCSS-versus-k curve.

use super::kmeans::kmeans_fit;
use super::ClusterError;
use crate::matrix::Matrix;

/// Runs K-means for k = 1..=k_max and returns the k whose (k, WCSS) point
/// lies farthest from the chord between the curve's endpoints. Ties break to
/// the smallest k; deterministic for a fixed seed.
pub fn elbow_select(points: &Matrix, k_max: usize, seed: u64) -> Result<usize, ClusterError> {
    if k_max < 3 {
        return Err(ClusterError::KMaxTooSmall(k_max));
    }
    let k_max = k_max.min(points.rows());
    let mut wcss = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (model, _) = kmeans_fit(points, k, seed, 300, 1e-6)?;
        wcss.push(model.wcss);
    }
    Ok(elbow_of_curve(&wcss))
}

/// Index (1-based k) of maximum perpendicular distance to the chord from
/// (1, wcss[0]) to (k_max, wcss[last]).
pub(crate) fn elbow_of_curve(wcss: &[f64]) -> usize {
    let k_max = wcss.len();
    let (x1, y1) = (1.0, wcss[0]);
    let (x2, y2) = (k_max as f64, wcss[k_max - 1]);
    let dx = x2 - x1;
    let dy = y2 - y1;
    let norm = (dx * dx + dy * dy).sqrt();
    let mut best_k = 1;
    let mut best_d = f64::MIN;
    for (i, &w) in wcss.iter().enumerate() {
        let k = (i + 1) as f64;
        let d = (dx * (w - y1) - dy * (k - x1)).abs() / norm;
        if d > best_d + 1e-12 {
            best_d = d;
            best_k = i + 1;
        }
    }
    best_k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_curve_picks_two() {
        assert_eq!(elbow_of_curve(&[100.0, 20.0, 15.0, 12.0, 10.0]), 2);
    }

    #[test]
    fn linear_decay_ties_break_to_smallest_k() {
        assert_eq!(elbow_of_curve(&[100.0, 80.0, 60.0, 40.0, 20.0]), 1);
    }

    #[test]
    fn three_separated_blobs_select_three() {
        let mut rows = Vec::new();
        let mut state = 5u64;
        let mut jitter = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for center in [0.0, 50.0, 100.0] {
            for _ in 0..20 {
                rows.push(vec![center + jitter(), center + jitter()]);
            }
        }
        let points = Matrix::from_rows(&rows);
        assert_eq!(elbow_select(&points, 8, 0).unwrap(), 3);
    }

    #[test]
    fn rejects_small_k_max() {
        let points = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(elbow_select(&points, 2, 0), Err(ClusterError::KMaxTooSmall(2))));
    }
}
