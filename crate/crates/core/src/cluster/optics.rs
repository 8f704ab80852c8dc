//! OPTICS ordering and DBSCAN-equivalent cluster extraction.
//!
//! The ordering is produced with a reachability priority queue (ties broken
//! by lowest point index), so results are deterministic. A point counts as
//! its own neighbor when computing core distances.

use serde::{Deserialize, Serialize};

use super::{AlgorithmTag, ClusterAssignment, ClusterError, NOISE};
use crate::matrix::{dist, Matrix};

/// Output of the ordering pass. `reachability` and `core_distance` are
/// indexed by point; unreachable entries are infinite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpticsResult {
    pub ordering: Vec<usize>,
    pub reachability: Vec<f64>,
    pub core_distance: Vec<f64>,
    pub min_samples: usize,
}

/// Orders points by density reachability. `max_eps = None` means infinite,
/// i.e. every point is eventually reachable.
pub fn optics_order(
    points: &Matrix,
    min_samples: usize,
    max_eps: Option<f64>,
) -> Result<OpticsResult, ClusterError> {
    let n = points.rows();
    if min_samples == 0 || min_samples > n {
        return Err(ClusterError::MinSamplesTooLarge { min_samples, points: n });
    }
    super::check_finite(points)?;
    let eps = max_eps.unwrap_or(f64::INFINITY);

    // pairwise distances; data sets here are small enough for the dense form
    let mut distances = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(points.row(i), points.row(j));
            distances[i][j] = d;
            distances[j][i] = d;
        }
    }
    // core distance = distance to the min_samples-th nearest neighbor,
    // counting the point itself; infinite when beyond max_eps
    let core_distance: Vec<f64> = (0..n)
        .map(|i| {
            let mut row = distances[i].clone();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let d = row[min_samples - 1];
            if d <= eps {
                d
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let mut processed = vec![false; n];
    let mut reachability = vec![f64::INFINITY; n];
    let mut ordering = Vec::with_capacity(n);
    // seed list scanned linearly; n stays small enough that a heap with
    // decrease-key buys nothing
    let mut seeded = vec![false; n];

    for start in 0..n {
        if processed[start] {
            continue;
        }
        seeded[start] = true;
        loop {
            // next unprocessed seeded point with minimal (reachability, index)
            let mut current = None;
            for i in 0..n {
                if seeded[i] && !processed[i] {
                    let better = match current {
                        None => true,
                        Some(c) => reachability[i] < reachability[c],
                    };
                    if better {
                        current = Some(i);
                    }
                }
            }
            let Some(p) = current else { break };
            processed[p] = true;
            ordering.push(p);
            if core_distance[p].is_finite() {
                for q in 0..n {
                    if processed[q] || distances[p][q] > eps {
                        continue;
                    }
                    let new_reach = core_distance[p].max(distances[p][q]);
                    if new_reach < reachability[q] {
                        reachability[q] = new_reach;
                    }
                    seeded[q] = true;
                }
            }
        }
    }
    Ok(OpticsResult { ordering, reachability, core_distance, min_samples })
}

/// Walks the ordering and cuts it at `eps_prime`: a point whose reachability
/// exceeds the threshold starts a new cluster if it is core at that radius,
/// otherwise it is noise. Equivalent to DBSCAN(eps_prime, min_samples) up to
/// border-point assignment.
pub fn optics_extract(
    result: &OpticsResult,
    eps_prime: f64,
) -> Result<ClusterAssignment, ClusterError> {
    if !(eps_prime > 0.0) {
        return Err(ClusterError::NonPositiveEps(eps_prime));
    }
    let n = result.ordering.len();
    let mut assignments = vec![NOISE; n];
    let mut cluster: Option<usize> = None;
    let mut next_cluster = 0usize;
    for &p in &result.ordering {
        if result.reachability[p] > eps_prime {
            if result.core_distance[p] <= eps_prime {
                cluster = Some(next_cluster);
                next_cluster += 1;
                assignments[p] = cluster.unwrap();
            } else {
                assignments[p] = NOISE;
            }
        } else {
            // reachable points follow the cluster opened before them
            assignments[p] = cluster.unwrap_or(NOISE);
        }
    }
    Ok(ClusterAssignment {
        assignments,
        num_clusters: next_cluster,
        algorithm: AlgorithmTag::Optics,
    })
}

/// Extraction threshold used by the benchmark: a quantile of the finite
/// reachability values (linear interpolation), or 0 when none are finite.
pub fn reachability_quantile(result: &OpticsResult, q: f64) -> f64 {
    let mut finite: Vec<f64> =
        result.reachability.iter().copied().filter(|r| r.is_finite()).collect();
    if finite.is_empty() {
        return 0.0;
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (finite.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < finite.len() {
        finite[lo] + frac * (finite[lo + 1] - finite[lo])
    } else {
        finite[lo]
    }
}
