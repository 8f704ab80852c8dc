//! Clustering algorithms: K-means (Lloyd with k-means++ seeding), Gaussian
//! mixtures via EM with diagonal covariances, and OPTICS with DBSCAN-style
//! extraction, plus the elbow rule for choosing cluster counts.

mod elbow;
mod gmm;
mod kmeans;
mod optics;

pub use elbow::elbow_select;
pub use gmm::{gmm_fit, GmmModel};
pub use kmeans::{kmeans_fit, kmeans_fit_from, KMeansModel};
pub use optics::{optics_extract, optics_order, reachability_quantile, OpticsResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distinguished assignment index for points no cluster claims.
pub const NOISE: usize = usize::MAX;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of points ({points})")]
    TooManyClusters { k: usize, points: usize },
    #[error("k must be positive")]
    ZeroClusters,
    #[error("min_samples = {min_samples} exceeds the number of points ({points})")]
    MinSamplesTooLarge { min_samples: usize, points: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("elbow selection needs k_max >= 3, got {0}")]
    KMaxTooSmall(usize),
    #[error("eps_prime must be positive, got {0}")]
    NonPositiveEps(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlgorithmTag {
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "gmm")]
    Gmm,
    #[serde(rename = "optics")]
    Optics,
}

impl AlgorithmTag {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmTag::KMeans => "kmeans",
            AlgorithmTag::Gmm => "gmm",
            AlgorithmTag::Optics => "optics",
        }
    }
}

impl std::fmt::Display for AlgorithmTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-point cluster indices. `NOISE` appears only for OPTICS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub assignments: Vec<usize>,
    /// Number of real (non-noise) clusters; may be 0 when an OPTICS
    /// extraction labels every point as noise.
    pub num_clusters: usize,
    pub algorithm: AlgorithmTag,
}

impl ClusterAssignment {
    pub fn is_noise(&self, point: usize) -> bool {
        self.assignments[point] == NOISE
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        self.assignments.iter().filter(|&&a| a == NOISE).count() as f64
            / self.assignments.len() as f64
    }

    /// Number of distinct non-noise clusters actually present.
    pub fn effective_clusters(&self) -> usize {
        let mut seen = std::collections::BTreeSet::new();
        for &a in &self.assignments {
            if a != NOISE {
                seen.insert(a);
            }
        }
        seen.len()
    }
}

pub(crate) fn check_finite(points: &crate::matrix::Matrix) -> Result<(), ClusterError> {
    if points.data().iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFiniteInput);
    }
    Ok(())
}
