//! Purity evaluation, trial execution, and the grid-search engine.

mod grid;
mod report;
mod trial;

pub use grid::{expand_grid, run_grid, Experiment, GridConfig, GridError, Q1Derived};
pub use report::{
    aggregate_report, derive_q1, ranking_table, write_aggregate_csv, GridReport, GroupStat,
    RankEntry, Report,
};
pub use trial::{
    run_trial, ClusterCountRule, DatasetCatalog, OpticsParams, TrialError, TrialOptions,
    TrialRecord, TrialResult, TrialSpec,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cluster::{ClusterAssignment, NOISE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("purity needs at least one point")]
    EmptyInput,
    #[error("assignment length {assignments} does not match label length {labels}")]
    LengthMismatch { assignments: usize, labels: usize },
}

/// Cluster purity: noise points are first pooled into one pseudo-cluster,
/// then each cluster contributes its majority-class count and the total is
/// divided by the number of points.
pub fn purity(assignment: &ClusterAssignment, labels: &[usize]) -> Result<f64, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if assignment.assignments.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            assignments: assignment.assignments.len(),
            labels: labels.len(),
        });
    }
    // counts[cluster][class]; NOISE keys the pseudo-cluster
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&cluster, &class) in assignment.assignments.iter().zip(labels) {
        let bucket = if cluster == NOISE { NOISE } else { cluster };
        *counts.entry(bucket).or_default().entry(class).or_default() += 1;
    }
    let majority_total: usize =
        counts.values().map(|per_class| per_class.values().copied().max().unwrap_or(0)).sum();
    Ok(majority_total as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::AlgorithmTag;

    fn assignment(assignments: Vec<usize>, algorithm: AlgorithmTag) -> ClusterAssignment {
        let num_clusters =
            assignments.iter().filter(|&&a| a != NOISE).map(|&a| a + 1).max().unwrap_or(0);
        ClusterAssignment { assignments, num_clusters, algorithm }
    }

    #[test]
    fn perfect_clustering() {
        let a = assignment(vec![0, 0, 1, 1], AlgorithmTag::KMeans);
        assert_eq!(purity(&a, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_majority_fraction() {
        let a = assignment(vec![0, 0, 0, 0], AlgorithmTag::KMeans);
        assert_eq!(purity(&a, &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn hand_enumerated_majorities() {
        // cluster A holds classes [0,0,1], cluster B holds [1,1,2]
        let a = assignment(vec![0, 0, 0, 1, 1, 1], AlgorithmTag::KMeans);
        let p = purity(&a, &[0, 0, 1, 1, 1, 2]).unwrap();
        assert!((p - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn noise_pooled_into_one_pseudo_cluster() {
        // two noise points of different classes count once
        let a = assignment(vec![0, 0, NOISE, NOISE], AlgorithmTag::Optics);
        let p = purity(&a, &[0, 0, 1, 2]).unwrap();
        assert!((p - 3.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn all_noise_reduces_to_single_cluster() {
        let a = assignment(vec![NOISE; 5], AlgorithmTag::Optics);
        let p = purity(&a, &[0, 0, 0, 1, 1]).unwrap();
        assert!((p - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn singletons_score_one() {
        let a = assignment(vec![0, 1, 2, 3], AlgorithmTag::KMeans);
        assert_eq!(purity(&a, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn invariant_under_relabeling() {
        let a = assignment(vec![0, 0, 1, 1, 2, 2], AlgorithmTag::KMeans);
        let b = assignment(vec![2, 2, 0, 0, 1, 1], AlgorithmTag::KMeans);
        let labels = [0, 1, 1, 1, 0, 2];
        assert_eq!(purity(&a, &labels).unwrap(), purity(&b, &labels).unwrap());
        // class relabeling
        let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
        assert_eq!(purity(&a, &labels).unwrap(), purity(&a, &relabeled).unwrap());
    }

    #[test]
    fn errors() {
        let a = assignment(vec![], AlgorithmTag::KMeans);
        assert!(matches!(purity(&a, &[]), Err(EvalError::EmptyInput)));
        let a = assignment(vec![0, 1], AlgorithmTag::KMeans);
        assert!(matches!(purity(&a, &[0]), Err(EvalError::LengthMismatch { .. })));
    }
}
