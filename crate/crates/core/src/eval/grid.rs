//! Grid expansion for experiments Q1-Q5 and the trial runner.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trial::{
    run_trial, ClusterCountRule, DatasetCatalog, TrialOptions, TrialRecord, TrialSpec,
    SCALED_FACTORS,
};
use crate::cluster::AlgorithmTag;
use crate::features::{Domain, FeatureKind};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{0} requires a prior q1 report (top features per algorithm)")]
    MissingQ1(Experiment),
    #[error("no datasets configured")]
    NoDatasets,
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
}

/// The five experimental designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Q1, Experiment::Q2, Experiment::Q3, Experiment::Q4, Experiment::Q5];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Q1 => "q1",
            Experiment::Q2 => "q2",
            Experiment::Q3 => "q3",
            Experiment::Q4 => "q4",
            Experiment::Q5 => "q5",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Experiment::Q1),
            "q2" => Ok(Experiment::Q2),
            "q3" => Ok(Experiment::Q3),
            "q4" => Ok(Experiment::Q4),
            "q5" => Ok(Experiment::Q5),
            other => Err(format!("unknown experiment '{other}' (expected q1..q5)")),
        }
    }
}

/// Per-algorithm conclusions drawn from the Q1 report, needed to expand the
/// follow-up experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Q1Derived {
    /// Three best features per algorithm, best first.
    pub top_features: BTreeMap<AlgorithmTag, Vec<FeatureKind>>,
    /// Better-scoring domain per algorithm.
    pub best_domain: BTreeMap<AlgorithmTag, Domain>,
}

/// Everything expansion needs: datasets (ids), repetition count, seed salt,
/// and Q1 conclusions when expanding Q3-Q5.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub dataset_ids: Vec<String>,
    pub runs_per_setting: usize,
    pub seed_salt: String,
    pub q1: Option<Q1Derived>,
}

impl GridConfig {
    pub fn new(dataset_ids: Vec<String>, runs_per_setting: usize, seed_salt: String) -> Self {
        Self { dataset_ids, runs_per_setting, seed_salt, q1: None }
    }
}

/// OPTICS is dropped after Q1; the later experiments compare the two
/// parameterized algorithms.
const FOLLOW_UP_ALGORITHMS: [AlgorithmTag; 2] = [AlgorithmTag::KMeans, AlgorithmTag::Gmm];

fn q1_feature_sets(derived: &Q1Derived, algorithm: AlgorithmTag) -> Result<[FeatureKind; 3], GridError> {
    let top = derived
        .top_features
        .get(&algorithm)
        .ok_or_else(|| GridError::InvalidConfig(format!("no top features for {algorithm}")))?;
    if top.len() < 3 {
        return Err(GridError::InvalidConfig(format!(
            "need 3 top features for {algorithm}, got {}",
            top.len()
        )));
    }
    Ok([top[0], top[1], top[2]])
}

fn q1_domain(derived: &Q1Derived, algorithm: AlgorithmTag) -> Domain {
    derived.best_domain.get(&algorithm).copied().unwrap_or(Domain::TimeDomain)
}

/// Expands an experiment into its full, ordered trial list. The expansion is
/// a pure function of the config; seeds are content hashes of each spec.
pub fn expand_grid(
    experiment: Experiment,
    config: &GridConfig,
) -> Result<Vec<TrialSpec>, GridError> {
    if config.dataset_ids.is_empty() {
        return Err(GridError::NoDatasets);
    }
    if config.runs_per_setting == 0 {
        return Err(GridError::InvalidConfig("runs_per_setting must be >= 1".into()));
    }
    let runs = 1..=config.runs_per_setting;
    let mut specs = Vec::new();
    match experiment {
        // Q2 analyzes the Q1 grid per data set; the trials are identical
        Experiment::Q1 | Experiment::Q2 => {
            for dataset in &config.dataset_ids {
                for algorithm in [AlgorithmTag::KMeans, AlgorithmTag::Optics, AlgorithmTag::Gmm] {
                    for kind in FeatureKind::ALL {
                        for domain in Domain::ALL {
                            for run in runs.clone() {
                                specs.push(TrialSpec::new(
                                    dataset.clone(),
                                    algorithm,
                                    vec![kind],
                                    domain,
                                    None,
                                    ClusterCountRule::Conditions,
                                    run,
                                    &config.seed_salt,
                                ));
                            }
                        }
                    }
                }
            }
        }
        Experiment::Q3 => {
            let derived = config.q1.as_ref().ok_or(GridError::MissingQ1(experiment))?;
            for dataset in &config.dataset_ids {
                for algorithm in FOLLOW_UP_ALGORITHMS {
                    let [a, b, c] = q1_feature_sets(derived, algorithm)?;
                    let domain = q1_domain(derived, algorithm);
                    let combos: [Vec<FeatureKind>; 7] = [
                        vec![a],
                        vec![b],
                        vec![c],
                        vec![a, b],
                        vec![b, c],
                        vec![c, a],
                        vec![a, b, c],
                    ];
                    for combo in combos {
                        for run in runs.clone() {
                            specs.push(TrialSpec::new(
                                dataset.clone(),
                                algorithm,
                                combo.clone(),
                                domain,
                                None,
                                ClusterCountRule::Conditions,
                                run,
                                &config.seed_salt,
                            ));
                        }
                    }
                }
            }
        }
        Experiment::Q4 => {
            let derived = config.q1.as_ref().ok_or(GridError::MissingQ1(experiment))?;
            for dataset in &config.dataset_ids {
                for algorithm in FOLLOW_UP_ALGORITHMS {
                    let [a, b, c] = q1_feature_sets(derived, algorithm)?;
                    let domain = q1_domain(derived, algorithm);
                    for pca in [None, Some(6), Some(4), Some(2), Some(1)] {
                        for run in runs.clone() {
                            specs.push(TrialSpec::new(
                                dataset.clone(),
                                algorithm,
                                vec![a, b, c],
                                domain,
                                pca,
                                ClusterCountRule::Conditions,
                                run,
                                &config.seed_salt,
                            ));
                        }
                    }
                }
            }
        }
        Experiment::Q5 => {
            let derived = config.q1.as_ref().ok_or(GridError::MissingQ1(experiment))?;
            for dataset in &config.dataset_ids {
                for algorithm in FOLLOW_UP_ALGORITHMS {
                    let [a, b, c] = q1_feature_sets(derived, algorithm)?;
                    let domain = q1_domain(derived, algorithm);
                    let rules = std::iter::once(ClusterCountRule::ElbowMethod)
                        .chain(SCALED_FACTORS.iter().map(|&f| ClusterCountRule::Scaled(f)));
                    for rule in rules {
                        for run in runs.clone() {
                            specs.push(TrialSpec::new(
                                dataset.clone(),
                                algorithm,
                                vec![a, b, c],
                                domain,
                                None,
                                rule,
                                run,
                                &config.seed_salt,
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// Runs every spec against the catalog. Failures become failed-trial records
/// rather than aborting the grid. The ledger keeps spec order regardless of
/// scheduling, so reports are deterministic for any worker count.
pub fn run_grid(
    specs: &[TrialSpec],
    catalog: &DatasetCatalog,
    options: &TrialOptions,
    jobs: usize,
) -> Vec<TrialRecord> {
    let execute =
        |spec: &TrialSpec| TrialRecord::from_outcome(spec, run_trial(spec, catalog, options));
    if jobs <= 1 {
        specs.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool construction");
        pool.install(|| specs.par_iter().map(execute).collect())
    }
}
