//! One grid-search cell: its spec, deterministic seed derivation, and
//! execution against a dataset catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    elbow_select, gmm_fit, kmeans_fit, optics_extract, optics_order, reachability_quantile,
    AlgorithmTag, ClusterError,
};
use crate::dataio::WindowedDataset;
use crate::eval::{purity, EvalError};
use crate::features::{extract_features, Domain, FeatureError, FeatureKind};
use crate::preprocess::{preprocess_pipeline, PreprocessError, SavGolParams};
use crate::reduce::{pca_fit, pca_transform, PcaError};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("dataset '{0}' not present in catalog")]
    DatasetNotFound(String),
    #[error("invalid trial spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// How the requested cluster count is derived from the number of conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCountRule {
    /// k = number of conditions in the data set.
    Conditions,
    /// k = round(factor * conditions), factor in {1.0, 1.25, 1.5, 1.75, 2.0}.
    Scaled(f64),
    /// k chosen by the elbow rule with k_max = 2 * conditions + 2.
    ElbowMethod,
}

pub const SCALED_FACTORS: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];

impl fmt::Display for ClusterCountRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterCountRule::Conditions => write!(f, "conditions"),
            ClusterCountRule::Scaled(factor) => write!(f, "scaled:{factor}"),
            ClusterCountRule::ElbowMethod => write!(f, "elbow"),
        }
    }
}

/// One cell of a grid search. The seed is a content hash of every other
/// field plus the configured salt, so any machine replays the same trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub dataset_id: String,
    pub algorithm: AlgorithmTag,
    pub feature_kinds: Vec<FeatureKind>,
    pub domain: Domain,
    pub pca_components: Option<usize>,
    pub cluster_count_rule: ClusterCountRule,
    pub run_index: usize,
    pub seed: u64,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

impl TrialSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset_id: impl Into<String>,
        algorithm: AlgorithmTag,
        feature_kinds: Vec<FeatureKind>,
        domain: Domain,
        pca_components: Option<usize>,
        cluster_count_rule: ClusterCountRule,
        run_index: usize,
        seed_salt: &str,
    ) -> Self {
        let mut spec = Self {
            dataset_id: dataset_id.into(),
            algorithm,
            feature_kinds,
            domain,
            pca_components,
            cluster_count_rule,
            run_index,
            seed: 0,
        };
        spec.seed = fnv1a64(spec.canonical_string(seed_salt).as_bytes());
        spec
    }

    /// Canonical text form hashed into the seed.
    pub fn canonical_string(&self, seed_salt: &str) -> String {
        let features: Vec<&str> = self.feature_kinds.iter().map(|k| k.name()).collect();
        let pca = match self.pca_components {
            Some(c) => c.to_string(),
            None => "none".to_string(),
        };
        format!(
            "salt={seed_salt};dataset={};alg={};features={};domain={};pca={pca};rule={};run={}",
            self.dataset_id,
            self.algorithm,
            features.join("+"),
            self.domain,
            self.cluster_count_rule,
            self.run_index,
        )
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        if self.feature_kinds.is_empty() {
            return Err(TrialError::InvalidSpec("feature_kinds must be non-empty".into()));
        }
        if self.run_index == 0 {
            return Err(TrialError::InvalidSpec("run_index starts at 1".into()));
        }
        if let ClusterCountRule::Scaled(factor) = self.cluster_count_rule {
            if !SCALED_FACTORS.iter().any(|&f| f == factor) {
                return Err(TrialError::InvalidSpec(format!(
                    "scaled factor {factor} not in {SCALED_FACTORS:?}"
                )));
            }
        }
        Ok(())
    }
}

/// OPTICS parameters used by every trial; the paper reports none, so these
/// pinned defaults are recorded in the provenance block of each report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OpticsParams {
    pub min_samples: usize,
    /// None means infinite.
    pub max_eps: Option<f64>,
    /// Extraction threshold: quantile of the finite reachability values.
    pub eps_quantile: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self { min_samples: 5, max_eps: None, eps_quantile: 0.9 }
    }
}

/// Fixed algorithm parameters shared by all trials of a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialOptions {
    pub savgol: SavGolParams,
    pub optics: OpticsParams,
    pub kmeans_max_iter: usize,
    pub gmm_max_iter: usize,
    pub tol: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            savgol: SavGolParams::default(),
            optics: OpticsParams::default(),
            kmeans_max_iter: 300,
            gmm_max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Preprocessed datasets keyed by id. Immutable once built, so trial workers
/// can share it freely.
pub struct DatasetCatalog {
    entries: BTreeMap<String, WindowedDataset>,
}

impl DatasetCatalog {
    /// Preprocesses every dataset once with the configured filter.
    pub fn build(
        datasets: Vec<(String, WindowedDataset)>,
        savgol: SavGolParams,
    ) -> Result<Self, PreprocessError> {
        let mut entries = BTreeMap::new();
        for (id, dataset) in datasets {
            entries.insert(id, preprocess_pipeline(&dataset, savgol)?);
        }
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&WindowedDataset> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// (id, number of conditions) pairs in catalog order.
    pub fn conditions(&self) -> Vec<(String, usize)> {
        self.entries.iter().map(|(id, ds)| (id.clone(), ds.num_classes)).collect()
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub spec: TrialSpec,
    pub purity: f64,
    pub effective_clusters: usize,
    pub noise_fraction: f64,
    /// Wall time is kept out of serialized reports so reruns are
    /// byte-identical.
    #[serde(skip, default)]
    pub wall_time: Duration,
}

/// Ledger entry: a completed trial or the failure that replaced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec: TrialSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub purity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effective_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn from_outcome(spec: &TrialSpec, outcome: Result<TrialResult, TrialError>) -> Self {
        match outcome {
            Ok(result) => TrialRecord {
                spec: result.spec,
                purity: Some(result.purity),
                effective_clusters: Some(result.effective_clusters),
                noise_fraction: Some(result.noise_fraction),
                error: None,
            },
            Err(err) => TrialRecord {
                spec: spec.clone(),
                purity: None,
                effective_clusters: None,
                noise_fraction: None,
                error: Some(err.to_string()),
            },
        }
    }

    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Executes one trial: feature extraction on the preprocessed dataset,
/// optional PCA, cluster-count resolution, fitting, and purity. Fully
/// deterministic given the spec.
pub fn run_trial(
    spec: &TrialSpec,
    catalog: &DatasetCatalog,
    options: &TrialOptions,
) -> Result<TrialResult, TrialError> {
    spec.validate()?;
    let started = Instant::now();
    let dataset = catalog
        .get(&spec.dataset_id)
        .ok_or_else(|| TrialError::DatasetNotFound(spec.dataset_id.clone()))?;
    let conditions = dataset.num_classes;

    let mut features = extract_features(dataset, &spec.feature_kinds, spec.domain)?;
    if let Some(components) = spec.pca_components {
        let model = pca_fit(&features, components)?;
        features = pca_transform(&model, &features)?;
    }

    let k = match spec.cluster_count_rule {
        ClusterCountRule::Conditions => conditions,
        ClusterCountRule::Scaled(factor) => round_half_up(factor * conditions as f64).max(1),
        ClusterCountRule::ElbowMethod => {
            elbow_select(&features.values, 2 * conditions + 2, spec.seed)?
        }
    };

    let assignment = match spec.algorithm {
        AlgorithmTag::KMeans => {
            kmeans_fit(&features.values, k, spec.seed, options.kmeans_max_iter, options.tol)?.1
        }
        AlgorithmTag::Gmm => {
            gmm_fit(&features.values, k, spec.seed, options.gmm_max_iter, options.tol)?.1
        }
        AlgorithmTag::Optics => {
            let ordering = optics_order(
                &features.values,
                options.optics.min_samples.min(features.num_windows()),
                options.optics.max_eps,
            )?;
            let eps_prime = reachability_quantile(&ordering, options.optics.eps_quantile)
                .max(f64::MIN_POSITIVE);
            optics_extract(&ordering, eps_prime)?
        }
    };

    let purity_value = purity(&assignment, &features.labels)?;
    Ok(TrialResult {
        spec: spec.clone(),
        purity: purity_value,
        effective_clusters: assignment.effective_clusters(),
        noise_fraction: assignment.noise_fraction(),
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, ClassProfile, SyntheticSpec};

    fn separable_catalog() -> DatasetCatalog {
        let ds = generate_synthetic(&SyntheticSpec {
            num_classes: 2,
            windows_per_class: 12,
            window_length: 64,
            class_profiles: vec![
                ClassProfile { amplitude_scale: 1.0, dominant_frequency_bin: 4, noise_std: 0.0 },
                ClassProfile { amplitude_scale: 5.0, dominant_frequency_bin: 4, noise_std: 0.0 },
            ],
            seed: 8,
            num_channels: 1,
        })
        .unwrap();
        DatasetCatalog::build(vec![("synth".into(), ds)], SavGolParams::default()).unwrap()
    }

    fn base_spec() -> TrialSpec {
        TrialSpec::new(
            "synth",
            AlgorithmTag::KMeans,
            vec![FeatureKind::AbsMean],
            Domain::TimeDomain,
            None,
            ClusterCountRule::Conditions,
            1,
            "",
        )
    }

    #[test]
    fn separable_dataset_scores_perfect_purity() {
        let catalog = separable_catalog();
        let result = run_trial(&base_spec(), &catalog, &TrialOptions::default()).unwrap();
        assert_eq!(result.purity, 1.0);
        assert_eq!(result.effective_clusters, 2);
        assert_eq!(result.noise_fraction, 0.0);
    }

    #[test]
    fn identical_spec_runs_identically() {
        let catalog = separable_catalog();
        let options = TrialOptions::default();
        let a = run_trial(&base_spec(), &catalog, &options).unwrap();
        let b = run_trial(&base_spec(), &catalog, &options).unwrap();
        assert_eq!(a.purity, b.purity);
        assert_eq!(a.effective_clusters, b.effective_clusters);
        assert_eq!(a.spec.seed, b.spec.seed);
    }

    #[test]
    fn all_noise_optics_degrades_to_majority_fraction() {
        // noisy windows keep the feature points distinct, so a tiny max_eps
        // leaves every core distance infinite
        let ds = generate_synthetic(&SyntheticSpec {
            num_classes: 2,
            windows_per_class: 12,
            window_length: 64,
            class_profiles: vec![
                ClassProfile { amplitude_scale: 1.0, dominant_frequency_bin: 4, noise_std: 0.1 },
                ClassProfile { amplitude_scale: 5.0, dominant_frequency_bin: 4, noise_std: 0.1 },
            ],
            seed: 8,
            num_channels: 1,
        })
        .unwrap();
        let catalog =
            DatasetCatalog::build(vec![("synth".into(), ds)], SavGolParams::default()).unwrap();
        let mut spec = base_spec();
        spec.algorithm = AlgorithmTag::Optics;
        let options = TrialOptions {
            optics: OpticsParams { min_samples: 5, max_eps: Some(1e-12), eps_quantile: 0.9 },
            ..TrialOptions::default()
        };
        let result = run_trial(&spec, &catalog, &options).unwrap();
        assert_eq!(result.noise_fraction, 1.0);
        assert!((result.purity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn seed_is_content_hash() {
        let a = base_spec();
        let b = base_spec();
        assert_eq!(a.seed, b.seed);
        let mut c = TrialSpec::new(
            "synth",
            AlgorithmTag::KMeans,
            vec![FeatureKind::AbsMean],
            Domain::TimeDomain,
            None,
            ClusterCountRule::Conditions,
            2,
            "",
        );
        assert_ne!(a.seed, c.seed);
        c.run_index = 1;
        // stale seed no longer matches the regenerated content hash
        let regenerated = TrialSpec::new(
            c.dataset_id.clone(),
            c.algorithm,
            c.feature_kinds.clone(),
            c.domain,
            c.pca_components,
            c.cluster_count_rule,
            c.run_index,
            "",
        );
        assert_eq!(regenerated.seed, a.seed);
        let salted = TrialSpec::new(
            "synth",
            AlgorithmTag::KMeans,
            vec![FeatureKind::AbsMean],
            Domain::TimeDomain,
            None,
            ClusterCountRule::Conditions,
            1,
            "salt",
        );
        assert_ne!(salted.seed, a.seed);
    }

    #[test]
    fn scaled_rule_rounds_half_up() {
        assert_eq!(round_half_up(1.25 * 2.0), 3); // 2.5 rounds up
        assert_eq!(round_half_up(1.5 * 3.0), 5); // 4.5 rounds up
        assert_eq!(round_half_up(1.25 * 5.0), 6); // 6.25 rounds down
    }

    #[test]
    fn invalid_specs_rejected() {
        let catalog = separable_catalog();
        let mut spec = base_spec();
        spec.cluster_count_rule = ClusterCountRule::Scaled(1.3);
        assert!(matches!(
            run_trial(&spec, &catalog, &TrialOptions::default()),
            Err(TrialError::InvalidSpec(_))
        ));
        let mut spec = base_spec();
        spec.dataset_id = "missing".into();
        assert!(matches!(
            run_trial(&spec, &catalog, &TrialOptions::default()),
            Err(TrialError::DatasetNotFound(_))
        ));
    }
}
