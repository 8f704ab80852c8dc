//! Aggregation of trial ledgers into grouped purity statistics, feature
//! rankings, and the serializable report container.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::Q1Derived;
use super::trial::{ClusterCountRule, TrialRecord};
use crate::cluster::AlgorithmTag;
use crate::features::{Domain, FeatureKind};

/// Purity statistics for one grid cell family (all repeated runs of one
/// setting). Failed trials count as missing, not zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStat {
    pub dataset: String,
    pub algorithm: AlgorithmTag,
    pub features: Vec<FeatureKind>,
    pub domain: Domain,
    pub cluster_count_rule: ClusterCountRule,
    pub pca_components: Option<usize>,
    pub completed: usize,
    pub failed: usize,
    pub mean_purity: Option<f64>,
    pub std_purity: Option<f64>,
    pub min_purity: Option<f64>,
    pub max_purity: Option<f64>,
}

/// One row of the per-algorithm feature ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankEntry {
    pub feature: FeatureKind,
    pub mean_purity: f64,
    pub trials: usize,
}

/// Aggregated view of one experiment: grouped statistics plus the ordered
/// trial ledger it was computed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub experiment: String,
    pub trial_count: usize,
    pub groups: Vec<GroupStat>,
    /// Mean purity per single feature per algorithm, best first.
    pub rankings: BTreeMap<AlgorithmTag, Vec<RankEntry>>,
    pub best_domain: BTreeMap<AlgorithmTag, Domain>,
    pub ledger: Vec<TrialRecord>,
}

/// Top-level report file: per-experiment reports plus provenance fields the
/// caller fills in (config snapshot, pinned defaults, version).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub artifact_version: String,
    pub provenance: serde_json::Value,
    pub experiments: BTreeMap<String, GridReport>,
}

impl Report {
    pub fn new(provenance: serde_json::Value) -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            provenance,
            experiments: BTreeMap::new(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn from_json_file(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::other(e.to_string()))
    }
}

fn group_key(record: &TrialRecord) -> String {
    let spec = &record.spec;
    let features: Vec<&str> = spec.feature_kinds.iter().map(|k| k.name()).collect();
    format!(
        "{}|{}|{}|{}|{}|{}",
        spec.dataset_id,
        spec.algorithm,
        features.join("+"),
        spec.domain,
        spec.cluster_count_rule,
        spec.pca_components.map_or("none".to_string(), |c| c.to_string()),
    )
}

/// Groups the ledger by (dataset, algorithm, feature set, domain, rule, PCA)
/// and reports mean, population standard deviation, min, and max purity over
/// the completed runs of each group.
pub fn aggregate_report(experiment: &str, records: &[TrialRecord]) -> GridReport {
    let mut grouped: BTreeMap<String, Vec<&TrialRecord>> = BTreeMap::new();
    for record in records {
        grouped.entry(group_key(record)).or_default().push(record);
    }
    let mut groups = Vec::with_capacity(grouped.len());
    for bucket in grouped.values() {
        let spec = &bucket[0].spec;
        let purities: Vec<f64> = bucket.iter().filter_map(|r| r.purity).collect();
        let completed = purities.len();
        let failed = bucket.len() - completed;
        let (mean, std, min, max) = if purities.is_empty() {
            (None, None, None, None)
        } else {
            let n = purities.len() as f64;
            let mean = purities.iter().sum::<f64>() / n;
            let var = purities.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
            let min = purities.iter().cloned().fold(f64::MAX, f64::min);
            let max = purities.iter().cloned().fold(f64::MIN, f64::max);
            (Some(mean), Some(var.sqrt()), Some(min), Some(max))
        };
        groups.push(GroupStat {
            dataset: spec.dataset_id.clone(),
            algorithm: spec.algorithm,
            features: spec.feature_kinds.clone(),
            domain: spec.domain,
            cluster_count_rule: spec.cluster_count_rule,
            pca_components: spec.pca_components,
            completed,
            failed,
            mean_purity: mean,
            std_purity: std,
            min_purity: min,
            max_purity: max,
        });
    }

    GridReport {
        experiment: experiment.to_string(),
        trial_count: records.len(),
        groups,
        rankings: feature_rankings(records),
        best_domain: best_domains(records),
        ledger: records.to_vec(),
    }
}

/// Mean purity per single feature per algorithm over completed trials,
/// sorted best first with alphabetical tie-breaks.
fn feature_rankings(records: &[TrialRecord]) -> BTreeMap<AlgorithmTag, Vec<RankEntry>> {
    let mut sums: BTreeMap<(AlgorithmTag, FeatureKind), (f64, usize)> = BTreeMap::new();
    for record in records {
        let Some(purity) = record.purity else { continue };
        if record.spec.feature_kinds.len() != 1 {
            continue;
        }
        let entry = sums.entry((record.spec.algorithm, record.spec.feature_kinds[0])).or_default();
        entry.0 += purity;
        entry.1 += 1;
    }
    let mut out: BTreeMap<AlgorithmTag, Vec<RankEntry>> = BTreeMap::new();
    for ((algorithm, feature), (total, count)) in sums {
        out.entry(algorithm).or_default().push(RankEntry {
            feature,
            mean_purity: total / count as f64,
            trials: count,
        });
    }
    for entries in out.values_mut() {
        entries.sort_by(|a, b| {
            b.mean_purity
                .partial_cmp(&a.mean_purity)
                .unwrap()
                .then_with(|| a.feature.name().cmp(b.feature.name()))
        });
    }
    out
}

/// Better-performing domain per algorithm (mean purity over completed
/// single-feature trials; ties go to the time domain).
fn best_domains(records: &[TrialRecord]) -> BTreeMap<AlgorithmTag, Domain> {
    let mut sums: BTreeMap<(AlgorithmTag, Domain), (f64, usize)> = BTreeMap::new();
    for record in records {
        let Some(purity) = record.purity else { continue };
        if record.spec.feature_kinds.len() != 1 {
            continue;
        }
        let entry = sums.entry((record.spec.algorithm, record.spec.domain)).or_default();
        entry.0 += purity;
        entry.1 += 1;
    }
    let mut out = BTreeMap::new();
    for algorithm in [AlgorithmTag::KMeans, AlgorithmTag::Gmm, AlgorithmTag::Optics] {
        let td = sums.get(&(algorithm, Domain::TimeDomain)).map(|(s, c)| s / *c as f64);
        let fd = sums.get(&(algorithm, Domain::FrequencyDomain)).map(|(s, c)| s / *c as f64);
        let best = match (td, fd) {
            (Some(t), Some(f)) if f > t => Domain::FrequencyDomain,
            (None, Some(_)) => Domain::FrequencyDomain,
            _ => Domain::TimeDomain,
        };
        out.insert(algorithm, best);
    }
    out
}

/// Pulls the Q3-Q5 inputs out of a Q1 report: three best features and the
/// better domain per algorithm.
pub fn derive_q1(report: &GridReport) -> Q1Derived {
    let mut top_features = BTreeMap::new();
    for (&algorithm, entries) in &report.rankings {
        top_features
            .insert(algorithm, entries.iter().take(3).map(|e| e.feature).collect::<Vec<_>>());
    }
    Q1Derived { top_features, best_domain: report.best_domain.clone() }
}

/// Writes the grouped aggregates as a plot-ready CSV.
pub fn write_aggregate_csv(report: &GridReport, path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "experiment,dataset,algorithm,features,domain,cluster_count_rule,pca_components,\
         completed,failed,mean_purity,std_purity,min_purity,max_purity"
    )?;
    let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    for g in &report.groups {
        let features: Vec<&str> = g.features.iter().map(|k| k.name()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            report.experiment,
            g.dataset,
            g.algorithm,
            features.join("+"),
            g.domain,
            g.cluster_count_rule,
            g.pca_components.map_or(String::new(), |c| c.to_string()),
            g.completed,
            g.failed,
            fmt_opt(g.mean_purity),
            fmt_opt(g.std_purity),
            fmt_opt(g.min_purity),
            fmt_opt(g.max_purity),
        )?;
    }
    Ok(())
}

/// Plain-text "average purity per feature per algorithm" table.
pub fn ranking_table(report: &GridReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("experiment {}: mean purity per feature\n", report.experiment));
    for (algorithm, entries) in &report.rankings {
        out.push_str(&format!("  {algorithm}\n"));
        for e in entries {
            out.push_str(&format!(
                "    {:<11} {:.4}  ({} trials)\n",
                e.feature.name(),
                e.mean_purity,
                e.trials
            ));
        }
    }
    out
}
