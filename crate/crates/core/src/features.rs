//! The six statistical features and feature-matrix assembly.
//!
//! Every feature can be computed in the time domain (directly on window
//! amplitudes) or the frequency domain (on the one-sided magnitude spectrum,
//! DC bin excluded). Matrix columns are standardized across windows so that
//! scale-sensitive clustering algorithms see comparable axes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::WindowedDataset;
use crate::matrix::Matrix;
use crate::spectral::fft_magnitude;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input")]
    EmptyInput,
    #[error("input length {len} below minimum {min} for {feature}")]
    TooShort { feature: FeatureKind, len: usize, min: usize },
    #[error("no feature kinds requested")]
    NoKinds,
    #[error("non-finite feature value in column {column}")]
    NonFinite { column: usize },
    #[error("cannot combine: window counts differ ({0} vs {1})")]
    WindowCountMismatch(usize, usize),
    #[error("cannot combine: labels differ between matrices")]
    LabelMismatch,
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The six window statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    AbsMean,
    AbsMedian,
    Std,
    Iqr,
    AbsSkew,
    AbsKurt,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::AbsMean,
        FeatureKind::AbsMedian,
        FeatureKind::Std,
        FeatureKind::Iqr,
        FeatureKind::AbsSkew,
        FeatureKind::AbsKurt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::AbsMean => "abs_mean",
            FeatureKind::AbsMedian => "abs_median",
            FeatureKind::Std => "std",
            FeatureKind::Iqr => "iqr",
            FeatureKind::AbsSkew => "abs_skew",
            FeatureKind::AbsKurt => "abs_kurt",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a feature is computed: raw amplitudes or magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    TimeDomain,
    FrequencyDomain,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::TimeDomain, Domain::FrequencyDomain];

    pub fn short_name(self) -> &'static str {
        match self {
            Domain::TimeDomain => "td",
            Domain::FrequencyDomain => "fd",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Provenance of one feature-matrix column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnMeta {
    Feature { kind: FeatureKind, domain: Domain, channel: usize },
    Principal { index: usize },
}

impl fmt::Display for ColumnMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnMeta::Feature { kind, domain, channel } => {
                write!(f, "{}_{}_ch{}", kind, domain, channel)
            }
            ColumnMeta::Principal { index } => write!(f, "pc{index}"),
        }
    }
}

/// Windows-by-features value table with column provenance and carried labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub column_meta: Vec<ColumnMeta>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Per column, how many windows hit the degenerate zero-variance path.
    pub degenerate_counts: Vec<usize>,
}

impl FeatureMatrix {
    pub fn num_windows(&self) -> usize {
        self.values.rows()
    }

    pub fn num_columns(&self) -> usize {
        self.values.cols()
    }

    /// Writes the matrix as CSV with a header that encodes column provenance.
    pub fn write_csv(&self, path: &Path) -> Result<(), FeatureError> {
        use std::io::Write;
        let file = std::fs::File::create(path)
            .map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })?;
        let mut out = std::io::BufWriter::new(file);
        let io_err = |source| FeatureError::Io { path: path.to_path_buf(), source };
        let header: Vec<String> = self
            .column_meta
            .iter()
            .map(ToString::to_string)
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for (r, &label) in self.labels.iter().enumerate() {
            let mut row = String::new();
            for v in self.values.row(r) {
                row.push_str(&format!("{v},"));
            }
            row.push_str(&label.to_string());
            writeln!(out, "{row}").map_err(io_err)?;
        }
        Ok(())
    }
}

/// Arithmetic mean of absolute values.
pub fn abs_mean(x: &[f64]) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    Ok(x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64)
}

/// Median of absolute values; even lengths take the midpoint of the two
/// central order statistics.
pub fn abs_median(x: &[f64]) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut sorted: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

/// Population standard deviation (divisor N).
pub fn std_dev(x: &[f64]) -> Result<f64, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort { feature: FeatureKind::Std, len: x.len(), min: 2 });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Quantile by linear interpolation between order statistics at position
/// `(n - 1) * q` of the sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Interquartile range Q3 - Q1 under linear interpolation.
pub fn iqr(x: &[f64]) -> Result<f64, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::TooShort { feature: FeatureKind::Iqr, len: x.len(), min: 2 });
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(quantile(&sorted, 0.75) - quantile(&sorted, 0.25))
}

/// Central moments of |x| up to order 4.
fn abs_moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in x {
        let d = v.abs() - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Skewness of absolute values (moment estimator m3 / m2^1.5).
/// Zero variance is degenerate and yields a flagged 0.
pub fn abs_skew(x: &[f64]) -> Result<f64, FeatureError> {
    Ok(abs_skew_checked(x)?.0)
}

pub(crate) fn abs_skew_checked(x: &[f64]) -> Result<(f64, bool), FeatureError> {
    if x.len() < 3 {
        return Err(FeatureError::TooShort { feature: FeatureKind::AbsSkew, len: x.len(), min: 3 });
    }
    let (m2, m3, _) = abs_moments(x);
    if m2 <= 0.0 {
        return Ok((0.0, true));
    }
    Ok((m3 / m2.powf(1.5), false))
}

/// Excess kurtosis of absolute values (moment estimator m4 / m2^2 - 3).
/// Zero variance is degenerate and yields a flagged 0.
pub fn abs_kurt(x: &[f64]) -> Result<f64, FeatureError> {
    Ok(abs_kurt_checked(x)?.0)
}

pub(crate) fn abs_kurt_checked(x: &[f64]) -> Result<(f64, bool), FeatureError> {
    if x.len() < 4 {
        return Err(FeatureError::TooShort { feature: FeatureKind::AbsKurt, len: x.len(), min: 4 });
    }
    let (m2, _, m4) = abs_moments(x);
    if m2 <= 0.0 {
        return Ok((0.0, true));
    }
    Ok((m4 / (m2 * m2) - 3.0, false))
}

fn compute(kind: FeatureKind, seq: &[f64]) -> Result<(f64, bool), FeatureError> {
    match kind {
        FeatureKind::AbsMean => abs_mean(seq).map(|v| (v, false)),
        FeatureKind::AbsMedian => abs_median(seq).map(|v| (v, false)),
        FeatureKind::Std => std_dev(seq).map(|v| (v, false)),
        FeatureKind::Iqr => iqr(seq).map(|v| (v, false)),
        FeatureKind::AbsSkew => abs_skew_checked(seq),
        FeatureKind::AbsKurt => abs_kurt_checked(seq),
    }
}

/// Extracts the requested features from every window, one column per
/// (kind, channel) in kind-major order, then standardizes each column to
/// zero mean and unit population deviation (constant columns become zeros).
pub fn extract_features(
    dataset: &WindowedDataset,
    kinds: &[FeatureKind],
    domain: Domain,
) -> Result<FeatureMatrix, FeatureError> {
    if kinds.is_empty() {
        return Err(FeatureError::NoKinds);
    }
    let windows = dataset.num_windows();
    let channels = dataset.num_channels();
    let cols = kinds.len() * channels;
    let mut values = Matrix::zeros(windows, cols);
    let mut column_meta = Vec::with_capacity(cols);
    let mut degenerate_counts = vec![0usize; cols];
    for kind in kinds {
        for channel in 0..channels {
            column_meta.push(ColumnMeta::Feature { kind: *kind, domain, channel });
        }
    }
    for w in 0..windows {
        for c in 0..channels {
            let seq: Vec<f64> = match domain {
                Domain::TimeDomain => dataset.channel(w, c).to_vec(),
                Domain::FrequencyDomain => {
                    let spectrum = fft_magnitude(dataset.channel(w, c), dataset.sample_rate)
                        .map_err(|_| FeatureError::TooShort {
                            feature: kinds[0],
                            len: dataset.window_length(),
                            min: 2,
                        })?;
                    spectrum.magnitudes[1..].to_vec()
                }
            };
            for (ki, kind) in kinds.iter().enumerate() {
                let col = ki * channels + c;
                let (value, degenerate) = compute(*kind, &seq)?;
                if !value.is_finite() {
                    return Err(FeatureError::NonFinite { column: col });
                }
                if degenerate {
                    degenerate_counts[col] += 1;
                }
                values.set(w, col, value);
            }
        }
    }
    standardize_columns(&mut values);
    Ok(FeatureMatrix {
        values,
        column_meta,
        labels: dataset.labels.clone(),
        num_classes: dataset.num_classes,
        degenerate_counts,
    })
}

/// Z-scores each column in place. Columns that are constant, or whose spread
/// sits at rounding level relative to their mean, become zeros (dividing by
/// such a deviation would only amplify float noise).
pub(crate) fn standardize_columns(values: &mut Matrix) {
    let rows = values.rows();
    for c in 0..values.cols() {
        let mut sum = 0.0;
        for r in 0..rows {
            sum += values.get(r, c);
        }
        let mean = sum / rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            let d = values.get(r, c) - mean;
            var += d * d;
        }
        var /= rows as f64;
        let std = var.sqrt();
        if std > mean.abs() * 1e-12 && std > 0.0 {
            let inv = 1.0 / std;
            for r in 0..rows {
                values.set(r, c, (values.get(r, c) - mean) * inv);
            }
        } else {
            for r in 0..rows {
                values.set(r, c, 0.0);
            }
        }
    }
}

/// Column-concatenates matrices over the same windows, preserving meta order.
pub fn combine_features(matrices: &[FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
    let first = matrices.first().ok_or(FeatureError::EmptyInput)?;
    let mut values = first.values.clone();
    let mut column_meta = first.column_meta.clone();
    let mut degenerate_counts = first.degenerate_counts.clone();
    for m in &matrices[1..] {
        if m.num_windows() != first.num_windows() {
            return Err(FeatureError::WindowCountMismatch(first.num_windows(), m.num_windows()));
        }
        if m.labels != first.labels {
            return Err(FeatureError::LabelMismatch);
        }
        values = values.hcat(&m.values);
        column_meta.extend(m.column_meta.iter().cloned());
        degenerate_counts.extend_from_slice(&m.degenerate_counts);
    }
    Ok(FeatureMatrix {
        values,
        column_meta,
        labels: first.labels.clone(),
        num_classes: first.num_classes,
        degenerate_counts,
    })
}
