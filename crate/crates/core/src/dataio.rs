//! Dataset ingestion: manifest-driven CSV loading, windowing, and the
//! synthetic signal generator.
//!
//! A recording is a CSV with one sample per row, numeric channel columns and
//! an integer label column. Loading cuts it into fixed-length windows; any
//! window that straddles a label change is dropped so every window carries a
//! single ground-truth class.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv file not found: {0}")]
    MissingFile(PathBuf),
    #[error("column '{0}' not present in csv header")]
    MissingColumn(String),
    #[error("non-numeric cell in column '{column}' at data row {row}: '{value}'")]
    NonNumericCell { column: String, row: usize, value: String },
    #[error("label {value} at data row {row} is not a non-negative integral class index")]
    LabelOutOfRange { row: usize, value: f64 },
    #[error("no windows produced (rows: {rows}, window_length: {window_length})")]
    ZeroWindows { rows: usize, window_length: usize },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSyntheticSpec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
}

fn default_window() -> usize {
    512
}

fn default_subset_fraction() -> f64 {
    0.25
}

/// Describes one CSV-backed dataset: which columns hold the signal, how to
/// window it, and how much of it to keep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub csv_path: PathBuf,
    pub channel_columns: Vec<String>,
    pub label_column: String,
    pub sample_rate: f64,
    #[serde(default = "default_window")]
    pub window_length: usize,
    #[serde(default = "default_window")]
    pub window_stride: usize,
    pub num_classes: usize,
    #[serde(default = "default_subset_fraction")]
    pub subset_fraction: f64,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.window_length < 8 {
            return Err(DataError::InvalidManifest("window_length must be >= 8".into()));
        }
        if self.window_stride == 0 {
            return Err(DataError::InvalidManifest("window_stride must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(DataError::InvalidManifest("num_classes must be >= 2".into()));
        }
        if self.channel_columns.is_empty() {
            return Err(DataError::InvalidManifest("channel_columns must be non-empty".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(DataError::InvalidManifest("sample_rate must be positive".into()));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(DataError::InvalidManifest("subset_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Reads a manifest from a JSON file. A relative `csv_path` is resolved
    /// against the manifest's parent directory.
    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| DataError::InvalidManifest(e.to_string()))?;
        if manifest.csv_path.is_relative() {
            if let Some(parent) = path.parent() {
                manifest.csv_path = parent.join(&manifest.csv_path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Fixed-length labeled signal windows, shape `[num_windows x num_channels x
/// window_length]`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    data: Vec<f64>,
    num_channels: usize,
    window_length: usize,
    pub labels: Vec<usize>,
    pub sample_rate: f64,
    pub num_classes: usize,
}

impl WindowedDataset {
    pub fn new(
        num_channels: usize,
        window_length: usize,
        sample_rate: f64,
        num_classes: usize,
    ) -> Self {
        Self {
            data: Vec::new(),
            num_channels,
            window_length,
            labels: Vec::new(),
            sample_rate,
            num_classes,
        }
    }

    pub fn num_windows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// One channel of one window.
    pub fn channel(&self, window: usize, channel: usize) -> &[f64] {
        let base = (window * self.num_channels + channel) * self.window_length;
        &self.data[base..base + self.window_length]
    }

    pub fn channel_mut(&mut self, window: usize, channel: usize) -> &mut [f64] {
        let base = (window * self.num_channels + channel) * self.window_length;
        &mut self.data[base..base + self.window_length]
    }

    /// Appends a window given per-channel sample slices.
    pub fn push_window(&mut self, channels: &[&[f64]], label: usize) {
        assert_eq!(channels.len(), self.num_channels, "channel count mismatch");
        for ch in channels {
            assert_eq!(ch.len(), self.window_length, "window length mismatch");
            self.data.extend_from_slice(ch);
        }
        self.labels.push(label);
    }

    /// Windows per class, indexed by class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Writes the dataset back to CSV, one sample per row, windows in order.
    /// Columns are `ch0..chN` plus a trailing `label` column; reloading with a
    /// matching manifest (stride = length, subset_fraction = 1) reproduces the
    /// dataset exactly.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let file = File::create(path)
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        let mut out = BufWriter::new(file);
        let io_err = |source| DataError::Io { path: path.to_path_buf(), source };
        let header: Vec<String> = (0..self.num_channels)
            .map(|c| format!("ch{c}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(",")).map_err(io_err)?;
        for w in 0..self.num_windows() {
            for t in 0..self.window_length {
                let mut row = String::new();
                for c in 0..self.num_channels {
                    // Display prints the shortest representation that parses
                    // back to the same f64, so the round trip is exact.
                    row.push_str(&format!("{},", self.channel(w, c)[t]));
                }
                row.push_str(&self.labels[w].to_string());
                writeln!(out, "{row}").map_err(io_err)?;
            }
        }
        Ok(())
    }
}

/// Parameters of the synthetic stand-in generator: each class is a sinusoid
/// at a fixed bin plus Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub windows_per_class: usize,
    pub window_length: usize,
    pub class_profiles: Vec<ClassProfile>,
    pub seed: u64,
    #[serde(default = "default_one")]
    pub num_channels: usize,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassProfile {
    pub amplitude_scale: f64,
    pub dominant_frequency_bin: usize,
    pub noise_std: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.num_classes == 0 || self.windows_per_class == 0 || self.window_length == 0 {
            return Err(DataError::InvalidSyntheticSpec("counts must be positive".into()));
        }
        if self.class_profiles.len() != self.num_classes {
            return Err(DataError::InvalidSyntheticSpec(format!(
                "expected {} class_profiles, got {}",
                self.num_classes,
                self.class_profiles.len()
            )));
        }
        if self.num_channels == 0 {
            return Err(DataError::InvalidSyntheticSpec("num_channels must be positive".into()));
        }
        for (i, p) in self.class_profiles.iter().enumerate() {
            if !(p.amplitude_scale > 0.0) {
                return Err(DataError::InvalidSyntheticSpec(format!(
                    "class {i}: amplitude_scale must be > 0"
                )));
            }
            if p.noise_std < 0.0 {
                return Err(DataError::InvalidSyntheticSpec(format!(
                    "class {i}: noise_std must be >= 0"
                )));
            }
            if p.dominant_frequency_bin * 2 >= self.window_length {
                return Err(DataError::InvalidSyntheticSpec(format!(
                    "class {i}: dominant_frequency_bin must be < window_length / 2"
                )));
            }
        }
        Ok(())
    }
}

/// Standard normal via Box-Muller; two uniforms per sample keeps the stream
/// layout independent of call parity.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates a labeled synthetic dataset. Deterministic for a fixed seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<WindowedDataset, DataError> {
    spec.validate()?;
    let n = spec.window_length;
    // sample_rate = window_length puts bin k of an unpadded transform at k Hz
    let mut dataset = WindowedDataset::new(spec.num_channels, n, n as f64, spec.num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for (class, profile) in spec.class_profiles.iter().enumerate() {
        let base: Vec<f64> = (0..n)
            .map(|t| {
                let phase = std::f64::consts::TAU * profile.dominant_frequency_bin as f64
                    * t as f64
                    / n as f64;
                profile.amplitude_scale * phase.sin()
            })
            .collect();
        for _ in 0..spec.windows_per_class {
            let mut channels: Vec<Vec<f64>> = Vec::with_capacity(spec.num_channels);
            for _ in 0..spec.num_channels {
                channels.push(
                    base.iter().map(|&b| b + profile.noise_std * normal(&mut rng)).collect(),
                );
            }
            let refs: Vec<&[f64]> = channels.iter().map(Vec::as_slice).collect();
            dataset.push_window(&refs, class);
        }
    }
    Ok(dataset)
}

struct RawRecording {
    channels: Vec<Vec<f64>>,
    labels: Vec<i64>,
}

fn read_csv(manifest: &DatasetManifest) -> Result<RawRecording, DataError> {
    if !manifest.csv_path.exists() {
        return Err(DataError::MissingFile(manifest.csv_path.clone()));
    }
    let mut reader = csv::Reader::from_path(&manifest.csv_path)?;
    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let channel_idx: Vec<usize> = manifest
        .channel_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_, _>>()?;
    let label_idx = col_index(&manifest.label_column)?;

    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); channel_idx.len()];
    let mut labels: Vec<i64> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (ci, &idx) in channel_idx.iter().enumerate() {
            let cell = record.get(idx).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| DataError::NonNumericCell {
                column: manifest.channel_columns[ci].clone(),
                row,
                value: cell.to_string(),
            })?;
            channels[ci].push(value);
        }
        let cell = record.get(label_idx).unwrap_or("");
        let raw: f64 = cell.trim().parse().map_err(|_| DataError::NonNumericCell {
            column: manifest.label_column.clone(),
            row,
            value: cell.to_string(),
        })?;
        if raw.fract() != 0.0 || raw < 0.0 || raw > i64::MAX as f64 {
            return Err(DataError::LabelOutOfRange { row, value: raw });
        }
        labels.push(raw as i64);
    }
    Ok(RawRecording { channels, labels })
}

/// Loads a manifest-described CSV into labeled windows.
///
/// Raw label values are remapped to contiguous indices by ascending value.
/// When the file holds more distinct labels than `num_classes`, the classes
/// with the largest raw values are discarded (their windows are dropped).
/// With `subset_fraction < 1` the windows are shuffled with `shuffle_seed`
/// and truncated per class proportionally.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<WindowedDataset, DataError> {
    manifest.validate()?;
    let raw = read_csv(manifest)?;
    let rows = raw.labels.len();

    let mut distinct: Vec<i64> = raw.labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let kept: BTreeMap<i64, usize> = distinct
        .iter()
        .take(manifest.num_classes)
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    let mut dataset = WindowedDataset::new(
        manifest.channel_columns.len(),
        manifest.window_length,
        manifest.sample_rate,
        manifest.num_classes,
    );
    let mut start = 0usize;
    while start + manifest.window_length <= rows {
        let end = start + manifest.window_length;
        let first = raw.labels[start];
        if raw.labels[start..end].iter().all(|&l| l == first) {
            if let Some(&class) = kept.get(&first) {
                let channels: Vec<&[f64]> =
                    raw.channels.iter().map(|c| &c[start..end]).collect();
                dataset.push_window(&channels, class);
            }
        }
        start += manifest.window_stride;
    }
    if dataset.num_windows() == 0 {
        return Err(DataError::ZeroWindows { rows, window_length: manifest.window_length });
    }
    if manifest.subset_fraction < 1.0 {
        dataset = subsample(&dataset, manifest.subset_fraction, manifest.shuffle_seed);
    }
    Ok(dataset)
}

/// Shuffles windows and keeps a proportional quota per class (at least one).
fn subsample(dataset: &WindowedDataset, fraction: f64, seed: u64) -> WindowedDataset {
    let counts = dataset.class_counts();
    let quotas: Vec<usize> = counts
        .iter()
        .map(|&n| if n == 0 { 0 } else { (((n as f64) * fraction).round() as usize).max(1) })
        .collect();
    let mut order: Vec<usize> = (0..dataset.num_windows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut taken = vec![0usize; dataset.num_classes];
    let mut out = WindowedDataset::new(
        dataset.num_channels(),
        dataset.window_length(),
        dataset.sample_rate,
        dataset.num_classes,
    );
    for &w in &order {
        let class = dataset.labels[w];
        if taken[class] < quotas[class] {
            taken[class] += 1;
            let channels: Vec<&[f64]> =
                (0..dataset.num_channels()).map(|c| dataset.channel(w, c)).collect();
            out.push_window(&channels, class);
        }
    }
    out
}

impl fmt::Display for WindowedDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} windows x {} channels x {} samples, class counts {:?}",
            self.num_windows(),
            self.num_channels(),
            self.window_length(),
            self.class_counts()
        )
    }
}
