//! Preprocessing chain: constant-component removal, normalization, and
//! Savitzky-Golay smoothing.
//!
//! The pipeline runs per window and channel: DC removal first, then a shared
//! per-channel scale to unit standard deviation (computed over all windows of
//! the channel, so the relative energy of windows is preserved), then the
//! smoothing filter followed by a second DC removal, since the filter's
//! boundary fits do not preserve the mean exactly. Boundary samples are
//! smoothed by evaluating the edge-window polynomial fit at the boundary
//! offsets, so output length always equals input length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::WindowedDataset;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("empty input")]
    EmptyInput,
    #[error("input length {len} below minimum {min}")]
    TooShort { len: usize, min: usize },
    #[error("signal length {len} shorter than filter window {window_size}")]
    SignalShorterThanWindow { len: usize, window_size: usize },
    #[error("invalid Savitzky-Golay parameters: {0}")]
    InvalidParams(String),
}

/// Savitzky-Golay filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGolParams {
    pub window_size: usize,
    pub poly_order: usize,
}

impl Default for SavGolParams {
    fn default() -> Self {
        Self { window_size: 9, poly_order: 7 }
    }
}

impl SavGolParams {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.window_size % 2 == 0 || self.window_size == 0 {
            return Err(PreprocessError::InvalidParams(format!(
                "window_size must be odd and positive, got {}",
                self.window_size
            )));
        }
        if self.poly_order >= self.window_size {
            return Err(PreprocessError::InvalidParams(format!(
                "poly_order {} must be < window_size {}",
                self.poly_order, self.window_size
            )));
        }
        Ok(())
    }
}

/// Subtracts the arithmetic mean.
pub fn remove_dc(signal: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    if signal.is_empty() {
        return Err(PreprocessError::EmptyInput);
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    Ok(signal.iter().map(|&x| x - mean).collect())
}

/// Z-scores a sequence to zero mean and unit population standard deviation.
/// A constant input maps to all zeros.
pub fn normalize(signal: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    if signal.len() < 2 {
        return Err(PreprocessError::TooShort { len: signal.len(), min: 2 });
    }
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok(vec![0.0; signal.len()]);
    }
    let std = var.sqrt();
    Ok(signal.iter().map(|&x| (x - mean) / std).collect())
}

/// Solves `m x = b` in place by Gaussian elimination with partial pivoting.
/// `m` is square and small (poly_order + 1 at most).
fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        b.swap(col, pivot);
        let diag = m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// Least-squares smoothing kernel evaluated at integer offset `t0` from the
/// window center: fit a degree-`poly_order` polynomial over offsets
/// `-h..=h` and read it off at `t0`.
fn savgol_kernel(params: SavGolParams, t0: i64) -> Vec<f64> {
    let w = params.window_size;
    let d = params.poly_order + 1;
    let h = (w / 2) as i64;
    // Vandermonde A[j][m] = (j - h)^m
    let a: Vec<Vec<f64>> = (0..w)
        .map(|j| {
            let t = (j as i64 - h) as f64;
            (0..d).map(|m| t.powi(m as i32)).collect()
        })
        .collect();
    // normal matrix G = A^T A
    let mut g = vec![vec![0.0; d]; d];
    for row in &a {
        for (i, gi) in g.iter_mut().enumerate() {
            for (j, gij) in gi.iter_mut().enumerate() {
                *gij += row[i] * row[j];
            }
        }
    }
    let v: Vec<f64> = (0..d).map(|m| (t0 as f64).powi(m as i32)).collect();
    let z = solve_linear(g, v);
    // kernel c = A z, so p(t0) = c . x
    a.iter().map(|row| row.iter().zip(&z).map(|(r, zz)| r * zz).sum()).collect()
}

/// Smoothing coefficients for the central point of the window.
pub fn savgol_coefficients(params: SavGolParams) -> Result<Vec<f64>, PreprocessError> {
    params.validate()?;
    Ok(savgol_kernel(params, 0))
}

/// Applies the Savitzky-Golay smoothing filter, preserving length.
///
/// Interior points use the central kernel; the first and last `window/2`
/// points evaluate the first/last full-window fit at their offsets.
pub fn savgol_filter(signal: &[f64], params: SavGolParams) -> Result<Vec<f64>, PreprocessError> {
    params.validate()?;
    let n = signal.len();
    let w = params.window_size;
    if n < w {
        return Err(PreprocessError::SignalShorterThanWindow { len: n, window_size: w });
    }
    let h = w / 2;
    let center = savgol_kernel(params, 0);
    let mut out = vec![0.0; n];
    for i in h..n - h {
        out[i] = center.iter().zip(&signal[i - h..i - h + w]).map(|(c, x)| c * x).sum();
    }
    for i in 0..h {
        let kernel = savgol_kernel(params, i as i64 - h as i64);
        out[i] = kernel.iter().zip(&signal[..w]).map(|(c, x)| c * x).sum();
    }
    for i in n - h..n {
        let t0 = (i - (n - 1 - h)) as i64;
        let kernel = savgol_kernel(params, t0);
        out[i] = kernel.iter().zip(&signal[n - w..]).map(|(c, x)| c * x).sum();
    }
    Ok(out)
}

/// Runs the full preprocessing chain over every window and channel:
/// per-window DC removal, per-channel scaling to unit standard deviation
/// (population, over all windows of that channel), per-window smoothing.
pub fn preprocess_pipeline(
    dataset: &WindowedDataset,
    params: SavGolParams,
) -> Result<WindowedDataset, PreprocessError> {
    params.validate()?;
    if dataset.window_length() < params.window_size {
        return Err(PreprocessError::SignalShorterThanWindow {
            len: dataset.window_length(),
            window_size: params.window_size,
        });
    }
    let mut out = dataset.clone();
    for w in 0..out.num_windows() {
        for c in 0..out.num_channels() {
            let cleaned = remove_dc(out.channel(w, c))?;
            out.channel_mut(w, c).copy_from_slice(&cleaned);
        }
    }
    // shared per-channel scale; windows keep their relative energy
    for c in 0..out.num_channels() {
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for w in 0..out.num_windows() {
            for &x in out.channel(w, c) {
                sum_sq += x * x;
            }
            count += out.window_length();
        }
        let var = sum_sq / count as f64;
        if var > 0.0 {
            let inv = 1.0 / var.sqrt();
            for w in 0..out.num_windows() {
                for x in out.channel_mut(w, c) {
                    *x *= inv;
                }
            }
        }
    }
    for w in 0..out.num_windows() {
        for c in 0..out.num_channels() {
            // the boundary fits can shift the window mean by a hair, so the
            // constant-component removal is reapplied after smoothing
            let smoothed = remove_dc(&savgol_filter(out.channel(w, c), params)?)?;
            out.channel_mut(w, c).copy_from_slice(&smoothed);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, ClassProfile, SyntheticSpec};

    #[test]
    fn remove_dc_examples() {
        assert_eq!(remove_dc(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(remove_dc(&[1.0, 3.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(remove_dc(&[]), Err(PreprocessError::EmptyInput)));
    }

    #[test]
    fn remove_dc_random_vector_zero_mean() {
        let signal: Vec<f64> = (0..512).map(|i| ((i * 37 + 11) % 101) as f64 * 0.37 - 18.0).collect();
        let out = remove_dc(&signal).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let scale = 1.0f64.max((signal.iter().sum::<f64>() / 512.0).abs());
        assert!(mean.abs() < 1e-12 * scale, "mean {mean}");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0, -1.0, 1.0, -1.0]).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(normalize(&[7.0, 7.0, 7.0, 7.0]).unwrap(), vec![0.0; 4]);
        assert_eq!(normalize(&[0.0, 2.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(normalize(&[1.0]), Err(PreprocessError::TooShort { .. })));
    }

    #[test]
    fn savgol_moving_average_window3_order0() {
        let c = savgol_coefficients(SavGolParams { window_size: 3, poly_order: 0 }).unwrap();
        for v in &c {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn savgol_known_quadratic_window5() {
        // classic least-squares row for window 5, order 2
        let expected = [-3.0 / 35.0, 12.0 / 35.0, 17.0 / 35.0, 12.0 / 35.0, -3.0 / 35.0];
        let c = savgol_coefficients(SavGolParams { window_size: 5, poly_order: 2 }).unwrap();
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn savgol_default_kernel_sums_to_one_and_symmetric() {
        let c = savgol_coefficients(SavGolParams::default()).unwrap();
        assert_eq!(c.len(), 9);
        let sum: f64 = c.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for j in 0..4 {
            assert!((c[j] - c[8 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn savgol_rejects_bad_params() {
        assert!(savgol_coefficients(SavGolParams { window_size: 4, poly_order: 2 }).is_err());
        assert!(savgol_coefficients(SavGolParams { window_size: 5, poly_order: 5 }).is_err());
    }

    #[test]
    fn degree_seven_polynomial_passes_unchanged() {
        // p(t) = t^7 sampled on t = 0..19; exact up to float rounding, so the
        // 1e-9 tolerance is relative to the sample magnitude
        let signal: Vec<f64> = (0..20).map(|i| (i as f64).powi(7)).collect();
        let out = savgol_filter(&signal, SavGolParams::default()).unwrap();
        for (y, x) in out.iter().zip(&signal) {
            assert!((y - x).abs() < 1e-9 * 1.0f64.max(x.abs()), "{y} vs {x}");
        }
    }

    #[test]
    fn constant_signal_unchanged() {
        let signal = vec![3.25; 16];
        let out = savgol_filter(&signal, SavGolParams::default()).unwrap();
        for y in &out {
            assert!((y - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_is_linear() {
        let params = SavGolParams::default();
        let x: Vec<f64> = (0..32).map(|i| ((i * 13 + 5) % 17) as f64 - 8.0).collect();
        let y: Vec<f64> = (0..32).map(|i| ((i * 7 + 3) % 23) as f64 * 0.5).collect();
        let a = 2.5;
        let b = -1.25;
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let fx = savgol_filter(&x, params).unwrap();
        let fy = savgol_filter(&y, params).unwrap();
        let fc = savgol_filter(&combo, params).unwrap();
        for i in 0..32 {
            assert!((fc[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_too_short_errors() {
        let signal = vec![1.0; 8];
        assert!(matches!(
            savgol_filter(&signal, SavGolParams::default()),
            Err(PreprocessError::SignalShorterThanWindow { .. })
        ));
    }

    fn small_synthetic() -> crate::dataio::WindowedDataset {
        generate_synthetic(&SyntheticSpec {
            num_classes: 2,
            windows_per_class: 4,
            window_length: 64,
            class_profiles: vec![
                ClassProfile { amplitude_scale: 1.0, dominant_frequency_bin: 4, noise_std: 0.1 },
                ClassProfile { amplitude_scale: 5.0, dominant_frequency_bin: 4, noise_std: 0.1 },
            ],
            seed: 3,
            num_channels: 2,
        })
        .unwrap()
    }

    #[test]
    fn pipeline_constant_windows_become_zero() {
        let mut ds = crate::dataio::WindowedDataset::new(1, 16, 16.0, 2);
        ds.push_window(&[&[4.0; 16]], 0);
        ds.push_window(&[&[-2.0; 16]], 1);
        let out = preprocess_pipeline(&ds, SavGolParams::default()).unwrap();
        for w in 0..2 {
            for &x in out.channel(w, 0) {
                assert_eq!(x, 0.0);
            }
        }
    }

    #[test]
    fn pipeline_keeps_windows_zero_mean() {
        let ds = small_synthetic();
        let once = preprocess_pipeline(&ds, SavGolParams::default()).unwrap();
        let twice = preprocess_pipeline(&once, SavGolParams::default()).unwrap();
        for out in [&once, &twice] {
            for w in 0..out.num_windows() {
                for c in 0..out.num_channels() {
                    let ch = out.channel(w, c);
                    let mean = ch.iter().sum::<f64>() / ch.len() as f64;
                    assert!(mean.abs() < 1e-9, "mean {mean}");
                }
            }
        }
    }

    #[test]
    fn pipeline_matches_stagewise_application() {
        let ds = small_synthetic();
        let params = SavGolParams::default();
        let out = preprocess_pipeline(&ds, params).unwrap();

        // manual stage-by-stage replay
        let mut manual = ds.clone();
        for w in 0..manual.num_windows() {
            for c in 0..manual.num_channels() {
                let cleaned = remove_dc(manual.channel(w, c)).unwrap();
                manual.channel_mut(w, c).copy_from_slice(&cleaned);
            }
        }
        for c in 0..manual.num_channels() {
            let all: Vec<f64> = (0..manual.num_windows())
                .flat_map(|w| manual.channel(w, c).to_vec())
                .collect();
            let var = all.iter().map(|x| x * x).sum::<f64>() / all.len() as f64;
            let inv = 1.0 / var.sqrt();
            for w in 0..manual.num_windows() {
                for x in manual.channel_mut(w, c) {
                    *x *= inv;
                }
            }
        }
        for w in 0..manual.num_windows() {
            for c in 0..manual.num_channels() {
                let smoothed =
                    remove_dc(&savgol_filter(manual.channel(w, c), params).unwrap()).unwrap();
                manual.channel_mut(w, c).copy_from_slice(&smoothed);
            }
        }

        for w in 0..ds.num_windows() {
            for c in 0..ds.num_channels() {
                for (a, b) in out.channel(w, c).iter().zip(manual.channel(w, c)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        // labels untouched
        assert_eq!(out.labels, ds.labels);
    }

    #[test]
    fn pipeline_preserves_amplitude_ordering_between_windows() {
        // the shared channel scale must keep louder windows louder
        let ds = small_synthetic();
        let out = preprocess_pipeline(&ds, SavGolParams::default()).unwrap();
        let energy = |w: usize| -> f64 { out.channel(w, 0).iter().map(|x| x * x).sum() };
        let quiet: f64 = (0..4).map(energy).sum();
        let loud: f64 = (4..8).map(energy).sum();
        assert!(loud > 10.0 * quiet, "loud {loud} quiet {quiet}");
    }
}
