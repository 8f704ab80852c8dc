//! One-sided magnitude spectra via an iterative radix-2 FFT.
//!
//! Signals are zero-padded to the next power of two. Magnitudes carry the
//! 2/N amplitude scaling (1/N at the DC and Nyquist bins) so a pure sinusoid
//! of amplitude A shows a peak of about A.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("signal must contain at least 2 samples, got {0}")]
    TooShort(usize),
}

/// One-sided magnitude spectrum, length `N/2 + 1` for transform length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrum {
    pub magnitudes: Vec<f64>,
    /// Hz per bin of the (possibly padded) transform.
    pub bin_resolution: f64,
}

fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

/// In-place iterative Cooley-Tukey over interleaved (re, im) pairs.
/// Length must be a power of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut mask = n >> 1;
        while mask > 0 && j & mask != 0 {
            j ^= mask;
            mask >>= 1;
        }
        j |= mask;
    }
    let mut len = 2;
    while len <= n {
        let angle = -std::f64::consts::TAU / len as f64;
        let (w_im, w_re) = angle.sin_cos();
        let mut start = 0;
        while start < n {
            let mut cur_re = 1.0;
            let mut cur_im = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let t_re = cur_re * re[b] - cur_im * im[b];
                let t_im = cur_re * im[b] + cur_im * re[b];
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Computes the one-sided, amplitude-scaled magnitude spectrum of a real
/// signal. Deterministic; zero-pads to the next power of two.
pub fn fft_magnitude(signal: &[f64], sample_rate: f64) -> Result<MagnitudeSpectrum, SpectralError> {
    if signal.len() < 2 {
        return Err(SpectralError::TooShort(signal.len()));
    }
    let n = next_power_of_two(signal.len());
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    re[..signal.len()].copy_from_slice(signal);
    fft_in_place(&mut re, &mut im);
    let half = n / 2;
    let mut magnitudes = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let mag = (re[k] * re[k] + im[k] * im[k]).sqrt();
        let scale = if k == 0 || k == half { 1.0 / n as f64 } else { 2.0 / n as f64 };
        magnitudes.push(mag * scale);
    }
    Ok(MagnitudeSpectrum { magnitudes, bin_resolution: sample_rate / n as f64 })
}
