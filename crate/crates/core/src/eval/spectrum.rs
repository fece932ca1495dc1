//! Single-sided amplitude spectrum of a uniformly sampled series.
//!
//! The series is de-meaned (the plots of interest show fluctuation content)
//! and zero-padded to the next power of two. Amplitudes are normalized by
//! the original sample count so a pure sinusoid of amplitude A shows a peak
//! of A at its frequency.

use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Amplitude spectrum as (frequency [Hz], amplitude) pairs, DC to Nyquist.
pub fn amplitude_spectrum(series: &[f64], sample_interval: f64) -> Result<Vec<(f64, f64)>> {
    if series.len() < 16 {
        return Err(Error::invalid(
            "spectrum",
            format!("need at least 16 samples, got {}", series.len()),
        ));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::invalid("spectrum", "sample interval must be positive"));
    }

    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let padded_len = n.next_power_of_two();

    let mut buffer: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)).take(padded_len - n))
        .collect();

    FftPlanner::new()
        .plan_fft_forward(padded_len)
        .process(&mut buffer);

    let half = padded_len / 2;
    let df = 1.0 / (padded_len as f64 * sample_interval);
    let norm = n as f64;
    let mut out = Vec::with_capacity(half + 1);
    for (k, value) in buffer.iter().take(half + 1).enumerate() {
        let amplitude = if k == 0 || k == half {
            value.norm() / norm
        } else {
            2.0 * value.norm() / norm
        };
        out.push((k as f64 * df, amplitude));
    }
    Ok(out)
}

/// Spectrum of a timestamped series; rejects non-uniform sampling.
pub fn amplitude_spectrum_timestamps(
    timestamps: &[f64],
    values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if timestamps.len() != values.len() || timestamps.len() < 2 {
        return Err(Error::invalid("spectrum", "mismatched or too-short series"));
    }
    let dt = timestamps[1] - timestamps[0];
    for w in timestamps.windows(2) {
        let step = w[1] - w[0];
        if (step - dt).abs() > 1e-6 * dt.max(1e-9) {
            return Err(Error::invalid(
                "spectrum",
                format!("non-uniform sampling: step {step} vs {dt}"),
            ));
        }
    }
    amplitude_spectrum(values, dt)
}

/// Total amplitude above a cut-off frequency.
pub fn high_band_content(spectrum: &[(f64, f64)], cutoff_hz: f64) -> f64 {
    spectrum
        .iter()
        .filter(|(f, _)| *f > cutoff_hz)
        .map(|(_, a)| a)
        .sum()
}
