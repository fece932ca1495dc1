//! Estimator scoring: error metrics, amplitude spectra and noise-robustness
//! sweeps.

pub mod spectrum;
pub mod sweep;

pub use spectrum::{amplitude_spectrum, amplitude_spectrum_timestamps, high_band_content};
pub use sweep::{
    gamma_sweep, run_noise_sweep, EstimatorCurve, GammaSweepRow, SweepChannel, SweepConfig,
    SweepEstimator, SweepResult,
};

use crate::error::{Error, Result};

/// The three comparison metrics, all normalized by the ground-truth mean and
/// expressed in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Normalized root-mean-square error [%].
    pub nrmse: f64,
    /// Normalized maximum absolute error [%].
    pub err_max: f64,
    /// Normalized mean error [%] (signed).
    pub nme: f64,
    pub sample_count: usize,
}

/// nRMSE, Err_max and nME of an estimated series against ground truth.
pub fn compute_metrics(estimated: &[f64], truth: &[f64]) -> Result<MetricReport> {
    if estimated.len() != truth.len() {
        return Err(Error::invalid(
            "metrics",
            format!("length mismatch: {} vs {}", estimated.len(), truth.len()),
        ));
    }
    if truth.is_empty() {
        return Err(Error::invalid("metrics", "empty series"));
    }
    let m = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / m;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::invalid(
            "metrics",
            format!("ground-truth mean {mean} cannot normalize"),
        ));
    }

    let mut sq_sum = 0.0;
    let mut abs_max = 0.0f64;
    let mut signed_sum = 0.0;
    for (p_hat, p) in estimated.iter().zip(truth.iter()) {
        let e = p_hat - p;
        sq_sum += e * e;
        abs_max = abs_max.max(e.abs());
        signed_sum += e;
    }

    Ok(MetricReport {
        nrmse: 100.0 * (sq_sum / m).sqrt() / mean,
        err_max: 100.0 * abs_max / mean,
        nme: 100.0 * signed_sum / m / mean,
        sample_count: truth.len(),
    })
}
