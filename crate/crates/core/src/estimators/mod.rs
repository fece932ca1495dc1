//! Irradiance estimators operating on streams of measurement samples.
//!
//! Three model-based estimators (analytical closed form, immersion &
//! invariance observer, extended Kalman filter) plus the pyranometer
//! pass-through. Each accepted sample yields one [`IrradianceEstimate`];
//! rejected samples go to a rejection log and leave stateful estimators
//! untouched.

pub mod analytical;
pub mod ekf;
pub mod iandi;

pub use analytical::analytical_estimate;
pub use ekf::{ekf_step, linearize, EkfConfig, EkfState, SensorTolerances};
pub use iandi::{iandi_step, IandIConfig, IandIStep};

use crate::error::{Error, Result};
use crate::pv::types::PlantModel;
use crate::pv::{S_MAX, S_MIN};
use crate::variance::ClusterModel;
use std::collections::VecDeque;

/// One timestamped measurement of the array DC terminals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSample {
    /// Seconds; strictly increasing within a stream.
    pub timestamp: f64,
    /// Array DC voltage [V].
    pub v: f64,
    /// Array DC current [A].
    pub i: f64,
    /// Cell temperature [K], offset-corrected.
    pub t: f64,
    /// Optional pyranometer reading [W/m2].
    pub gni: Option<f64>,
}

impl MeasurementSample {
    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0 && self.i >= 0.0 && self.t > 0.0)
            || !self.v.is_finite()
            || !self.i.is_finite()
        {
            return Err(Error::invalid(
                "measurement sample",
                format!("t={} v={} i={} T={}", self.timestamp, self.v, self.i, self.t),
            ));
        }
        Ok(())
    }
}

/// Which estimator produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Analytical,
    IandI,
    Ekf,
    Pyranometer,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Analytical => "analytical",
            EstimatorKind::IandI => "iandi",
            EstimatorKind::Ekf => "ekf",
            EstimatorKind::Pyranometer => "pyranometer",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "analytical" => Ok(EstimatorKind::Analytical),
            "iandi" => Ok(EstimatorKind::IandI),
            "ekf" => Ok(EstimatorKind::Ekf),
            "pyranometer" => Ok(EstimatorKind::Pyranometer),
            other => Err(Error::invalid(
                "estimator",
                format!("unknown estimator '{other}' (expected analytical|iandi|ekf|pyranometer)"),
            )),
        }
    }
}

/// Estimated irradiance for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrradianceEstimate {
    pub timestamp: f64,
    /// Estimated irradiance [W/m2].
    pub s_hat: f64,
    /// Estimation variance [(W/m2)^2], EKF only.
    pub variance: Option<f64>,
    pub estimator: EstimatorKind,
}

/// Accepted irradiance range; estimates outside are rejected and stateful
/// estimators hold their previous state (mirrors daylight filtering).
#[derive(Debug, Clone, Copy)]
pub struct AcceptanceRange {
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for AcceptanceRange {
    fn default() -> Self {
        AcceptanceRange {
            s_min: S_MIN,
            s_max: S_MAX,
        }
    }
}

impl AcceptanceRange {
    pub fn check(&self, s_hat: f64) -> Result<()> {
        if !s_hat.is_finite() || s_hat <= self.s_min || s_hat > self.s_max {
            return Err(Error::RejectedSample {
                s_hat,
                min: self.s_min,
                max: self.s_max,
            });
        }
        Ok(())
    }
}

/// Pyranometer pass-through: the GNI reading becomes the estimate.
pub fn pyranometer_estimate(
    sample: &MeasurementSample,
    range: AcceptanceRange,
) -> Result<IrradianceEstimate> {
    let gni = sample.gni.ok_or(Error::MissingGni {
        timestamp: sample.timestamp,
    })?;
    range.check(gni)?;
    Ok(IrradianceEstimate {
        timestamp: sample.timestamp,
        s_hat: gni,
        variance: None,
        estimator: EstimatorKind::Pyranometer,
    })
}

/// Per-sample failure recorded while running a series.
#[derive(Debug)]
pub struct Rejection {
    pub timestamp: f64,
    pub reason: Error,
}

/// Non-fatal events raised while running a series.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesEvent {
    /// I&I state clamped back into (0, s_max].
    StateClamped { timestamp: f64, raw: f64 },
    /// Forward-Euler stability bound gamma*dt*dPhi/dS < 2 violated.
    StabilityBoundViolated { timestamp: f64, product: f64 },
    /// EKF variance went non-positive and was reset to the prior.
    VarianceReset { timestamp: f64 },
}

/// Full configuration for a series run.
#[derive(Debug, Clone)]
pub struct SeriesConfig {
    pub kind: EstimatorKind,
    pub range: AcceptanceRange,
    /// I&I gain [1/s].
    pub gamma: f64,
    /// I&I initial state [W/m2].
    pub s_init: f64,
    /// Fallback sample interval for the first sample [s].
    pub default_dt: f64,
    pub ekf: EkfConfig,
    /// Process-noise source: fixed unless a cluster model is supplied.
    pub cluster_model: Option<ClusterModel>,
    /// Denominator guard of the analytical inversion [A].
    pub denominator_epsilon: f64,
}

impl SeriesConfig {
    pub fn new(kind: EstimatorKind, model: &PlantModel) -> Self {
        SeriesConfig {
            kind,
            range: AcceptanceRange::default(),
            gamma: 0.7,
            s_init: 100.0,
            default_dt: 1.0,
            ekf: EkfConfig::from_model(model),
            cluster_model: None,
            denominator_epsilon: 1e-6,
        }
    }
}

/// Result of running one estimator over a sample stream.
#[derive(Debug)]
pub struct SeriesResult {
    pub estimates: Vec<IrradianceEstimate>,
    pub rejections: Vec<Rejection>,
    pub events: Vec<SeriesEvent>,
}

/// Apply the configured estimator sequentially over an ordered sample
/// stream, maintaining state for I&I and EKF. Per-sample errors are
/// aggregated without aborting the run.
pub fn estimate_series(
    samples: &[MeasurementSample],
    config: &SeriesConfig,
    model: &PlantModel,
) -> Result<SeriesResult> {
    for pair in samples.windows(2) {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::invalid(
                "sample stream",
                format!(
                    "timestamps not strictly increasing at t={}",
                    pair[1].timestamp
                ),
            ));
        }
    }

    let mut estimates = Vec::with_capacity(samples.len());
    let mut rejections = Vec::new();
    let mut events = Vec::new();

    let iandi_cfg =
        IandIConfig::from_model(model, config.gamma, config.s_init).with_range(config.range);
    let mut iandi_state = config.s_init;
    let mut ekf_state = EkfState::from_config(&config.ekf);
    // Differentiated estimates feeding the clustered process-noise selection.
    let mut delta_history: VecDeque<f64> = VecDeque::new();
    let mut last_s_hat: Option<f64> = None;
    let mut prev_timestamp: Option<f64> = None;

    for sample in samples {
        let dt = match prev_timestamp {
            Some(t0) => sample.timestamp - t0,
            None => config.default_dt,
        };
        prev_timestamp = Some(sample.timestamp);

        let outcome = match config.kind {
            EstimatorKind::Analytical => {
                analytical_estimate(sample, model, config.denominator_epsilon, config.range)
            }
            EstimatorKind::Pyranometer => pyranometer_estimate(sample, config.range),
            EstimatorKind::IandI => match iandi_step(iandi_state, sample, &iandi_cfg, dt) {
                Ok(step) => {
                    if let Some(raw) = step.clamped_from {
                        events.push(SeriesEvent::StateClamped {
                            timestamp: sample.timestamp,
                            raw,
                        });
                    }
                    if let Some(product) = step.stability_violation {
                        events.push(SeriesEvent::StabilityBoundViolated {
                            timestamp: sample.timestamp,
                            product,
                        });
                    }
                    iandi_state = step.state;
                    Ok(step.estimate)
                }
                Err(e) => Err(e),
            },
            EstimatorKind::Ekf => {
                let q = match &config.cluster_model {
                    Some(cluster) => {
                        select_q_from_history(cluster, &delta_history).unwrap_or(config.ekf.q_fixed)
                    }
                    None => config.ekf.q_fixed,
                };
                match ekf_step(&ekf_state, sample, q, model, &config.ekf, config.range) {
                    Ok((next, estimate, reset)) => {
                        if reset {
                            events.push(SeriesEvent::VarianceReset {
                                timestamp: sample.timestamp,
                            });
                        }
                        ekf_state = next;
                        Ok(estimate)
                    }
                    Err(e) => Err(e),
                }
            }
        };

        match outcome {
            Ok(estimate) => {
                if let Some(prev) = last_s_hat {
                    delta_history.push_back(estimate.s_hat - prev);
                    let cap = config
                        .cluster_model
                        .as_ref()
                        .map(|c| c.window_length + 1)
                        .unwrap_or(64);
                    while delta_history.len() > cap {
                        delta_history.pop_front();
                    }
                }
                last_s_hat = Some(estimate.s_hat);
                estimates.push(estimate);
            }
            Err(reason) => rejections.push(Rejection {
                timestamp: sample.timestamp,
                reason,
            }),
        }
    }

    Ok(SeriesResult {
        estimates,
        rejections,
        events,
    })
}

fn select_q_from_history(model: &ClusterModel, history: &VecDeque<f64>) -> Option<f64> {
    let n = model.window_length;
    if history.len() < n + 1 {
        return None;
    }
    let values: Vec<f64> = history.iter().copied().collect();
    let features = crate::variance::window_features(&values[values.len() - (n + 1)..], n)?;
    Some(crate::variance::select_q(model, &features))
}
