//! Model-based reconstruction of the theoretical maximum DC power of a
//! photovoltaic plant from DC voltage, current and cell-temperature
//! measurements.
//!
//! The crate provides:
//! - the single-diode five-parameter model with STC identification and
//!   translation to arbitrary conditions ([`pv`]);
//! - three irradiance estimators: analytical closed form, immersion &
//!   invariance observer, extended Kalman filter ([`estimators`]);
//! - a k-means variance model selecting the EKF process noise ([`variance`]);
//! - a synthetic plant simulator with sensor-noise injection ([`sim`]);
//! - evaluation metrics, noise-robustness sweeps and amplitude spectra
//!   ([`eval`]);
//! - a maximum-power training-series reconstruction pipeline for forecasting
//!   ([`forecast`]);
//! - configuration and CSV ingestion ([`io`]).

pub mod error;
pub mod estimators;
pub mod eval;
pub mod forecast;
pub mod io;
pub mod pv;
pub mod sim;
pub mod variance;

pub use error::{Error, Result};
