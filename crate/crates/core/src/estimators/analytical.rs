//! Closed-form analytical irradiance estimator.
//!
//! Substituting the translation equations into the diode equation and
//! solving for S gives, with everything at the measured array scale:
//!
//! ```text
//! S_hat = S* * (i + i_sat(T)*n_p*(exp((v + B*i)/a) - 1))
//!         / ((I_ph* + alpha*(T - T*))*n_p - (v + B*i)/C*)
//! ```
//!
//! Exact inversion of the forward model at any operating point when the
//! measurements are noise-free.

use crate::error::{Error, Result};
use crate::estimators::{AcceptanceRange, EstimatorKind, IrradianceEstimate, MeasurementSample};
use crate::pv::params::band_gap;
use crate::pv::types::PlantModel;
use crate::pv::{BOLTZMANN_EV, EXP_GUARD, S_STC, T_STC};

pub fn analytical_estimate(
    sample: &MeasurementSample,
    model: &PlantModel,
    denominator_epsilon: f64,
    range: AcceptanceRange,
) -> Result<IrradianceEstimate> {
    sample.validate()?;
    let scale = model.array_scale();
    let stc = &model.stc;
    let t = sample.t;

    let b = stc.r_s * scale.n_s / scale.n_p;
    let c_star = stc.r_p * scale.n_s / scale.n_p;
    let a = scale.thermal_voltage(stc.n_r, t);

    let e_g = band_gap(t);
    let i_sat_np = stc.i_sat
        * scale.n_p
        * (t / T_STC).powi(3)
        * ((stc.e_g / (BOLTZMANN_EV * T_STC) - e_g / (BOLTZMANN_EV * t)).exp());

    let v_drop = sample.v + b * sample.i;
    let exponent = v_drop / a;
    if !exponent.is_finite() || exponent.abs() > EXP_GUARD {
        return Err(Error::ExponentOverflow {
            argument: exponent,
            limit: EXP_GUARD,
        });
    }

    let numerator = sample.i + i_sat_np * exponent.exp_m1();
    let denominator = (stc.i_ph + stc.alpha_cell * (t - T_STC)) * scale.n_p - v_drop / c_star;
    if denominator.abs() < denominator_epsilon {
        return Err(Error::DegenerateOperatingPoint {
            v: sample.v,
            i: sample.i,
            denominator,
        });
    }

    let s_hat = S_STC * numerator / denominator;
    range.check(s_hat)?;

    Ok(IrradianceEstimate {
        timestamp: sample.timestamp,
        s_hat,
        variance: None,
        estimator: EstimatorKind::Analytical,
    })
}
