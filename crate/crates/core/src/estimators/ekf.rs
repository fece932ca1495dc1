//! Extended Kalman filter on the scalar irradiance state.
//!
//! The state is x = S with a persistence process model (F = 1, process noise
//! variance Q). The observation vector [v, i, T] is linked to the state
//! through the diode equation solved for each measured quantity:
//!
//! ```text
//! v = f1(x, i, T),   i = f2(x, v, T),   T = f3(x, v, i)
//! ```
//!
//! Each f_j is linearized to first order around the last estimate a = x_prev,
//! giving H = [f1_x, f2_x, f3_x]^T and the bias D = f(a) - H*a, so the
//! innovation is y - f(a). The slopes come from implicit differentiation of
//! the composite residual: f_j_x = -F_S/F_j.
//!
//! Update, with P the scalar estimation variance and R = diag(s1^2,s2^2,s3^2):
//!
//! ```text
//! K   = P*H^T (H P H^T + R)^-1
//! x   = x_prev + K*(y - f(x_prev))
//! P   = (1 - K H)(P_prev + Q)
//! ```
//!
//! The 3x3 inverse reduces by Sherman-Morrison to scalars:
//! K_j = P*h_j/s_j^2 / (1 + P*g),  g = sum h_j^2/s_j^2,  K H = P*g/(1 + P*g).

use crate::error::{Error, Result};
use crate::estimators::{AcceptanceRange, EstimatorKind, IrradianceEstimate, MeasurementSample};
use crate::pv::curve::solve_current;
use crate::pv::model::partials;
use crate::pv::types::{OperatingConditions, PlantModel};
use crate::pv::translate_parameters;

/// Sensor tolerances, interpreted as the 3-sigma level of zero-mean Gaussian
/// noise: sigma_j = tolerance_j / 3.
#[derive(Debug, Clone, Copy)]
pub struct SensorTolerances {
    /// Relative current tolerance (e.g. 0.002 for +-0.2%).
    pub current_rel: f64,
    /// Relative voltage tolerance (e.g. 0.005 for +-0.5%).
    pub voltage_rel: f64,
    /// Absolute temperature tolerance [K].
    pub temperature_abs: f64,
    /// When true, relative tolerances are referenced to the full-scale
    /// values below; otherwise to the instantaneous reading.
    pub full_scale_referenced: bool,
}

impl Default for SensorTolerances {
    fn default() -> Self {
        SensorTolerances {
            current_rel: 0.002,
            voltage_rel: 0.005,
            temperature_abs: 0.5,
            full_scale_referenced: true,
        }
    }
}

/// Filter configuration: prior, measurement noise, process noise.
#[derive(Debug, Clone)]
pub struct EkfConfig {
    /// Prior mean a_0 [W/m2].
    pub prior_mean: f64,
    /// Prior variance P_0 [(W/m2)^2].
    pub prior_var: f64,
    /// Diagonal of R: variances of (v, i, T) noise.
    pub r_diag: [f64; 3],
    /// Process-noise variance used when no cluster model is active.
    pub q_fixed: f64,
    /// Sensor tolerances kept for reading-referenced recomputation.
    pub tolerances: SensorTolerances,
    /// Full-scale voltage and current of the measured array.
    pub full_scale_v: f64,
    pub full_scale_i: f64,
    /// Per-channel innovation gate in sigma units. A marginally solvable
    /// implicit observation can race far from the measurement and would
    /// otherwise inject an implausible many-sigma innovation; such channels
    /// are excluded from that update.
    pub innovation_gate_sigma: f64,
}

impl EkfConfig {
    /// Defaults: prior 500 W/m2 with (300 W/m2)^2 variance, R from the
    /// datasheet tolerances at the array full-scale values.
    pub fn from_model(model: &PlantModel) -> Self {
        let scale = model.array_scale();
        let sheet = &model.datasheet;
        let full_scale_v =
            sheet.v_oc_stc * model.topology.modules_per_string as f64;
        let full_scale_i = sheet.i_sc_stc / sheet.n_p as f64 * scale.n_p;
        let tolerances = SensorTolerances::default();
        EkfConfig {
            prior_mean: 500.0,
            prior_var: 300.0 * 300.0,
            r_diag: measurement_variances(&tolerances, full_scale_v, full_scale_i, None),
            q_fixed: 25.0,
            tolerances,
            full_scale_v,
            full_scale_i,
            innovation_gate_sigma: 50.0,
        }
    }

    fn r_for_sample(&self, sample: &MeasurementSample) -> [f64; 3] {
        if self.tolerances.full_scale_referenced {
            self.r_diag
        } else {
            measurement_variances(
                &self.tolerances,
                self.full_scale_v,
                self.full_scale_i,
                Some((sample.v, sample.i)),
            )
        }
    }
}

/// Variances (sigma^2) of the (v, i, T) channels. With `reading` given the
/// relative tolerances reference the instantaneous values instead of full
/// scale.
pub fn measurement_variances(
    tol: &SensorTolerances,
    full_scale_v: f64,
    full_scale_i: f64,
    reading: Option<(f64, f64)>,
) -> [f64; 3] {
    let (v_ref, i_ref) = match reading {
        Some((v, i)) => (v.max(1e-3), i.max(1e-3)),
        None => (full_scale_v, full_scale_i),
    };
    let s_v = tol.voltage_rel * v_ref / 3.0;
    let s_i = tol.current_rel * i_ref / 3.0;
    let s_t = tol.temperature_abs / 3.0;
    [s_v * s_v, s_i * s_i, s_t * s_t]
}

/// Scalar filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    /// Expected irradiance [W/m2].
    pub x_hat: f64,
    /// Estimation variance [(W/m2)^2].
    pub p: f64,
}

impl EkfState {
    pub fn from_config(config: &EkfConfig) -> Self {
        EkfState {
            x_hat: config.prior_mean,
            p: config.prior_var,
        }
    }
}

/// Linearization of the three observation channels at `s_lin`: per channel
/// the predicted observation f_j(s_lin) and its slope f_j_x from implicit
/// differentiation. A channel whose implicit equation has no physical
/// solution at the linearization point (the measured current can exceed any
/// current the model produces at a low trial irradiance) comes back as
/// `None` and is skipped by the update.
pub fn linearize(
    s_lin: f64,
    sample: &MeasurementSample,
    model: &PlantModel,
) -> Result<[Option<(f64, f64)>; 3]> {
    let scale = model.array_scale();
    let stc = &model.stc;

    // f1: voltage at (S, i_meas, T_meas).
    let ch_v = match solve_voltage(s_lin, sample.i, sample.t, model) {
        Ok(v_pred) => {
            let p1 = partials(
                v_pred,
                sample.i,
                stc,
                OperatingConditions::new(sample.t, s_lin)?,
                scale,
            )?;
            Some((v_pred, -p1.f_s / p1.f_v))
        }
        Err(Error::SolverFailure(_)) => None,
        Err(e) => return Err(e),
    };

    // f2: current at (S, v_meas, T_meas); Lambert closed form.
    let cond = OperatingConditions::new(sample.t, s_lin)?;
    let translated = translate_parameters(stc, cond)?;
    let i_pred = solve_current(sample.v, &translated, scale)?;
    let p2 = partials(sample.v, i_pred, stc, cond, scale)?;
    let ch_i = Some((i_pred, -p2.f_s / p2.f_i));

    // f3: temperature at (S, v_meas, i_meas).
    let ch_t = match solve_temperature(s_lin, sample.v, sample.i, model) {
        Ok(t_pred) => {
            let p3 = partials(
                sample.v,
                sample.i,
                stc,
                OperatingConditions::new(t_pred, s_lin)?,
                scale,
            )?;
            Some((t_pred, -p3.f_s / p3.f_t))
        }
        Err(Error::SolverFailure(_)) => None,
        Err(e) => return Err(e),
    };

    Ok([ch_v, ch_i, ch_t])
}

/// Root of f(v, i_fixed) = 0 in v. f is strictly decreasing in v, so a sign
/// bracket plus bisection-Newton is safe.
fn solve_voltage(s: f64, i: f64, t: f64, model: &PlantModel) -> Result<f64> {
    let scale = model.array_scale();
    let stc = &model.stc;
    let cond = OperatingConditions::new(t, s)?;
    let eval = |v: f64| -> Result<f64> { Ok(partials(v, i, stc, cond, scale)?.f) };

    let v_hi_guess = scale.thermal_voltage(stc.n_r, t)
        * ((stc.i_ph * scale.n_p / (stc.i_sat * scale.n_p)).max(2.0)).ln()
        * 1.5;
    let mut lo = -0.1 * v_hi_guess;
    let mut hi = v_hi_guess;
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    for _ in 0..8 {
        if f_lo.signum() != f_hi.signum() {
            break;
        }
        lo -= v_hi_guess;
        hi += v_hi_guess;
        f_lo = eval(lo)?;
        f_hi = eval(hi)?;
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::SolverFailure(format!(
            "no voltage solution for S={s}, i={i}, T={t}"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-11 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of f(T) = 0 at fixed (v, i, S) over a physical temperature window.
fn solve_temperature(s: f64, v: f64, i: f64, model: &PlantModel) -> Result<f64> {
    let scale = model.array_scale();
    let stc = &model.stc;
    let eval = |t: f64| -> Result<f64> {
        Ok(partials(v, i, stc, OperatingConditions::new(t, s)?, scale)?.f)
    };
    // f decreases with temperature through the saturation-current term.
    let (mut lo, mut hi) = (200.0, 420.0);
    let f_lo = eval(lo)?;
    let f_hi = eval(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::SolverFailure(format!(
            "no temperature solution for S={s}, v={v}, i={i}"
        )));
    }
    let increasing = f_hi > f_lo;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if (fm < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One filter step. Returns the new state, the emitted estimate and whether
/// the variance had to be reset to the prior.
pub fn ekf_step(
    state: &EkfState,
    sample: &MeasurementSample,
    q: f64,
    model: &PlantModel,
    config: &EkfConfig,
    range: AcceptanceRange,
) -> Result<(EkfState, IrradianceEstimate, bool)> {
    sample.validate()?;
    if !(state.p > 0.0) || !state.x_hat.is_finite() {
        return Err(Error::FilterSingularity(format!(
            "invalid state x={}, P={}",
            state.x_hat, state.p
        )));
    }

    let r = config.r_for_sample(sample);
    if r.iter().any(|&rj| !(rj > 0.0) || !rj.is_finite()) {
        return Err(Error::FilterSingularity(format!(
            "R diagonal not positive definite: {r:?}"
        )));
    }

    let mut channels = linearize(state.x_hat, sample, model)?;

    // Innovation gating: drop channels whose innovation is implausible
    // against the innovation covariance h^2 P + r (degenerate implicit
    // solves race far from the measurement). The most plausible channel
    // always survives so the filter can recover from a large prior error.
    let y = [sample.v, sample.i, sample.t];
    let mut best: Option<(usize, f64)> = None;
    let mut normalized = [f64::INFINITY; 3];
    for (j, ch) in channels.iter().enumerate() {
        if let Some((pred, h)) = ch {
            let sigma_eff = (h * h * state.p + r[j]).sqrt();
            let nu = (y[j] - pred).abs() / sigma_eff;
            normalized[j] = nu;
            if best.map(|(_, b)| nu < b).unwrap_or(true) {
                best = Some((j, nu));
            }
        }
    }
    let Some((best_idx, _)) = best else {
        return Err(Error::FilterSingularity(format!(
            "no observation channel solvable at a = {}",
            state.x_hat
        )));
    };
    for (j, ch) in channels.iter_mut().enumerate() {
        if j != best_idx && normalized[j] > config.innovation_gate_sigma {
            *ch = None;
        }
    }

    // Sherman-Morrison collapse of K = P H^T (H P H^T + R)^-1 over the
    // usable channels.
    let mut g = 0.0;
    for (j, ch) in channels.iter().enumerate() {
        if let Some((pred, h)) = ch {
            if !pred.is_finite() || !h.is_finite() {
                return Err(Error::FilterSingularity(format!(
                    "non-finite linearization on channel {j}: ({pred}, {h})"
                )));
            }
            g += h * h / r[j];
        }
    }
    let denom = 1.0 + state.p * g;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::FilterSingularity(format!(
            "innovation covariance collapse (1 + P*g = {denom})"
        )));
    }

    let mut correction = 0.0;
    for (j, ch) in channels.iter().enumerate() {
        if let Some((pred, h)) = ch {
            let k_j = state.p * h / r[j] / denom;
            correction += k_j * (y[j] - pred);
        }
    }
    let x_next = state.x_hat + correction;

    let kh = state.p * g / denom;
    let mut p_next = (1.0 - kh) * (state.p + q);
    let mut reset = false;
    if !(p_next > 0.0) || !p_next.is_finite() {
        p_next = config.prior_var;
        reset = true;
    }

    range.check(x_next)?;

    let next = EkfState {
        x_hat: x_next,
        p: p_next,
    };
    Ok((
        next,
        IrradianceEstimate {
            timestamp: sample.timestamp,
            s_hat: x_next,
            variance: Some(p_next),
            estimator: EstimatorKind::Ekf,
        },
        reset,
    ))
}

/// Augment the R entry of one channel with added noise variance; variances
/// of independent noises add.
pub fn augment_r(config: &mut EkfConfig, channel: usize, added_std: f64) {
    config.r_diag[channel] += added_std * added_std;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::analytical_estimate;
    use crate::pv::curve::max_power_point;
    use crate::pv::test_fixtures::plant_model_14kw;

    fn on_model_sample(model: &PlantModel, s: f64, t: f64, timestamp: f64) -> MeasurementSample {
        let params =
            translate_parameters(&model.stc, OperatingConditions::new(t, s).unwrap()).unwrap();
        let scale = model.array_scale();
        let (v_mp, _, _) = max_power_point(&params, scale, 400).unwrap();
        let i = solve_current(v_mp, &params, scale).unwrap();
        MeasurementSample {
            timestamp,
            v: v_mp,
            i,
            t,
            gni: None,
        }
    }

    /// Sample on the high-voltage curtailed branch, where all three implicit
    /// channels stay solvable across a band of linearization points.
    fn curtailed_sample(model: &PlantModel, s: f64, t: f64) -> MeasurementSample {
        let params =
            translate_parameters(&model.stc, OperatingConditions::new(t, s).unwrap()).unwrap();
        let scale = model.array_scale();
        let (v_mp, _, _) = max_power_point(&params, scale, 400).unwrap();
        let v_oc = crate::pv::curve::open_circuit_voltage_root(&params, scale).unwrap();
        let v = v_mp + 0.5 * (v_oc - v_mp);
        let i = solve_current(v, &params, scale).unwrap();
        MeasurementSample {
            timestamp: 0.0,
            v,
            i,
            t,
            gni: None,
        }
    }

    #[test]
    fn slopes_match_central_finite_differences() {
        let model = plant_model_14kw();
        let sample = curtailed_sample(&model, 700.0, 305.0);
        let s_lin = 620.0; // off the true value, as in operation
        let at = linearize(s_lin, &sample, &model).unwrap();

        let ds = 0.05;
        let hi = linearize(s_lin + ds, &sample, &model).unwrap();
        let lo = linearize(s_lin - ds, &sample, &model).unwrap();
        for j in 0..3 {
            let (_, h) = at[j].expect("channel solvable");
            let (pred_hi, _) = hi[j].unwrap();
            let (pred_lo, _) = lo[j].unwrap();
            let fd = (pred_hi - pred_lo) / (2.0 * ds);
            let rel = ((h - fd) / fd).abs();
            assert!(rel < 1e-5, "channel {j}: implicit {h} vs fd {fd} (rel {rel:.2e})");
        }
    }

    #[test]
    fn noise_free_convergence_from_wrong_prior() {
        let model = plant_model_14kw();
        let config = EkfConfig::from_model(&model);
        let mut state = EkfState {
            x_hat: 350.0,
            p: config.prior_var,
        };
        let mut p_prev = f64::INFINITY;
        for k in 0..60 {
            let sample = on_model_sample(&model, 700.0, 303.0, k as f64);
            let (next, est, reset) =
                ekf_step(&state, &sample, 1.0, &model, &config, AcceptanceRange::default())
                    .unwrap();
            assert!(!reset);
            assert!(est.variance.unwrap() > 0.0);
            // Variance decreases monotonically until its floor.
            assert!(next.p <= p_prev * (1.0 + 1e-12) || next.p < 30.0);
            p_prev = next.p;
            state = next;
        }
        assert!(
            (state.x_hat - 700.0).abs() / 700.0 < 0.005,
            "converged to {}",
            state.x_hat
        );
    }

    #[test]
    fn tiny_r_reproduces_analytical_inversion_in_one_step() {
        let model = plant_model_14kw();
        let mut config = EkfConfig::from_model(&model);
        config.r_diag = [1e-12, 1e-12, 1e-12];
        let state = EkfState {
            x_hat: 650.0,
            p: config.prior_var,
        };
        let sample = on_model_sample(&model, 700.0, 303.0, 0.0);
        let (next, _, _) = ekf_step(
            &state,
            &sample,
            1.0,
            &model,
            &config,
            AcceptanceRange::default(),
        )
        .unwrap();
        let analytical = analytical_estimate(
            &sample,
            &model,
            1e-6,
            AcceptanceRange::default(),
        )
        .unwrap();
        assert!(
            (next.x_hat - analytical.s_hat).abs() / analytical.s_hat < 0.001,
            "ekf {} vs analytical {}",
            next.x_hat,
            analytical.s_hat
        );
    }

    #[test]
    fn no_information_limit_keeps_prior() {
        let model = plant_model_14kw();
        let mut config = EkfConfig::from_model(&model);
        config.r_diag = [1e18, 1e18, 1e18];
        let state = EkfState {
            x_hat: 350.0,
            p: config.prior_var,
        };
        let sample = on_model_sample(&model, 700.0, 303.0, 0.0);
        let (next, _, _) = ekf_step(
            &state,
            &sample,
            0.0,
            &model,
            &config,
            AcceptanceRange::default(),
        )
        .unwrap();
        assert!((next.x_hat - 350.0).abs() < 1e-6 * 350.0, "{}", next.x_hat);
    }

    #[test]
    fn r_not_positive_is_singular() {
        let model = plant_model_14kw();
        let mut config = EkfConfig::from_model(&model);
        config.r_diag = [0.0, 1.0, 1.0];
        let state = EkfState {
            x_hat: 500.0,
            p: config.prior_var,
        };
        let sample = on_model_sample(&model, 700.0, 303.0, 0.0);
        let err = ekf_step(
            &state,
            &sample,
            1.0,
            &model,
            &config,
            AcceptanceRange::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::FilterSingularity(_)));
    }
}
