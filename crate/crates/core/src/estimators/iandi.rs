//! Immersion & invariance irradiance observer.
//!
//! The diode equation is re-parameterized into a measurable signal and a
//! regression function that is strictly increasing in S:
//!
//! ```text
//! y(t)     = i + I0(T)*(exp(C1*(v + C2*i)/T) - 1)
//! Phi(S,t) = S*(C4 + C5*T - C3*(v + C2*i))
//! I0(T)    = C6*T^3*exp(C7 - C8/T + C9*T/(T + C10))
//! ```
//!
//! with y(t) = Phi(S_true, t) exactly for on-model samples. The observer
//! integrates dS/dt = gamma*(y - Phi(S, t)) by forward Euler at the sample
//! interval. Because the shunt resistance scales inversely with S, the
//! shunt term enters Phi multiplied by S (not divided), which is what the
//! C3 constant below encodes.
//!
//! The constants C1..C10 are derived from the model and translation
//! equations; the derivation is self-verifying through the fixed-point
//! property tested below.

use crate::error::{Error, Result};
use crate::estimators::{AcceptanceRange, EstimatorKind, IrradianceEstimate, MeasurementSample};
use crate::pv::types::PlantModel;
use crate::pv::{BOLTZMANN, BOLTZMANN_EV, ELECTRON_CHARGE, EXP_GUARD, S_STC, T_STC};

/// Observer gain, initial state and the derived model constants.
#[derive(Debug, Clone)]
pub struct IandIConfig {
    /// Gain [1/s]; trade-off between convergence speed and noise filtering.
    pub gamma: f64,
    /// Initial state [W/m2].
    pub s_init: f64,
    /// Acceptance range; the state is clamped into (0, s_max].
    pub range: AcceptanceRange,
    /// C1..C10 in order.
    pub c: [f64; 10],
}

impl IandIConfig {
    /// Derive the constants from the identified model at the array scale.
    pub fn from_model(model: &PlantModel, gamma: f64, s_init: f64) -> Self {
        let stc = &model.stc;
        let scale = model.array_scale();
        let (n_s, n_p) = (scale.n_s, scale.n_p);

        let c1 = ELECTRON_CHARGE / (stc.n_r * BOLTZMANN * n_s);
        let c2 = stc.r_s * n_s / n_p;
        let c3 = n_p / (stc.r_p * n_s * S_STC);
        let c4 = (stc.i_ph - stc.alpha_cell * T_STC) * n_p / S_STC;
        let c5 = stc.alpha_cell * n_p / S_STC;
        let c6 = stc.i_sat * n_p / (T_STC * T_STC * T_STC);
        let c7 = stc.e_g / (BOLTZMANN_EV * T_STC);
        let c8 = 1.17 / BOLTZMANN_EV;
        let c9 = 4.73e-4 / BOLTZMANN_EV;
        let c10 = 636.0;

        IandIConfig {
            gamma,
            s_init,
            range: AcceptanceRange::default(),
            c: [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10],
        }
    }

    pub fn with_range(mut self, range: AcceptanceRange) -> Self {
        self.range = range;
        self
    }

    /// Measurable signal y(t) built from one sample.
    pub fn signal(&self, sample: &MeasurementSample) -> Result<f64> {
        let [c1, c2, _, _, _, c6, c7, c8, c9, c10] = self.c;
        let t = sample.t;
        let i0 = c6 * t * t * t * (c7 - c8 / t + c9 * t / (t + c10)).exp();
        let arg = c1 * (sample.v + c2 * sample.i) / t;
        if !arg.is_finite() || arg.abs() > EXP_GUARD {
            return Err(Error::ExponentOverflow {
                argument: arg,
                limit: EXP_GUARD,
            });
        }
        Ok(sample.i + i0 * arg.exp_m1())
    }

    /// Regression function Phi(S, t); strictly increasing in S whenever the
    /// slope dPhi/dS is positive, which holds on valid operating points.
    pub fn phi(&self, s: f64, sample: &MeasurementSample) -> f64 {
        s * self.phi_slope(sample)
    }

    /// dPhi/dS, independent of S (Phi is linear in S).
    pub fn phi_slope(&self, sample: &MeasurementSample) -> f64 {
        let [_, c2, c3, c4, c5, ..] = self.c;
        c4 + c5 * sample.t - c3 * (sample.v + c2 * sample.i)
    }
}

/// Outcome of one forward-Euler observer step.
#[derive(Debug, Clone, Copy)]
pub struct IandIStep {
    /// New observer state [W/m2].
    pub state: f64,
    pub estimate: IrradianceEstimate,
    /// Set when the raw state left (0, s_max] and was clamped; holds the
    /// pre-clamp value.
    pub clamped_from: Option<f64>,
    /// Set when gamma*dt*dPhi/dS >= 2 (forward-Euler stability bound);
    /// holds the offending product.
    pub stability_violation: Option<f64>,
}

/// One forward-Euler step of the observer ODE.
pub fn iandi_step(
    state: f64,
    sample: &MeasurementSample,
    config: &IandIConfig,
    dt: f64,
) -> Result<IandIStep> {
    sample.validate()?;
    if !(config.gamma > 0.0) {
        return Err(Error::invalid(
            "iandi step",
            format!("gamma = {} must be positive", config.gamma),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("iandi step", format!("dt = {dt} must be positive")));
    }
    if !(state > 0.0) {
        return Err(Error::invalid(
            "iandi step",
            format!("state = {state} must be positive"),
        ));
    }

    let y = config.signal(sample)?;
    let slope = config.phi_slope(sample);
    let product = config.gamma * dt * slope;
    let stability_violation = if product >= 2.0 { Some(product) } else { None };

    let raw = state + dt * config.gamma * (y - config.phi(state, sample));
    if !raw.is_finite() {
        return Err(Error::EstimatorDivergence {
            timestamp: sample.timestamp,
            reason: format!("state became {raw} (gamma.dt.slope = {product:.3})"),
        });
    }

    let (next, clamped_from) = if raw <= 0.0 {
        (f64::EPSILON.max(config.range.s_min * 1e-3), Some(raw))
    } else if raw > config.range.s_max {
        (config.range.s_max, Some(raw))
    } else {
        (raw, None)
    };

    Ok(IandIStep {
        state: next,
        estimate: IrradianceEstimate {
            timestamp: sample.timestamp,
            s_hat: next,
            variance: None,
            estimator: EstimatorKind::IandI,
        },
        clamped_from,
        stability_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::curve::{max_power_point, solve_current};
    use crate::pv::test_fixtures::plant_model_14kw;
    use crate::pv::translate_parameters;
    use crate::pv::types::{OperatingConditions, PlantModel};

    fn on_model_sample(model: &PlantModel, s: f64, t: f64, timestamp: f64) -> MeasurementSample {
        let params =
            translate_parameters(&model.stc, OperatingConditions::new(t, s).unwrap()).unwrap();
        let scale = model.array_scale();
        let (v_mp, i_mp, _) = max_power_point(&params, scale, 400).unwrap();
        let _ = i_mp;
        let i = solve_current(v_mp, &params, scale).unwrap();
        MeasurementSample {
            timestamp,
            v: v_mp,
            i,
            t,
            gni: None,
        }
    }

    #[test]
    fn fixed_point_on_noise_free_samples() {
        let model = plant_model_14kw();
        let config = IandIConfig::from_model(&model, 0.7, 100.0);
        for (s, t) in [(600.0, 298.15), (150.0, 280.0), (1100.0, 330.0)] {
            let sample = on_model_sample(&model, s, t, 0.0);
            let y = config.signal(&sample).unwrap();
            let phi = config.phi(s, &sample);
            assert!((y - phi).abs() < 1e-8, "S={s} T={t}: y-phi = {}", y - phi);
        }
    }

    #[test]
    fn phi_is_strictly_increasing_in_s() {
        let model = plant_model_14kw();
        let config = IandIConfig::from_model(&model, 0.7, 100.0);
        let sample = on_model_sample(&model, 700.0, 305.0, 0.0);
        assert!(config.phi_slope(&sample) > 0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=1000 {
            let s = 1.5 * k as f64;
            let phi = config.phi(s, &sample);
            assert!(phi > prev);
            prev = phi;
        }
    }

    #[test]
    fn equilibrium_at_true_irradiance() {
        let model = plant_model_14kw();
        let config = IandIConfig::from_model(&model, 0.7, 600.0);
        let sample = on_model_sample(&model, 600.0, 300.0, 0.0);
        let step = iandi_step(600.0, &sample, &config, 1.0).unwrap();
        assert!((step.state - 600.0).abs() < 1e-6, "{}", step.state);
    }

    #[test]
    fn monotone_convergence_and_gamma_speedup() {
        let model = plant_model_14kw();
        let converge = |gamma: f64| -> usize {
            let config = IandIConfig::from_model(&model, gamma, 100.0);
            let mut state = 100.0;
            for k in 0..20000 {
                let sample = on_model_sample(&model, 600.0, 300.0, k as f64);
                let step = iandi_step(state, &sample, &config, 1.0).unwrap();
                // Monotone approach from below.
                assert!(step.state >= state - 1e-9, "not monotone at step {k}");
                assert!(step.state <= 600.0 + 1e-6, "overshoot at step {k}");
                state = step.state;
                if (state - 600.0).abs() < 6.0 {
                    return k + 1;
                }
            }
            panic!("did not converge for gamma = {gamma}");
        };
        let slow = converge(0.7);
        let fast = converge(10.0);
        assert!(fast < slow, "gamma=10 took {fast}, gamma=0.7 took {slow}");
    }

    #[test]
    fn large_gamma_tracks_step_change_within_one_sample() {
        let model = plant_model_14kw();
        // Pick gamma near the stability limit: gamma*dt*slope ~ 1 gives
        // one-step convergence of the linear recursion.
        let probe = on_model_sample(&model, 900.0, 305.0, 0.0);
        let config0 = IandIConfig::from_model(&model, 1.0, 400.0);
        let gamma = 1.0 / config0.phi_slope(&probe);
        let config = IandIConfig::from_model(&model, gamma, 400.0);

        let step = iandi_step(400.0, &probe, &config, 1.0).unwrap();
        assert!(
            (step.state - 900.0).abs() / 900.0 < 0.01,
            "tracked to {}",
            step.state
        );
    }

    #[test]
    fn divergent_gamma_flags_stability_bound() {
        let model = plant_model_14kw();
        let probe = on_model_sample(&model, 700.0, 300.0, 0.0);
        let config0 = IandIConfig::from_model(&model, 1.0, 400.0);
        let gamma = 2.5 / config0.phi_slope(&probe);
        let config = IandIConfig::from_model(&model, gamma, 400.0);
        let step = iandi_step(400.0, &probe, &config, 1.0).unwrap();
        assert!(step.stability_violation.is_some());
    }

    #[test]
    fn state_leaving_range_is_clamped() {
        let model = plant_model_14kw();
        let probe = on_model_sample(&model, 700.0, 300.0, 0.0);
        let config0 = IandIConfig::from_model(&model, 1.0, 400.0);
        // Overshooting gain: next state jumps far above the target.
        let gamma = 3.9 / config0.phi_slope(&probe);
        let config = IandIConfig::from_model(&model, gamma, 400.0);
        let step = iandi_step(100.0, &probe, &config, 1.0).unwrap();
        assert!(step.clamped_from.is_some());
        assert!(step.state <= config.range.s_max);
    }
}
