//! The five identified parameters and their translation to arbitrary
//! temperature and irradiance.
//!
//! All resistances and currents are per cell; scaling to a panel or array is
//! done by [`ModelScale`](crate::pv::model::ModelScale) at evaluation time.

use crate::error::{Error, Result};
use crate::pv::types::OperatingConditions;
use crate::pv::{BOLTZMANN_EV, S_STC, T_STC};

/// Band-gap energy [eV] as a function of cell temperature [K].
pub fn band_gap(temperature: f64) -> f64 {
    1.17 - 4.73e-4 * temperature * temperature / (temperature + 636.0)
}

/// The five single-diode parameters identified at STC, per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StcParameters {
    /// Series resistance [ohm].
    pub r_s: f64,
    /// Shunt resistance [ohm].
    pub r_p: f64,
    /// Light (photo-generated) current [A].
    pub i_ph: f64,
    /// Diode saturation current [A].
    pub i_sat: f64,
    /// Diode ideality factor.
    pub n_r: f64,
    /// Band-gap energy at T_STC [eV].
    pub e_g: f64,
    /// Per-cell short-circuit current temperature coefficient [A/K].
    /// Carried here because the translation of the light current needs it.
    pub alpha_cell: f64,
}

impl StcParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_s >= 0.0 && self.r_p > 0.0 && self.i_ph > 0.0 && self.i_sat > 0.0
            && self.n_r > 0.0)
        {
            return Err(Error::invalid(
                "stc parameters",
                format!("{self:?} violates positivity"),
            ));
        }
        if self.r_p <= self.r_s {
            return Err(Error::invalid(
                "stc parameters",
                format!("r_p ({}) must exceed r_s ({})", self.r_p, self.r_s),
            ));
        }
        Ok(())
    }
}

/// The five parameters translated to a given (T, S), still per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslatedParameters {
    pub r_s: f64,
    pub r_p: f64,
    pub i_ph: f64,
    pub i_sat: f64,
    pub n_r: f64,
    /// Band-gap energy at the translated temperature [eV].
    pub e_g: f64,
    /// Conditions the parameters are valid at.
    pub conditions: OperatingConditions,
}

/// Translate STC parameters to arbitrary conditions:
/// R_s unchanged, R_p scales with S*/S, I_ph scales with S and temperature,
/// n_r unchanged, i_sat follows the T^3 exponential band-gap law.
pub fn translate_parameters(
    stc: &StcParameters,
    cond: OperatingConditions,
) -> Result<TranslatedParameters> {
    cond.validate()?;
    let t = cond.temperature;
    let s = cond.irradiance;
    let e_g = band_gap(t);
    let i_sat = stc.i_sat
        * (t / T_STC).powi(3)
        * ((stc.e_g / (BOLTZMANN_EV * T_STC) - e_g / (BOLTZMANN_EV * t)).exp());
    Ok(TranslatedParameters {
        r_s: stc.r_s,
        r_p: stc.r_p * S_STC / s,
        i_ph: (stc.i_ph + stc.alpha_cell * (t - T_STC)) * s / S_STC,
        i_sat,
        n_r: stc.n_r,
        e_g,
        conditions: cond,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stc() -> StcParameters {
        StcParameters {
            r_s: 0.005,
            r_p: 300.0,
            i_ph: 8.86,
            i_sat: 2.0e-10,
            n_r: 1.0,
            e_g: band_gap(T_STC),
            alpha_cell: 0.00443,
        }
    }

    #[test]
    fn band_gap_at_stc() {
        // 1.17 - 4.73e-4 * 298.15^2 / 934.15
        assert!((band_gap(298.15) - 1.12499).abs() < 1e-5);
    }

    #[test]
    fn translation_is_identity_at_stc() {
        let stc = sample_stc();
        let tr = translate_parameters(&stc, OperatingConditions::new(T_STC, S_STC).unwrap())
            .unwrap();
        assert_eq!(tr.r_s, stc.r_s);
        assert_eq!(tr.r_p, stc.r_p);
        assert_eq!(tr.i_ph, stc.i_ph);
        assert!((tr.i_sat - stc.i_sat).abs() / stc.i_sat < 1e-14);
        assert_eq!(tr.n_r, stc.n_r);
        assert_eq!(tr.e_g, stc.e_g);
    }

    #[test]
    fn shunt_resistance_scales_inversely_with_irradiance() {
        let mut stc = sample_stc();
        stc.r_p = 100.0;
        let tr = translate_parameters(&stc, OperatingConditions::new(T_STC, 500.0).unwrap())
            .unwrap();
        assert_eq!(tr.r_p, 200.0);
    }

    #[test]
    fn rp_times_s_is_constant() {
        let stc = sample_stc();
        let reference = stc.r_p * S_STC;
        for s in [50.0, 120.0, 333.3, 980.0, 1200.0] {
            let tr =
                translate_parameters(&stc, OperatingConditions::new(305.0, s).unwrap()).unwrap();
            assert!((tr.r_p * s - reference).abs() / reference < 1e-14);
        }
    }

    #[test]
    fn zero_irradiance_rejected() {
        let stc = sample_stc();
        assert!(translate_parameters(
            &stc,
            OperatingConditions {
                temperature: 300.0,
                irradiance: 0.0
            }
        )
        .is_err());
    }
}
