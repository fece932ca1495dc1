//! i-v curve solution and maximum-power computation.
//!
//! The current at a given voltage has an exact closed form through the
//! principal branch of the Lambert W function; a bisection-plus-Newton root
//! solve acts as fallback when the closed form leaves its domain.

use crate::error::{Error, Result};
use crate::pv::lambert::{lambert_w0, lambert_w0_ln};
use crate::pv::model::{diode_residual, ModelScale};
use crate::pv::params::{StcParameters, TranslatedParameters};
use crate::pv::types::{OperatingConditions, PanelDatasheet, PlantTopology};
use crate::pv::{translate_parameters, BOLTZMANN, ELECTRON_CHARGE, EXP_GUARD, S_STC, T_STC};

const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_8;
/// Relative power tolerance of the golden-section refinement.
const REFINE_TOL: f64 = 1e-6;

/// Solve the diode equation for the current at voltage `v` via the Lambert-W closed
/// form. Falls back to the numeric root when the W argument cannot be
/// evaluated. The result satisfies |f(v, i)| < 1e-10 A.
pub fn solve_current(v: f64, params: &TranslatedParameters, scale: ModelScale) -> Result<f64> {
    let b = scale.series_resistance(params);
    let c = scale.shunt_resistance(params);
    let a = scale.thermal_voltage(params.n_r, params.conditions.temperature);
    let i_ph_np = params.i_ph * scale.n_p;
    let i_sat_np = params.i_sat * scale.n_p;

    // i = K/G - (a/B)*W(theta),
    // K = I_ph*n_p + i_sat*n_p - v/C,  G = 1 + B/C,
    // theta = (B*i_sat*n_p/(a*G)) * exp((v + B*K/G)/a).
    let k = i_ph_np + i_sat_np - v / c;
    let g = 1.0 + b / c;
    let ln_theta = (b * i_sat_np / (a * g)).ln() + (v + b * k / g) / a;

    let i = if ln_theta.is_finite() {
        let w = if ln_theta > EXP_GUARD {
            lambert_w0_ln(ln_theta)
        } else {
            lambert_w0(ln_theta.exp())
        };
        k / g - (a / b) * w
    } else {
        f64::NAN
    };

    // Verify; anything suspicious goes to the numeric fallback.
    if i.is_finite() {
        if let Ok(resid) = diode_residual(v, i, params, scale) {
            if resid.abs() < 1e-10 {
                return Ok(i);
            }
            // One Newton polish using f_i often recovers the last digits.
            let ez = ((v + b * i) / a).exp();
            let f_i = -b / c - 1.0 - i_sat_np * b / a * ez;
            let polished = i - resid / f_i;
            if let Ok(r2) = diode_residual(v, polished, params, scale) {
                if r2.abs() < 1e-10 {
                    return Ok(polished);
                }
            }
        }
    }
    solve_current_bisect(v, params, scale)
}

/// Numeric root of f(v, i) = 0 in i: bisection to bracket tightly, Newton to
/// finish. Slower than the closed form but domain-robust; also serves as the
/// fallback path.
pub fn solve_current_bisect(
    v: f64,
    params: &TranslatedParameters,
    scale: ModelScale,
) -> Result<f64> {
    let i_ph_np = params.i_ph * scale.n_p;
    // f is strictly decreasing in i; bracket between a negative reverse
    // current and slightly above the photo current.
    let mut lo = -0.5 * i_ph_np.max(1.0);
    let mut hi = 1.5 * i_ph_np.max(1.0);
    let f_lo = diode_residual(v, lo, params, scale)?;
    let f_hi = diode_residual(v, hi, params, scale)?;
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::SolverFailure(format!(
            "no current bracket at v = {v} V (f_lo={f_lo:.3e}, f_hi={f_hi:.3e})"
        )));
    }
    // f(lo) > 0 > f(hi).
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        let fm = diode_residual(v, mid, params, scale)?;
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    let mut i = 0.5 * (lo + hi);
    // Newton polish.
    let b = scale.series_resistance(params);
    let c = scale.shunt_resistance(params);
    let a = scale.thermal_voltage(params.n_r, params.conditions.temperature);
    for _ in 0..5 {
        let f = diode_residual(v, i, params, scale)?;
        if f.abs() < 1e-12 {
            break;
        }
        let ez = ((v + b * i) / a).exp();
        let f_i = -b / c - 1.0 - params.i_sat * scale.n_p * b / a * ez;
        i -= f / f_i;
    }
    let f = diode_residual(v, i, params, scale)?;
    if f.abs() > 1e-9 {
        return Err(Error::SolverFailure(format!(
            "current solve stalled at v = {v} V (residual {f:.3e} A)"
        )));
    }
    Ok(i)
}

/// Exact open-circuit voltage of the translated model: the root of
/// i(v) = 0. Newton on h(v) = f(v, 0), which is strictly decreasing.
pub fn open_circuit_voltage_root(
    params: &TranslatedParameters,
    scale: ModelScale,
) -> Result<f64> {
    let c = scale.shunt_resistance(params);
    let a = scale.thermal_voltage(params.n_r, params.conditions.temperature);
    let i_ph_np = params.i_ph * scale.n_p;
    let i_sat_np = params.i_sat * scale.n_p;

    let mut v = a * (i_ph_np / i_sat_np + 1.0).ln();
    for _ in 0..80 {
        let h = i_ph_np - v / c - i_sat_np * (v / a).exp_m1();
        let dh = -1.0 / c - i_sat_np / a * (v / a).exp();
        let step = h / dh;
        v -= step;
        if step.abs() < 1e-13 * v.abs().max(1.0) {
            break;
        }
    }
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::SolverFailure(format!(
            "open-circuit root failed (v = {v})"
        )));
    }
    Ok(v)
}

/// Open-circuit voltage from the datasheet translation formula:
/// v_oc = v_oc*(1 + beta*(T - T*)) + V_t*n_r*n_s*ln(S/S*), module level.
pub fn open_circuit_voltage(
    stc: &StcParameters,
    sheet: &PanelDatasheet,
    temperature: f64,
    irradiance: f64,
) -> Result<f64> {
    OperatingConditions::new(temperature, irradiance)?;
    let v_t = BOLTZMANN * temperature / ELECTRON_CHARGE;
    Ok(sheet.v_oc_stc * (1.0 + sheet.beta * (temperature - T_STC))
        + v_t * stc.n_r * sheet.n_s as f64 * (irradiance / S_STC).ln())
}

/// An i-v curve sampled from short circuit to open circuit.
#[derive(Debug, Clone)]
pub struct IVCurve {
    /// (voltage, current) pairs, voltage strictly increasing from 0.
    pub points: Vec<(f64, f64)>,
}

impl IVCurve {
    pub fn max_power_grid_point(&self) -> (usize, f64) {
        let mut best = (0usize, 0.0f64);
        for (k, &(v, i)) in self.points.iter().enumerate() {
            let p = v * i;
            if p > best.1 {
                best = (k, p);
            }
        }
        best
    }
}

/// Sample the i-v curve on a uniform voltage grid over [0, v_oc].
pub fn iv_curve(
    params: &TranslatedParameters,
    scale: ModelScale,
    n_points: usize,
) -> Result<IVCurve> {
    if n_points < 2 {
        return Err(Error::invalid("iv curve", "need at least 2 grid points"));
    }
    let v_oc = open_circuit_voltage_root(params, scale)?;
    let mut points = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let v = v_oc * k as f64 / (n_points - 1) as f64;
        points.push((v, solve_current(v, params, scale)?));
    }
    Ok(IVCurve { points })
}

/// Maximum power of the curve at the given scale: uniform grid to bracket,
/// golden-section refinement inside the bracketing interval. Returns
/// (v_mp, i_mp, p_max).
pub fn max_power_point(
    params: &TranslatedParameters,
    scale: ModelScale,
    grid_points: usize,
) -> Result<(f64, f64, f64)> {
    if grid_points < 100 {
        return Err(Error::invalid("max power", "grid_points must be >= 100"));
    }
    let v_oc = open_circuit_voltage_root(params, scale)?;
    let power = |v: f64| -> Result<f64> { Ok(v * solve_current(v, params, scale)?) };

    let step = v_oc / (grid_points - 1) as f64;
    let mut best_k = 0usize;
    let mut best_p = 0.0f64;
    for k in 0..grid_points {
        let p = power(step * k as f64)?;
        if p > best_p {
            best_p = p;
            best_k = k;
        }
    }
    let mut lo = step * best_k.saturating_sub(1) as f64;
    let mut hi = (step * (best_k + 1) as f64).min(v_oc);

    // Golden-section: unimodal within the bracketing interval.
    let mut x1 = hi - GOLDEN_RATIO * (hi - lo);
    let mut x2 = lo + GOLDEN_RATIO * (hi - lo);
    let mut p1 = power(x1)?;
    let mut p2 = power(x2)?;
    for _ in 0..200 {
        if p1 < p2 {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + GOLDEN_RATIO * (hi - lo);
            p2 = power(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - GOLDEN_RATIO * (hi - lo);
            p1 = power(x1)?;
        }
        if (hi - lo) < REFINE_TOL * hi.max(1e-9) {
            break;
        }
    }
    let v_mp = 0.5 * (lo + hi);
    let i_mp = solve_current(v_mp, params, scale)?;
    Ok((v_mp, i_mp, v_mp * i_mp))
}

/// Maximum power of one module at the given conditions [W].
pub fn max_power_module(
    stc: &StcParameters,
    sheet: &PanelDatasheet,
    temperature: f64,
    irradiance: f64,
    grid_points: usize,
) -> Result<f64> {
    let params = translate_parameters(stc, OperatingConditions::new(temperature, irradiance)?)?;
    let (_, _, p) = max_power_point(&params, sheet.module_scale(), grid_points)?;
    Ok(p)
}

/// Plant maximum power: module maximum power times the module count.
pub fn max_power(
    stc: &StcParameters,
    sheet: &PanelDatasheet,
    topology: &PlantTopology,
    temperature: f64,
    irradiance: f64,
    grid_points: usize,
) -> Result<f64> {
    Ok(max_power_module(stc, sheet, temperature, irradiance, grid_points)?
        * topology.module_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::test_fixtures::{datasheet_255w, stc_255w};
    use crate::pv::ModelScale;

    fn translated(t: f64, s: f64) -> TranslatedParameters {
        translate_parameters(&stc_255w(), OperatingConditions::new(t, s).unwrap()).unwrap()
    }

    fn module_scale() -> ModelScale {
        datasheet_255w().module_scale()
    }

    #[test]
    fn short_circuit_current_at_zero_volts() {
        let p = translated(T_STC, S_STC);
        let i = solve_current(0.0, &p, module_scale()).unwrap();
        assert!((i - datasheet_255w().i_sc_stc).abs() < 1e-6, "i_sc = {i}");
    }

    #[test]
    fn open_circuit_current_is_zero() {
        let p = translated(T_STC, S_STC);
        let v_oc = open_circuit_voltage_root(&p, module_scale()).unwrap();
        let i = solve_current(v_oc, &p, module_scale()).unwrap();
        assert!(i.abs() < 1e-8, "i(v_oc) = {i}");
        // And the exact root at STC lands on the datasheet v_oc because the
        // extraction pinned the open-circuit condition.
        assert!((v_oc - datasheet_255w().v_oc_stc).abs() < 1e-6);
    }

    #[test]
    fn lambert_matches_bisection() {
        let scale = module_scale();
        for (t, s) in [(263.0, 50.0), (298.15, 1000.0), (320.0, 700.0), (343.0, 1200.0)] {
            let p = translated(t, s);
            let v_oc = open_circuit_voltage_root(&p, scale).unwrap();
            for k in 0..100 {
                let v = v_oc * (k as f64 + 0.5) / 100.0;
                let i_l = solve_current(v, &p, scale).unwrap();
                let i_b = solve_current_bisect(v, &p, scale).unwrap();
                assert!(
                    (i_l - i_b).abs() < 1e-8,
                    "T={t} S={s} v={v}: lambert={i_l} bisect={i_b}"
                );
            }
        }
    }

    #[test]
    fn curve_current_is_non_increasing() {
        let p = translated(310.0, 600.0);
        let curve = iv_curve(&p, module_scale(), 500).unwrap();
        assert_eq!(curve.points[0].0, 0.0);
        for w in curve.points.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-10);
        }
        let last = curve.points.last().unwrap();
        assert!(last.1 >= -1e-9);
    }

    #[test]
    fn voc_formula_matches_exact_at_stc_and_falls_with_temperature() {
        let stc = stc_255w();
        let sheet = datasheet_255w();
        let at_stc = open_circuit_voltage(&stc, &sheet, T_STC, S_STC).unwrap();
        assert!((at_stc - sheet.v_oc_stc).abs() < 1e-12);

        let half_sun = open_circuit_voltage(&stc, &sheet, T_STC, 500.0).unwrap();
        let v_t = BOLTZMANN * T_STC / ELECTRON_CHARGE;
        let expected = sheet.v_oc_stc + v_t * stc.n_r * 60.0 * (0.5f64).ln();
        assert!((half_sun - expected).abs() < 1e-12);
        assert!(half_sun < sheet.v_oc_stc);

        let hot = open_circuit_voltage(&stc, &sheet, 308.15, S_STC).unwrap();
        assert!(hot < sheet.v_oc_stc);
    }

    #[test]
    fn max_power_at_stc_matches_datasheet() {
        let sheet = datasheet_255w();
        let topo = PlantTopology::single_module();
        let p = max_power(&stc_255w(), &sheet, &topo, T_STC, S_STC, 1000).unwrap();
        let rated = sheet.rated_power();
        assert!((p - rated).abs() / rated < 0.005, "p = {p}, rated = {rated}");
    }

    #[test]
    fn max_power_half_sun_near_half_power() {
        let sheet = datasheet_255w();
        let topo = PlantTopology::single_module();
        let p_full = max_power(&stc_255w(), &sheet, &topo, T_STC, S_STC, 1000).unwrap();
        let p_half = max_power(&stc_255w(), &sheet, &topo, T_STC, 500.0, 1000).unwrap();
        let ratio = p_half / p_full;
        assert!(ratio > 0.45 && ratio < 0.55, "ratio = {ratio}");
    }

    #[test]
    fn max_power_grid_insensitive() {
        let sheet = datasheet_255w();
        let topo = PlantTopology::single_module();
        let coarse = max_power(&stc_255w(), &sheet, &topo, 305.0, 730.0, 100).unwrap();
        let fine = max_power(&stc_255w(), &sheet, &topo, 305.0, 730.0, 10000).unwrap();
        assert!((coarse - fine).abs() / fine < 5e-4, "{coarse} vs {fine}");
    }

    #[test]
    fn grid_point_floor_enforced() {
        let sheet = datasheet_255w();
        let topo = PlantTopology::single_module();
        assert!(max_power(&stc_255w(), &sheet, &topo, T_STC, S_STC, 99).is_err());
    }
}
