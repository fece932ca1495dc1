//! Identification of the five STC parameters from datasheet values.
//!
//! The system solved (all at STC, panel level):
//!   1. f(v_oc, 0)     = 0          open circuit
//!   2. f(0, i_sc)     = 0          short circuit
//!   3. f(v_mp, i_mp)  = 0          maximum-power point
//!   4. d(i*v)/dv      = 0 at MPP   i_mp*f_i - v_mp*f_v = 0
//!   5. di/dv at SC    = -1/C       shunt-slope condition
//!
//! Unknowns are [I_ph*n_p, ln(i_sat*n_p), n_r, B, C] with B, C the
//! panel-scaled series and shunt resistances; solving for ln(i_sat) keeps the
//! Newton iteration well conditioned across the ~1e-12..1e-6 A range.

use crate::error::{Error, Result};
use crate::pv::params::{band_gap, StcParameters};
use crate::pv::types::PanelDatasheet;
use crate::pv::{BOLTZMANN, ELECTRON_CHARGE, T_STC};

const MAX_ITERATIONS: usize = 200;
const RESIDUAL_TARGET: f64 = 1e-11;

/// Relative residuals of the five STC conditions for a candidate parameter
/// set. All five are dimensionless; the target is < 1e-9 on each.
pub fn stc_residuals(stc: &StcParameters, sheet: &PanelDatasheet) -> [f64; 5] {
    let scale_ns = sheet.n_s as f64;
    let scale_np = sheet.n_p as f64;
    let z = [
        stc.i_ph * scale_np,
        (stc.i_sat * scale_np).ln(),
        stc.n_r,
        stc.r_s * scale_ns / scale_np,
        stc.r_p * scale_ns / scale_np,
    ];
    residuals(&z, sheet)
}

fn residuals(z: &[f64; 5], sheet: &PanelDatasheet) -> [f64; 5] {
    let [ipn, ln_idn, n_r, b, c] = *z;
    let idn = ln_idn.exp();
    let a = n_r * BOLTZMANN * T_STC * sheet.n_s as f64 / ELECTRON_CHARGE;
    let (voc, isc, vmp, imp) = (
        sheet.v_oc_stc,
        sheet.i_sc_stc,
        sheet.v_mp_stc,
        sheet.i_mp_stc,
    );

    let f = |v: f64, i: f64| ipn - (v + b * i) / c - i - idn * ((v + b * i) / a).exp_m1();
    let f_v = |v: f64, i: f64| -1.0 / c - idn / a * ((v + b * i) / a).exp();
    let f_i = |v: f64, i: f64| -b / c - 1.0 - idn * b / a * ((v + b * i) / a).exp();

    let didv_mpp = -f_v(vmp, imp) / f_i(vmp, imp);
    let didv_sc = -f_v(0.0, isc) / f_i(0.0, isc);

    [
        f(voc, 0.0) / isc,
        f(0.0, isc) / isc,
        f(vmp, imp) / isc,
        (imp + vmp * didv_mpp) / imp,
        didv_sc * c + 1.0,
    ]
}

fn max_abs(r: &[f64; 5]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Heuristic starting point: n_r = 1.2, series resistance from the
/// open-circuit/MPP voltage gap, shunt from the MPP slope, then light and
/// saturation currents consistent with the short- and open-circuit points.
fn initial_guess(sheet: &PanelDatasheet) -> [f64; 5] {
    let n_r = 1.2;
    let b = 0.5 * (sheet.v_oc_stc - sheet.v_mp_stc) / sheet.i_mp_stc;
    let c = 5.0 * sheet.v_mp_stc / (sheet.i_sc_stc - sheet.i_mp_stc);
    let a = n_r * BOLTZMANN * T_STC * sheet.n_s as f64 / ELECTRON_CHARGE;
    let idn = sheet.i_sc_stc / (sheet.v_oc_stc / a).exp_m1();
    let ipn = sheet.i_sc_stc * (1.0 + b / c);
    [ipn, idn.ln(), n_r, b, c]
}

fn guess_from_parameters(stc: &StcParameters, sheet: &PanelDatasheet) -> [f64; 5] {
    let ns = sheet.n_s as f64;
    let np = sheet.n_p as f64;
    [
        stc.i_ph * np,
        (stc.i_sat * np).ln(),
        stc.n_r,
        stc.r_s * ns / np,
        stc.r_p * ns / np,
    ]
}

/// Solve the five-equation system by damped Newton iteration with a central
/// finite-difference Jacobian and backtracking line search.
pub fn extract_stc_parameters(
    sheet: &PanelDatasheet,
    initial: Option<&StcParameters>,
) -> Result<StcParameters> {
    sheet.validate()?;
    let mut z = match initial {
        Some(stc) => guess_from_parameters(stc, sheet),
        None => initial_guess(sheet),
    };

    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it;
        let r = residuals(&z, sheet);
        if max_abs(&r) < RESIDUAL_TARGET {
            break;
        }

        // Central-difference Jacobian.
        let mut jac = [[0.0f64; 5]; 5];
        for col in 0..5 {
            let h = 1e-7 * z[col].abs().max(1e-3);
            let mut zp = z;
            let mut zm = z;
            zp[col] += h;
            zm[col] -= h;
            let rp = residuals(&zp, sheet);
            let rm = residuals(&zm, sheet);
            for row in 0..5 {
                jac[row][col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }

        let neg_r = [-r[0], -r[1], -r[2], -r[3], -r[4]];
        let step = solve_linear_5(&mut jac.clone(), neg_r).ok_or_else(|| {
            Error::IdentificationFailure {
                iterations: it,
                max_residual: max_abs(&r),
                residuals: r,
            }
        })?;

        // Backtracking: accept the longest step that keeps the iterate
        // physical and does not grow the residual norm.
        let base = r.iter().map(|x| x * x).sum::<f64>();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let zt = [
                z[0] + t * step[0],
                z[1] + t * step[1],
                z[2] + t * step[2],
                z[3] + t * step[3],
                z[4] + t * step[4],
            ];
            if zt[0] > 0.0 && zt[2] > 0.3 && zt[2] < 5.0 && zt[3] > 0.0 && zt[4] > 0.0 {
                let rt = residuals(&zt, sheet);
                if rt.iter().all(|x| x.is_finite())
                    && rt.iter().map(|x| x * x).sum::<f64>() < base
                {
                    z = zt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            let r = residuals(&z, sheet);
            return Err(Error::IdentificationFailure {
                iterations: it,
                max_residual: max_abs(&r),
                residuals: r,
            });
        }
    }

    let r = residuals(&z, sheet);
    if max_abs(&r) >= 1e-9 {
        return Err(Error::IdentificationFailure {
            iterations,
            max_residual: max_abs(&r),
            residuals: r,
        });
    }

    let ns = sheet.n_s as f64;
    let np = sheet.n_p as f64;
    let stc = StcParameters {
        r_s: z[3] * np / ns,
        r_p: z[4] * np / ns,
        i_ph: z[0] / np,
        i_sat: z[1].exp() / np,
        n_r: z[2],
        e_g: band_gap(T_STC),
        alpha_cell: sheet.alpha_cell(),
    };
    stc.validate()?;
    Ok(stc)
}

/// Gaussian elimination with partial pivoting for the 5x5 Newton system.
fn solve_linear_5(a: &mut [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let pivot = (col..5).max_by(|&r1, &r2| {
            a[r1][col]
                .abs()
                .partial_cmp(&a[r2][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..5 {
            let factor = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 5];
    for row in (0..5).rev() {
        let mut sum = b[row];
        for k in row + 1..5 {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
