//! Principal branch of the Lambert W function on the real axis.
//!
//! Halley iteration with region-dependent initial guesses. A log-argument
//! entry point handles arguments too large to represent as f64, which the
//! diode solve produces at high shunt resistance.

/// W0(x) for x >= -1/e. Accuracy near machine precision on the tested range.
pub fn lambert_w0(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let branch_point = -(-1.0f64).exp(); // -1/e
    if x < branch_point {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }

    let mut w = initial_guess(x);
    for _ in 0..50 {
        let ew = w.exp();
        let wew = w * ew;
        let f = wew - x;
        if f.abs() <= 1e-16 * (x.abs() + wew.abs()).max(1e-300) {
            break;
        }
        // Halley step.
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 1e-16 * w.abs().max(1e-300) {
            break;
        }
    }
    w
}

/// W0(exp(ln_x)) for very large arguments, solved as w + ln w = ln_x.
/// Valid for ln_x > 1 (argument > e); avoids overflowing exp().
pub fn lambert_w0_ln(ln_x: f64) -> f64 {
    debug_assert!(ln_x > 1.0);
    // Asymptotic start: L - ln L.
    let mut w = (ln_x - ln_x.ln()).max(1.0);
    for _ in 0..50 {
        let f = w + w.ln() - ln_x;
        let step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-16 * w {
            break;
        }
    }
    w
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series around the branch point at -1/e.
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0
    } else if x < 3.0 {
        // One log refinement of w ~ x / (1 + x) region; a crude but stable
        // start for Halley.
        let w = x / (1.0 + x.max(0.0));
        if w > 0.0 {
            w
        } else {
            x
        }
    } else {
        let l = x.ln();
        l - l.ln()
    }
}
