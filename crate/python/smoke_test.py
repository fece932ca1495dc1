#!/usr/bin/env python3
"""Smoke test for the pvmax_py extension module.

Builds nothing itself: expects `cargo build -p pvmax-py [--release]` to have
produced libpvmax_py.so, which this script copies next to itself as
pvmax_py.so before importing.
"""

import math
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def stage_extension():
    candidates = [
        ROOT / "target" / "release" / "libpvmax_py.so",
        ROOT / "target" / "debug" / "libpvmax_py.so",
        ROOT / "target" / "release" / "libpvmax_py.dylib",
        ROOT / "target" / "debug" / "libpvmax_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p pvmax-py --release")
    staged = HERE / "pvmax_py.so"
    if not staged.exists() or built.stat().st_mtime > staged.stat().st_mtime:
        shutil.copy2(built, staged)
    sys.path.insert(0, str(HERE))


def main():
    stage_extension()
    import pvmax_py

    # 14.3 kWp rooftop plant: 255 W modules, two strings of 14 per converter,
    # two converters.
    plant = pvmax_py.PlantModel(
        v_oc=37.8, i_sc=8.86, v_mp=30.4, i_mp=8.39,
        alpha=0.0005 * 8.86, beta=-0.0032, n_s=60,
        modules_per_string=14, strings_per_converter=2, converters=2,
    )

    residuals = plant.stc_residuals()
    assert max(abs(r) for r in residuals) < 1e-9, residuals
    print(f"stc identification ok: max residual {max(abs(r) for r in residuals):.2e}")

    p_stc = plant.max_power(298.15, 1000.0)
    rated = 30.4 * 8.39 * 56
    assert abs(p_stc - rated) / rated < 0.005, (p_stc, rated)
    print(f"stc max power {p_stc:.0f} W vs nameplate {rated:.0f} W")

    # Forward-simulate an operating point and invert it analytically.
    v, i, p = plant.max_power_point(303.0, 800.0)
    s_hat = plant.analytical_estimate(v, i, 303.0)
    assert abs(s_hat - 800.0) / 800.0 < 1e-6, s_hat
    assert abs(plant.diode_residual(v, i, 303.0, 800.0)) < 1e-9
    print(f"analytical inversion ok: {s_hat:.6f} W/m2 from the MPP sample")

    # A noisy curtailed scenario end to end: simulate, estimate, score.
    rows = plant.simulate_cloudy(
        duration=400.0, seed=7, std_i=0.55, std_v=0.23, std_t=0.4,
        curtail_fraction=0.6,
    )
    samples = [(t, v, i, tk) for (t, v, i, tk, _, _) in rows]
    estimates, rejections = plant.estimate_series(samples, estimator="analytical")
    assert len(estimates) > 0.9 * len(samples), (len(estimates), len(samples))

    truth_by_t = {t: p for (t, _, _, _, _, p) in rows}
    est_p = [p for (_, _, p) in estimates]
    true_p = [truth_by_t[t] for (t, _, _) in estimates]
    nrmse, err_max, nme = pvmax_py.metrics(est_p, true_p)
    assert nrmse < 10.0, nrmse
    print(f"curtailed-day reconstruction: nRMSE {nrmse:.2f}%  Err_max {err_max:.2f}%  "
          f"nME {nme:+.2f}%  ({len(rejections)} rejections)")

    # Spectrum helper sanity: a pure sine has its peak at the right bin.
    n, f0, amp = 1024, 8 / 1024, 3.0
    series = [amp * math.sin(2 * math.pi * f0 * k) for k in range(n)]
    spec = pvmax_py.spectrum(series, 1.0)
    peak_f, peak_a = max(spec, key=lambda fa: fa[1])
    assert abs(peak_f - f0) < 1e-9 and abs(peak_a - amp) / amp < 0.02
    print(f"spectrum ok: peak {peak_a:.3f} at {peak_f:.5f} Hz")
    assert pvmax_py.high_band(spec, 0.05) < pvmax_py.high_band(spec, 0.0)

    # Variance clustering round trip.
    calm = [0.1 * math.sin(k) for k in range(300)]
    wild = [25.0 * math.sin(2.7 * k) for k in range(300)]
    centroids, variances = pvmax_py.fit_variance_clusters(calm + wild, k=2, window=10, seed=3)
    q = pvmax_py.select_process_noise(centroids, variances, *centroids[0])
    assert q in variances
    print(f"variance clusters ok: variances {['%.2f' % v for v in variances]}, selected {q:.2f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
