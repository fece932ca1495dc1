//! Property-based invariants over the model, metrics and variance model.

use proptest::prelude::*;
use pvmax_core::estimators::{analytical_estimate, AcceptanceRange, MeasurementSample};
use pvmax_core::eval::compute_metrics;
use pvmax_core::pv::curve::{max_power, open_circuit_voltage_root, solve_current};
use pvmax_core::pv::model::diode_residual;
use pvmax_core::pv::test_fixtures::{plant_model_14kw, plant_model_single};
use pvmax_core::pv::types::OperatingConditions;
use pvmax_core::pv::translate_parameters;
use pvmax_core::variance::{compute_features, select_q, ClusterModel, FeatureVector};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every current emitted by the solver lies on the model curve.
    #[test]
    fn solve_current_round_trip(
        t in 263.0..343.0f64,
        s in 50.0..1200.0f64,
        frac in 0.0..0.98f64,
    ) {
        let model = plant_model_single();
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(t, s).unwrap(),
        ).unwrap();
        let scale = model.array_scale();
        let v_oc = open_circuit_voltage_root(&params, scale).unwrap();
        let v = frac * v_oc;
        let i = solve_current(v, &params, scale).unwrap();
        let r = diode_residual(v, i, &params, scale).unwrap();
        prop_assert!(r.abs() < 1e-9, "residual {} at v={v} T={t} S={s}", r);
    }

    /// Max power grows strictly with irradiance at fixed temperature.
    #[test]
    fn max_power_monotone_in_irradiance(
        t in 270.0..330.0f64,
        s_lo in 50.0..1100.0f64,
        ds in 50.0..100.0f64,
    ) {
        let model = plant_model_single();
        let s_hi = (s_lo + ds).min(1200.0);
        let p_lo = max_power(&model.stc, &model.datasheet, &model.topology, t, s_lo, 200).unwrap();
        let p_hi = max_power(&model.stc, &model.datasheet, &model.topology, t, s_hi, 200).unwrap();
        prop_assert!(p_hi > p_lo, "P({s_hi})={p_hi} !> P({s_lo})={p_lo} at T={t}");
    }

    /// Noise-free analytical inversion is exact anywhere on the curve.
    #[test]
    fn analytical_inversion_operating_point_independent(
        t in 265.0..340.0f64,
        s in 60.0..1200.0f64,
        frac in 0.0..0.95f64,
    ) {
        let model = plant_model_14kw();
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(t, s).unwrap(),
        ).unwrap();
        let scale = model.array_scale();
        let v_oc = open_circuit_voltage_root(&params, scale).unwrap();
        let v = frac * v_oc;
        let i = solve_current(v, &params, scale).unwrap();
        let sample = MeasurementSample { timestamp: 0.0, v, i, t, gni: None };
        let est = analytical_estimate(&sample, &model, 1e-9, AcceptanceRange {
            s_min: 1.0, s_max: 1500.0,
        }).unwrap();
        prop_assert!((est.s_hat - s).abs() / s < 1e-6, "{} vs {s}", est.s_hat);
    }

    /// Scaling both series by the same positive constant leaves all three
    /// metrics unchanged.
    #[test]
    fn metrics_scale_invariant(
        truth in proptest::collection::vec(10.0..1e4f64, 2..40),
        noise in proptest::collection::vec(-0.3..0.3f64, 40),
        scale in 1e-3..1e3f64,
    ) {
        let estimated: Vec<f64> = truth.iter().zip(noise.iter())
            .map(|(p, n)| p * (1.0 + n))
            .collect();
        let a = compute_metrics(&estimated, &truth).unwrap();
        let truth2: Vec<f64> = truth.iter().map(|x| x * scale).collect();
        let est2: Vec<f64> = estimated.iter().map(|x| x * scale).collect();
        let b = compute_metrics(&est2, &truth2).unwrap();
        prop_assert!((a.nrmse - b.nrmse).abs() < 1e-9);
        prop_assert!((a.err_max - b.err_max).abs() < 1e-9);
        prop_assert!((a.nme - b.nme).abs() < 1e-9);
        prop_assert!(a.err_max >= a.nrmse - 1e-12);
        prop_assert!(a.nrmse >= a.nme.abs() - 1e-12);
    }

    /// Adding a constant to every delta shifts the mean feature and leaves
    /// the variability untouched.
    #[test]
    fn features_shift_equivariant(
        delta in proptest::collection::vec(-50.0..50.0f64, 15..60),
        offset in -100.0..100.0f64,
    ) {
        let n = 8;
        let base = compute_features(&delta, n).unwrap();
        let shifted_series: Vec<f64> = delta.iter().map(|d| d + offset).collect();
        let shifted = compute_features(&shifted_series, n).unwrap();
        for (a, b) in base.iter().zip(shifted.iter()) {
            prop_assert!((b.m - (a.m + offset)).abs() < 1e-9);
            prop_assert!((b.v - a.v).abs() < 1e-9);
        }
    }

    /// select_q always returns one of the fitted variances, and translating
    /// centroids and query together never changes the selection.
    #[test]
    fn select_q_membership_and_translation_invariance(
        centroids in proptest::collection::vec((-100.0..100.0f64, 0.0..50.0f64), 2..6),
        query_m in -100.0..100.0f64,
        query_v in 0.0..50.0f64,
        shift_m in -30.0..30.0f64,
        shift_v in -10.0..10.0f64,
    ) {
        let variances: Vec<f64> = (0..centroids.len()).map(|k| 1.0 + k as f64).collect();
        let model = ClusterModel {
            centroids: centroids.iter().map(|&(m, v)| FeatureVector { m, v }).collect(),
            variances: variances.clone(),
            window_length: 10,
        };
        let q = select_q(&model, &FeatureVector { m: query_m, v: query_v });
        prop_assert!(variances.contains(&q));

        let translated = ClusterModel {
            centroids: model.centroids.iter()
                .map(|c| FeatureVector { m: c.m + shift_m, v: c.v + shift_v })
                .collect(),
            variances,
            window_length: 10,
        };
        let q2 = select_q(&translated, &FeatureVector {
            m: query_m + shift_m,
            v: query_v + shift_v,
        });
        prop_assert_eq!(q, q2);
    }
}
