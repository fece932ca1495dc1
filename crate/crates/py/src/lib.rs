//! Python bindings: plant model construction, the three irradiance
//! estimators, maximum-power reconstruction and the evaluation helpers.

use pvmax_core::error::Error;
use pvmax_core::estimators::{
    estimate_series, EstimatorKind, MeasurementSample, SeriesConfig,
};
use pvmax_core::eval::sweep::reconstruct_power_series;
use pvmax_core::eval::{amplitude_spectrum, compute_metrics, high_band_content};
use pvmax_core::pv::curve::{max_power, max_power_point, open_circuit_voltage_root, solve_current};
use pvmax_core::pv::model::diode_residual;
use pvmax_core::pv::types::{OperatingConditions, PanelDatasheet, PlantTopology};
use pvmax_core::pv::{extract_stc_parameters, stc_residuals, translate_parameters};
use pvmax_core::sim::{
    run_scenario, CurtailLimit, CurtailmentWindow, NoiseSpec, Profile, ScenarioSpec,
};
use pvmax_core::variance::{features_with_next_delta, fit_clusters, select_q, FeatureVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput { .. } | Error::MalformedData { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A PV plant: module datasheet, identified STC parameters and the
/// series/parallel layout of the measured array.
#[pyclass(name = "PlantModel", skip_from_py_object)]
#[derive(Clone)]
struct PyPlantModel {
    inner: pvmax_core::pv::types::PlantModel,
}

#[pymethods]
impl PyPlantModel {
    /// Identify the five STC parameters from datasheet values and build the
    /// plant model. alpha is the short-circuit current temperature
    /// coefficient [A/K], beta the relative open-circuit voltage coefficient
    /// [1/K].
    #[new]
    #[pyo3(signature = (v_oc, i_sc, v_mp, i_mp, alpha, beta, n_s, n_p=1,
                        modules_per_string=1, strings_per_converter=1, converters=1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        v_oc: f64,
        i_sc: f64,
        v_mp: f64,
        i_mp: f64,
        alpha: f64,
        beta: f64,
        n_s: u32,
        n_p: u32,
        modules_per_string: u32,
        strings_per_converter: u32,
        converters: u32,
    ) -> PyResult<Self> {
        let datasheet = PanelDatasheet {
            v_oc_stc: v_oc,
            i_sc_stc: i_sc,
            v_mp_stc: v_mp,
            i_mp_stc: i_mp,
            alpha,
            beta,
            n_s,
            n_p,
        };
        let stc = extract_stc_parameters(&datasheet, None).map_err(to_py_err)?;
        let topology = PlantTopology {
            modules_per_string,
            strings_per_converter,
            converter_count: converters,
            rating_w: None,
        };
        let inner = pvmax_core::pv::types::PlantModel::new(datasheet, stc, topology)
            .map_err(to_py_err)?;
        Ok(PyPlantModel { inner })
    }

    /// The identified STC parameters as a dict (per-cell values).
    fn stc_parameters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
        let d = pyo3::types::PyDict::new(py);
        let stc = &self.inner.stc;
        d.set_item("r_s", stc.r_s)?;
        d.set_item("r_p", stc.r_p)?;
        d.set_item("i_ph", stc.i_ph)?;
        d.set_item("i_sat", stc.i_sat)?;
        d.set_item("n_r", stc.n_r)?;
        d.set_item("e_g", stc.e_g)?;
        Ok(d)
    }

    /// Relative residuals of the five STC identification conditions.
    fn stc_residuals(&self) -> [f64; 5] {
        stc_residuals(&self.inner.stc, &self.inner.datasheet)
    }

    /// Current [A] of the whole array at voltage v under (T [K], S [W/m2]).
    fn solve_current(&self, v: f64, temperature: f64, irradiance: f64) -> PyResult<f64> {
        let params = translate_parameters(
            &self.inner.stc,
            OperatingConditions::new(temperature, irradiance).map_err(to_py_err)?,
        )
        .map_err(to_py_err)?;
        solve_current(v, &params, self.inner.array_scale()).map_err(to_py_err)
    }

    /// Diode-equation residual [A] at an array operating point.
    fn diode_residual(&self, v: f64, i: f64, temperature: f64, irradiance: f64) -> PyResult<f64> {
        let params = translate_parameters(
            &self.inner.stc,
            OperatingConditions::new(temperature, irradiance).map_err(to_py_err)?,
        )
        .map_err(to_py_err)?;
        diode_residual(v, i, &params, self.inner.array_scale()).map_err(to_py_err)
    }

    /// Exact open-circuit voltage [V] of the array at (T, S).
    fn open_circuit_voltage(&self, temperature: f64, irradiance: f64) -> PyResult<f64> {
        let params = translate_parameters(
            &self.inner.stc,
            OperatingConditions::new(temperature, irradiance).map_err(to_py_err)?,
        )
        .map_err(to_py_err)?;
        open_circuit_voltage_root(&params, self.inner.array_scale()).map_err(to_py_err)
    }

    /// Plant maximum power [W] at (T, S).
    #[pyo3(signature = (temperature, irradiance, grid_points=1000))]
    fn max_power(&self, temperature: f64, irradiance: f64, grid_points: usize) -> PyResult<f64> {
        max_power(
            &self.inner.stc,
            &self.inner.datasheet,
            &self.inner.topology,
            temperature,
            irradiance,
            grid_points,
        )
        .map_err(to_py_err)
    }

    /// Array maximum-power operating point (v, i, p) at (T, S).
    #[pyo3(signature = (temperature, irradiance, grid_points=1000))]
    fn max_power_point(
        &self,
        temperature: f64,
        irradiance: f64,
        grid_points: usize,
    ) -> PyResult<(f64, f64, f64)> {
        let params = translate_parameters(
            &self.inner.stc,
            OperatingConditions::new(temperature, irradiance).map_err(to_py_err)?,
        )
        .map_err(to_py_err)?;
        max_power_point(&params, self.inner.array_scale(), grid_points).map_err(to_py_err)
    }

    /// Closed-form analytical irradiance estimate from one (v, i, T) sample.
    fn analytical_estimate(&self, v: f64, i: f64, temperature: f64) -> PyResult<f64> {
        let sample = MeasurementSample {
            timestamp: 0.0,
            v,
            i,
            t: temperature,
            gni: None,
        };
        pvmax_core::estimators::analytical_estimate(
            &sample,
            &self.inner,
            1e-6,
            Default::default(),
        )
        .map(|e| e.s_hat)
        .map_err(to_py_err)
    }

    /// Run one estimator over (timestamp, v, i, T) rows. Returns
    /// (estimates, rejections): estimates as (timestamp, s_hat, p_max) and
    /// rejections as (timestamp, reason).
    #[pyo3(signature = (samples, estimator="analytical", gamma=0.7, s_init=100.0,
                        q_fixed=25.0, grid_points=200))]
    fn estimate_series(
        &self,
        samples: Vec<(f64, f64, f64, f64)>,
        estimator: &str,
        gamma: f64,
        s_init: f64,
        q_fixed: f64,
        grid_points: usize,
    ) -> PyResult<(Vec<(f64, f64, f64)>, Vec<(f64, String)>)> {
        let kind = EstimatorKind::parse(estimator).map_err(to_py_err)?;
        let samples: Vec<MeasurementSample> = samples
            .into_iter()
            .map(|(timestamp, v, i, t)| MeasurementSample {
                timestamp,
                v,
                i,
                t,
                gni: None,
            })
            .collect();
        let mut cfg = SeriesConfig::new(kind, &self.inner);
        cfg.gamma = gamma;
        cfg.s_init = s_init;
        cfg.ekf.q_fixed = q_fixed;
        let result = estimate_series(&samples, &cfg, &self.inner).map_err(to_py_err)?;
        let power = reconstruct_power_series(&result.estimates, &samples, &self.inner, grid_points)
            .map_err(to_py_err)?;
        let estimates = result
            .estimates
            .iter()
            .zip(power.iter())
            .map(|(e, (_, p))| (e.timestamp, e.s_hat, *p))
            .collect();
        let rejections = result
            .rejections
            .iter()
            .map(|r| (r.timestamp, r.reason.to_string()))
            .collect();
        Ok((estimates, rejections))
    }

    /// Simulate a partly cloudy scenario; returns rows of
    /// (timestamp, v, i, t_raw, s_true, p_max_true).
    #[pyo3(signature = (duration, seed, s_peak=900.0, std_i=0.0, std_v=0.0, std_t=0.0,
                        curtail_fraction=None, grid_points=200))]
    #[allow(clippy::too_many_arguments)]
    fn simulate_cloudy(
        &self,
        duration: f64,
        seed: u64,
        s_peak: f64,
        std_i: f64,
        std_v: f64,
        std_t: f64,
        curtail_fraction: Option<f64>,
        grid_points: usize,
    ) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64)>> {
        let mut spec = ScenarioSpec::new(
            Profile::PartlyCloudy {
                s_peak,
                event_probability: 0.02,
                time_constant: 40.0,
            },
            duration,
            1.0,
            seed,
        );
        if let Some(fraction) = curtail_fraction {
            spec.curtailment.push(CurtailmentWindow {
                start: 0.0,
                end: duration,
                limit: CurtailLimit::Fraction(fraction),
            });
        }
        let noise = NoiseSpec {
            std_i,
            std_v,
            std_t,
            seed,
        };
        let records = run_scenario(&spec, &noise, &self.inner, grid_points).map_err(to_py_err)?;
        Ok(records
            .iter()
            .map(|r| (r.timestamp, r.v, r.i, r.t_raw, r.s_true, r.p_max_true))
            .collect())
    }
}

/// nRMSE, Err_max and nME [%] of an estimated series against ground truth.
#[pyfunction]
fn metrics(estimated: Vec<f64>, truth: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let report = compute_metrics(&estimated, &truth).map_err(to_py_err)?;
    Ok((report.nrmse, report.err_max, report.nme))
}

/// Single-sided amplitude spectrum of a uniformly sampled series.
#[pyfunction]
fn spectrum(series: Vec<f64>, sample_interval: f64) -> PyResult<Vec<(f64, f64)>> {
    amplitude_spectrum(&series, sample_interval).map_err(to_py_err)
}

/// Total spectral amplitude above a cut-off frequency.
#[pyfunction]
fn high_band(spectrum: Vec<(f64, f64)>, cutoff_hz: f64) -> f64 {
    high_band_content(&spectrum, cutoff_hz)
}

/// Fit the k-means process-noise model from a differentiated irradiance
/// series; returns (centroids, variances).
#[pyfunction]
#[pyo3(signature = (delta_s, k=4, window=10, seed=1))]
fn fit_variance_clusters(
    delta_s: Vec<f64>,
    k: usize,
    window: usize,
    seed: u64,
) -> PyResult<(Vec<(f64, f64)>, Vec<f64>)> {
    let (features, paired) = features_with_next_delta(&delta_s, window).map_err(to_py_err)?;
    let model = fit_clusters(&features, &paired, k, window, seed).map_err(to_py_err)?;
    Ok((
        model.centroids.iter().map(|c| (c.m, c.v)).collect(),
        model.variances.clone(),
    ))
}

/// Select the process-noise variance for current (mean, variability)
/// features from a fitted (centroids, variances) model.
#[pyfunction]
fn select_process_noise(
    centroids: Vec<(f64, f64)>,
    variances: Vec<f64>,
    m: f64,
    v: f64,
) -> PyResult<f64> {
    let model = pvmax_core::variance::ClusterModel {
        centroids: centroids
            .into_iter()
            .map(|(m, v)| FeatureVector { m, v })
            .collect(),
        variances,
        window_length: 10,
    };
    model.validate().map_err(to_py_err)?;
    Ok(select_q(&model, &FeatureVector { m, v }))
}

#[pymodule]
fn pvmax_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlantModel>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(high_band, m)?)?;
    m.add_function(wrap_pyfunction!(fit_variance_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(select_process_noise, m)?)?;
    Ok(())
}
