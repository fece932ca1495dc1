//! Synthetic plant experiments: irradiance/temperature profiles, electrical
//! operating point under MPPT or curtailment, and sensor-noise injection.
//!
//! Stands in for a physical setup: every emitted (v, i) pair lies exactly on
//! the model curve at the true (S, T), so estimator errors come only from
//! injected noise and estimator dynamics.

use crate::error::{Error, Result};
use crate::estimators::MeasurementSample;
use crate::pv::curve::{max_power_point, open_circuit_voltage_root, solve_current};
use crate::pv::translate_parameters;
use crate::pv::types::{OperatingConditions, PlantModel};
use crate::pv::S_MIN;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::PathBuf;

/// Irradiance profile shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Smooth solar-elevation-shaped bell peaking at `s_peak`.
    ClearSky { s_peak: f64 },
    /// Clear-sky bell modulated by seeded random cloud transients: Bernoulli
    /// cloud events drive an attenuation target, shaped by a first-order lag.
    PartlyCloudy {
        s_peak: f64,
        /// Per-sample probability of a cloud-state toggle.
        event_probability: f64,
        /// Time constant of the shaping filter [s].
        time_constant: f64,
    },
    /// Piecewise-constant levels: (start time [s], irradiance) pairs, sorted.
    Step(Vec<(f64, f64)>),
    /// Read (timestamp_s, s_wm2[, t_cell_K]) rows from a CSV file.
    CustomCsv(PathBuf),
}

/// Ambient-plus-irradiance-coupled cell temperature with a first-order lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureModel {
    /// Ambient temperature [K].
    pub ambient: f64,
    /// Irradiance coupling [K per W/m2].
    pub k_th: f64,
    /// Thermal lag time constant [s].
    pub lag: f64,
}

impl Default for TemperatureModel {
    fn default() -> Self {
        TemperatureModel {
            ambient: 293.15,
            k_th: 0.025,
            lag: 300.0,
        }
    }
}

/// Requested curtailment over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurtailLimit {
    /// Fraction of the available maximum power, in (0, 1].
    Fraction(f64),
    /// Absolute power set-point [W].
    SetpointWatts(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurtailmentWindow {
    pub start: f64,
    pub end: f64,
    pub limit: CurtailLimit,
}

/// Complete scenario description.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub profile: Profile,
    /// Total duration [s].
    pub duration: f64,
    /// Sample interval [s].
    pub sample_interval: f64,
    pub curtailment: Vec<CurtailmentWindow>,
    pub temperature: TemperatureModel,
    /// Seed for profile randomness.
    pub seed: u64,
    /// Emit a pyranometer channel (the true irradiance with 2%-tolerance
    /// seeded noise).
    pub include_gni: bool,
    /// Simulate the mounting-offset bias on the temperature sensor: the raw
    /// reading is low by 3 K per 1000 W/m2, to be corrected at ingestion.
    pub sensor_temperature_offset: bool,
}

impl ScenarioSpec {
    pub fn new(profile: Profile, duration: f64, sample_interval: f64, seed: u64) -> Self {
        ScenarioSpec {
            profile,
            duration,
            sample_interval,
            curtailment: Vec::new(),
            temperature: TemperatureModel::default(),
            seed,
            include_gni: false,
            sensor_temperature_offset: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_interval > 0.0) {
            return Err(Error::invalid("scenario", "sample_interval must be > 0"));
        }
        if !(self.duration >= self.sample_interval) {
            return Err(Error::invalid("scenario", "duration shorter than one sample"));
        }
        let mut windows = self.curtailment.clone();
        windows.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        for w in &windows {
            if !(w.end > w.start) {
                return Err(Error::invalid("curtailment", "window end must exceed start"));
            }
            if let CurtailLimit::Fraction(f) = w.limit {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::invalid(
                        "curtailment",
                        format!("power fraction {f} outside (0, 1]"),
                    ));
                }
            }
        }
        for pair in windows.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::invalid("curtailment", "overlapping windows"));
            }
        }
        Ok(())
    }

    fn limit_at(&self, t: f64) -> Option<CurtailLimit> {
        self.curtailment
            .iter()
            .find(|w| t >= w.start && t < w.end)
            .map(|w| w.limit)
    }
}

/// Ground-truth environment sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentPoint {
    pub timestamp: f64,
    pub s_true: f64,
    pub t_cell_true: f64,
}

/// Generate the (timestamp, S_true, T_cell_true) sequence for a scenario.
pub fn generate_profile(spec: &ScenarioSpec) -> Result<Vec<EnvironmentPoint>> {
    spec.validate()?;
    let n = (spec.duration / spec.sample_interval).floor() as usize;
    let dt = spec.sample_interval;

    let irradiance: Vec<f64> = match &spec.profile {
        Profile::ClearSky { s_peak } => (0..n)
            .map(|k| clear_sky_bell(k as f64 * dt, spec.duration, *s_peak))
            .collect(),
        Profile::PartlyCloudy {
            s_peak,
            event_probability,
            time_constant,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut attenuation = 1.0f64;
            let mut target = 1.0f64;
            let alpha = dt / time_constant.max(dt);
            (0..n)
                .map(|k| {
                    if rng.random::<f64>() < *event_probability {
                        // Toggle between open sky and a random cloud depth.
                        target = if target >= 1.0 {
                            0.15 + 0.55 * rng.random::<f64>()
                        } else {
                            1.0
                        };
                    }
                    attenuation += alpha * (target - attenuation);
                    clear_sky_bell(k as f64 * dt, spec.duration, *s_peak) * attenuation
                })
                .collect()
        }
        Profile::Step(levels) => {
            if levels.is_empty() {
                return Err(Error::invalid("scenario", "step profile has no levels"));
            }
            (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    levels
                        .iter()
                        .rev()
                        .find(|(start, _)| t >= *start)
                        .map(|(_, s)| *s)
                        .unwrap_or(levels[0].1)
                })
                .collect()
        }
        Profile::CustomCsv(path) => return read_custom_csv(path, spec),
    };

    Ok(attach_cell_temperature(&irradiance, dt, &spec.temperature))
}

/// Solar-elevation-shaped bell over [0, duration]: sin^1.5 of the phase.
fn clear_sky_bell(t: f64, duration: f64, s_peak: f64) -> f64 {
    let phase = (t / duration).clamp(0.0, 1.0) * std::f64::consts::PI;
    s_peak * phase.sin().max(0.0).powf(1.5)
}

fn attach_cell_temperature(
    irradiance: &[f64],
    dt: f64,
    model: &TemperatureModel,
) -> Vec<EnvironmentPoint> {
    let mut t_cell = model.ambient + model.k_th * irradiance.first().copied().unwrap_or(0.0);
    let alpha = dt / model.lag.max(dt);
    irradiance
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let t_target = model.ambient + model.k_th * s;
            t_cell += alpha * (t_target - t_cell);
            EnvironmentPoint {
                timestamp: k as f64 * dt,
                s_true: s,
                t_cell_true: t_cell,
            }
        })
        .collect()
}

fn read_custom_csv(path: &PathBuf, spec: &ScenarioSpec) -> Result<Vec<EnvironmentPoint>> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut rows = Vec::new();
    let mut with_temperature = true;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("timestamp")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::MalformedData {
                path: display,
                line: idx + 1,
                message: format!("expected timestamp_s,s_wm2[,t_cell_K], got '{line}'"),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::MalformedData {
                path: display.clone(),
                line: idx + 1,
                message: format!("bad {what} '{s}'"),
            })
        };
        let timestamp = parse(fields[0], "timestamp")?;
        let s_true = parse(fields[1], "irradiance")?;
        let t_cell = if fields.len() >= 3 {
            parse(fields[2], "temperature")?
        } else {
            with_temperature = false;
            0.0
        };
        rows.push((timestamp, s_true, t_cell));
    }
    if rows.is_empty() {
        return Err(Error::MalformedData {
            path: display,
            line: 0,
            message: "no data rows".into(),
        });
    }
    if with_temperature {
        Ok(rows
            .into_iter()
            .map(|(timestamp, s_true, t_cell_true)| EnvironmentPoint {
                timestamp,
                s_true,
                t_cell_true,
            })
            .collect())
    } else {
        let irradiance: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let dt = if rows.len() > 1 {
            rows[1].0 - rows[0].0
        } else {
            spec.sample_interval
        };
        let mut points = attach_cell_temperature(&irradiance, dt, &spec.temperature);
        for (p, row) in points.iter_mut().zip(rows.iter()) {
            p.timestamp = row.0;
        }
        Ok(points)
    }
}

/// Converter operating mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatingMode {
    /// Ideal tracker: the true maximum of the i-v curve.
    Mppt,
    /// Active-power set-point [W]; clamps to the maximum when above it.
    Setpoint(f64),
    /// Perturb-and-observe tracker with a fixed relative voltage step,
    /// one step per sample.
    PerturbObserve { step_fraction: f64 },
}

/// State carried by the P&O tracker between samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrackerState {
    prev_v: Option<f64>,
    prev_p: f64,
    direction: f64,
}

/// Electrical operating point of the whole measured array at (S, T).
/// Setpoints intersect the power curve on the higher-voltage branch.
pub fn simulate_operating_point(
    s_true: f64,
    t_cell: f64,
    mode: OperatingMode,
    model: &PlantModel,
    grid_points: usize,
    tracker: &mut TrackerState,
) -> Result<(f64, f64)> {
    if s_true <= S_MIN {
        return Err(Error::invalid(
            "operating point",
            format!("irradiance {s_true} below daylight threshold"),
        ));
    }
    let params = translate_parameters(&model.stc, OperatingConditions::new(t_cell, s_true)?)?;
    let scale = model.array_scale();
    let (v_mp, i_mp, p_max) = max_power_point(&params, scale, grid_points)?;

    match mode {
        OperatingMode::Mppt => Ok((v_mp, i_mp)),
        OperatingMode::Setpoint(p_req) => {
            if !(p_req > 0.0) {
                return Err(Error::invalid(
                    "operating point",
                    format!("power set-point {p_req} W must be positive"),
                ));
            }
            if p_req >= p_max {
                return Ok((v_mp, i_mp));
            }
            // p(v) is strictly decreasing from p_max to 0 on [v_mp, v_oc]:
            // bisect for the higher-voltage intersection.
            let v_oc = open_circuit_voltage_root(&params, scale)?;
            let mut lo = v_mp;
            let mut hi = v_oc;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let p = mid * solve_current(mid, &params, scale)?;
                if p > p_req {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) < 1e-10 * hi {
                    break;
                }
            }
            let v = 0.5 * (lo + hi);
            Ok((v, solve_current(v, &params, scale)?))
        }
        OperatingMode::PerturbObserve { step_fraction } => {
            let v_oc = open_circuit_voltage_root(&params, scale)?;
            let dv = step_fraction * v_oc;
            let v = match tracker.prev_v {
                None => {
                    tracker.direction = 1.0;
                    0.8 * v_oc
                }
                Some(prev_v) => {
                    let p_here = prev_v * solve_current(prev_v, &params, scale)?;
                    if p_here < tracker.prev_p {
                        tracker.direction = -tracker.direction;
                    }
                    tracker.prev_p = p_here;
                    (prev_v + tracker.direction * dv).clamp(0.1 * v_oc, 0.99 * v_oc)
                }
            };
            let i = solve_current(v, &params, scale)?;
            if tracker.prev_v.is_none() {
                tracker.prev_p = v * i;
            }
            tracker.prev_v = Some(v);
            Ok((v, i))
        }
    }
}

/// Per-channel Gaussian noise levels [SI units] and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub std_i: f64,
    pub std_v: f64,
    pub std_t: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec {
            std_i: 0.0,
            std_v: 0.0,
            std_t: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.std_i < 0.0 || self.std_v < 0.0 || self.std_t < 0.0 {
            return Err(Error::invalid("noise spec", "negative standard deviation"));
        }
        Ok(())
    }
}

/// One fully simulated record: noisy measurement plus ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub timestamp: f64,
    /// Noisy measured voltage [V].
    pub v: f64,
    /// Noisy measured current [A].
    pub i: f64,
    /// Noisy (and possibly offset-biased) raw temperature reading [K].
    pub t_raw: f64,
    /// Pyranometer channel, if enabled.
    pub gni: Option<f64>,
    pub s_true: f64,
    pub t_cell_true: f64,
    /// True plant maximum power [W].
    pub p_max_true: f64,
    /// Clean (noise-free) operating point, kept for noise re-injection.
    pub v_clean: f64,
    pub i_clean: f64,
}

impl SimRecord {
    /// View as a measurement sample without any temperature correction.
    pub fn to_sample(&self) -> MeasurementSample {
        MeasurementSample {
            timestamp: self.timestamp,
            v: self.v.max(0.0),
            i: self.i.max(0.0),
            t: self.t_raw,
            gni: self.gni,
        }
    }
}

/// Add seeded i.i.d. Gaussian noise per channel to clean records. When
/// `offset_enabled`, the raw temperature additionally carries the negative
/// mounting bias of 3 K per 1000 W/m2 that ingestion corrects back.
pub fn apply_sensor_noise(
    records: &mut [SimRecord],
    noise: &NoiseSpec,
    offset_enabled: bool,
) -> Result<()> {
    noise.validate()?;
    // Independent substreams per channel keep realizations stable when a
    // single channel's std changes.
    let mut rng_v = ChaCha8Rng::seed_from_u64(noise.seed.wrapping_mul(3).wrapping_add(1));
    let mut rng_i = ChaCha8Rng::seed_from_u64(noise.seed.wrapping_mul(3).wrapping_add(2));
    let mut rng_t = ChaCha8Rng::seed_from_u64(noise.seed.wrapping_mul(3).wrapping_add(3));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    for record in records.iter_mut() {
        let bias = if offset_enabled {
            -3.0 * record.s_true / 1000.0
        } else {
            0.0
        };
        record.v = record.v_clean + noise.std_v * unit.sample(&mut rng_v);
        record.i = record.i_clean + noise.std_i * unit.sample(&mut rng_i);
        record.t_raw = record.t_cell_true + bias + noise.std_t * unit.sample(&mut rng_t);
    }
    Ok(())
}

/// The mounting-offset correction: raw reading plus 3 K per 1000 W/m2 of the
/// previously estimated irradiance.
pub fn correct_temperature_reading(t_raw: f64, s_prev_estimate: f64) -> f64 {
    t_raw + 3.0 * s_prev_estimate / 1000.0
}

/// Run a full scenario: environment profile, per-sample operating point
/// (MPPT unless a curtailment window applies), true maximum power and
/// noise-injected measurements.
pub fn run_scenario(
    spec: &ScenarioSpec,
    noise: &NoiseSpec,
    model: &PlantModel,
    grid_points: usize,
) -> Result<Vec<SimRecord>> {
    let environment = generate_profile(spec)?;
    let mut records = Vec::with_capacity(environment.len());
    let mut tracker = TrackerState::default();
    let mut rng_gni = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(7).wrapping_add(5));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    for point in &environment {
        if point.s_true <= S_MIN {
            continue; // night-time samples are not emitted
        }
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(point.t_cell_true, point.s_true)?,
        )?;
        let scale = model.array_scale();
        let (v_mp, i_mp, p_max) = max_power_point(&params, scale, grid_points)?;

        let (v, i) = match spec.limit_at(point.timestamp) {
            None => (v_mp, i_mp),
            Some(limit) => {
                let p_req = match limit {
                    CurtailLimit::Fraction(f) => f * p_max,
                    CurtailLimit::SetpointWatts(w) => w,
                };
                simulate_operating_point(
                    point.s_true,
                    point.t_cell_true,
                    OperatingMode::Setpoint(p_req),
                    model,
                    grid_points,
                    &mut tracker,
                )?
            }
        };

        let gni = if spec.include_gni {
            Some(point.s_true * (1.0 + 0.02 / 3.0 * unit.sample(&mut rng_gni)))
        } else {
            None
        };

        records.push(SimRecord {
            timestamp: point.timestamp,
            v,
            i,
            t_raw: point.t_cell_true,
            gni,
            s_true: point.s_true,
            t_cell_true: point.t_cell_true,
            p_max_true: p_max,
            v_clean: v,
            i_clean: i,
        });
    }

    apply_sensor_noise(&mut records, noise, spec.sensor_temperature_offset)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::model::diode_residual;
    use crate::pv::test_fixtures::plant_model_14kw;
    use crate::pv::T_STC;

    #[test]
    fn step_profile_reproduces_levels() {
        let spec = ScenarioSpec::new(
            Profile::Step(vec![(0.0, 400.0), (100.0, 900.0)]),
            200.0,
            1.0,
            1,
        );
        let env = generate_profile(&spec).unwrap();
        assert_eq!(env.len(), 200);
        assert!(env[..100].iter().all(|p| p.s_true == 400.0));
        assert!(env[100..].iter().all(|p| p.s_true == 900.0));
    }

    #[test]
    fn clear_sky_peak_matches_configuration() {
        let spec = ScenarioSpec::new(Profile::ClearSky { s_peak: 950.0 }, 600.0, 1.0, 1);
        let env = generate_profile(&spec).unwrap();
        let peak = env.iter().map(|p| p.s_true).fold(0.0f64, f64::max);
        assert!((peak - 950.0).abs() < 1.0, "peak = {peak}");
    }

    #[test]
    fn partly_cloudy_is_deterministic_under_seed() {
        let spec = ScenarioSpec::new(
            Profile::PartlyCloudy {
                s_peak: 900.0,
                event_probability: 0.05,
                time_constant: 20.0,
            },
            300.0,
            1.0,
            42,
        );
        let a = generate_profile(&spec).unwrap();
        let b = generate_profile(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mppt_point_is_on_curve_and_maximal() {
        let model = plant_model_14kw();
        let mut tracker = TrackerState::default();
        let (v, i) = simulate_operating_point(
            1000.0,
            T_STC,
            OperatingMode::Mppt,
            &model,
            400,
            &mut tracker,
        )
        .unwrap();
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(T_STC, 1000.0).unwrap(),
        )
        .unwrap();
        let r = diode_residual(v, i, &params, model.array_scale()).unwrap();
        assert!(r.abs() < 1e-9, "residual = {r}");

        let p_stc_expected = model.datasheet.rated_power() * model.topology.module_count() as f64;
        assert!(
            ((v * i) - p_stc_expected).abs() / p_stc_expected < 0.005,
            "P = {}",
            v * i
        );
    }

    #[test]
    fn setpoint_at_half_available_hits_target_on_high_voltage_branch() {
        let model = plant_model_14kw();
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(303.0, 800.0).unwrap(),
        )
        .unwrap();
        let (v_mp, _, p_max) = max_power_point(&params, model.array_scale(), 1000).unwrap();
        let mut tracker = TrackerState::default();
        let (v, i) = simulate_operating_point(
            800.0,
            303.0,
            OperatingMode::Setpoint(0.5 * p_max),
            &model,
            1000,
            &mut tracker,
        )
        .unwrap();
        assert!(((v * i) - 0.5 * p_max).abs() / (0.5 * p_max) < 1e-6);
        assert!(v > v_mp, "expected the higher-voltage branch");
    }

    #[test]
    fn setpoint_above_available_clamps_to_mppt() {
        let model = plant_model_14kw();
        let mut tracker = TrackerState::default();
        let mppt = simulate_operating_point(
            600.0,
            300.0,
            OperatingMode::Mppt,
            &model,
            400,
            &mut tracker,
        )
        .unwrap();
        let clamped = simulate_operating_point(
            600.0,
            300.0,
            OperatingMode::Setpoint(1e9),
            &model,
            400,
            &mut tracker,
        )
        .unwrap();
        assert_eq!(mppt, clamped);
    }

    #[test]
    fn nonpositive_setpoint_rejected() {
        let model = plant_model_14kw();
        let mut tracker = TrackerState::default();
        assert!(simulate_operating_point(
            600.0,
            300.0,
            OperatingMode::Setpoint(0.0),
            &model,
            400,
            &mut tracker,
        )
        .is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let model = plant_model_14kw();
        let spec = ScenarioSpec::new(Profile::ClearSky { s_peak: 800.0 }, 120.0, 1.0, 3);
        let records = run_scenario(&spec, &NoiseSpec::noiseless(3), &model, 200).unwrap();
        assert!(!records.is_empty());
        for r in &records {
            assert_eq!(r.v, r.v_clean);
            assert_eq!(r.i, r.i_clean);
            assert_eq!(r.t_raw, r.t_cell_true);
        }
    }

    #[test]
    fn noise_statistics_match_requested_std() {
        let model = plant_model_14kw();
        let spec = ScenarioSpec::new(Profile::Step(vec![(0.0, 700.0)]), 100_000.0, 1.0, 5);
        let noise = NoiseSpec {
            std_i: 0.55,
            std_v: 0.0,
            std_t: 0.0,
            seed: 17,
        };
        let records = run_scenario(&spec, &noise, &model, 150).unwrap();
        assert!(records.len() > 90_000);
        let diffs: Vec<f64> = records.iter().map(|r| r.i - r.i_clean).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var =
            diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
        let std = var.sqrt();
        assert!((std - 0.55).abs() / 0.55 < 0.02, "std = {std}");
    }

    #[test]
    fn same_seed_same_records() {
        let model = plant_model_14kw();
        let spec = ScenarioSpec::new(Profile::Step(vec![(0.0, 600.0)]), 50.0, 1.0, 9);
        let noise = NoiseSpec {
            std_i: 0.3,
            std_v: 0.2,
            std_t: 0.4,
            seed: 33,
        };
        let a = run_scenario(&spec, &noise, &model, 150).unwrap();
        let b = run_scenario(&spec, &noise, &model, 150).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn temperature_offset_correction_values() {
        assert_eq!(correct_temperature_reading(300.0, 1000.0), 303.0);
        assert_eq!(correct_temperature_reading(300.0, 500.0), 301.5);
        assert!((correct_temperature_reading(300.0, S_MIN) - 300.0).abs() < 0.01);
    }

    #[test]
    fn simulated_points_satisfy_model_residual() {
        let model = plant_model_14kw();
        let spec = ScenarioSpec::new(
            Profile::PartlyCloudy {
                s_peak: 900.0,
                event_probability: 0.05,
                time_constant: 30.0,
            },
            400.0,
            1.0,
            11,
        );
        let records = run_scenario(&spec, &NoiseSpec::noiseless(11), &model, 200).unwrap();
        for r in &records {
            let params = translate_parameters(
                &model.stc,
                OperatingConditions::new(r.t_cell_true, r.s_true).unwrap(),
            )
            .unwrap();
            let resid =
                diode_residual(r.v_clean, r.i_clean, &params, model.array_scale()).unwrap();
            assert!(resid.abs() < 1e-9, "residual {resid} at t={}", r.timestamp);
        }
    }

    #[test]
    fn curtailed_power_never_exceeds_available() {
        let model = plant_model_14kw();
        let mut spec = ScenarioSpec::new(Profile::ClearSky { s_peak: 850.0 }, 400.0, 1.0, 2);
        spec.curtailment.push(CurtailmentWindow {
            start: 100.0,
            end: 300.0,
            limit: CurtailLimit::Fraction(0.5),
        });
        let records = run_scenario(&spec, &NoiseSpec::noiseless(2), &model, 200).unwrap();
        for r in &records {
            let p = r.v_clean * r.i_clean;
            assert!(p <= r.p_max_true * (1.0 + 1e-6));
            if r.timestamp >= 100.0 && r.timestamp < 300.0 {
                assert!((p - 0.5 * r.p_max_true).abs() / r.p_max_true < 1e-5);
            }
        }
    }

    #[test]
    fn mppt_point_dominates_curve_scan() {
        let model = plant_model_14kw();
        let mut tracker = TrackerState::default();
        let (v_mp, i_mp) = simulate_operating_point(
            720.0,
            308.0,
            OperatingMode::Mppt,
            &model,
            400,
            &mut tracker,
        )
        .unwrap();
        let p_emitted = v_mp * i_mp;
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(308.0, 720.0).unwrap(),
        )
        .unwrap();
        let scale = model.array_scale();
        let v_oc = open_circuit_voltage_root(&params, scale).unwrap();
        for k in 0..400 {
            let v = v_oc * k as f64 / 399.0;
            let p = v * solve_current(v, &params, scale).unwrap();
            assert!(
                p <= p_emitted * (1.0 + 1e-5),
                "curve point {p} beats emitted {p_emitted}"
            );
        }
    }

    #[test]
    fn perturb_observe_hovers_near_mpp() {
        let model = plant_model_14kw();
        let mut tracker = TrackerState::default();
        let mut last = (0.0, 0.0);
        for _ in 0..150 {
            last = simulate_operating_point(
                800.0,
                305.0,
                OperatingMode::PerturbObserve {
                    step_fraction: 0.002,
                },
                &model,
                200,
                &mut tracker,
            )
            .unwrap();
        }
        let params = translate_parameters(
            &model.stc,
            OperatingConditions::new(305.0, 800.0).unwrap(),
        )
        .unwrap();
        let (_, _, p_max) = max_power_point(&params, model.array_scale(), 1000).unwrap();
        let p = last.0 * last.1;
        assert!(p > 0.98 * p_max, "P&O settled at {p} of {p_max}");
    }
}
