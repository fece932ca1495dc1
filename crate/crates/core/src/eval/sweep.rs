//! Noise-robustness sweeps and the I&I gain sweep.
//!
//! A sweep corrupts one measurement channel with increasing added Gaussian
//! noise (total variance = original + added), runs the selected estimators
//! over seeded Monte Carlo repetitions, reconstructs the maximum-power
//! series from each estimate stream and scores it against ground truth.
//! Common random numbers across levels and estimators pair the repetitions.

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_series, EstimatorKind, IrradianceEstimate, MeasurementSample, SeriesConfig,
};
use crate::eval::{compute_metrics, MetricReport};
use crate::pv::curve::max_power;
use crate::pv::types::PlantModel;
use crate::sim::{apply_sensor_noise, NoiseSpec, SimRecord};
use crate::variance::ClusterModel;
use rayon::prelude::*;

/// Measurement channel corrupted by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepChannel {
    Current,
    Voltage,
    Temperature,
}

impl SweepChannel {
    /// Index into the EKF R diagonal, ordered (v, i, T).
    pub fn r_index(&self) -> usize {
        match self {
            SweepChannel::Voltage => 0,
            SweepChannel::Current => 1,
            SweepChannel::Temperature => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepChannel::Current => "current",
            SweepChannel::Voltage => "voltage",
            SweepChannel::Temperature => "temperature",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(SweepChannel::Current),
            "voltage" => Ok(SweepChannel::Voltage),
            "temperature" => Ok(SweepChannel::Temperature),
            other => Err(Error::invalid(
                "channel",
                format!("unknown channel '{other}'"),
            )),
        }
    }
}

/// Estimator variants compared by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepEstimator {
    Analytical,
    /// I&I at the fixed gain below.
    IandIFixed,
    /// I&I with the gain grid-searched per noise level.
    IandIOptimized,
    Ekf,
}

impl SweepEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            SweepEstimator::Analytical => "analytical",
            SweepEstimator::IandIFixed => "iandi_fixed",
            SweepEstimator::IandIOptimized => "iandi_opt",
            SweepEstimator::Ekf => "ekf",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Original per-channel noise levels.
    pub base_noise: NoiseSpec,
    /// Monte Carlo repetitions per level.
    pub repetitions: usize,
    pub seed: u64,
    /// Gain of the fixed-gain I&I line.
    pub gamma_fixed: f64,
    /// Grid searched per level for the optimized I&I line; contains the
    /// fixed gain so the optimum can never lose to it.
    pub gamma_grid: Vec<f64>,
    /// Grid density of the max-power reconstruction.
    pub grid_points: usize,
    /// Align the EKF R diagonal with the actually injected noise levels
    /// (keeps the tolerance-based floor).
    pub calibrate_r: bool,
    /// Cluster model driving the EKF process noise, when available.
    pub cluster_model: Option<ClusterModel>,
    /// Fallback EKF process-noise variance [(W/m2)^2].
    pub q_fixed: f64,
    /// I&I initial state [W/m2].
    pub s_init: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base_noise: NoiseSpec {
                std_i: 0.55,
                std_v: 0.23,
                std_t: 0.4,
                seed: 0,
            },
            repetitions: 20,
            seed: 1,
            gamma_fixed: 1.0,
            gamma_grid: vec![0.5, 1.0, 2.0, 5.0, 20.0],
            grid_points: 100,
            calibrate_r: true,
            cluster_model: None,
            q_fixed: 25.0,
            s_init: 100.0,
        }
    }
}

/// One estimator's sweep line.
#[derive(Debug, Clone)]
pub struct EstimatorCurve {
    pub estimator: SweepEstimator,
    pub label: String,
    /// Mean nRMSE [%] per level.
    pub mean_nrmse: Vec<f64>,
    /// Per-repetition nRMSE [%] per level (same order for every level).
    pub per_rep_nrmse: Vec<Vec<f64>>,
    /// Failed repetitions per level.
    pub failures: Vec<usize>,
    /// Total std where this curve first drops below the analytical one,
    /// linearly interpolated.
    pub break_even_std: Option<f64>,
    /// The per-level optimized gain (I&I optimized line only).
    pub chosen_gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub channel: SweepChannel,
    pub added_stds: Vec<f64>,
    /// Total noise std per level: sqrt(original^2 + added^2).
    pub total_stds: Vec<f64>,
    pub curves: Vec<EstimatorCurve>,
}

/// Reconstruct the plant maximum-power series from irradiance estimates,
/// using the measured (corrected) cell temperature per sample.
pub fn reconstruct_power_series(
    estimates: &[IrradianceEstimate],
    samples: &[MeasurementSample],
    model: &PlantModel,
    grid_points: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut cursor = 0usize;
    for est in estimates {
        while cursor < samples.len() && samples[cursor].timestamp < est.timestamp {
            cursor += 1;
        }
        if cursor >= samples.len() || samples[cursor].timestamp != est.timestamp {
            return Err(Error::invalid(
                "power reconstruction",
                format!("no sample matching estimate at t={}", est.timestamp),
            ));
        }
        let p = max_power(
            &model.stc,
            &model.datasheet,
            &model.topology,
            samples[cursor].t,
            est.s_hat,
            grid_points,
        )?;
        out.push((est.timestamp, p));
    }
    Ok(out)
}

/// nRMSE of one estimator run over one noisy realization of the records.
fn score_run(
    records: &[SimRecord],
    samples: &[MeasurementSample],
    series_config: &SeriesConfig,
    model: &PlantModel,
    grid_points: usize,
) -> Result<f64> {
    let result = estimate_series(samples, series_config, model)?;
    if result.estimates.is_empty() {
        return Err(Error::invalid("sweep cell", "estimator accepted no samples"));
    }
    let reconstructed = reconstruct_power_series(&result.estimates, samples, model, grid_points)?;

    let mut truth = Vec::with_capacity(reconstructed.len());
    let mut cursor = 0usize;
    for (ts, _) in &reconstructed {
        while cursor < records.len() && records[cursor].timestamp < *ts {
            cursor += 1;
        }
        truth.push(records[cursor].p_max_true);
    }
    let estimated: Vec<f64> = reconstructed.iter().map(|(_, p)| *p).collect();
    Ok(compute_metrics(&estimated, &truth)?.nrmse)
}

struct CellOutput {
    /// nRMSE per estimator line, keyed as (label, gamma-if-any).
    scores: Vec<(String, Result<f64>)>,
}

/// Run the full sweep. `clean` must come from a noise-free scenario run so
/// noise can be injected per cell.
pub fn run_noise_sweep(
    clean: &[SimRecord],
    model: &PlantModel,
    channel: SweepChannel,
    added_stds: &[f64],
    estimators: &[SweepEstimator],
    config: &SweepConfig,
) -> Result<SweepResult> {
    if added_stds.is_empty() || added_stds.iter().any(|s| *s < 0.0) {
        return Err(Error::invalid("sweep", "added stds must be non-negative"));
    }
    if added_stds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep", "added stds must be strictly increasing"));
    }
    if config.repetitions == 0 {
        return Err(Error::invalid("sweep", "need at least one repetition"));
    }
    let base = &config.base_noise;
    let original_std = match channel {
        SweepChannel::Current => base.std_i,
        SweepChannel::Voltage => base.std_v,
        SweepChannel::Temperature => base.std_t,
    };
    let total_stds: Vec<f64> = added_stds
        .iter()
        .map(|a| (original_std * original_std + a * a).sqrt())
        .collect();

    // Gamma values needed per cell: the fixed one plus the grid.
    let mut gammas: Vec<f64> = Vec::new();
    if estimators.contains(&SweepEstimator::IandIFixed) {
        gammas.push(config.gamma_fixed);
    }
    if estimators.contains(&SweepEstimator::IandIOptimized) {
        for g in &config.gamma_grid {
            if !gammas.iter().any(|x| x == g) {
                gammas.push(*g);
            }
        }
    }

    let cells: Vec<(usize, usize)> = (0..added_stds.len())
        .flat_map(|level| (0..config.repetitions).map(move |rep| (level, rep)))
        .collect();

    let outputs: Vec<((usize, usize), CellOutput)> = cells
        .par_iter()
        .map(|&(level, rep)| {
            let added = added_stds[level];
            let noise = NoiseSpec {
                std_i: if channel == SweepChannel::Current {
                    (base.std_i * base.std_i + added * added).sqrt()
                } else {
                    base.std_i
                },
                std_v: if channel == SweepChannel::Voltage {
                    (base.std_v * base.std_v + added * added).sqrt()
                } else {
                    base.std_v
                },
                std_t: if channel == SweepChannel::Temperature {
                    (base.std_t * base.std_t + added * added).sqrt()
                } else {
                    base.std_t
                },
                seed: config.seed.wrapping_add(rep as u64),
            };

            let mut records = clean.to_vec();
            apply_sensor_noise(&mut records, &noise, false).expect("validated noise");
            let samples: Vec<MeasurementSample> = records.iter().map(|r| r.to_sample()).collect();

            let mut scores = Vec::new();
            for estimator in estimators {
                match estimator {
                    SweepEstimator::Analytical => {
                        let cfg = SeriesConfig::new(EstimatorKind::Analytical, model);
                        scores.push((
                            "analytical".to_string(),
                            score_run(&records, &samples, &cfg, model, config.grid_points),
                        ));
                    }
                    SweepEstimator::Ekf => {
                        let mut cfg = SeriesConfig::new(EstimatorKind::Ekf, model);
                        cfg.cluster_model = config.cluster_model.clone();
                        cfg.ekf.q_fixed = config.q_fixed;
                        if config.calibrate_r {
                            let floor = cfg.ekf.r_diag;
                            cfg.ekf.r_diag = [
                                floor[0].max(base.std_v * base.std_v),
                                floor[1].max(base.std_i * base.std_i),
                                floor[2].max(base.std_t * base.std_t),
                            ];
                        }
                        // Fictitious added noise enters the matching R entry:
                        // variances of independent noises add.
                        cfg.ekf.r_diag[channel.r_index()] += added * added;
                        scores.push((
                            "ekf".to_string(),
                            score_run(&records, &samples, &cfg, model, config.grid_points),
                        ));
                    }
                    SweepEstimator::IandIFixed | SweepEstimator::IandIOptimized => {
                        // Handled through the shared gamma list below.
                    }
                }
            }
            for &gamma in &gammas {
                let mut cfg = SeriesConfig::new(EstimatorKind::IandI, model);
                cfg.gamma = gamma;
                cfg.s_init = config.s_init;
                scores.push((
                    format!("iandi@{gamma}"),
                    score_run(&records, &samples, &cfg, model, config.grid_points),
                ));
            }
            ((level, rep), CellOutput { scores })
        })
        .collect();

    // Aggregate per estimator line.
    let levels = added_stds.len();
    let reps = config.repetitions;
    let collect_line = |key: &str| -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut per_rep: Vec<Vec<f64>> = vec![Vec::new(); levels];
        let mut failures = vec![0usize; levels];
        for ((level, _rep), cell) in &outputs {
            for (label, score) in &cell.scores {
                if label == key {
                    match score {
                        Ok(v) => per_rep[*level].push(*v),
                        Err(_) => failures[*level] += 1,
                    }
                }
            }
        }
        (per_rep, failures)
    };
    let mean_of = |per_rep: &[Vec<f64>]| -> Vec<f64> {
        per_rep
            .iter()
            .map(|v| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            })
            .collect()
    };

    let mut curves = Vec::new();
    let mut analytical_mean: Option<Vec<f64>> = None;
    if estimators.contains(&SweepEstimator::Analytical) {
        let (per_rep, failures) = collect_line("analytical");
        let mean = mean_of(&per_rep);
        analytical_mean = Some(mean.clone());
        curves.push(EstimatorCurve {
            estimator: SweepEstimator::Analytical,
            label: "analytical".into(),
            mean_nrmse: mean,
            per_rep_nrmse: per_rep,
            failures,
            break_even_std: None,
            chosen_gamma: None,
        });
    }
    if estimators.contains(&SweepEstimator::IandIFixed) {
        let (per_rep, failures) = collect_line(&format!("iandi@{}", config.gamma_fixed));
        curves.push(EstimatorCurve {
            estimator: SweepEstimator::IandIFixed,
            label: format!("iandi_gamma_{}", config.gamma_fixed),
            mean_nrmse: mean_of(&per_rep),
            per_rep_nrmse: per_rep,
            failures,
            break_even_std: None,
            chosen_gamma: None,
        });
    }
    if estimators.contains(&SweepEstimator::IandIOptimized) {
        // Per level, pick the grid gamma with the lowest mean nRMSE.
        let grid_lines: Vec<(f64, Vec<Vec<f64>>, Vec<usize>)> = config
            .gamma_grid
            .iter()
            .map(|g| {
                let (per_rep, failures) = collect_line(&format!("iandi@{g}"));
                (*g, per_rep, failures)
            })
            .collect();
        let mut per_rep: Vec<Vec<f64>> = Vec::with_capacity(levels);
        let mut failures = vec![0usize; levels];
        let mut chosen = Vec::with_capacity(levels);
        for level in 0..levels {
            let best = grid_lines
                .iter()
                .filter(|(_, plr, _)| !plr[level].is_empty())
                .min_by(|a, b| {
                    let ma = a.1[level].iter().sum::<f64>() / a.1[level].len() as f64;
                    let mb = b.1[level].iter().sum::<f64>() / b.1[level].len() as f64;
                    ma.partial_cmp(&mb).unwrap()
                });
            match best {
                Some((g, plr, fl)) => {
                    chosen.push(*g);
                    per_rep.push(plr[level].clone());
                    failures[level] = fl[level];
                }
                None => {
                    chosen.push(f64::NAN);
                    per_rep.push(Vec::new());
                    failures[level] = reps;
                }
            }
        }
        curves.push(EstimatorCurve {
            estimator: SweepEstimator::IandIOptimized,
            label: "iandi_opt".into(),
            mean_nrmse: mean_of(&per_rep),
            per_rep_nrmse: per_rep,
            failures,
            break_even_std: None,
            chosen_gamma: Some(chosen),
        });
    }
    if estimators.contains(&SweepEstimator::Ekf) {
        let (per_rep, failures) = collect_line("ekf");
        curves.push(EstimatorCurve {
            estimator: SweepEstimator::Ekf,
            label: "ekf".into(),
            mean_nrmse: mean_of(&per_rep),
            per_rep_nrmse: per_rep,
            failures,
            break_even_std: None,
            chosen_gamma: None,
        });
    }

    // Break-even of each filter-based curve against the analytical one.
    if let Some(reference) = &analytical_mean {
        for curve in curves.iter_mut() {
            if curve.estimator == SweepEstimator::Analytical {
                continue;
            }
            curve.break_even_std = break_even(&total_stds, reference, &curve.mean_nrmse);
        }
    }

    Ok(SweepResult {
        channel,
        added_stds: added_stds.to_vec(),
        total_stds,
        curves,
    })
}

/// First total std where `filter` drops below `analytical`, linearly
/// interpolated between bracketing levels.
fn break_even(total_stds: &[f64], analytical: &[f64], filter: &[f64]) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None; // (std, margin)
    for k in 0..total_stds.len() {
        if !analytical[k].is_finite() || !filter[k].is_finite() {
            continue;
        }
        let margin = analytical[k] - filter[k]; // positive when the filter wins
        if margin > 0.0 {
            return match prev {
                None => Some(total_stds[k]),
                Some((std0, m0)) => {
                    let frac = -m0 / (margin - m0);
                    Some(std0 + frac * (total_stds[k] - std0))
                }
            };
        }
        prev = Some((total_stds[k], margin));
    }
    None
}

/// One row of the gain sweep.
#[derive(Debug, Clone)]
pub struct GammaSweepRow {
    pub gamma: f64,
    pub metrics: MetricReport,
    /// Forward-Euler stability flag: any step with gamma*dt*dPhi/dS >= 2.
    pub unstable_steps: usize,
    /// nRMSE within 5% (relative) of the sweep minimum.
    pub in_plateau: bool,
}

/// Run the I&I estimator over the records once per gamma and report metrics.
pub fn gamma_sweep(
    records: &[SimRecord],
    model: &PlantModel,
    gammas: &[f64],
    grid_points: usize,
    s_init: f64,
) -> Result<Vec<GammaSweepRow>> {
    if gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::invalid("gamma sweep", "gamma values must be positive"));
    }
    let samples: Vec<MeasurementSample> = records.iter().map(|r| r.to_sample()).collect();

    let rows: Vec<Result<(f64, MetricReport, usize)>> = gammas
        .par_iter()
        .map(|&gamma| {
            let mut cfg = SeriesConfig::new(EstimatorKind::IandI, model);
            cfg.gamma = gamma;
            cfg.s_init = s_init;
            let result = estimate_series(&samples, &cfg, model)?;
            let unstable = result
                .events
                .iter()
                .filter(|e| matches!(e, crate::estimators::SeriesEvent::StabilityBoundViolated { .. }))
                .count();
            let reconstructed =
                reconstruct_power_series(&result.estimates, &samples, model, grid_points)?;
            let mut truth = Vec::with_capacity(reconstructed.len());
            let mut cursor = 0usize;
            for (ts, _) in &reconstructed {
                while cursor < records.len() && records[cursor].timestamp < *ts {
                    cursor += 1;
                }
                truth.push(records[cursor].p_max_true);
            }
            let estimated: Vec<f64> = reconstructed.iter().map(|(_, p)| *p).collect();
            let metrics = compute_metrics(&estimated, &truth)?;
            Ok((gamma, metrics, unstable))
        })
        .collect();

    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let (gamma, metrics, unstable_steps) = row?;
        out.push(GammaSweepRow {
            gamma,
            metrics,
            unstable_steps,
            in_plateau: false,
        });
    }
    let min_nrmse = out
        .iter()
        .map(|r| r.metrics.nrmse)
        .fold(f64::INFINITY, f64::min);
    for row in out.iter_mut() {
        row.in_plateau = row.metrics.nrmse <= 1.05 * min_nrmse;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv::test_fixtures::plant_model_14kw;
    use crate::sim::{run_scenario, Profile, ScenarioSpec};

    fn short_cloudy_records() -> Vec<SimRecord> {
        let model = plant_model_14kw();
        let spec = ScenarioSpec::new(
            Profile::PartlyCloudy {
                s_peak: 900.0,
                event_probability: 0.02,
                time_constant: 40.0,
            },
            240.0,
            1.0,
            21,
        );
        run_scenario(&spec, &NoiseSpec::noiseless(21), &model, 100).unwrap()
    }

    #[test]
    fn zero_added_noise_recovers_baseline_row() {
        let model = plant_model_14kw();
        let clean = short_cloudy_records();
        let config = SweepConfig {
            repetitions: 2,
            gamma_grid: vec![1.0],
            ..SweepConfig::default()
        };
        let result = run_noise_sweep(
            &clean,
            &model,
            SweepChannel::Current,
            &[0.0, 0.5],
            &[SweepEstimator::Analytical],
            &config,
        )
        .unwrap();
        assert_eq!(result.total_stds.len(), 2);
        // Level 0 total std equals the original level.
        assert!((result.total_stds[0] - config.base_noise.std_i).abs() < 1e-12);
        let analytical = &result.curves[0];
        assert!(analytical.mean_nrmse[0].is_finite());
        assert!(analytical.mean_nrmse[1] > analytical.mean_nrmse[0]);
    }

    #[test]
    fn break_even_interpolates_crossing() {
        let stds = vec![1.0, 2.0, 3.0];
        let analytical = vec![5.0, 10.0, 15.0];
        let filter = vec![9.0, 9.0, 9.0];
        // margin: -4, +1, +6 -> crossing between 1.0 and 2.0 at 4/5 of the way.
        let be = break_even(&stds, &analytical, &filter).unwrap();
        assert!((be - 1.8).abs() < 1e-12, "be = {be}");
    }

    #[test]
    fn break_even_first_level_when_already_better() {
        let stds = vec![1.0, 2.0];
        let be = break_even(&stds, &[10.0, 12.0], &[8.0, 8.0]).unwrap();
        assert_eq!(be, 1.0);
    }

    #[test]
    fn break_even_none_when_filter_never_wins() {
        let stds = vec![1.0, 2.0];
        assert!(break_even(&stds, &[5.0, 6.0], &[9.0, 9.0]).is_none());
    }

    #[test]
    fn gamma_sweep_reports_plateau_and_instability() {
        let model = plant_model_14kw();
        let records = short_cloudy_records();
        let rows = gamma_sweep(&records, &model, &[0.5, 5.0, 20.0, 200.0], 100, 100.0).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().any(|r| r.in_plateau));
        // Faster gains track the cloudy profile better here.
        assert!(rows[2].metrics.nrmse <= rows[0].metrics.nrmse);
        // Far past the forward-Euler bound the run is flagged.
        assert!(rows[3].unstable_steps > 0);
    }
}
