//! Subcommand implementations. Every handler consumes flat configs (so a
//! manifest can replay it), writes its artifacts plus a manifest into the
//! output directory, and prints a short summary.

use crate::manifest::{parse_manifest, ManifestBuilder};
use crate::{Command, EstimatorArgs};
use anyhow::{anyhow, bail, Context, Result};
use pvmax_core::estimators::{
    estimate_series, EstimatorKind, MeasurementSample, SeriesConfig,
};
use pvmax_core::eval::sweep::reconstruct_power_series;
use pvmax_core::eval::{
    amplitude_spectrum_timestamps, compute_metrics, gamma_sweep, high_band_content,
    run_noise_sweep, SweepChannel, SweepConfig, SweepEstimator,
};
use pvmax_core::forecast::{forecast_compare, CompareConfig};
use pvmax_core::io::config::{
    cluster_model_from_config, cluster_model_to_config, plant_from_config, scenario_from_config,
};
use pvmax_core::io::{ingest, read_measurements, write_measurements, CsvRecord, FlatConfig,
    IngestOptions};
use pvmax_core::pv::types::PlantModel;
use pvmax_core::pv::{extract_stc_parameters, stc_residuals};
use pvmax_core::sim::{run_scenario, NoiseSpec};
use pvmax_core::variance::{features_with_next_delta, fit_clusters, k_sweep};
use std::fs;
use std::path::{Path, PathBuf};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::ExtractParams { plant, out } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            run_extract_params(&plant_cfg, &out.out)
        }
        Command::Simulate {
            plant,
            scenario,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let scenario_cfg = FlatConfig::load(&scenario)?;
            run_simulate(&plant_cfg, &scenario_cfg, &out.out)
        }
        Command::Estimate {
            plant,
            input,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let args = est_args(&est, &[("input", path_str(&input)?)])?;
            run_estimate(&plant_cfg, &args, &out.out)
        }
        Command::Evaluate {
            plant,
            input,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let args = est_args(&est, &[("input", path_str(&input)?)])?;
            run_evaluate(&plant_cfg, &args, &out.out)
        }
        Command::Sweep {
            plant,
            scenario,
            channel,
            added_stds,
            reps,
            seed,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let scenario_cfg = FlatConfig::load(&scenario)?;
            let args = est_args(
                &est,
                &[
                    ("channel", channel),
                    ("added_stds", added_stds),
                    ("reps", reps.to_string()),
                    ("seed", seed.to_string()),
                ],
            )?;
            run_sweep(&plant_cfg, &scenario_cfg, &args, &out.out)
        }
        Command::Spectrum {
            plant,
            input,
            cutoff_hz,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let args = est_args(
                &est,
                &[
                    ("input", path_str(&input)?),
                    ("cutoff_hz", cutoff_hz.to_string()),
                ],
            )?;
            run_spectrum(&plant_cfg, &args, &out.out)
        }
        Command::GammaSweep {
            plant,
            input,
            gammas,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let args = est_args(
                &est,
                &[("input", path_str(&input)?), ("gammas", gammas)],
            )?;
            run_gamma_sweep(&plant_cfg, &args, &out.out)
        }
        Command::ForecastCompare {
            plant,
            train_days,
            test_days,
            seed,
            est,
            out,
        } => {
            let plant_cfg = FlatConfig::load(&plant.plant)?;
            let args = est_args(
                &est,
                &[
                    ("train_days", train_days.to_string()),
                    ("test_days", test_days.to_string()),
                    ("seed", seed.to_string()),
                ],
            )?;
            run_forecast_compare(&plant_cfg, &args, &out.out)
        }
        Command::FitClusters {
            input,
            k,
            window,
            seed,
            sweep_k,
            out,
        } => {
            let mut args = FlatConfig::new();
            args.set("input", path_str(&input)?);
            args.set("k", k);
            args.set("window", window);
            args.set("seed", seed);
            args.set("sweep_k", sweep_k);
            run_fit_clusters(&args, &out.out)
        }
        Command::Rerun { manifest, out } => rerun(&manifest, &out.out),
    }
}

fn rerun(manifest: &Path, out: &Path) -> Result<()> {
    let parsed = parse_manifest(manifest)?;
    match parsed.command.as_str() {
        "extract-params" => run_extract_params(&parsed.plant, out),
        "simulate" => run_simulate(&parsed.plant, &parsed.scenario, out),
        "estimate" => run_estimate(&parsed.plant, &parsed.args, out),
        "evaluate" => run_evaluate(&parsed.plant, &parsed.args, out),
        "sweep" => run_sweep(&parsed.plant, &parsed.scenario, &parsed.args, out),
        "spectrum" => run_spectrum(&parsed.plant, &parsed.args, out),
        "gamma-sweep" => run_gamma_sweep(&parsed.plant, &parsed.args, out),
        "forecast-compare" => run_forecast_compare(&parsed.plant, &parsed.args, out),
        "fit-clusters" => run_fit_clusters(&parsed.args, out),
        other => bail!("manifest names unknown command '{other}'"),
    }
}

fn path_str(p: &Path) -> Result<String> {
    let abs = p
        .canonicalize()
        .with_context(|| format!("cannot resolve path {}", p.display()))?;
    Ok(abs.display().to_string())
}

fn est_args(est: &EstimatorArgs, extra: &[(&str, String)]) -> Result<FlatConfig> {
    let mut args = FlatConfig::new();
    args.set("estimators", &est.estimators);
    args.set("gamma", est.gamma);
    args.set("s_init", est.s_init);
    args.set("prior_mean", est.prior_mean);
    args.set("prior_std", est.prior_std);
    args.set("q_mode", &est.q_mode);
    args.set("q_fixed", est.q_fixed);
    args.set("correct_temperature", est.correct_temperature);
    args.set("grid_points", est.grid_points);
    if let Some(clusters) = &est.clusters {
        // Inline the model so a rerun does not depend on the original file.
        let model_cfg = FlatConfig::load(clusters)?;
        for line in model_cfg.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                args.set(k, v);
            }
        }
    }
    for (k, v) in extra {
        args.set(k, v.clone());
    }
    Ok(args)
}

fn ensure_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
}

fn build_model(plant_cfg: &FlatConfig) -> Result<(PlantModel, pvmax_core::io::config::PlantConfig)>
{
    let plant = plant_from_config(plant_cfg)?;
    let stc = extract_stc_parameters(&plant.datasheet, None)?;
    let model = PlantModel::new(plant.datasheet.clone(), stc, plant.topology.clone())?;
    Ok((model, plant))
}

fn parse_estimators(args: &FlatConfig) -> Result<Vec<EstimatorKind>> {
    args.get("estimators")
        .unwrap_or("analytical")
        .split(',')
        .map(|s| EstimatorKind::parse(s.trim()).map_err(Into::into))
        .collect()
}

fn series_config(
    kind: EstimatorKind,
    args: &FlatConfig,
    model: &PlantModel,
    plant: &pvmax_core::io::config::PlantConfig,
) -> Result<SeriesConfig> {
    let mut cfg = SeriesConfig::new(kind, model);
    cfg.gamma = args.f64_or("gamma", 0.7)?;
    cfg.s_init = args.f64_or("s_init", 100.0)?;
    cfg.ekf.prior_mean = args.f64_or("prior_mean", 500.0)?;
    let prior_std = args.f64_or("prior_std", 300.0)?;
    cfg.ekf.prior_var = prior_std * prior_std;
    cfg.ekf.q_fixed = args.f64_or("q_fixed", 25.0)?;
    cfg.ekf.tolerances = plant.tolerances;
    match args.get("q_mode").unwrap_or("fixed") {
        "fixed" => {}
        "clustered" => {
            if args.get("clusters.k").is_none() {
                bail!("q_mode=clustered needs --clusters <model file>");
            }
            cfg.cluster_model = Some(cluster_model_from_config(args)?);
        }
        other => bail!("unknown q-mode '{other}' (expected fixed|clustered)"),
    }
    Ok(cfg)
}

fn ingest_options(args: &FlatConfig) -> Result<IngestOptions> {
    Ok(IngestOptions {
        correct_temperature: args.bool_or("correct_temperature", false)?,
        daylight_filter: true,
        ..IngestOptions::default()
    })
}

fn run_extract_params(plant_cfg: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let plant = plant_from_config(plant_cfg)?;
    let stc = extract_stc_parameters(&plant.datasheet, None)?;
    let residuals = stc_residuals(&stc, &plant.datasheet);

    let mut cfg = FlatConfig::new();
    cfg.set("stc.r_s_ohm", format!("{:.12e}", stc.r_s));
    cfg.set("stc.r_p_ohm", format!("{:.12e}", stc.r_p));
    cfg.set("stc.i_ph_A", format!("{:.12e}", stc.i_ph));
    cfg.set("stc.i_sat_A", format!("{:.12e}", stc.i_sat));
    cfg.set("stc.n_r", format!("{:.12e}", stc.n_r));
    cfg.set("stc.e_g_eV", format!("{:.12e}", stc.e_g));
    cfg.set("stc.alpha_cell_A_per_K", format!("{:.12e}", stc.alpha_cell));
    for (k, r) in residuals.iter().enumerate() {
        cfg.set(&format!("residuals.r{}", k + 1), format!("{r:.3e}"));
    }
    cfg.write(&out.join("params.conf"))?;

    ManifestBuilder::new("extract-params")
        .plant(plant_cfg)
        .write(out)?;

    println!(
        "identified parameters written to {}",
        out.join("params.conf").display()
    );
    println!(
        "r_s={:.6e} ohm  r_p={:.4} ohm  i_ph={:.6} A  i_sat={:.4e} A  n_r={:.6}",
        stc.r_s, stc.r_p, stc.i_ph, stc.i_sat, stc.n_r
    );
    println!(
        "max |residual| = {:.3e}",
        residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    );
    Ok(())
}

fn run_simulate(plant_cfg: &FlatConfig, scenario_cfg: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, _) = build_model(plant_cfg)?;
    let (spec, noise) = scenario_from_config(scenario_cfg)?;
    let records = run_scenario(&spec, &noise, &model, 1000)?;
    let csv_records: Vec<CsvRecord> = records.iter().map(CsvRecord::from).collect();
    write_measurements(&out.join("measurements.csv"), &csv_records)?;

    ManifestBuilder::new("simulate")
        .plant(plant_cfg)
        .scenario(scenario_cfg)
        .write(out)?;
    println!(
        "simulated {} samples into {}",
        csv_records.len(),
        out.join("measurements.csv").display()
    );
    Ok(())
}

struct LoadedInput {
    samples: Vec<MeasurementSample>,
    p_max_true: Vec<Option<f64>>,
    dropped: usize,
}

fn load_input(args: &FlatConfig, model: &PlantModel) -> Result<LoadedInput> {
    let input = args
        .get("input")
        .ok_or_else(|| anyhow!("missing input path"))?;
    let records = read_measurements(&PathBuf::from(input))?;
    let report = ingest(&records, Some(model), ingest_options(args)?)?;
    Ok(LoadedInput {
        samples: report.samples,
        p_max_true: report.p_max_true,
        dropped: report.dropped.len(),
    })
}

fn run_estimate(plant_cfg: &FlatConfig, args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, plant) = build_model(plant_cfg)?;
    let input = load_input(args, &model)?;
    let grid_points = args.f64_or("grid_points", 1000.0)? as usize;

    for kind in parse_estimators(args)? {
        let cfg = series_config(kind, args, &model, &plant)?;
        let result = estimate_series(&input.samples, &cfg, &model)?;
        let power = reconstruct_power_series(&result.estimates, &input.samples, &model, grid_points)?;

        let path = out.join(format!("estimates_{}.csv", kind.name()));
        let mut text = String::from("timestamp_s,s_hat_Wm2,variance_Wm2sq,p_max_W\n");
        for (est, (_, p)) in result.estimates.iter().zip(power.iter()) {
            text.push_str(&format!(
                "{:.3},{:.6},{},{:.6}\n",
                est.timestamp,
                est.s_hat,
                est.variance
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default(),
                p
            ));
        }
        fs::write(&path, text)?;

        let rej_path = out.join(format!("rejections_{}.csv", kind.name()));
        let mut text = String::from("timestamp_s,reason\n");
        for r in &result.rejections {
            text.push_str(&format!("{:.3},\"{}\"\n", r.timestamp, r.reason));
        }
        fs::write(&rej_path, text)?;
        println!(
            "{}: {} estimates, {} rejections ({} rows dropped at ingest)",
            kind.name(),
            result.estimates.len(),
            result.rejections.len(),
            input.dropped
        );
    }

    ManifestBuilder::new("estimate")
        .plant(plant_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

fn run_evaluate(plant_cfg: &FlatConfig, args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, plant) = build_model(plant_cfg)?;
    let input = load_input(args, &model)?;
    let grid_points = args.f64_or("grid_points", 1000.0)? as usize;

    if input.p_max_true.iter().all(|p| p.is_none()) {
        bail!("evaluate needs the p_max_true_W ground-truth column");
    }

    let mut table = String::from("estimator,nrmse_pct,err_max_pct,nme_pct,samples\n");
    for kind in parse_estimators(args)? {
        let cfg = series_config(kind, args, &model, &plant)?;
        let result = estimate_series(&input.samples, &cfg, &model)?;
        let power = reconstruct_power_series(&result.estimates, &input.samples, &model, grid_points)?;

        // Pair with ground truth by timestamp.
        let mut estimated = Vec::new();
        let mut truth = Vec::new();
        let mut cursor = 0usize;
        for (ts, p) in &power {
            while cursor < input.samples.len() && input.samples[cursor].timestamp < *ts {
                cursor += 1;
            }
            if let Some(Some(p_true)) = input.p_max_true.get(cursor) {
                estimated.push(*p);
                truth.push(*p_true);
            }
        }
        let metrics = compute_metrics(&estimated, &truth)?;
        table.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{}\n",
            kind.name(),
            metrics.nrmse,
            metrics.err_max,
            metrics.nme,
            metrics.sample_count
        ));
        println!(
            "{:<12} nRMSE {:6.2}%  Err_max {:6.2}%  nME {:+6.2}%  ({} samples)",
            kind.name(),
            metrics.nrmse,
            metrics.err_max,
            metrics.nme,
            metrics.sample_count
        );
    }
    fs::write(out.join("metrics.csv"), table)?;

    ManifestBuilder::new("evaluate")
        .plant(plant_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

fn run_sweep(
    plant_cfg: &FlatConfig,
    scenario_cfg: &FlatConfig,
    args: &FlatConfig,
    out: &Path,
) -> Result<()> {
    ensure_out(out)?;
    let (model, _) = build_model(plant_cfg)?;
    let (spec, base_noise) = scenario_from_config(scenario_cfg)?;
    let clean = run_scenario(&spec, &NoiseSpec::noiseless(spec.seed), &model, 200)?;

    let channel = SweepChannel::parse(args.get("channel").unwrap_or("current"))?;
    let added_stds: Vec<f64> = args
        .get("added_stds")
        .ok_or_else(|| anyhow!("missing added_stds"))?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad std: {e}")))
        .collect::<Result<_>>()?;

    let mut estimators = Vec::new();
    for kind in parse_estimators(args)? {
        match kind {
            EstimatorKind::Analytical => estimators.push(SweepEstimator::Analytical),
            EstimatorKind::Ekf => estimators.push(SweepEstimator::Ekf),
            EstimatorKind::IandI => {
                estimators.push(SweepEstimator::IandIFixed);
                estimators.push(SweepEstimator::IandIOptimized);
            }
            EstimatorKind::Pyranometer => {
                bail!("pyranometer has no noise channel in the sweep")
            }
        }
    }

    let mut config = SweepConfig {
        base_noise,
        repetitions: args.f64_or("reps", 20.0)? as usize,
        seed: args.u64_or("seed", 1)?,
        ..SweepConfig::default()
    };
    if args.get("clusters.k").is_some() {
        config.cluster_model = Some(cluster_model_from_config(args)?);
    }

    let result = run_noise_sweep(&clean, &model, channel, &added_stds, &estimators, &config)?;

    let mut table = String::from("channel,total_std,estimator,mean_nrmse_pct,failures\n");
    for curve in &result.curves {
        for (level, std) in result.total_stds.iter().enumerate() {
            table.push_str(&format!(
                "{},{:.6},{},{:.4},{}\n",
                channel.name(),
                std,
                curve.label,
                curve.mean_nrmse[level],
                curve.failures[level]
            ));
        }
    }
    fs::write(out.join("sweep.csv"), table)?;

    let mut summary = FlatConfig::new();
    summary.set("sweep.channel", channel.name());
    for curve in &result.curves {
        if let Some(be) = curve.break_even_std {
            summary.set(&format!("break_even.{}", curve.label), format!("{be:.4}"));
            println!("{}: break-even at total std {:.3}", curve.label, be);
        } else if curve.estimator != SweepEstimator::Analytical {
            summary.set(&format!("break_even.{}", curve.label), "none");
            println!("{}: no break-even in the swept range", curve.label);
        }
    }
    summary.write(&out.join("breakeven.txt"))?;

    ManifestBuilder::new("sweep")
        .plant(plant_cfg)
        .scenario(scenario_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

/// Longest contiguous uniformly-sampled index range of a timestamp series.
fn longest_uniform_run(timestamps: &[f64]) -> std::ops::Range<usize> {
    if timestamps.len() < 2 {
        return 0..timestamps.len();
    }
    let mut best = 0..1;
    let mut start = 0usize;
    let mut step = timestamps[1] - timestamps[0];
    for k in 1..timestamps.len() {
        let dt = timestamps[k] - timestamps[k - 1];
        if (dt - step).abs() > 1e-9 * step.max(1e-9) {
            if k - start > best.len() {
                best = start..k;
            }
            start = k - 1;
            step = dt;
        }
    }
    if timestamps.len() - start > best.len() {
        best = start..timestamps.len();
    }
    best
}

fn run_spectrum(plant_cfg: &FlatConfig, args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, plant) = build_model(plant_cfg)?;
    let input = load_input(args, &model)?;
    let cutoff = args.f64_or("cutoff_hz", 0.05)?;
    let grid_points = args.f64_or("grid_points", 1000.0)? as usize;

    // Daylight filtering can leave gaps; analyze the longest uniform stretch.
    let all_timestamps: Vec<f64> = input.samples.iter().map(|s| s.timestamp).collect();
    let window = longest_uniform_run(&all_timestamps);
    if window.len() < input.samples.len() {
        println!(
            "analyzing the longest uniform stretch: samples {}..{} of {}",
            window.start,
            window.end,
            input.samples.len()
        );
    }
    let samples = &input.samples[window.clone()];
    let timestamps = &all_timestamps[window.clone()];

    let mut summary = FlatConfig::new();
    summary.set("spectrum.cutoff_hz", cutoff);
    summary.set("spectrum.window_start_s", format!("{:.3}", timestamps[0]));
    summary.set("spectrum.window_samples", samples.len());

    // Ground-truth power spectrum when the column is available.
    let p_true = &input.p_max_true[window.clone()];
    if p_true.iter().all(|p| p.is_some()) {
        let truth: Vec<f64> = p_true.iter().map(|p| p.unwrap()).collect();
        let spec = amplitude_spectrum_timestamps(timestamps, &truth)?;
        write_spectrum(&out.join("spectrum_truth.csv"), &spec)?;
        summary.set(
            "high_band.truth",
            format!("{:.6}", high_band_content(&spec, cutoff)),
        );
    }

    for kind in parse_estimators(args)? {
        let cfg = series_config(kind, args, &model, &plant)?;
        let result = estimate_series(samples, &cfg, &model)?;
        let power = reconstruct_power_series(&result.estimates, samples, &model, grid_points)?;
        let ts: Vec<f64> = power.iter().map(|(t, _)| *t).collect();
        let values: Vec<f64> = power.iter().map(|(_, p)| *p).collect();
        let spec = amplitude_spectrum_timestamps(&ts, &values)?;
        write_spectrum(&out.join(format!("spectrum_{}.csv", kind.name())), &spec)?;
        let hb = high_band_content(&spec, cutoff);
        summary.set(&format!("high_band.{}", kind.name()), format!("{hb:.6}"));
        println!("{}: high-band (> {cutoff} Hz) content {:.3}", kind.name(), hb);
    }
    summary.write(&out.join("highband.txt"))?;

    ManifestBuilder::new("spectrum")
        .plant(plant_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

fn write_spectrum(path: &Path, spectrum: &[(f64, f64)]) -> Result<()> {
    let mut text = String::from("frequency_Hz,amplitude\n");
    for (f, a) in spectrum {
        text.push_str(&format!("{f:.9},{a:.9}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn run_gamma_sweep(plant_cfg: &FlatConfig, args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, _) = build_model(plant_cfg)?;
    let input = args
        .get("input")
        .ok_or_else(|| anyhow!("missing input path"))?;
    let records = read_measurements(&PathBuf::from(input))?;
    if records.iter().any(|r| r.p_max_true.is_none()) {
        bail!("gamma-sweep needs the p_max_true_W ground-truth column");
    }
    // Rebuild sim records from the CSV so the sweep can reuse ground truth.
    let sim_records: Vec<pvmax_core::sim::SimRecord> = records
        .iter()
        .map(|r| pvmax_core::sim::SimRecord {
            timestamp: r.timestamp,
            v: r.v,
            i: r.i,
            t_raw: r.t_raw,
            gni: r.gni,
            s_true: r.s_true.unwrap_or(f64::NAN),
            t_cell_true: r.t_raw,
            p_max_true: r.p_max_true.unwrap(),
            v_clean: r.v,
            i_clean: r.i,
        })
        .collect();

    let gammas: Vec<f64> = args
        .get("gammas")
        .unwrap_or("0.1,0.7,1,5,20,100,200")
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad gamma: {e}")))
        .collect::<Result<_>>()?;
    let grid_points = args.f64_or("grid_points", 1000.0)? as usize;
    let s_init = args.f64_or("s_init", 100.0)?;

    let rows = gamma_sweep(&sim_records, &model, &gammas, grid_points, s_init)?;
    let mut table =
        String::from("gamma,nrmse_pct,err_max_pct,nme_pct,unstable_steps,in_plateau\n");
    for row in &rows {
        table.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{},{}\n",
            row.gamma,
            row.metrics.nrmse,
            row.metrics.err_max,
            row.metrics.nme,
            row.unstable_steps,
            row.in_plateau
        ));
        println!(
            "gamma {:>8}: nRMSE {:6.2}%{}{}",
            row.gamma,
            row.metrics.nrmse,
            if row.in_plateau { "  [plateau]" } else { "" },
            if row.unstable_steps > 0 {
                format!("  [{} unstable steps]", row.unstable_steps)
            } else {
                String::new()
            }
        );
    }
    fs::write(out.join("gamma_sweep.csv"), table)?;

    ManifestBuilder::new("gamma-sweep")
        .plant(plant_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

fn run_forecast_compare(plant_cfg: &FlatConfig, args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let (model, _) = build_model(plant_cfg)?;
    let mut config = CompareConfig::new(args.u64_or("seed", 1)?);
    config.train_days = args.f64_or("train_days", 6.0)? as usize;
    config.test_days = args.f64_or("test_days", 2.0)? as usize;
    config.estimators = parse_estimators(args)?;
    config.grid_points = args.f64_or("grid_points", 1000.0)?.min(200.0) as usize;

    let outcome = forecast_compare(&model, &config)?;
    let mut table = String::from("series,nmae_pct,horizon_s,predictions\n");
    for report in &outcome.reports {
        table.push_str(&format!(
            "{},{:.4},{},{}\n",
            report.provenance.label(),
            report.nmae,
            report.horizon,
            report.prediction_count
        ));
        println!(
            "{:<16} nMAE {:6.2}%  ({} one-step predictions)",
            report.provenance.label(),
            report.nmae,
            report.prediction_count
        );
    }
    fs::write(out.join("forecast.csv"), table)?;
    println!("curtailed days: {:?}", outcome.curtailed_days);

    ManifestBuilder::new("forecast-compare")
        .plant(plant_cfg)
        .args_from(args)
        .write(out)?;
    Ok(())
}

fn run_fit_clusters(args: &FlatConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let input = args
        .get("input")
        .ok_or_else(|| anyhow!("missing input path"))?;
    let records = read_measurements(&PathBuf::from(input))?;
    let s_true: Vec<f64> = records
        .iter()
        .map(|r| {
            r.s_true
                .ok_or_else(|| anyhow!("fit-clusters needs the s_true_Wm2 column"))
        })
        .collect::<Result<_>>()?;
    let delta_s: Vec<f64> = s_true.windows(2).map(|w| w[1] - w[0]).collect();

    let k = args.f64_or("k", 4.0)? as usize;
    let window = args.f64_or("window", 10.0)? as usize;
    let seed = args.u64_or("seed", 1)?;

    let (features, paired) = features_with_next_delta(&delta_s, window)?;
    let model = fit_clusters(&features, &paired, k, window, seed)?;
    cluster_model_to_config(&model).write(&out.join("clusters.txt"))?;
    println!(
        "fitted k={} clusters over {} feature vectors; variances {:?}",
        k,
        features.len(),
        model.variances
    );

    if args.bool_or("sweep_k", false)? {
        let rows = k_sweep(&features, &paired, 2..=10, window, seed);
        let mut table = String::from("k,mean_within_cluster_variance\n");
        for (k, var) in rows {
            table.push_str(&format!(
                "{},{}\n",
                k,
                var.map(|v| format!("{v:.6}")).unwrap_or_else(|| "fit_failed".into())
            ));
        }
        fs::write(out.join("ksweep.csv"), table)?;
    }

    ManifestBuilder::new("fit-clusters").args_from(args).write(out)?;
    Ok(())
}
