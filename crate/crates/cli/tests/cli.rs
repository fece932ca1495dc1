//! End-to-end CLI checks: determinism under fixed seeds, manifest replay
//! and exit-code classes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pvmax")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pvmax_cli_{name}_{}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_plant(dir: &Path) -> PathBuf {
    let path = dir.join("plant.conf");
    fs::write(
        &path,
        "\
panel.v_oc_V = 37.8
panel.i_sc_A = 8.86
panel.v_mp_V = 30.4
panel.i_mp_A = 8.39
panel.alpha_A_per_K = 0.00443
panel.beta_per_K = -0.0032
panel.cells_series = 60
panel.cell_strings_parallel = 1
plant.modules_per_string = 14
plant.strings_per_converter = 2
plant.converters = 2
plant.rating_W = 14280
",
    )
    .unwrap();
    path
}

fn write_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.conf");
    fs::write(
        &path,
        "\
profile = step
duration_s = 120
sample_interval_s = 1
seed = 9
step_0 = 0 500
step_1 = 60 800
curtail_0 = 30 90 0.5
noise.std_i_A = 0.55
noise.std_v_V = 0.23
noise.std_t_K = 0.4
",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn simulate_is_byte_identical_under_fixed_seed() {
    let dir = workdir("determinism");
    let plant = write_plant(&dir);
    let scenario = write_scenario(&dir);

    for out in ["a", "b"] {
        let status = run(&[
            "simulate",
            "--plant",
            plant.to_str().unwrap(),
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            dir.join(out).to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{status:?}");
    }
    let a = fs::read(dir.join("a/measurements.csv")).unwrap();
    let b = fs::read(dir.join("b/measurements.csv")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical CSV");
    let ma = fs::read(dir.join("a/manifest.txt")).unwrap();
    let mb = fs::read(dir.join("b/manifest.txt")).unwrap();
    assert_eq!(ma, mb);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let dir = workdir("rerun");
    let plant = write_plant(&dir);
    let scenario = write_scenario(&dir);

    let first = run(&[
        "simulate",
        "--plant",
        plant.to_str().unwrap(),
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.join("first").to_str().unwrap(),
    ]);
    assert!(first.status.success());

    // Delete the source configs: the manifest alone must be sufficient.
    fs::remove_file(&plant).unwrap();
    fs::remove_file(&scenario).unwrap();

    let rerun = run(&[
        "rerun",
        "--manifest",
        dir.join("first/manifest.txt").to_str().unwrap(),
        "--out",
        dir.join("second").to_str().unwrap(),
    ]);
    assert!(rerun.status.success(), "{rerun:?}");

    let a = fs::read(dir.join("first/measurements.csv")).unwrap();
    let b = fs::read(dir.join("second/measurements.csv")).unwrap();
    assert_eq!(a, b, "manifest replay must reproduce outputs");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn estimate_then_evaluate_pipeline() {
    let dir = workdir("pipeline");
    let plant = write_plant(&dir);
    let scenario = write_scenario(&dir);

    assert!(run(&[
        "simulate",
        "--plant",
        plant.to_str().unwrap(),
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.join("sim").to_str().unwrap(),
    ])
    .status
    .success());

    let est = run(&[
        "estimate",
        "--plant",
        plant.to_str().unwrap(),
        "--input",
        dir.join("sim/measurements.csv").to_str().unwrap(),
        "--estimators",
        "analytical,iandi",
        "--gamma",
        "5",
        "--grid-points",
        "150",
        "--out",
        dir.join("est").to_str().unwrap(),
    ]);
    assert!(est.status.success(), "{est:?}");
    assert!(dir.join("est/estimates_analytical.csv").exists());
    assert!(dir.join("est/estimates_iandi.csv").exists());

    let eval = run(&[
        "evaluate",
        "--plant",
        plant.to_str().unwrap(),
        "--input",
        dir.join("sim/measurements.csv").to_str().unwrap(),
        "--estimators",
        "analytical",
        "--grid-points",
        "150",
        "--out",
        dir.join("eval").to_str().unwrap(),
    ]);
    assert!(eval.status.success(), "{eval:?}");
    let metrics = fs::read_to_string(dir.join("eval/metrics.csv")).unwrap();
    let row = metrics.lines().nth(1).expect("one metric row");
    let nrmse: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    // Curtailed step scenario with stock noise: the analytical
    // reconstruction stays within a few percent.
    assert!(nrmse < 10.0, "nrmse = {nrmse}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_error_exits_with_code_2() {
    let dir = workdir("badconfig");
    let path = dir.join("broken.conf");
    fs::write(&path, "panel.v_oc_V = 37.8\n").unwrap(); // missing keys
    let out = run(&[
        "extract-params",
        "--plant",
        path.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn data_error_exits_with_code_3() {
    let dir = workdir("baddata");
    let plant = write_plant(&dir);
    let csv = dir.join("bad.csv");
    fs::write(
        &csv,
        "timestamp_s,v_V,i_A,t_K\n1.0,500,20,300\n1.0,501,20,300\n",
    )
    .unwrap();
    let out = run(&[
        "estimate",
        "--plant",
        plant.to_str().unwrap(),
        "--input",
        csv.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn fit_clusters_writes_reloadable_model() {
    let dir = workdir("clusters");
    let plant = write_plant(&dir);
    let scenario = dir.join("scenario.conf");
    fs::write(
        &scenario,
        "\
profile = partly_cloudy
duration_s = 400
sample_interval_s = 1
seed = 5
s_peak_Wm2 = 900
cloud_event_probability = 0.05
cloud_time_constant_s = 20
",
    )
    .unwrap();
    assert!(run(&[
        "simulate",
        "--plant",
        plant.to_str().unwrap(),
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.join("sim").to_str().unwrap(),
    ])
    .status
    .success());

    let fit = run(&[
        "fit-clusters",
        "--input",
        dir.join("sim/measurements.csv").to_str().unwrap(),
        "--k",
        "3",
        "--window",
        "10",
        "--seed",
        "4",
        "--sweep-k",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert!(fit.status.success(), "{fit:?}");
    assert!(dir.join("fit/clusters.txt").exists());
    assert!(dir.join("fit/ksweep.csv").exists());

    // The fitted model feeds the EKF through --clusters.
    let est = run(&[
        "estimate",
        "--plant",
        plant.to_str().unwrap(),
        "--input",
        dir.join("sim/measurements.csv").to_str().unwrap(),
        "--estimators",
        "ekf",
        "--q-mode",
        "clustered",
        "--clusters",
        dir.join("fit/clusters.txt").to_str().unwrap(),
        "--grid-points",
        "150",
        "--out",
        dir.join("est").to_str().unwrap(),
    ]);
    assert!(est.status.success(), "{est:?}");
    assert!(dir.join("est/estimates_ekf.csv").exists());
    fs::remove_dir_all(&dir).ok();
}
