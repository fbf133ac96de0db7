use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn lindlift(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lindlift"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn real(rows: &[[f64; 2]; 2]) -> Value {
    json!(rows
        .iter()
        .map(|r| r.iter().map(|x| [*x, 0.0]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

/// Samples of `¼[[2, 1 + e^{−2t}], [1 + e^{−2t}, 2]]` on `[0, 1]`.
fn relaxing_trajectory(n: usize) -> Value {
    let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let states: Vec<Value> = times
        .iter()
        .map(|t| {
            let c = 0.25 * (1.0 + (-2.0 * t).exp());
            real(&[[0.5, c], [c, 0.5]])
        })
        .collect();
    let derivatives: Vec<Value> = times
        .iter()
        .map(|t| {
            let c = -0.5 * (-2.0 * t).exp();
            real(&[[0.0, c], [c, 0.0]])
        })
        .collect();
    json!({ "dim": 2, "times": times, "states": states, "derivatives": derivatives })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn tangent_rejects_kernel_violation() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rho.json", &real(&[[1.0, 0.0], [0.0, 0.0]]));
    write(dir.path(), "v.json", &real(&[[1.0, 0.0], [0.0, -1.0]]));
    let out = lindlift(
        &["tangent", "--state", "rho.json", "--direction", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("necessary kernel condition violated"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn tangent_accepts_admissible_direction() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rho.json", &real(&[[1.0, 0.0], [0.0, 0.0]]));
    write(dir.path(), "v.json", &real(&[[-1.0, 0.0], [0.0, 1.0]]));
    let out = lindlift(
        &["tangent", "--state", "rho.json", "--direction", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["member"], json!(true));
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn malformed_json_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rho.json"), "{not json").unwrap();
    write(dir.path(), "v.json", &real(&[[1.0, 0.0], [0.0, -1.0]]));
    let out = lindlift(
        &["tangent", "--state", "rho.json", "--direction", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn bad_arguments_are_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lindlift(&["scenario", "nope", "--outdir", "x"], dir.path())), 3);
    assert_eq!(code(&lindlift(&["frobnicate"], dir.path())), 3);
    let traj = write(dir.path(), "traj.json", &relaxing_trajectory(10));
    let out = lindlift(
        &[
            "lift",
            "--input",
            traj.to_str().unwrap(),
            "--method",
            "replacer",
            "--epsilon-policy",
            "const:-1",
            "--out",
            "lift.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn non_density_state_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rho.json", &real(&[[1.5, 0.0], [0.0, -0.5]]));
    write(dir.path(), "v.json", &real(&[[1.0, 0.0], [0.0, -1.0]]));
    let out = lindlift(
        &["mindiss", "--state", "rho.json", "--direction", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn mindiss_maximally_mixed_population_transfer() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "rho.json", &real(&[[0.5, 0.0], [0.0, 0.5]]));
    write(dir.path(), "v.json", &real(&[[-1.0, 0.0], [0.0, 1.0]]));
    let out = lindlift(
        &["mindiss", "--state", "rho.json", "--direction", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rate = v["min_rate"].as_f64().unwrap();
    assert!((rate - 2.0).abs() <= 2e-3 * 2.0, "{rate}");
}

#[test]
fn lift_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "traj.json", &relaxing_trajectory(1000));
    for method in ["replacer", "spectral", "feasibility"] {
        let lift_out = lindlift(
            &[
                "--plotdata",
                "lift",
                "--input",
                "traj.json",
                "--method",
                method,
                "--out",
                "lift.json",
                "--report",
                "report.csv",
            ],
            dir.path(),
        );
        assert_eq!(code(&lift_out), 0, "{method}: {}", stderr(&lift_out));
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv.starts_with("t,epsilon,residual,sigma_min_eig,gksl_valid,gen_norm\n"));
        assert_eq!(csv.lines().count(), 1002);
        assert!(dir.path().join("lift.plot.csv").exists());

        let verify_out = lindlift(
            &[
                "--plotdata",
                "verify",
                "--traj",
                "traj.json",
                "--lift",
                "lift.json",
                "--step",
                "1e-3",
                "--tol",
                "1e-6",
                "--out",
                "report.json",
            ],
            dir.path(),
        );
        assert_eq!(code(&verify_out), 0, "{method}: {}", stderr(&verify_out));
        let report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["all_steps_cp"], json!(true));
        let plot = fs::read_to_string(dir.path().join("report.plot.csv")).unwrap();
        assert!(plot.starts_with("t,deviation\n"));
    }
}

#[test]
fn verify_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "traj.json", &relaxing_trajectory(100));
    let zero = json!([[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]);
    let diag = json!({
        "t": 0.0, "epsilon": null, "residual": 0.0, "sigma_min_eig": null,
        "gksl_valid": true, "gen_norm": 0.0
    });
    let family = json!({
        "dim": 2,
        "times": [0.0, 1.0],
        "generators": [
            { "dim": 2, "hamiltonian": zero, "jumps": [], "rates": [] },
            { "dim": 2, "hamiltonian": zero, "jumps": [], "rates": [] }
        ],
        "diagnostics": [diag, diag]
    });
    write(dir.path(), "lift.json", &family);
    let out = lindlift(
        &["verify", "--traj", "traj.json", "--lift", "lift.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_residual"].as_f64().unwrap() > 0.4);
}

#[test]
fn affine_lift_through_knots() {
    let dir = tempfile::tempdir().unwrap();
    let knots = json!({
        "dim": 2,
        "times": [0.0, 1.0, 2.0],
        "states": [
            real(&[[0.7, 0.1], [0.1, 0.3]]),
            real(&[[0.4, -0.2], [-0.2, 0.6]]),
            real(&[[0.5, 0.0], [0.0, 0.5]])
        ]
    });
    write(dir.path(), "knots.json", &knots);
    let out = lindlift(
        &["lift", "--input", "knots.json", "--method", "affine", "--out", "lift.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let family: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lift.json")).unwrap()).unwrap();
    let times = family["times"].as_array().unwrap();
    assert_eq!(times.first(), Some(&json!(0.0)));
    assert_eq!(times.last(), Some(&json!(2.0)));
}

#[test]
fn scenario_eternal_nm_writes_product_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = lindlift(&["scenario", "eternal-nm", "--outdir", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: Vec<String> = fs::read_dir(dir.path().join("out/reports"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("product_"))
        .collect();
    assert_eq!(reports.len(), 8);
    let result: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/result.json")).unwrap())
            .unwrap();
    assert!(result["metrics"]["product_max_traj_deviation"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn scenario_params_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.json", &json!({ "t_end": 1.2 }));
    let out = lindlift(
        &[
            "--plotdata",
            "scenario",
            "sin-dephasing",
            "--params",
            "p.json",
            "--outdir",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plot = fs::read_to_string(dir.path().join("out/plots/rates.csv")).unwrap();
    assert!(plot.starts_with("t,fitted_rate,"));

    write(dir.path(), "bad.json", &json!({ "t_end": 9.0 }));
    let out = lindlift(
        &["scenario", "sin-dephasing", "--params", "bad.json", "--outdir", "out2"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
    write(dir.path(), "typo.json", &json!({ "t_ned": 1.0 }));
    let out = lindlift(
        &["scenario", "sin-dephasing", "--params", "typo.json", "--outdir", "out3"],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn qutrit_scenario_reports_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = lindlift(&["scenario", "qutrit-region", "--outdir", "out"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("infeasible at t = 0.2"));
}
