use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn qnet(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qnet"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("QNET_THREADS", t),
        None => cmd.env_remove("QNET_THREADS"),
    };
    cmd.output().expect("qnet runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = qnet(args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Columns of a CSV with a header row.
fn columns(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, v) in line.split(',').enumerate() {
            cols[c].push(v.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn local_extrema(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut max = Vec::new();
    let mut min = Vec::new();
    for w in y.windows(3) {
        if w[1] > w[0] && w[1] >= w[2] {
            max.push(w[1]);
        }
        if w[1] < w[0] && w[1] <= w[2] {
            min.push(w[1]);
        }
    }
    (max, min)
}

#[test]
fn sweep_of_balanced_parallel_network() {
    let input = example("parallel_balanced_n5.json");
    let csv = stdout_of(&["sweep", "-i", input.to_str().unwrap()]);
    let (header, cols) = columns(&csv);
    assert_eq!(header, ["omega", "ReT", "ImT", "absT2", "ReR", "ImR", "phase_unwrapped", "tau_g"]);
    let (max, min) = local_extrema(&cols[3]);
    // Raw samples sit within a fraction of a linewidth of the exact extrema.
    assert_eq!(max.iter().filter(|&&v| v > 1.0 - 1e-3).count(), 5);
    assert_eq!(min.iter().filter(|&&v| v < 1e-3).count(), 4);
    for ((t2, re), im) in cols[3].iter().zip(&cols[4]).zip(&cols[5]) {
        assert!((t2 + re * re + im * im - 1.0).abs() < 1e-12);
    }
}

#[test]
fn csv_floats_carry_seventeen_digits() {
    let input = example("series_pair_detuned.json");
    let csv = stdout_of(&["sweep", "-i", input.to_str().unwrap(), "--points", "5"]);
    let row = csv.lines().nth(1).unwrap();
    let first = row.split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 17, "{first}");
}

#[test]
fn metrics_of_simple_model() {
    let input = example("simple_pulse.json");
    let json = stdout_of(&["metrics", "-i", input.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let bandwidth = v["bandwidth"].as_f64().unwrap();
    let dispersion = v["dispersion"].as_f64().unwrap();
    assert!((bandwidth - 1.0).abs() < 5e-3, "{bandwidth}");
    assert!((dispersion - 1.0).abs() < 1e-2, "{dispersion}");
    assert_eq!(v["unity_peaks"].as_array().unwrap().len(), 1);
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let input = example("hybrid_2_3_3.json");
    let args = ["sweep", "-i", input.to_str().unwrap()];
    let a = qnet(&args, Some("1"));
    let b = qnet(&args, Some("3"));
    let c = qnet(&args, None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let design = example("design_chain_n3.json");
    let d1 = qnet(&["design", "-i", design.to_str().unwrap()], Some("1"));
    let d2 = qnet(&["design", "-i", design.to_str().unwrap()], Some("2"));
    assert_eq!(d1.stdout, d2.stdout);
}

#[test]
fn empty_window_exits_with_validation_code() {
    let input = example("parallel_balanced_n5.json");
    let out = qnet(&["sweep", "-i", input.to_str().unwrap(), "--wmin", "1", "--wmax", "1"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window"));
}

#[test]
fn malformed_files_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\"schema_version\": 1,\n\"network\": {\"type\": \"parallel\", \"omegas\": [0, 1],\n\"gamma\": [1, 1], \"Gamma\": [1, -1]}}",
    )
    .unwrap();
    let out = qnet(&["validate", "-i", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("output_decays[1]"), "{err}");

    std::fs::write(&path, "{\"schema_version\": 1,\n\"network\": {\"type\": \"star\"}}").unwrap();
    let out = qnet(&["validate", "-i", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("star"));

    let out = qnet(&["validate", "-i", dir.path().join("missing.json").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn singular_system_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dark.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "network": {"type": "parallel", "omegas": [0, 0], "gamma": 1, "Gamma": 1}}"#,
    )
    .unwrap();
    let out = qnet(&["sweep", "-i", path.to_str().unwrap(), "--wmin", "-1", "--wmax", "1", "--points", "3"], None);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("omega = 0"), "{err}");
}

#[test]
fn design_reports_assignment_and_failure() {
    let input = example("design_chain_n3.json");
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&["design", "-i", input.to_str().unwrap()])).unwrap();
    assert_eq!(v["success"], true);
    assert_eq!(v["params"].as_array().unwrap().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.json");
    let out_path = dir.path().join("report.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "network": {"type": "parallel", "omegas": [0], "gamma": 1, "Gamma": 3},
            "design": {"free": [{"param": {"kind": "output_decay", "i": 0}, "lo": 2, "hi": 4}],
                       "target": {"kind": "at_frequency", "omega": 0}}}"#,
    )
    .unwrap();
    let out = qnet(&["design", "-i", path.to_str().unwrap(), "-o", out_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["success"], false);
}

#[test]
fn povm_curve_rises_to_long_time_limit() {
    let input = example("simple_pulse.json");
    let csv = stdout_of(&["povm", "-i", input.to_str().unwrap()]);
    let (header, cols) = columns(&csv);
    assert_eq!(header, ["tau", "click_probability"]);
    assert_eq!(cols[0].len(), 100);
    assert_eq!(cols[1][0], 0.0);
    assert!(cols[1].windows(2).all(|w| w[1] >= w[0]));
    // A pulse of rms width 0.3 through a unit Lorentzian: ∫|ψ̃|²|T|² ≈ 0.93.
    let last = *cols[1].last().unwrap();
    assert!(last > 0.9 && last < 0.95, "{last}");
}

#[test]
fn wavepacket_energy_matches_click_limit() {
    let input = example("simple_pulse.json");
    let csv = stdout_of(&["wavepacket", "-i", input.to_str().unwrap()]);
    let (header, cols) = columns(&csv);
    assert_eq!(header, ["t", "Re psi", "Im psi", "abs2"]);
    let energy: f64 = cols[0].windows(2).zip(cols[3].windows(2)).map(|(t, p)| (t[1] - t[0]) * (p[0] + p[1]) / 2.0).sum();
    let povm = stdout_of(&["povm", "-i", input.to_str().unwrap()]);
    let (_, p) = columns(&povm);
    assert!((energy - p[1].last().unwrap()).abs() < 1e-4, "{energy}");
}

#[test]
fn every_shipped_example_validates_and_sweeps() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let p = path.to_str().unwrap();
            let normal = stdout_of(&["validate", "-i", p]);
            assert!(normal.contains("\"general\""));
            let csv = stdout_of(&["sweep", "-i", p, "--points", "201"]);
            assert_eq!(csv.lines().count(), 202, "{p}");
            count += 1;
        }
    }
    assert!(count >= 20);
}
