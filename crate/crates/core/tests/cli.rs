use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rocem::cli::{to_sorted_json, FitReport};
use rocem::simharness::{generate, Scenario};

fn rocem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rocem"))
        .args(args)
        .env_remove("ROCEM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("structured error on stderr")
}

/// Simulated single-marker file with two extra columns for `compare`.
fn write_sim_csv(dir: &Path, n: usize, seed: u64) -> (PathBuf, f64, f64) {
    let s = Scenario::bivariate(0.95, n, 1, seed);
    let sample = generate(&s, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let (a, b) = (&sample.markers[0], &sample.markers[1]);
    let mut body = String::from("value,other,label\n");
    for i in 0..a.n() {
        body.push_str(&format!("{},{},0\n", a.x()[i] - 1.0, b.x()[i]));
    }
    for i in 0..a.m() {
        body.push_str(&format!("{},{},1\n", a.y()[i] - 1.0, b.y()[i]));
    }
    let path = dir.join(format!("sim{seed}.csv"));
    std::fs::write(&path, body).unwrap();
    let r = s.rates().unwrap();
    (path, r.pi0, r.pi1)
}

#[test]
fn fit_report_is_sorted_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, pi0, pi1) = write_sim_csv(dir.path(), 150, 1);
    let (p0, p1) = (pi0.to_string(), pi1.to_string());
    let o = rocem(&["fit", "--input", csv.to_str().unwrap(), "--pi0", &p0, "--pi1", &p1]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty());
    let text = stdout(&o);

    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(format!("{}\n", serde_json::to_string_pretty(&value).unwrap()), text);
    let report: FitReport = serde_json::from_str(&text).unwrap();
    assert_eq!(to_sorted_json(&report).unwrap(), text);

    let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["baselines", "diagnostics", "inputs", "summary"]);
    assert!((0.0..=1.0).contains(&report.summary.auc));
    assert!(report.diagnostics.converged);
    assert!(report.inputs.cv.is_some());
    let trace = &report.diagnostics.objective_trace;
    assert!(trace
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0)));
    assert_eq!(report.summary.pauc.s0, 0.1);
    assert_eq!(report.summary.pauc.s1, 0.3);
}

#[test]
fn perfect_rates_reproduce_the_naive_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _, _) = write_sim_csv(dir.path(), 80, 2);
    let o = rocem(&[
        "fit", "--input", csv.to_str().unwrap(), "--pi0", "1", "--pi1", "1", "--nu", "0.01",
        "--with-baselines",
    ]);
    assert!(o.status.success());
    let report: FitReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.baselines.unwrap().naive, report.summary);
}

#[test]
fn larger_penalty_gives_smoother_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, pi0, pi1) = write_sim_csv(dir.path(), 120, 3);
    let (p0, p1) = (pi0.to_string(), pi1.to_string());
    let rough = |nu: &str| {
        let o = rocem(&[
            "fit", "--input", csv.to_str().unwrap(), "--pi0", &p0, "--pi1", &p1, "--nu", nu,
        ]);
        assert!(o.status.success());
        let r: FitReport = serde_json::from_slice(&o.stdout).unwrap();
        r.diagnostics.roughness
    };
    assert!(rough("1e2") < rough("1e-4"));
}

#[test]
fn fit_writes_out_file_and_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _, _) = write_sim_csv(dir.path(), 60, 4);
    let out = dir.path().join("report.json");
    let o = rocem(&[
        "fit", "--input", csv.to_str().unwrap(), "--pi0", "0.95", "--pi1", "0.9", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&out).unwrap();

    let o = Command::new(env!("CARGO_BIN_EXE_rocem"))
        .args(["fit", "--input", csv.to_str().unwrap(), "--pi0", "0.95", "--pi1", "0.9"])
        .env("ROCEM_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o), written);
}

#[test]
fn input_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let o = rocem(&["fit"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "missing-input");
    assert!(o.stdout.is_empty());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "value,label\n0.1,0\n0.3,1\n0.2,2\n").unwrap();
    let o = rocem(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "parse-error");
    assert!(e["error"]["message"].as_str().unwrap().contains("row 3"));

    let good = dir.path().join("good.csv");
    std::fs::write(&good, "value,label\n0.1,0\n0.3,1\n0.2,1\n").unwrap();
    let o = rocem(&["fit", "--input", good.to_str().unwrap(), "--pi0", "0.4", "--pi1", "0.5"]);
    assert_eq!(stderr_json(&o)["error"]["kind"], "identifiability-violation");

    let o = rocem(&["fit", "--nu", "banana"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");

    let o = rocem(&["--help"]);
    assert!(o.status.success());
    for sub in ["fit", "simulate", "compare", "roc-points"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn simulate_table_shape_and_determinism() {
    let args = [
        "simulate", "--se", "0.95", "--sp", "0.95", "--n", "60", "--m", "60", "--reps", "1",
        "--seed", "7", "--k", "20",
    ];
    let a = rocem(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "se_sp,n_m,method,target,bias,sd,mse");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[5] == "0.00"));
    assert_eq!(rows[0][..4], ["0.95", "60", "EM", "ROC(0.2)"]);

    let b = rocem(&args);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("sim.json");
    let c = rocem(&[
        "simulate", "--n", "40", "--m", "50", "--reps", "3", "--seed", "2", "--k", "15", "--nu",
        "0.1", "--methods", "em,np", "--json", json.to_str().unwrap(),
    ]);
    assert!(c.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    assert!(stdout(&c).contains("0.95,40/50,NP,pAUC"));

    let bad = rocem(&["simulate", "--se", "0.4"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stderr_json(&bad)["error"]["kind"], "invalid-parameter");
}

#[test]
fn compare_duplicate_marker_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, pi0, pi1) = write_sim_csv(dir.path(), 100, 5);
    let (p0, p1) = (pi0.to_string(), pi1.to_string());
    let path = csv.to_str().unwrap();
    let o = rocem(&[
        "compare", "--input", path, "--value-col", "value", "--value-col-2", "value", "--pi0",
        &p0, "--pi1", &p1, "--nu", "0.01",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["delta"]["auc"], 0.0);
    assert_eq!(v["delta"]["pauc"], 0.0);
    assert_eq!(v["delta"]["youden_j"], 0.0);
    assert!(v["delta"]["roc_grid"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p[1] == 0.0));

    let args = [
        "compare", "--input", path, "--value-col", "value", "--value-col-2", "other", "--pi0",
        &p0, "--pi1", &p1,
    ];
    let a = rocem(&args);
    let b = rocem(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    // marker 1 has the larger shift
    assert!(v["delta"]["auc"].as_f64().unwrap() > 0.0);

    let o = rocem(&[
        "compare", "--input", path, "--value-col", "value", "--value-col-2", "nope",
    ]);
    assert_eq!(stderr_json(&o)["error"]["kind"], "column-missing");
}

fn read_curves(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "s,roc_em,roc_np,roc_naive");
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn slope_variation(rows: &[Vec<f64>], col: usize) -> f64 {
    let d: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1][col] - w[0][col]) / (w[1][0] - w[0][0]))
        .collect();
    d.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[test]
fn roc_points_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, pi0, pi1) = write_sim_csv(dir.path(), 200, 6);
    let (p0, p1) = (pi0.to_string(), pi1.to_string());
    let cdf = dir.path().join("cdf.csv");
    let o = rocem(&[
        "roc-points", "--input", csv.to_str().unwrap(), "--pi0", &p0, "--pi1", &p1,
        "--cdf-out", cdf.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_curves(&stdout(&o));
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][0], 0.001);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| (0.0..=1.0).contains(v))));
    assert!(slope_variation(&rows, 1) < slope_variation(&rows, 2));

    let cdf_text = std::fs::read_to_string(cdf).unwrap();
    assert!(cdf_text.starts_with("t,f0_em,f1_em,f0_np,f1_np,ecdf_r0,ecdf_r1\n"));
    assert_eq!(cdf_text.lines().count(), 401);

    let o = rocem(&["roc-points"]);
    assert_eq!(stderr_json(&o)["error"]["kind"], "missing-input");
}

#[test]
fn roc_points_on_identical_groups_follow_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("same.csv");
    let mut body = String::from("value,label\n");
    for i in 0..150 {
        let v = (i as f64 * 0.618_033_988_75).fract();
        body.push_str(&format!("{v},0\n{v},1\n"));
    }
    std::fs::write(&path, body).unwrap();
    let o = rocem(&["roc-points", "--input", path.to_str().unwrap(), "--nu", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in read_curves(&stdout(&o)) {
        let s = r[0];
        assert!((r[1] - s).abs() < 0.02, "em {r:?}");
        assert!((r[2] - s).abs() <= 1.0 / 150.0 + 1e-12, "np {r:?}");
    }
}
