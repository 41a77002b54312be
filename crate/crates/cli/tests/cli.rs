use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lame-dtn"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(mode: &str, config: &Path, out: &Path) -> Output {
    bin()
        .args([mode, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const FLAT: &str = r#"{"dim": 2, "order": 5, "depth": 3, "xi": [[1.0]],
    "lame": {"lambda": 1.0, "mu": 1.0}}"#;

#[test]
fn symbols_reproduces_constant_coefficient_p1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", FLAT);
    let out = dir.path().join("out");
    let o = run("symbols", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    let p1 = &r["body"]["entries"][0]["p"][0]["entries"];
    let expect = [[1.5, 0.0], [0.0, -0.5], [0.0, 0.5], [1.5, 0.0]];
    for (k, e) in expect.iter().enumerate() {
        for c in 0..2 {
            let got = p1[k][c].as_f64().unwrap();
            assert!((got - e[c]).abs() < 1e-13, "entry {k}: {got} vs {}", e[c]);
        }
    }
    let eig: Vec<f64> = r["body"]["entries"][0]["lowered_p1_eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((eig[0] - 1.0).abs() < 1e-13 && (eig[1] - 2.0).abs() < 1e-13);
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dim": 3, "order": 5, "depth": 3, "xi": [[1.0, 0.0], [0.3, -0.7], [2.0, 1.0]],
            "lame": {"lambda": [{"powers": [0, 0, 0], "coeff": 2.0}, {"powers": [1, 0, 1], "coeff": 0.3}],
                     "mu": [{"powers": [0, 0, 0], "coeff": 1.0}, {"powers": [0, 0, 1], "coeff": 0.2}]}}"#,
    );
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = bin()
            .args(["residuals", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut r = report(&out);
        r.as_object_mut().unwrap().remove("timings_ms");
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn recover_round_trips_normal_derivatives() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dim": 2, "order": 5, "xi": [[1.0], [-2.0]],
            "lame": {"lambda": [{"powers": [0, 0], "coeff": 1.5}, {"powers": [0, 1], "coeff": -0.4}],
                     "mu": [{"powers": [0, 0], "coeff": 1.0}, {"powers": [0, 2], "coeff": 0.6}]},
            "recover": {"m_max": 2}}"#,
    );
    let out = dir.path().join("out");
    let o = run("recover", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let table = r["body"]["table"].as_array().unwrap();
    let want = [(1.5, 1.0), (-0.4, 0.0), (0.0, 1.2)];
    for (row, (l, m)) in table.iter().zip(want) {
        assert!((row["lambda"].as_f64().unwrap() - l).abs() < 1e-9, "{row}");
        assert!((row["mu"].as_f64().unwrap() - m).abs() < 1e-9, "{row}");
    }
}

#[test]
fn halfspace_validation_reports_exact_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dim": 3, "xi": [[1.0, 0.0]],
            "halfspace": {"samples": [{"lambda": -1.0, "mu": 1.0}], "random_pairs": 3,
                          "random_xi": 4, "seed": 11}}"#,
    );
    let out = dir.path().join("out");
    let o = run("validate-halfspace", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["body"]["verdict"], "exact agreement");
    assert_eq!(r["body"]["exact_agreement_sentinel"], true);
    assert_eq!(r["body"]["entries"].as_array().unwrap().len(), 20);
}

#[test]
fn layered_validation_writes_decay_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"dim": 2, "order": 5, "depth": 3,
            "profile": {"lambda": {"deep": 2.0, "delta": 0.5, "depth": 1.0, "power": 2},
                        "mu": {"deep": 1.0, "delta": 0.3, "depth": 1.0, "power": 2}},
            "layered": {"direction": [1.0], "xi_norms": [8, 11.3, 16, 22.6, 32], "rtol": 1e-11}}"#,
    );
    let out = dir.path().join("out");
    let o = run("validate-layered", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "xi_norm,err_p1,err_p1p0,err_p1p0pm1");
    assert_eq!(lines.count(), 5);
    assert_eq!(report(&out)["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let typo = write_config(
        dir.path(),
        "typo.json",
        r#"{"dim": 2, "xi": [[1.0]], "lame": {"lambda": 1.0, "mu": 1.0}, "ordr": 5}"#,
    );
    let o = run("symbols", &typo, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ordr"));

    let inadmissible = write_config(
        dir.path(),
        "bad.json",
        r#"{"dim": 2, "xi": [[1.0]], "lame": {"lambda": -2.0, "mu": 1.0}}"#,
    );
    assert_eq!(run("symbols", &inadmissible, &out).status.code(), Some(2));

    let wrong_mode = write_config(
        dir.path(),
        "mode.json",
        &FLAT.replacen('{', r#"{"mode": "recover", "#, 1),
    );
    let o = run("symbols", &wrong_mode, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`mode`"));
    assert!(!out.exists());
}

#[test]
fn failed_checks_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &FLAT.replacen('{', r#"{"tolerances": {"two_route": -1.0}, "#, 1),
    );
    let out = dir.path().join("out");
    let o = run("symbols", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);
}
