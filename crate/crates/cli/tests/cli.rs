use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mtkrr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtkrr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn risk_curve_without_signal_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = mtkrr(&["risk-curve", "--n", "40", "--p", "4", "--beta", "2", "--delta", "2", "--c", "0", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[0][1], 0.25);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    assert!(rows.iter().all(|r| (r[1] - r[2] - r[3]).abs() < 1e-15));
}

#[test]
fn curve_minimum_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let oracle = dir.path().join("oracle.json");
    let o = mtkrr(&[
        "risk-curve", "--n", "50", "--p", "1", "--beta", "2", "--delta", "2", "--c", "1",
        "--lambda-min", "1e-8", "--lambda-max", "1", "--points", "20000", "--out", path_str(&curve),
    ]);
    assert!(o.status.success());
    // Two identical tasks of amplitude C1 = 1: each single-task oracle is R* with p = 1.
    let o = mtkrr(&[
        "oracle", "--kind", "h2points", "--n", "50", "--p", "2", "--c2", "0", "--delta1", "2",
        "--beta-or-m", "2", "--out", path_str(&oracle),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&oracle).unwrap()).unwrap();
    let st = json["st_risk"].as_f64().unwrap();
    let min = csv_rows(&curve).iter().map(|r| r[1]).fold(f64::INFINITY, f64::min);
    assert!((min - st).abs() / st < 1e-6, "{min} vs {st}");
    assert!(json["rho"].as_f64().unwrap() < 1.0);
}

#[test]
fn verify_bounds_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.json");
    let o = mtkrr(&["verify-bounds", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert_eq!(json["cells"].as_array().unwrap().len(), 108);
    // A negative slack demands R* below 0.9 times the upper bound, which fails somewhere.
    let o = mtkrr(&["verify-bounds", "--n", "50", "--p", "1", "--c", "1", "--beta-delta", "2:2", "--slack=-0.5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let o = mtkrr(&["verify-bounds", "--bogus", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mtkrr(&["oracle", "--kind", "h2points", "--n", "10", "--p", "3", "--c2", "0", "--delta1", "2", "--beta-or-m", "2", "--out", "/nonexistent/x.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("even p"));
}

#[test]
fn help_lists_flags() {
    let o = mtkrr(&["risk-curve", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--n", "--p", "--sigma2", "--beta", "--delta", "--c", "--lambda-min", "--lambda-max", "--points", "--out", "--jobs"] {
        assert!(text.contains(flag), "{flag}");
    }
}

fn experiment_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        format!(
            r#"[experiment]
kind = "setting_a"
n = 30
p = 4
c2 = 0.1
delta1 = 2
beta_or_m = 2
seed = 17
n_rep = 12
out_json = "{0}/exp.json"
out_csv = "{0}/exp.csv"

[table]
kind = "setting_a"
n = 30
p = 4
c2 = [0.01, 1]
beta_or_m = [2, 4]
delta1 = 2
n_rep = 5
out_csv = "{0}/table.csv"

[heatmap]
kind = "setting_c"
n = 20
p = 3
c2 = [0.1, 1]
delta2 = [1, 2, 4]
delta1 = 2
beta_or_m = 2
n_rep = 4
out_csv = "{0}/heat.csv"
out_svg = "{0}/heat.svg"
"#,
            dir.display()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn experiment_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    let mut runs = Vec::new();
    for jobs in ["1", "3", "3"] {
        let o = mtkrr(&["--jobs", jobs, "experiment", "--config", path_str(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push((
            fs::read(dir.path().join("exp.json")).unwrap(),
            fs::read(dir.path().join("exp.csv")).unwrap(),
        ));
    }
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
    let json: serde_json::Value = serde_json::from_slice(&runs[0].0).unwrap();
    assert_eq!(json["ratios"].as_array().unwrap().len(), 12);
    assert_eq!(json["pi2_scale"], "N");

    let o = mtkrr(&["experiment", "--config", path_str(&cfg), "--pi2-scale", "n"]);
    assert!(o.status.success());
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("exp.json")).unwrap()).unwrap();
    assert_eq!(json["pi2_scale"], "n");
}

#[test]
fn table_and_heatmap_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment_config(dir.path());
    assert!(mtkrr(&["table", "--config", path_str(&cfg)]).status.success());
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "C2,r,beta_or_m,b_bar,pi1,mean_ratio,std_ratio,pi2");
    assert_eq!(table.lines().count(), 5);

    assert!(mtkrr(&["heatmap", "--config", path_str(&cfg)]).status.success());
    assert_eq!(csv_rows(&dir.path().join("heat.csv")).len(), 6);
    let svg = fs::read_to_string(dir.path().join("heat.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 6);
}

#[test]
fn config_errors_list_every_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[experiment]\nkind = \"setting_z\"\nn = 0\np = \"five\"\nc2 = 1\ndelta1 = 2\nbeta_or_m = 2\nextra = 3\n").unwrap();
    let o = mtkrr(&["experiment", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["experiment.kind", "experiment.p", "experiment.extra", "experiment.out_json"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}
