use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chi2path"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Data rows of a CSV written by the tool: skips `#` lines and the header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn sinc_sq(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        (u.sin() / u).powi(2)
    }
}

const SINC_SCENARIO: &str = r#"
label = "sinc check"

[crystal]
length = 2.0e-3

[[sweep]]
parameter = "crystal.dk"
start = -2.0e4
stop = 2.0e4
points = 801

[[output]]
quantity = "spdc_probability"
path = "spdc.csv"
"#;

#[test]
fn sinc_squared_sweep_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "s.toml", SINC_SCENARIO);
    let out = run(&["run", &sc, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&std::fs::read_to_string(dir.path().join("spdc.csv")).unwrap());
    assert_eq!(header, ["L", "dk", "P", "P_normalised"]);
    assert_eq!(rows.len(), 801);
    for r in &rows {
        let expected = sinc_sq(r[0] * r[1] / 2.0);
        assert!(
            (r[3] - expected).abs() <= 1e-12,
            "dk = {}: {} vs {}",
            r[1],
            r[3],
            expected
        );
        assert!((r[2] - r[0] * r[0] * expected).abs() <= 1e-12 * r[0] * r[0]);
    }
}

#[test]
fn squeezing_grows_with_length() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "sq.toml",
        r#"
        [pump]
        amplitude = 1.0e29
        [[sweep]]
        parameter = "crystal.length"
        start = 1.0e-4
        stop = 2.0e-3
        points = 40
        [[output]]
        quantity = "squeezing"
        path = "s.csv"
        "#,
    );
    let out = run(&["run", &sc, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&std::fs::read_to_string(dir.path().join("s.csv")).unwrap());
    assert_eq!(header, ["crystal.length", "s", "theta", "validity_margin"]);
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[3] < 1.0));

    let json = run(&[
        "squeeze",
        &sc,
        "--csv",
        dir.path().join("s2.csv").to_str().unwrap(),
    ]);
    assert!(json.status.success());
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(v["s"].as_f64().unwrap() > 0.0);
    assert!(v.get("validity_margin").is_some());
    assert!(dir.path().join("s2.csv").exists());
}

#[test]
fn no_outputs_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "label = \"empty\"\n";
    let sc = write(dir.path(), "e.toml", doc);
    let out_dir = dir.path().join("out");
    let out = run(&["run", &sc, "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let entries: Vec<_> = std::fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["outputs"].as_array().unwrap().len(), 0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["input_sha256"].as_str().unwrap().len(), 64);
    assert!(m["units"].as_str().unwrap().contains("SI"));
    assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"
        [[sweep]]
        parameter = "crystal.length"
        start = 1.0e-4
        stop = 1.0e-2
        points = 7
        scale = "log"
        [[sweep]]
        parameter = "crystal.dk"
        start = -500.0
        stop = 500.0
        points = 9
        [[output]]
        quantity = "spdc_probability"
        path = "p.csv"
        [[output]]
        quantity = "biphoton"
        path = "b.json"
        format = "json"
        "#;
    let sc = write(dir.path(), "d.toml", doc);
    let mut seen = Vec::new();
    for k in 0..2 {
        let o = dir.path().join(format!("run{k}"));
        let out = run(&["run", &sc, "--out-dir", o.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        seen.push((
            std::fs::read(o.join("p.csv")).unwrap(),
            std::fs::read(o.join("b.json")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
    let v: serde_json::Value = serde_json::from_slice(&seen[0].1).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 63);
}

#[test]
fn misspelled_key_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "bad.toml", "[crystal]\nchii2 = 1e-12\n");
    let out = run(&["run", &sc, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("chii2"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn single_point_sweep_exits_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "p1.toml",
        "[[sweep]]\nparameter = \"crystal.dk\"\nstart = 0.0\nstop = 1.0\npoints = 1\n",
    );
    let out = run(&["run", &sc]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points"));
}

#[test]
fn numerical_failure_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "z.toml", "[medium]\nindex = 0.0\n");
    let out = run(&["squeeze", &sc]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_documents_units() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rad/s") && text.contains("SI"));
    let out = run(&["spdc", "--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1/m"));
}

#[test]
fn spdc_subcommand_summary() {
    let out = run(&[
        "spdc",
        "--L-range",
        "1e-3",
        "--dk-range",
        "-2e4:2e4",
        "--points",
        "4001",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let zero = 2.0 * std::f64::consts::PI / 1e-3;
    let z = &v["summary"]["first_zeros_dk"];
    assert!((z[0].as_f64().unwrap() + zero).abs() < 10.0);
    assert!((z[1].as_f64().unwrap() - zero).abs() < 10.0);
    assert_eq!(v["summary"]["peak"]["dk"].as_f64().unwrap(), 0.0);
}

#[test]
fn diagrams_subcommand_lists_and_evaluates() {
    let out = run(&["diagrams", "--order", "2", "--list"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 12);

    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "d.toml", "");
    let out = run(&["diagrams", "--order", "1", "--evaluate", &sc]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 6);
    for e in entries {
        for key in [
            "topology",
            "sources",
            "symmetry_factor",
            "amplitude_re",
            "amplitude_im",
        ] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
    }

    let out = run(&["diagrams", "--order", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn layered_scenario_uses_numeric_propagator() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "l.toml",
        r#"
        [pump]
        omega = 4.0e13
        [crystal]
        length = 1.0e-4
        [medium]
        index = 1.0
        [[medium.regions]]
        x_start = 0.0
        x_end = 1.0e-4
        index = 1.5
        [[output]]
        quantity = "propagator"
        path = "g.csv"
        [[output]]
        quantity = "biphoton"
        method = "numeric"
        path = "b.csv"
        "#,
    );
    let out = run(&["run", &sc, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, rows) = csv_rows(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2] > 0.0);
}

#[test]
fn epsilon_subcommand_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("eps.csv");
    let out = run(&[
        "epsilon",
        "--omega0",
        "1.0",
        "--beta",
        "1e11",
        "--coupling",
        "0.1",
        "--omega-range",
        "0.2:0.8",
        "--points",
        "7",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&std::fs::read_to_string(&p).unwrap());
    assert_eq!(header, ["omega", "eps_re", "eps_im"]);
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r[1] > 1.0));
}
