use std::path::Path;
use std::process::{Command, Output};

fn pathloss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathloss"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const UMI: &[&str] = &[
    "synth", "--truth-ci", "3.1", "--sigma", "8.1", "--freqs", "2,18,28,73.5", "--drange", "19:272", "--n",
    "20000", "--seed", "7", "--output", "umi.csv",
];

fn field(line: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in `{line}`"))
        .parse()
        .unwrap()
}

#[test]
fn synth_is_byte_reproducible_and_writes_manifest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = pathloss(dir.path(), UMI);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv = std::fs::read(a.path().join("umi.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.path().join("umi.csv")).unwrap());
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 20001);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("umi.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"][0], 7);
    assert_eq!(manifest["outputs"][0], "umi.csv");
    assert!(manifest["command_line"].as_array().unwrap().iter().any(|v| v == "--truth-ci"));

    for dir in [&a, &b] {
        let o = pathloss(dir.path(), &["fit", "--model", "all", "--input", "umi.csv", "--output", "fit.json"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let report = std::fs::read(a.path().join("fit.json")).unwrap();
    assert_eq!(report, std::fs::read(b.path().join("fit.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(report["manifest"], "fit.json.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("fit.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_all_prints_nested_sigmas() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pathloss(dir.path(), UMI).status.success());
    let o = pathloss(dir.path(), &["fit", "--model", "all", "--input", "umi.csv", "--full-precision"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3, "{out}");
    assert!(lines[0].starts_with("ci"));
    assert!((field(lines[0], "ple") - 3.1).abs() < 0.05);
    assert!((field(lines[0], "sigma") - 8.1).abs() < 0.3);
    let sigmas: Vec<f64> = lines.iter().map(|l| field(l, "sigma")).collect();
    assert!(sigmas[2] <= sigmas[1] && sigmas[1] <= sigmas[0], "{sigmas:?}");
}

#[test]
fn summary_defaults_to_four_decimals() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pathloss(dir.path(), UMI).status.success());
    let o = pathloss(dir.path(), &["fit", "--model", "ci", "--input", "umi.csv"]);
    let out = stdout(&o);
    let ple = out.split_whitespace().find_map(|t| t.strip_prefix("ple=")).unwrap();
    assert_eq!(ple.split('.').nth(1).unwrap().len(), 4, "{out}");
}

#[test]
fn single_frequency_abg_exits_2_and_advises_ab() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathloss(
        dir.path(),
        &["synth", "--truth-ci", "3.1", "--freqs", "28", "--drange", "19:272", "--n", "200", "--output", "one.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pathloss(dir.path(), &["fit", "--model", "abg", "--input", "one.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model ab"), "{}", stderr(&o));

    let o = pathloss(dir.path(), &["fit", "--model", "ab", "--input", "one.csv", "--full-precision"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((field(&out, "alpha") - 3.1).abs() < 1e-9, "{out}");
    assert!((field(&out, "beta") - 32.44778322188337).abs() < 1e-9, "{out}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let zero_n = ["synth", "--truth-ci", "3.1", "--freqs", "28", "--drange", "19:272", "--n", "0"];
    assert_eq!(pathloss(p, &zero_n).status.code(), Some(2));
    assert_eq!(pathloss(p, &["fit", "--input", "missing.csv"]).status.code(), Some(1));
    assert_eq!(pathloss(p, &["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(pathloss(p, &["crossover", "--a", "ci:x", "--b", "ci:2", "--freq", "28"]).status.code(), Some(1));
    assert_eq!(pathloss(p, &["crossover", "--a", "ci:2", "--b", "ci:2", "--freq", "28"]).status.code(), Some(2));
    assert_eq!(pathloss(p, &["--help"]).status.code(), Some(0));

    std::fs::write(p.join("bad.csv"), "frequency_ghz,distance_m,path_loss_db,scenario,environment,data_type\n28,0.5,80,UMA,LOS,M\n")
        .unwrap();
    let o = pathloss(p, &["fit", "--input", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dataset error"), "{}", stderr(&o));
}

#[test]
fn help_documents_the_model_grammar() {
    let out = stdout(&pathloss(Path::new("."), &["--help"]));
    assert!(out.contains("abg    := \"abg:\""), "{out}");
}

#[test]
fn crossover_against_free_space() {
    let o = pathloss(Path::new("."), &["crossover", "--a", "abg:3.5,24.4,1.9", "--b", "ci:2.0", "--freq", "28"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let d = out.lines().find_map(|l| l.strip_prefix("crossover_m=")).unwrap();
    let d: f64 = d.parse().unwrap();
    assert!((d - 4.3).abs() < 0.05, "{out}");
}

#[test]
fn curves_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathloss(
        dir.path(),
        &["curves", "--freq", "28", "--models", "ci:3.1,abg:3.5,24.4,1.9", "--dgrid", "1:1000:log:50", "--output", "c.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["distance_m", "free_space", "ci:3.1", "abg:3.5/24.4/1.9"]);
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().all(|r| r.len() == 4));
    assert_eq!(rows[1][1], "61.3909");
    assert!(dir.path().join("c.csv.manifest.json").exists());
}

#[test]
fn compare_reports_bands_and_full_row() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pathloss(dir.path(), UMI).status.success());
    let o = pathloss(
        dir.path(),
        &["compare", "--input", "umi.csv", "--bands", "2:18,28:73.5,2:73.5", "--output", "cmp.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("cmp.json")).unwrap()).unwrap();
    assert_eq!(report["bands"].as_array().unwrap().len(), 3);
    assert_eq!(report["full"]["n_samples"], 20000);
    assert_eq!(report["manifest"], "cmp.json.manifest.json");
    assert!(stdout(&o).contains("all (2-73.5 GHz)"));
}
