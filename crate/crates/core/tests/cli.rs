use std::fs;
use std::path::Path;
use std::process::Command;

use star_nls::io::read_field;

fn star_nls(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_star-nls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn construct_writes_field_observables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = star_nls(&["construct", "--alpha", "-1", "--omega", "1", "--mu", "1", "--edges", "3", "--j", "0"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let obs = json(&out.join("observables.json"));
    assert!((obs["offset"].as_f64().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
    assert!((obs["mass"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((obs["energy"].as_f64().unwrap() + 26.0 / 27.0).abs() < 1e-12);
    assert!((obs["quadrature_mass"].as_f64().unwrap() - 4.0).abs() < 1e-6);

    let (field, header) = read_field(&out, "state").unwrap();
    assert_eq!(header.n_edges, 3);
    assert_eq!(header.alpha, -1.0);
    assert!((field.vertex().re - 4.0 / 3.0).abs() < 1e-12);

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "construct");
    assert_eq!(manifest["parameters"]["alpha"], -1.0);
    assert!(manifest["parameters"]["points"].as_u64().unwrap() > 0);
    assert_eq!(fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name() == "manifest.json").count(), 1);
}

#[test]
fn existence_bound_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let res = star_nls(&["construct", "--alpha", "-1", "--omega", "0.1", "--edges", "3", "--j", "0"], &dir.path().join("x"));
    assert_eq!(res.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(record["error"], "existence_bound");
    assert_eq!(record["exit_code"], 3);
}

#[test]
fn other_failures_map_to_other_codes() {
    let dir = tempfile::tempdir().unwrap();
    let res = star_nls(&["frobnicate"], &dir.path().join("a"));
    assert_eq!(res.status.code(), Some(2));
    let res = star_nls(&["construct", "--omega", "1"], &dir.path().join("b"));
    assert_eq!(res.status.code(), Some(2));
    // N = 3, j = 1 at omega = 1 sits exactly on the excited-state bound
    let res = star_nls(&["construct", "--alpha", "-1", "--omega", "1", "--edges", "3", "--j", "1"], &dir.path().join("c"));
    assert_eq!(res.status.code(), Some(4));
    let res = star_nls(&["construct", "--config", "/nonexistent/config.json"], &dir.path().join("d"));
    assert_eq!(res.status.code(), Some(6));
}

#[test]
fn vk_sweep_has_one_sign_change_for_mu_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vk");
    let res = star_nls(
        &["vk", "--alpha", "-1", "--mu", "3", "--edges", "3", "--omega-range", "0.12:10", "--samples", "120", "--jobs", "3"],
        &out,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let mut reader = csv::Reader::from_path(out.join("vk.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["omega", "vk_value"]);
    let values: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(values.len(), 120);
    assert_eq!(values.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count(), 1);
    let summary = json(&out.join("vk.json"));
    let star = summary["omega_star"].as_f64().unwrap();
    assert!(star > 0.12 && star < 10.0);
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let res = star_nls(
        &["evolve", "--alpha", "-1", "--omega", "1", "--edges", "3", "--t-final", "0.2", "--perturbation", "0.01", "--seed", "7", "--snapshot-stride", "100"],
        &first,
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let second = dir.path().join("second");
    let manifest = first.join("manifest.json");
    let res = star_nls(&["evolve", "--config", manifest.to_str().unwrap()], &second);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for file in ["observables.csv", "final.csv", "snapshots/index.csv", "snapshots/snapshot_00001.csv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
    assert_eq!(json(&first.join("manifest.json"))["parameters"], json(&second.join("manifest.json"))["parameters"]);

    let mut reader = csv::Reader::from_path(first.join("observables.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "mass", "energy", "vertex_re", "vertex_im", "deviation"]);
    assert!(reader.records().count() > 2);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"alpha": -1.0, "omega": 4.0, "edges": 4, "spacing": 0.05}"#).unwrap();
    let out = dir.path().join("out");
    let res = star_nls(&["construct", "--config", config.to_str().unwrap(), "--omega", "1"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let params = &json(&out.join("manifest.json"))["parameters"];
    assert_eq!(params["omega"], 1.0);
    assert_eq!(params["edges"], 4);
    assert_eq!(params["spacing"], 0.05);
    assert_eq!(params["mu"], 1.0);

    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, r#"{"subcommand": "vk", "parameters": {}}"#).unwrap();
    let res = star_nls(&["construct", "--config", wrong.to_str().unwrap()], &dir.path().join("w"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn spectrum_minimize_stability_and_travel_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectrum");
    let res = star_nls(&["spectrum", "--alpha", "-5", "--omega", "4", "--edges", "3", "--length", "7", "--spacing", "0.04"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = json(&out.join("spectrum.json"));
    assert_eq!(report["lminus"]["negative_count"], 1);
    assert_eq!(report["kernel_is_discrete_zero"], true);

    let out = dir.path().join("min");
    let res = star_nls(&["minimize", "--alpha", "-5", "--omega", "4", "--edges", "3", "--length", "7", "--spacing", "0.04"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&out.join("summary.json"))["converged"], true);
    assert!(out.join("iterates.csv").exists() && out.join("minimizer.csv").exists());

    let out = dir.path().join("stab");
    let res = star_nls(&["stability", "--alpha", "-5", "--omega", "4", "--edges", "3", "--t-final", "0.5", "--spacing", "0.04"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(json(&out.join("stability.json"))["amplification"].as_f64().unwrap() < 5.0);

    let out = dir.path().join("travel");
    let res = star_nls(&["travel", "--t-final", "0.5", "--dt", "1e-3"], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(json(&out.join("summary.json"))["max_mismatch"].as_f64().unwrap() < 1e-2);
    let res = star_nls(&["travel", "--edges", "3"], &dir.path().join("odd"));
    assert_eq!(res.status.code(), Some(4));
}
