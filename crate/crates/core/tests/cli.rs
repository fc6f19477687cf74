use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_waveguide-se");

fn canonical_json(omega_max: f64, extra: &str) -> String {
    let w = 1.5 * PI * 5f64.sqrt();
    format!(
        r#"{{"geometry":{{"a":1.0,"b":0.5}},"atom":{{"omega_A":{w},"rest_energy":{m},"dipole":0.1,"x0":0.5,"y0":0.25,"p_z":0.0{extra}}},"omega_max":{omega_max}}}"#,
        m = 100.0 * w
    )
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], scenario: &Path) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(&args[..1]).arg("--scenario").arg(scenario).args(&args[1..]);
    cmd.output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn modes_lists_selection_rule() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(10.0, ""));
    let out = run(&["modes"], &path);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let tm = v["tm_modes"].as_array().unwrap();
    assert_eq!((tm[0]["m"].as_i64(), tm[0]["n"].as_i64(), tm[0]["coupled"].as_bool()), (Some(1), Some(1), Some(true)));
    assert_eq!((tm[1]["m"].as_i64(), tm[1]["n"].as_i64(), tm[1]["coupled"].as_bool()), (Some(2), Some(1), Some(false)));
    assert!(v["te_modes"].as_array().unwrap().iter().all(|m| m["coupled"] == false));
}

#[test]
fn modes_below_first_cutoff_warns() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(6.0, ""));
    let out = run(&["modes"], &path);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["tm_modes"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn square_guide_orders_degenerate_modes() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"geometry":{"a":1.0,"b":1.0},"atom":{"omega_A":20.0,"rest_energy":2000.0,"dipole":0.1,"x0":0.5,"y0":0.5,"p_z":0.0},"omega_max":17.0}"#;
    let path = write(&dir, "s.json", text);
    let out = run(&["modes", "--format", "csv"], &path);
    let csv = String::from_utf8(out.stdout).unwrap();
    let tm: Vec<&str> = csv.lines().filter(|l| l.starts_with("TM")).collect();
    assert!(tm[1].starts_with("TM,1,2,") && tm[2].starts_with("TM,2,1,"));
}

#[test]
fn rates_reports_fixed_rate_and_symmetric_roots() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    let out = run(&["rates"], &path);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["gamma_fixed"].as_f64().unwrap() - 0.50265).abs() < 1e-4);
    assert_eq!(v["trusted"], true);
    let mode = &v["modes"][0];
    assert_eq!(mode["omega_plus"], mode["omega_minus"]);
}

#[test]
fn zero_dipole_gives_zero_rates_and_frozen_survival() {
    let dir = TempDir::new().unwrap();
    let w = 1.5 * PI * 5f64.sqrt();
    let text = canonical_json(11.0, "").replace(r#""dipole":0.1"#, r#""dipole":0.0"#);
    let path = write(&dir, "s.json", &text);
    let v = stdout_json(&run(&["rates"], &path));
    assert_eq!(v["gamma_fixed"].as_f64(), Some(0.0));
    assert_eq!(v["moving"]["gamma_exact"].as_f64(), Some(0.0));
    let t_max = format!("{}", 10.0 / w);
    let out = run(&["dynamics", "--format", "csv", "--t-max", &t_max, "--steps", "20"], &path);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    for line in csv.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((p - 1.0).abs() < 1e-12, "{line}");
    }
}

#[test]
fn sweep_rows_follow_grid_and_parity() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    let m = 100.0 * 1.5 * PI * 5f64.sqrt();
    let (from, to) = (format!("{}", -0.02 * m), format!("{}", 0.02 * m));
    let out = run(
        &["sweep", "--format", "csv", "--param", "atom.p_z", "--from", &from, "--to", &to, "--steps", "5"],
        &path,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 5);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for i in 0..2 {
        let (lo, hi) = (&rows[i], &rows[4 - i]);
        assert!((num(lo, 4) - num(hi, 4)).abs() <= 1e-12 * num(lo, 4));
        assert!((num(lo, 6) - num(hi, 7)).abs() <= 1e-12 * num(lo, 6));
        assert!((num(lo, 7) - num(hi, 6)).abs() <= 1e-12 * num(lo, 7));
    }
    let out = run(&["sweep", "--param", "geometry.a", "--from", "1", "--to", "1.1", "--steps", "2"], &path);
    assert_eq!(stdout_json(&out)["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "s.json", &canonical_json(11.0, ""));
    let bad = write(&dir, "bad.json", &canonical_json(11.0, "").replace(r#""x0":0.5"#, r#""x0":1.5"#));
    let broken = write(&dir, "broken.json", "{\"geometry\":");
    assert_eq!(run(&["rates"], &bad).status.code(), Some(2));
    assert_eq!(run(&["rates"], &broken).status.code(), Some(2));
    assert_eq!(run(&["rates"], &dir.path().join("missing.json")).status.code(), Some(2));
    let out = run(&["sweep", "--param", "atom.mass", "--from", "1", "--to", "2", "--steps", "3"], &good);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["sweep", "--param", "atom.p_z", "--from", "0", "--to", "1", "--steps", "1"], &good);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["rates", "--format", "xml"], &good);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    for args in [
        vec!["rates", "--format", "csv"],
        vec!["rates"],
        vec!["sweep", "--format", "csv", "--param", "atom.omega_A", "--from", "8", "--to", "12", "--steps", "7"],
        vec!["dynamics", "--format", "csv", "--steps", "40"],
    ] {
        let first = run(&args, &path);
        let second = run(&args, &path);
        assert_eq!(first.status.code(), Some(0));
        assert_eq!(first.stdout, second.stdout, "{args:?}");
    }
}

#[test]
fn output_file_and_unit_scale() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    let target = dir.path().join("out.json");
    let out = run(&["rates", "--output", target.to_str().unwrap(), "--unit-scale", "3"], &path);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let scaled: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let base = stdout_json(&run(&["rates"], &path));
    let ratio = scaled["gamma_fixed"].as_f64().unwrap() / base["gamma_fixed"].as_f64().unwrap();
    assert!((ratio - 3.0).abs() < 1e-14);
}

#[test]
fn dynamics_fits_golden_rule_on_canonical() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    let out = run(&["dynamics"], &path);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let (fit, gamma) = (v["fitted_rate"].as_f64().unwrap(), v["golden_rule_rate"].as_f64().unwrap());
    assert!((fit / gamma - 1.0).abs() < 0.02, "{fit} vs {gamma}");
    assert_eq!(v["times"].as_array().unwrap().len(), 201);
}

#[test]
fn verify_exit_codes_follow_hard_checks() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "s.json", &canonical_json(11.0, ""));
    let out = run(&["verify"], &path);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let printed: Vec<&Value> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["name"].as_str().unwrap().ends_with("_printed"))
        .collect();
    assert_eq!(printed.len(), 2);
    assert!(printed.iter().all(|c| c["hard"] == false));
}

#[test]
fn verify_near_cutoff_downgrades_dynamics() {
    let dir = TempDir::new().unwrap();
    let c = PI * 5f64.sqrt();
    let w = 1.01 * c;
    let text = format!(
        r#"{{"geometry":{{"a":1.0,"b":0.5}},"atom":{{"omega_A":{w},"rest_energy":{m},"dipole":0.1,"x0":0.5,"y0":0.25,"p_z":0.0}},"omega_max":11.0}}"#,
        m = 100.0 * w
    );
    let path = write(&dir, "s.json", &text);
    let out = run(&["verify"], &path);
    let v = stdout_json(&out);
    let dyn_check = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "dynamics_fit").unwrap();
    assert_eq!(dyn_check["hard"], false);
    assert!(dyn_check["note"].as_str().unwrap().contains("non_exponential = true"));
}

#[test]
fn scenario_file_round_trips() {
    let text = canonical_json(11.0, "");
    let first = waveguide_se::cli::Scenario::from_json(&text).unwrap();
    let again = waveguide_se::cli::Scenario::from_json(&first.to_json()).unwrap();
    assert_eq!(first, again);
    assert_eq!(first.to_json(), again.to_json());
}
