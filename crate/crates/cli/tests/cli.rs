use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn graphflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, command: &str, config: &Value, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{command}.json"));
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.join(format!("{command}-out"));
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    graphflow(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Final (species, vertex) -> mass from the trajectory CSV.
fn final_masses(csv: &str) -> Vec<(u32, usize, f64)> {
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let t_last = rows.last().unwrap()[0];
    rows.iter()
        .filter(|r| r[0] == t_last)
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap(), r[4].parse().unwrap()))
        .collect()
}

fn two_vertex_attractive() -> Value {
    json!({
        "graph": {"positions": [[0.0], [1.0]], "weights": [1.0, 1.0], "eta": {"rule": "complete"}},
        "kernels": {
            "k11": {"form": "explicit", "matrix": [[0.0, 1.0], [1.0, 0.0]]},
            "k22": {"form": "explicit", "matrix": [[0.0, 1.0], [1.0, 0.0]]},
            "k12": {"form": "constant", "c": 0.0}
        },
        "params": {"p": 2.0, "beta": [1.0, 1.0], "t_end": 40.0},
        "initial": {"kind": "masses", "m1": [0.7, 0.3], "m2": [0.4, 0.6]},
        "output": {"every": 50}
    })
}

#[test]
fn decoupled_attraction_collects_on_the_majority_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "simulate", &two_vertex_attractive(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("simulate-out");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,species,vertex,u,mass\n"));
    let last = final_masses(&csv);
    let m = |s: u32, v: usize| last.iter().find(|r| r.0 == s && r.1 == v).unwrap().2;
    assert!(m(1, 0) > 1.0 - 1e-9 && m(2, 1) > 1.0 - 1e-9, "{last:?}");
    let diag = read_json(&out.join("diagnostics.json"));
    assert_eq!(diag["outcome"]["kind"], "stationary");
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn four_point_weak_repulsion_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"scenario": {"name": "four_point", "alpha": 0.5}, "output": {"every": 100}});
    let o = run_config(dir.path(), "simulate", &config, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("simulate-out/trajectory.csv")).unwrap();
    let last = final_masses(&csv);
    let m4 = last.iter().find(|r| r.0 == 1 && r.1 == 3).unwrap().2;
    assert_eq!(m4, 1.0);

    let o = run_config(dir.path(), "scenario", &config, &[]);
    assert!(o.status.success());
    let checks = read_json(&dir.path().join("scenario-out/checks.json"));
    assert!(checks["expectations"].as_array().unwrap().iter().all(|c| c["holds"] == true));
    assert!(checks["oracles"].as_array().unwrap().iter().all(|c| c["error"].as_f64().unwrap() <= 1e-12));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"two_point\": {\"d11\": 1, \"d22\": 1, \"d12\": 0.5},\n  \"colour\": 3\n}\n").unwrap();
    let out = dir.path().join("out");
    let o = graphflow(&["classify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(!out.exists());

    // Valid JSON, but the command needs a section that is missing.
    let o = run_config(dir.path(), "portrait", &json!({"two_point": {"d11": 1, "d22": 1, "d12": 0.5}}), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid_n"));
    assert!(!dir.path().join("portrait-out").exists());
}

#[test]
fn classify_examples() {
    let dir = tempfile::tempdir().unwrap();
    let classify = |d: [f64; 3]| {
        let o = run_config(dir.path(), "classify", &json!({"two_point": {"d11": d[0], "d22": d[1], "d12": d[2]}}), &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_json(&dir.path().join("classify-out/classification.json"))
    };
    let c = classify([1.0, 1.0, 0.5]);
    let entries = c["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["tag"], "a");
    assert_eq!(entries[0]["stability"], "asymptotically_stable");

    let c = classify([-1.0, -1.0, 0.5]);
    let tags: Vec<&str> = c["entries"].as_array().unwrap().iter().map(|e| e["tag"].as_str().unwrap()).collect();
    assert_eq!(tags, ["a", "b1", "b2", "c", "d"]);
    for e in c["entries"].as_array().unwrap() {
        let stable = e["stability"] == "asymptotically_stable";
        assert_eq!(stable, e["tag"] == "c" || e["tag"] == "d");
    }

    let c = classify([0.0, 0.0, 0.0]);
    assert_eq!(c["decoupled"], true);
    let entries = c["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["tag"], "decoupled_family");
    assert_eq!(entries[0]["stability"], "stable_not_asymptotic");
}

#[test]
fn portrait_shows_the_stationary_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"two_point": {"d11": 1.0, "d22": 1.0, "d12": 1.0}, "grid_n": 11});
    let o = run_config(dir.path(), "portrait", &config, &[]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("portrait-out/portrait.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,energy,dxdt,dydt"));
    let mut on_line = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        if (v[0] + v[1] - 1.0).abs() < 1e-12 {
            on_line += 1;
            assert!(v[3].abs() < 1e-14 && v[4].abs() < 1e-14, "{l}");
        } else {
            assert!(v[3] != 0.0 || v[4] != 0.0, "{l}");
        }
    }
    assert_eq!(on_line, 11);
    let states = fs::read_to_string(dir.path().join("portrait-out/states.csv")).unwrap();
    assert!(states.contains("a_r,stable_not_asymptotic,segment"));
}

#[test]
fn minimize_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let graph = json!({"positions": [[0.0], [1.0], [3.0]], "weights": [1.0, 1.0, 1.0], "eta": {"rule": "complete"}});
    // Self attraction stronger than the cross interaction: a Dirac pair wins.
    let config = json!({
        "graph": graph,
        "kernels": {
            "k11": {"form": "abs_scaled", "c": 1.0},
            "k22": {"form": "abs_scaled", "c": 2.0},
            "k12": {"form": "abs_scaled", "c": -0.5}
        },
        "resolution": 20
    });
    let o = run_config(dir.path(), "minimize", &config, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&dir.path().join("minimize-out/minimizer.json"));
    for key in ["m1", "m2"] {
        let ones = m[key].as_array().unwrap().iter().filter(|x| x.as_f64() == Some(1.0)).count();
        assert_eq!(ones, 1, "{m}");
    }

    let config = json!({
        "graph": graph,
        "kernels": {
            "k11": {"form": "constant", "c": 1.0},
            "k22": {"form": "constant", "c": 1.0},
            "k12": {"form": "abs_scaled", "c": -1.0}
        }
    });
    let o = run_config(dir.path(), "check", &config, &[]);
    assert!(o.status.success());
    let c = read_json(&dir.path().join("check-out/check.json"));
    assert_eq!(c["segregation"]["holds"], true);
}

#[test]
fn manifest_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"scenario": {"name": "lattice_pattern", "n": 4, "variant": "kef_truncated"},
                        "params": {"p": 2.0, "beta": [1.0, 1.0], "t_end": 2.0}, "output": {"interval": 0.5}});
    let o = run_config(dir.path(), "simulate", &config, &["--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = dir.path().join("simulate-out");
    let manifest = read_json(&first.join("manifest.json"));
    assert_eq!(manifest["seed"], 11);

    let replay = dir.path().join("replay.json");
    fs::write(&replay, serde_json::to_string(&manifest["config"]).unwrap()).unwrap();
    let second = dir.path().join("second");
    let o = graphflow(&["simulate", "--config", replay.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success());
    for name in ["trajectory.csv", "diagnostics.json", "manifest.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }

    let o = run_config(dir.path(), "simulate", &config, &["--seed", "12"]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(second.join("trajectory.csv")).unwrap(),
        fs::read(first.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn stiff_setup_aborts_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = two_vertex_attractive();
    config["kernels"]["k11"] = json!({"form": "abs_scaled", "c": 1e20});
    let o = run_config(dir.path(), "simulate", &config, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let diag = read_json(&dir.path().join("simulate-out/diagnostics.json"));
    assert_eq!(diag["outcome"]["kind"], "aborted");
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(
        dir.path(),
        "classify",
        &json!({"command": "simulate", "two_point": {"d11": 1, "d22": 1, "d12": 0}}),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}
