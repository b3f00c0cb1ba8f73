use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_magagmon"));
    c.env_remove("MAGAGMON_OUT");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

const HEATKERNEL: &str = "\
[field]
kind = \"constant\"
beta0 = 1.0

[heatkernel]
method = \"bridge\"
t = 0.5
targets = [[0.0, 0.0], [1.0, 0.0]]

[sampling]
steps = 100
paths = 4000
seed = 42
";

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn heatkernel_writes_kernel_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("hk.toml"), HEATKERNEL).unwrap();
    let out = run(&["heatkernel", "--config", "hk.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let kernel = std::fs::read_to_string(res.join("kernel.csv")).unwrap();
    let mut lines = kernel.lines();
    assert_eq!(lines.next().unwrap(), "x,y,t,re,im,stderr,method");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().filter(|r| r.ends_with(",bridge-mc")).count() == 2);
    assert!(rows.iter().filter(|r| r.ends_with(",mehler")).count() == 2);
    let m = manifest(&res);
    assert_eq!(m["seed"], 42);
    assert_eq!(m["subcommand"], "heatkernel");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let kernel_entry = m["artifacts"].as_array().unwrap().iter().find(|a| a["name"] == "kernel.csv").unwrap();
    assert_eq!(kernel_entry["rows"], 4);
}

#[test]
fn missing_seed_exits_2_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = HEATKERNEL.replace("seed = 42\n", "");
    std::fs::write(dir.path().join("hk.toml"), cfg).unwrap();
    let out = run(&["heatkernel", "--config", "hk.toml", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling.seed"));
    assert!(!dir.path().join("res").exists());
}

#[test]
fn unknown_key_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = HEATKERNEL.replace("paths = 4000", "paths = 4000\npathz = 3");
    std::fs::write(dir.path().join("hk.toml"), cfg).unwrap();
    let out = run(&["heatkernel", "--config", "hk.toml", "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling.pathz"));
}

#[test]
fn seed_flag_overrides_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("hk.toml"), HEATKERNEL).unwrap();
    for (o, extra) in [("a", None), ("b", None), ("c", Some("7"))] {
        let mut args = vec!["heatkernel", "--config", "hk.toml", "--out", o, "--threads", "2"];
        if let Some(s) = extra {
            args.extend(["--seed", s]);
        }
        assert!(run(&args, dir.path()).status.success());
    }
    let read = |o: &str| std::fs::read(dir.path().join(o).join("kernel.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(manifest(&dir.path().join("c"))["seed"], 7);
}

#[test]
fn output_env_overrides_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("[output]\ndir = \"from_config\"\n{HEATKERNEL}");
    std::fs::write(dir.path().join("hk.toml"), cfg).unwrap();
    let env_out = dir.path().join("from_env");
    let out = bin()
        .args(["heatkernel", "--config", "hk.toml"])
        .env("MAGAGMON_OUT", &env_out)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_out.join("kernel.csv").exists());
    assert!(!dir.path().join("from_config").exists());
}

#[test]
fn numeric_failure_is_module_qualified() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "bounds.kind = \"concave\"\nbounds.inf_beta = 0.0\nbounds.x = [2.0, 0.0]\nfield.kind = \"radial-quadratic\"\nfield.beta0 = 1.0\ngrid.bounds = [-3, 3, -3, 3]\ngrid.nx = 16\nagmon.lambda = 0.5\n";
    std::fs::write(dir.path().join("a.toml"), cfg).unwrap();
    let out = run(&["bounds", "--config", "a.toml", "--out", "res"], dir.path());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success() && out.status.code() != Some(2), "{err}");
    assert!(err.contains("agmon-metric: hypothesis screen failed"), "{err}");
}

#[test]
fn agmon_suite_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "field.kind = \"constant\"\nfield.beta0 = 1.0\nagmon.suite = true\ngrid.nx = 81\noptimizer.restarts = 2\n";
    std::fs::write(dir.path().join("s.toml"), cfg).unwrap();
    let out = run(&["agmon-dist", "--config", "s.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("res/threshold_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    for row in table.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[7], "true");
        assert_eq!(cols[8], "true");
    }
}

#[test]
fn eigs_and_kato_check_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "field.kind = \"radial-quadratic\"\nfield.beta0 = 0.5\ndomain.kind = \"disc\"\ndomain.radius = 3.0\ngrid.nx = 48\neigs.k = 3\neigs.vectors = 2\neigs.profile = true\n";
    std::fs::write(dir.path().join("e.toml"), cfg).unwrap();
    let out = run(&["eigs", "--config", "e.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = std::fs::read_to_string(dir.path().join("res/eigenvalues.csv")).unwrap();
    assert_eq!(ev.lines().count(), 4);
    let v = std::fs::read_to_string(dir.path().join("res/eigenvector_1.csv")).unwrap();
    assert_eq!(v.lines().next().unwrap(), "i,j,x,y,absf");

    let cfg = "field.kind = \"constant\"\nfield.beta0 = 2.0\ngrid.bounds = [-3, 3, -3, 3]\ngrid.nx = 12\nkato.p = 2.0\n";
    std::fs::write(dir.path().join("k.toml"), cfg).unwrap();
    let out = run(&["kato-check", "--config", "k.toml", "--out", "kato"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("kato/kato.json")).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "finite");
}

#[test]
fn bounds_carmona_and_confine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
bounds.kind = \"carmona\"
bounds.path = [[3.0, 0.0], [1.0, 0.0]]
bounds.horizon = [0.5, 1.0, 2.0]
field.kind = \"split\"
field.w.kind = \"radial-quadratic\"
field.w.beta0 = 1.0
field.u.kind = \"constant\"
field.u.beta0 = 0.2
grid.bounds = [-4, 4, -4, 4]
grid.nx = 32
agmon.lambda = 0.5
";
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let out = run(&["bounds", "--config", "c.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("res/carmona.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);

    let cfg = "\
bounds.kind = \"confine\"
bounds.beta0 = 1.0
bounds.x = [2.5, 0.0]
field.kind = \"radial-quadratic\"
field.beta0 = 1.0
grid.bounds = [-4, 4, -4, 4]
grid.nx = 64
agmon.lambda = 1.0
optimizer.restarts = 2
";
    std::fs::write(dir.path().join("f.toml"), cfg).unwrap();
    let out = run(&["bounds", "--config", "f.toml", "--out", "conf"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("conf/bounds.json")).unwrap()).unwrap();
    assert_eq!(rep[0]["kind"], "confine");
    assert!(dir.path().join("conf/polyline_0.csv").exists());
}
