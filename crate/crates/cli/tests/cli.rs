use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn popdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popdyn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const ASYMMETRIC: &str = r#"
name = "asym"
x0 = [0.2, 0.3, 0.5]
horizon = 1.0
step = 0.01
seed = 1

[dynamics]
alpha = 0.0
beta = 1.0
rule = "smith"

[[mechanism]]
pdm = { kind = "affine", a = [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], b = [0.0, 0.0, 0.0], potential = true }
fopm = { mu = 1.0, gamma = GAMMA, nu = 0.0 }
"#;

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = popdyn(&["simulate", "--config", "braess-notoll-smith", "--horizon", "10", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for ext in ["csv", "json", "svg"] {
        assert!(dir.path().join(format!("braess-notoll-smith.{ext}")).exists(), "{ext}");
    }
    let csv = fs::read_to_string(dir.path().join("braess-notoll-smith.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,u1,u2,u3,p1,p2,p3,rho,"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("braess-notoll-smith.json")).unwrap()).unwrap();
    assert_eq!(json["steps"], 10_000);
}

#[test]
fn alpha_override_gives_dotted_chart() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = popdyn(&[
        "simulate", "--config", "braess-toll-bnn", "--alpha", "1", "--horizon", "20", "--out-dir", out,
    ]);
    assert!(o.status.success());
    let svg = fs::read_to_string(dir.path().join("braess-toll-bnn-alpha1.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("stroke-dasharray"));

    popdyn(&["simulate", "--config", "braess-toll-bnn", "--horizon", "20", "--out-dir", out]);
    let solid = fs::read_to_string(dir.path().join("braess-toll-bnn.svg")).unwrap();
    assert!(!solid.contains("polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray"));
}

#[test]
fn nash_reports_braess_equilibria() {
    let o = popdyn(&["nash", "--config", "braess-notoll-smith"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("(0.250000, 0.500000, 0.250000)   average payoff -8.500000"), "{s}");
    assert!(s.contains("average payoff of -8.000000"), "{s}");

    let s = stdout(&popdyn(&["nash", "--config", "braess-toll-hybrid1"]));
    assert!(s.contains("(0.495098, 0.009804, 0.495098)"), "{s}");
}

#[test]
fn negative_static_gain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "neg", &ASYMMETRIC.replace("GAMMA", "-1.0"));
    let o = popdyn(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mechanism[0].fopm"));
    assert_eq!(popdyn(&["simulate", "--config", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(popdyn(&["emit-config", "no-such-scenario"]).status.code(), Some(2));
}

#[test]
fn false_potential_claim_is_reported_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "asym", &ASYMMETRIC.replace("GAMMA", "1.0"));
    let out = dir.path().to_str().unwrap();
    let o = popdyn(&["check", "--config", &cfg, "--out-dir", out]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("asymmetry witness"), "{s}");
    assert!(s.contains("eligible: fails"), "{s}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("asym.check.json")).unwrap()).unwrap();
    assert_eq!(report["gate"]["eligible"], "fails");
    assert_eq!(popdyn(&["check", "--config", &cfg, "--out-dir", out, "--assert"]).status.code(), Some(4));
}

#[test]
fn check_reads_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    popdyn(&["simulate", "--config", "braess-toll-smith", "--horizon", "20", "--out-dir", out]);
    let csv = dir.path().join("braess-toll-smith.csv");
    let o = popdyn(&["check", "--config", "braess-toll-smith", "--trajectory", csv.to_str().unwrap(), "--out-dir", out, "--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("braess-toll-smith.check.json")).unwrap()).unwrap();
    assert_eq!(report["trajectory"]["samples"], 21);
    assert!(report["trajectory"]["ccw_running_min"].as_f64().unwrap().is_finite());
}

#[test]
fn assert_passes_on_toll_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let o = popdyn(&["simulate", "--config", "braess-toll-smith", "--out-dir", dir.path().to_str().unwrap(), "--assert"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("acceptance thresholds met"));

    // Too short to converge: the thresholds must trip.
    let o = popdyn(&[
        "simulate", "--config", "braess-toll-smith", "--horizon", "2", "--out-dir", dir.path().to_str().unwrap(), "--assert",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = popdyn(&[
            "batch", "--config", "braess-toll-hybrid1", "--config", "braess-notoll-smith", "--alpha-pair", "--horizon", "30",
            "--out-dir", d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4 * 3 + 1);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn emitted_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&popdyn(&["emit-config", "braess-toll-hybrid1"]));
    let cfg = write_config(dir.path(), "copy", &text);
    let o = popdyn(&["simulate", "--config", &cfg, "--emit-config"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("name = \"braess-toll-hybrid1\""));
}
