use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const MINIMAL: &str = r#"
seed = 11
grid_n = 64
output_dir = "out"
checks = ["damping_identity"]

[profile]
name = "strip"
sigma = 1.0

[sweep]
q_values = [10, 14, 20, 28, 40]
beta_strategy = "modes"
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, extra: &[&str], cache: &Path) -> Output {
    bin().arg("run").arg(config).args(extra).env("DAMPWAVE_CACHE_DIR", cache).output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

fn digest(p: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(p).unwrap()))
}

#[test]
fn minimal_config_writes_csv_and_one_fit() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), MINIMAL);
    let out = run(&cfg, &[], &d.path().join("cache"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("out/resolvent.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q,beta,k,norm"));
    assert_eq!(lines.count(), 5);
    let r = report(d.path());
    let fits = r["fits"].as_object().unwrap();
    assert_eq!(fits.len(), 1);
    for key in ["slope", "intercept", "r_squared", "window"] {
        assert!(fits["resolvent"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["checks"]["damping_identity"]["pass"], true);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["provenance"]["version"].is_string());
}

#[test]
fn unknown_names_exit_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &MINIMAL.replace("\"strip\"", "\"bogus_profile\""));
    let out = run(&cfg, &[], &d.path().join("cache"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_profile"));

    let cfg = write_config(d.path(), &MINIMAL.replace("\"damping_identity\"", "\"no_such_check\""));
    let out = run(&cfg, &[], &d.path().join("cache"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_check"));
}

#[test]
fn parse_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "seed = [unterminated");
    assert_eq!(run(&cfg, &[], &d.path().join("cache")).status.code(), Some(2));
    let cfg = write_config(d.path(), &MINIMAL.replace("grid_n = 64", "grid_n = 63"));
    assert_eq!(run(&cfg, &[], &d.path().join("cache")).status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_4_with_coordinates() {
    let d = tempfile::tempdir().unwrap();
    let body = MINIMAL
        .replace("name = \"strip\"\nsigma = 1.0", "name = \"constant\"\nc = 0.0")
        .replace("beta_strategy = \"modes\"", "beta_strategy = \"list\"\nbetas = [4.0]");
    let cfg = write_config(d.path(), &body);
    let out = run(&cfg, &[], &d.path().join("cache"));
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta=4"), "{err}");
    assert!(err.contains("q=10"), "{err}");
}

#[test]
fn reruns_are_byte_identical_and_cached() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), MINIMAL);
    let csv = d.path().join("out/resolvent.csv");
    assert!(run(&cfg, &[], &d.path().join("c1")).status.success());
    let first = digest(&csv);
    assert!(run(&cfg, &["--force", "--jobs", "1"], &d.path().join("c2")).status.success());
    assert_eq!(digest(&csv), first);
    assert_eq!(report(d.path())["provenance"]["cached"], false);

    let out = run(&cfg, &[], &d.path().join("c2"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("(cached)"));
    assert_eq!(report(d.path())["provenance"]["cached"], true);
    assert_eq!(digest(&csv), first);
}

#[test]
fn render_fits_and_decay_trace() {
    let d = tempfile::tempdir().unwrap();
    let body = MINIMAL.replace("checks = [\"damping_identity\"]", "checks = [\"decay\"]")
        + "\n[decay]\nk_max = 4\nt_max = 1000.0\nn_times = 60\n";
    let cfg = write_config(d.path(), &body);
    let out = run(&cfg, &[], &d.path().join("cache"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let decay = std::fs::read_to_string(d.path().join("out/decay.csv")).unwrap();
    assert!(decay.starts_with("t,E,E_sqrt_over_datanorm\n"));

    let plots = d.path().join("plots");
    let out = bin().arg("render").arg(d.path().join("out/report.json")).arg("--out").arg(&plots).output().unwrap();
    assert!(out.status.success());
    for f in ["fit_resolvent.svg", "fit_resolvent.csv", "fit_decay.svg", "fit_decay.csv", "trace_decay.csv"] {
        assert!(plots.join(f).is_file(), "missing {f}");
    }
    let trace = std::fs::read_to_string(plots.join("trace_decay.csv")).unwrap();
    assert!(trace.starts_with("t,E,E_sqrt_over_datanorm\n"));
    assert_eq!(trace.lines().count(), 62);
}

#[test]
fn render_single_fit_and_empty_report() {
    let d = tempfile::tempdir().unwrap();
    let mut r: serde_json::Value = serde_json::json!({
        "config_hash": "00",
        "fits": {
            "resolvent": {
                "slope": 0.5, "intercept": 0.0, "r_squared": 1.0, "window": [1.0, 100.0],
                "series": {"x_label": "q", "y_label": "norm", "x": [1.0, 10.0, 100.0], "y": [1.0, 3.1622776601683795, 10.0]}
            }
        },
        "checks": {},
        "provenance": {"toolkit": "dampwave", "version": "0", "started_unix": 0.0, "finished_unix": 0.0, "cached": false, "jobs": 1}
    });
    let p = d.path().join("report.json");
    std::fs::write(&p, r.to_string()).unwrap();
    assert!(bin().arg("render").arg(&p).status().unwrap().success());
    let svgs = |dir: &Path| {
        std::fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count()
    };
    assert_eq!(svgs(d.path()), 1);
    assert!(d.path().join("fit_resolvent.csv").is_file());

    let e = tempfile::tempdir().unwrap();
    r["fits"] = serde_json::json!({});
    let p = e.path().join("report.json");
    std::fs::write(&p, r.to_string()).unwrap();
    let out = bin().arg("render").arg(&p).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success());
    assert_eq!(svgs(e.path()), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no fits"));
}
