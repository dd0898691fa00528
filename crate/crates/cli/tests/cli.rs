use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_softscreen"));
    c.env_remove("SOFTSCREEN_OUT_DIR").env("RUST_LOG", "warn");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn quickstart_completes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run(&[
        "run",
        scenario("pipe84_quickstart.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["termination"], "completed");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("time_s,s_mm,v_mmps,tilt_deg,p1_kPa,p2_kPa,traction_N,contacts\n"));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"]["trace.csv"].is_string());
    assert!(manifest["determinism"]
        .as_str()
        .unwrap()
        .contains("no random seeds"));
}

#[test]
fn same_input_gives_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("phantom_supported_forward.toml");
    for sub in ["a", "b"] {
        let o = run(&[
            "run",
            s.to_str().unwrap(),
            "--out",
            dir.path().join(sub).to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["summary.json", "trace.csv", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn stall_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        scenario("collapsed_overinflation.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        json(&dir.path().join("summary.json"))["termination"],
        "stalled"
    );
}

#[test]
fn malformed_unit_key_names_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("phantom_supported_forward.toml"))
        .unwrap()
        .replace("p1_kPa", "p1_kpa");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let o = run(&[
        "run",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("p1_kpa") && err.contains("line"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn output_dir_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", scenario("pipe84_quickstart.toml").to_str().unwrap()])
        .env("SOFTSCREEN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn paper_suite_report_shape_and_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["paper-suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = json(&dir.path().join("report.json"));
    let rows = report["rows"].as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    for p in ["0", "5", "10", "13", "16"] {
        assert!(ids.contains(&format!("traction.{p}kPa").as_str()), "{p}");
    }
    assert_eq!(report["traction"].as_array().unwrap().len(), 5);
    for d in [74, 84, 94] {
        for dir in ["forward", "backward"] {
            assert!(ids.contains(&format!("pipe{d}.{dir}").as_str()));
        }
    }
    assert!(rows.iter().all(|r| r["verdict"].is_string()));
    let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(table.lines().next().unwrap().contains("verdict"));

    let again = run(&[
        "paper-suite",
        "--manifest",
        dir.path().join("manifest.json").to_str().unwrap(),
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stdout).contains("bit-identically"));
}

#[test]
fn sweep_fans_out_and_keeps_failures_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        scenario("pipe84_quickstart.toml").to_str().unwrap(),
        "--param",
        "tracks.mu_track_lumen",
        "--values",
        "0.2,1.2,-1",
        "--jobs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let mut r = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    let term: Vec<&str> = rows.iter().map(|x| &x[3]).collect();
    assert_eq!(term, ["stalled", "completed", "error"]);
    assert!(rows[2][8].contains("mu_track_lumen"));
}

#[test]
fn inflate_curve_and_traction_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "inflate-curve",
        "--step-kpa",
        "5",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("c/inflate_curve.csv")).unwrap();
    assert_eq!(&r.headers().unwrap()[0], "pressure_kPa");
    let d: Vec<f64> = r
        .records()
        .map(|x| x.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(d.len(), 5);
    assert!(d.windows(2).all(|w| w[1] > w[0]));

    let o = run(&[
        "traction",
        "--stall-step-kpa",
        "0.5",
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("t/traction.csv")).unwrap();
    assert_eq!(&r.headers().unwrap()[1], "traction_N");
    assert_eq!(r.records().count(), 5);
    assert!(
        json(&dir.path().join("t/stall.json"))["stall_threshold_kPa"]
            .as_f64()
            .unwrap()
            > 16.0
    );
}

#[test]
fn serve_flushes_the_trace_on_interrupt() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args([
            "serve",
            scenario("pipe84_quickstart.toml").to_str().unwrap(),
            "--port",
            "0",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first
        .strip_prefix("listening on http://")
        .expect(&first)
        .to_string();
    let health: Value = tokio::runtime::Runtime::new().unwrap().block_on(async {
        reqwest::get(format!("http://{addr}/health"))
            .await
            .unwrap()
            .json()
            .await
            .unwrap()
    });
    assert_eq!(health["proto_version"], softscreen_core::PROTO_VERSION);
    std::thread::sleep(Duration::from_millis(500));
    let killed = Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    assert_eq!(child.wait().unwrap().code(), Some(0));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["termination"], "stopped");
    let rows = fs::read_to_string(dir.path().join("trace.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows as u64, summary["steps"].as_u64().unwrap() + 1);
    assert!(rows > 5);
    assert_eq!(json(&dir.path().join("manifest.json"))["command"], "serve");
}
