use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SCHEMA: &str = include_str!("../../../schema/fsstokes.schema.json");

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fsstokes"));
    c.env_remove("FSSTOKES_OUTPUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--output-dir").arg(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

/// Required keys present and, where the schema closes the object, no others.
fn conforms(value: &Value, def: &str) {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let d = &schema["$defs"][def];
    let items: Vec<&Value> = match value {
        Value::Array(xs) => xs.iter().collect(),
        v => vec![v],
    };
    let d = if d["type"] == "array" { &d["items"] } else { d };
    for v in items {
        let obj = v.as_object().unwrap_or_else(|| panic!("{def}: expected an object"));
        for k in d["required"].as_array().unwrap() {
            assert!(obj.contains_key(k.as_str().unwrap()), "{def}: missing {k}");
        }
        if d["additionalProperties"] == Value::Bool(false) {
            for k in obj.keys() {
                assert!(d["properties"].get(k).is_some(), "{def}: unexpected key {k}");
            }
        }
    }
}

#[test]
fn roots_default_locus() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["roots"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("roots.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "a,regime,label,b_re,b_im,lambda_re,lambda_im,physical");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1600);
    assert!(rows[0].starts_with("0.0001,"));
    assert!(rows[1599].starts_with("10000.0,"));
    let m = json(tmp.path().join("manifest.json"));
    conforms(&m, "manifest");
    assert_eq!(m["status"], "success");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["artifacts"][0], "roots.csv");
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        assert_eq!(code(&run(d.path(), &["roots"])), 0);
        assert_eq!(code(&run(d.path(), &["calibrate"])), 0);
        assert_eq!(code(&run(d.path(), &["verify", "--check", "C1", "--check", "sector_bounds", "--check", "C14"])), 0);
    }
    for f in ["roots.csv", "calibration.json", "verify/C1.json", "verify/C14.json", "verify/summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let ma = json(a.path().join("manifest.json"));
    let mb = json(b.path().join("manifest.json"));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["artifacts"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_writes_fourteen_reports_and_checks_baselines() {
    let tmp = TempDir::new().unwrap();
    let base = tmp.path().join("baseline.json");
    let o = run(tmp.path(), &["verify", "--write-baseline", base.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    for i in 1..=14 {
        conforms(&json(tmp.path().join(format!("verify/C{i}.json"))), "check_report");
    }
    conforms(&json(tmp.path().join("verify/summary.json")), "verify_summary");
    conforms(&json(base.clone()), "baseline");
    let m = json(tmp.path().join("manifest.json"));
    assert_eq!(m["check_runtimes_s"].as_object().unwrap().len(), 14);

    let o = run(tmp.path(), &["verify", "--baseline", base.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(tmp.path().join("verify/drift.json")), Value::Array(vec![]));

    let mut b = json(base.clone());
    let c1 = b["constants"]["C1"].as_object_mut().unwrap();
    let key = c1.keys().next().unwrap().clone();
    c1.insert(key, Value::from(1e3));
    std::fs::write(&base, serde_json::to_string(&b).unwrap()).unwrap();
    let o = run(tmp.path(), &["verify", "--baseline", base.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let drift = json(tmp.path().join("verify/drift.json"));
    conforms(&drift, "drift");
    assert_eq!(drift.as_array().unwrap().len(), 1);
    assert_eq!(json(tmp.path().join("manifest.json"))["status"], "check_failure");
}

#[test]
fn invalid_config_exits_two_and_still_writes_a_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"params": {"gravity": -1}}"#);
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "roots"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gravity must be positive"));
    let m = json(tmp.path().join("manifest.json"));
    conforms(&m, "manifest");
    assert_eq!(m["failure_stage"], "config");
    assert_eq!(m["status"], "usage_error");
    assert!(!tmp.path().join("roots.csv").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"vicsosity": 2}"#);
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "calibrate"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `vicsosity`"));
    let cfg = write_config(tmp.path(), r#"{"roots": {"point": 10}}"#);
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "roots"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("did you mean `points`"));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn environment_sets_the_output_directory() {
    let tmp = TempDir::new().unwrap();
    let o = bin().current_dir(tmp.path()).env("FSSTOKES_OUTPUT_DIR", tmp.path().join("env-out")).arg("calibrate").output().unwrap();
    assert_eq!(code(&o), 0);
    let c = json(tmp.path().join("env-out/calibration.json"));
    conforms(&c, "calibration");
    assert_eq!(c["a0"], 0.375);
}

#[test]
fn evolve_dumps_csv_and_binary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid": {"lattice_size": 32, "box_half_width": 20, "xn_panels": 1, "xn_order": 3},
            "times": [0.5, 2],
            "evolve": {"operator": "S", "part": "Total", "data_part": "Both"}}"#,
    );
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "--workers", "1", "evolve"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = json(tmp.path().join("evolve.json"));
    conforms(&header, "snapshot_header");
    assert_eq!(header["extrapolation"], serde_json::json!([true, false]));
    let nx = header["x_nodes"].as_array().unwrap().len();
    assert_eq!(nx, 4);
    let bytes = std::fs::read(tmp.path().join("evolve.bin")).unwrap();
    assert_eq!(bytes.len(), 2 * 2 * 32 * nx * 8);
    let csv = std::fs::read_to_string(tmp.path().join("evolve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,component,i1,x1,x_n,value");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 2 * 32 * nx);
    // The binary dump and the CSV list values in the same order.
    let last = rows.last().unwrap().rsplit(',').next().unwrap().parse::<f64>().unwrap();
    let tail = f64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    assert_eq!(last, tail);
    assert_eq!(json(tmp.path().join("manifest.json"))["workers"], 1);
}

#[test]
fn resolvent_reports_consistent_traces() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["resolvent"]);
    assert_eq!(code(&o), 0);
    let r = json(tmp.path().join("resolvent.json"));
    conforms(&r, "resolvent");
    assert_eq!(r["pass"], true);
    assert!(r["kinematic_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn decay_fit_writes_series_and_verdict() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"decay_fit": {"times": [100, 200, 400, 800], "lattice_size": 16384, "box_half_width": 15707.963267948966,
                          "x_nodes": [0, 1]}}"#,
    );
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "decay-fit"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(tmp.path().join("decay_series.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,norm,in_fit");
    assert_eq!(csv.lines().count(), 5);
    let v = json(tmp.path().join("decay_verdict.json"));
    conforms(&v, "decay_verdict");
    assert_eq!(v["theoretical"]["Algebraic"], 0.75);
    assert_eq!(v["spec"]["q"], "inf");
    assert!(v["fitted_slope"].as_f64().unwrap() < -0.6);
}

#[test]
fn out_of_scope_exponent_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"decay_fit": {"q": 2, "r": 2}}"#);
    let o = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "decay-fit"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(tmp.path().join("manifest.json"))["failure_stage"], "decay-fit");
}
