use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn idaudit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idaudit")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const BALL: &str = r#"{"kind": "uniform_ball", "intrinsic_dims": [2], "ambient_dim": 2, "n_points": 5000, "seed": 7}"#;

#[test]
fn generate_writes_a_deterministic_dump() {
    let dir = tempdir().unwrap();
    write(dir.path(), "small.json", &BALL.replace("5000", "100"));
    for out in ["a", "b"] {
        let o = idaudit(&["generate", "--spec", "small.json", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(dir.path().join("a/layer_000.nrep")).unwrap();
    assert_eq!(bytes.len(), 24 + 100 * 2 * 4);
    assert_eq!(bytes, fs::read(dir.path().join("b/layer_000.nrep")).unwrap());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["layers"][0]["rows"], 100);
    assert_eq!(manifest["model"], "uniform_ball");
}

#[test]
fn invalid_spec_is_a_usage_error() {
    let dir = tempdir().unwrap();
    write(dir.path(), "bad.json", "{\"kind\": \"uniform_ball\",");
    let o = idaudit(&["generate", "--spec", "bad.json", "--out", "x"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    write(dir.path(), "wrong.json", &BALL.replace("[2]", "[3]"));
    assert_eq!(code(&idaudit(&["generate", "--spec", "wrong.json", "--out", "x"], dir.path())), 2);
}

#[test]
fn estimate_disk_and_reduction() {
    let dir = tempdir().unwrap();
    write(dir.path(), "ball.json", BALL);
    assert_eq!(code(&idaudit(&["generate", "--spec", "ball.json", "--out", "d"], dir.path())), 0);

    let o = idaudit(&["estimate", "--input", "d", "--method", "twonn"], dir.path());
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let value = v["results"][0]["estimate"]["value"].as_f64().unwrap();
    assert!((value - 2.0).abs() <= 0.2, "{value}");
    assert_eq!(v["config"]["method"]["discard_fraction"], 0.1);

    let gride = json(&idaudit(&["estimate", "--input", "d", "--method", "gride:k=1"], dir.path()));
    let twonn = json(&idaudit(&["estimate", "--input", "d", "--method", "twonn:f=0"], dir.path()));
    let a = gride["results"][0]["estimate"]["value"].as_f64().unwrap();
    let b = twonn["results"][0]["estimate"]["value"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9);

    let oracle = json(&idaudit(&["estimate", "--input", "d", "--method", "oracle:q=20"], dir.path()));
    assert!((oracle["results"][0]["estimate"]["value"].as_f64().unwrap() - 2.0).abs() < 0.2);
}

#[test]
fn duplicate_rows_report_finite_support() {
    let dir = tempdir().unwrap();
    write(dir.path(), "dupes.csv", &"1.0,2.0\n".repeat(50));
    let o = idaudit(&["estimate", "--input", "dupes.csv", "--method", "mle:k=5"], dir.path());
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["results"][0]["support"]["verdict"], "FiniteSupportSuspected");
    assert!(v["results"][0]["estimate"].is_null());
}

#[test]
fn estimate_by_label_on_union() {
    let dir = tempdir().unwrap();
    let spec = r#"{"kind": "union_of_balls", "intrinsic_dims": [1, 2], "ambient_dim": 3, "n_points": 3000, "seed": 1}"#;
    write(dir.path(), "union.json", spec);
    assert_eq!(code(&idaudit(&["generate", "--spec", "union.json", "--out", "u"], dir.path())), 0);
    let v = json(&idaudit(&["estimate", "--input", "u", "--by-label"], dir.path()));
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for (r, truth) in results.iter().zip([1.0, 2.0]) {
        assert!((r["estimate"]["value"].as_f64().unwrap() - truth).abs() < 0.3);
    }
}

#[test]
fn data_errors_exit_four() {
    let dir = tempdir().unwrap();
    assert_eq!(code(&idaudit(&["estimate", "--input", "missing"], dir.path())), 4);
    write(dir.path(), "tiny.csv", "1,2\n3,4\n");
    assert_eq!(code(&idaudit(&["estimate", "--input", "tiny.csv", "--method", "mle:k=20"], dir.path())), 4);
    fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(code(&idaudit(&["estimate", "--input", "empty"], dir.path())), 4);
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = tempdir().unwrap();
    assert_eq!(code(&idaudit(&["estimate", "--input", "x", "--method", "pca"], dir.path())), 2);
    assert_eq!(code(&idaudit(&["sweep-bias", "--reps", "0"], dir.path())), 2);
}

#[test]
fn bias_sweep_csv_shape_and_determinism() {
    let dir = tempdir().unwrap();
    let args = ["sweep-bias", "--dims", "2,4,6", "--n", "400", "--reps", "3", "--methods", "twonn,mle:k=10", "--seed", "5"];
    let a = idaudit(&args, dir.path());
    assert_eq!(code(&a), 0);
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "true_dim,method,mean,ci_low,ci_high");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert_eq!(a.stdout, idaudit(&args, dir.path()).stdout);

    let single = idaudit(&["sweep-bias", "--dims", "2", "--n", "300", "--reps", "1", "--methods", "twonn"], dir.path());
    let row = String::from_utf8(single.stdout).unwrap().lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!(f[2], f[3]);
    assert_eq!(f[2], f[4]);
}

#[test]
fn ambient_sweep_rotation_agrees() {
    let dir = tempdir().unwrap();
    let o = idaudit(
        &["sweep-ambient", "--true-dim", "4", "--ambient", "8,32", "--n", "500", "--reps", "3", "--methods", "twonn", "--rotate", "both", "--out", "amb.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("amb.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(text.lines().next().unwrap(), "ambient_dim,method,rotate,mean,ci_low,ci_high");
    assert_eq!(rows.len(), 4);
    for pair in rows.chunks(2) {
        let lo = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
        let hi = |r: &Vec<String>| r[5].parse::<f64>().unwrap();
        assert!(lo(&pair[0]) <= hi(&pair[1]) && lo(&pair[1]) <= hi(&pair[0]));
    }
}

#[test]
fn audit_identity_network_passes() {
    let dir = tempdir().unwrap();
    write(dir.path(), "ball.json", &BALL.replace("5000", "1500"));
    let net = r#"{"input_dim": 2, "layers": [
        {"kind": "linear", "out": 2, "init": "identity"},
        {"kind": "linear", "out": 2, "init": "identity"}]}"#;
    write(dir.path(), "net.json", net);
    let o = idaudit(&["audit", "--net", "net.json", "--ball", "ball.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["report"]["network_bound"].as_f64().unwrap() < 1.001);
}

#[test]
fn audit_increasing_stack_exits_three() {
    let dir = tempdir().unwrap();
    write(dir.path(), "line.json", r#"{"kind": "uniform_ball", "intrinsic_dims": [1], "ambient_dim": 2, "n_points": 1500, "seed": 1}"#);
    write(dir.path(), "disk.json", &BALL.replace("5000", "1500"));
    for (spec, out) in [("line.json", "l"), ("disk.json", "k")] {
        assert_eq!(code(&idaudit(&["generate", "--spec", spec, "--out", out], dir.path())), 0);
    }
    // Hand-built two-layer dump: the segment, then the disk.
    let stack = dir.path().join("rising");
    fs::create_dir(&stack).unwrap();
    fs::copy(dir.path().join("l/layer_000.nrep"), stack.join("layer_000.nrep")).unwrap();
    fs::copy(dir.path().join("k/layer_000.nrep"), stack.join("layer_001.nrep")).unwrap();
    let manifest = r#"{"version": 1, "model": "rising", "layers": [
        {"name": "segment", "relative_depth": 0.0, "file": "layer_000.nrep", "rows": 1500, "cols": 2},
        {"name": "disk", "relative_depth": 1.0, "file": "layer_001.nrep", "rows": 1500, "cols": 2}]}"#;
    write(&stack, "manifest.json", manifest);
    let o = idaudit(&["audit", "--input", "rising", "--tolerance", "0.1"], dir.path());
    assert_eq!(code(&o), 3);
    let v = json(&o);
    assert_eq!(v["report"]["violations"][0]["layer"], 1);
}

#[test]
fn push_then_layer_analyze() {
    let dir = tempdir().unwrap();
    write(dir.path(), "ball.json", &BALL.replace("5000", "2000"));
    let spec = idaudit(&["net-spec", "--input-dim", "2", "--width", "8", "--depth", "3", "--seed", "4"], dir.path());
    assert_eq!(code(&spec), 0);
    fs::write(dir.path().join("net.json"), &spec.stdout).unwrap();
    assert_eq!(code(&idaudit(&["push", "--net", "net.json", "--ball", "ball.json", "--out", "p"], dir.path())), 0);
    let o = idaudit(
        &["layer-analyze", "--input", "p", "--out-csv", "m.csv", "--out-json", "m.json", "--exclude-last"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("layer,name,relative_depth,gride_mean,gride_k1,"));
    assert!(header.ends_with("entropy,effective_rank,oracle"));
    assert_eq!(csv.lines().count(), 1 + 3);
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["exclude_last"], true);
    let oracle: Vec<f64> = v["layers"].as_array().unwrap().iter().map(|l| l["oracle"].as_f64().unwrap()).collect();
    assert!(oracle.windows(2).all(|w| w[1] <= w[0] + 0.3), "{oracle:?}");
}
