use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jsqd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsqd"))
        .args(args)
        .env("JSQD_WORKERS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const RATE_TABLE: &str = r#"
kind = "rate-table"
seed = 0
output_dir = "out"
[grid]
epsilon = [0.25, 0.5, 1.0]
horizon = [1.0, 2.0]
"#;

const DECAY: &str = r#"
kind = "rare-decay"
seed = 7
output_dir = "decay"
replications = 400
[grid]
n = [20, 40]
d_schedule = ["full"]
epsilon = [1.0]
horizon = [1.0]
j = [3]
"#;

#[test]
fn rate_table_writes_six_passing_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rate.toml", RATE_TABLE);
    let out = jsqd(&["run", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with("true,")), "{csv}");

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let bytes = fs::read(dir.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        let digest = Command::new("sha256sum")
            .arg(dir.path().join("out").join(f["name"].as_str().unwrap()))
            .output();
        if let Ok(d) = digest {
            let text = String::from_utf8_lossy(&d.stdout).to_string();
            assert!(text.starts_with(f["sha256"].as_str().unwrap()), "{text}");
        }
        assert!(!bytes.is_empty());
    }
    // defaults are spelled out
    assert_eq!(manifest["config"]["tolerances"]["brute_force_step"], 1e-4);
    assert!(!manifest.to_string().contains("timestamp"));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "decay.toml", DECAY);
    assert!(jsqd(&["run", &cfg]).status.success());
    let first = fs::read(dir.path().join("decay/results.json")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_jsqd"))
        .args(["run", &cfg])
        .env("JSQD_WORKERS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let second = fs::read(dir.path().join("decay/results.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn full_routing_long_queue_matches_large_total() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "decay.toml", DECAY);
    assert!(jsqd(&["run", &cfg]).status.success());
    let results: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("decay/results.json")).unwrap()).unwrap();
    assert_eq!(results["kind"], "rare-decay");
    let points = results["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    // G_1 and U_3 series share the tilt; with d = n they are one event
    for (g, u) in points[..2].iter().zip(&points[2..]) {
        let pg = g["result"]["p_hat"].as_f64().unwrap();
        let pu = u["result"]["p_hat"].as_f64().unwrap();
        let se = (g["result"]["std_err"].as_f64().unwrap().powi(2)
            + u["result"]["std_err"].as_f64().unwrap().powi(2))
        .sqrt();
        assert!((pg - pu).abs() <= 3.0 * se, "{pg} vs {pu}");
    }
    assert_eq!(results["regressions"].as_array().unwrap().len(), 2);
}

#[test]
fn plot_data_is_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "decay.toml", DECAY);
    assert!(jsqd(&["run", &cfg]).status.success());
    let results = dir.path().join("decay/results.json");
    let out = jsqd(&["plot-data", results.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("decay/plot_data.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "series,x,y,stderr");
    assert!(csv.contains("neg_log_rate vs n [d=n, G_eps=1"), "{csv}");
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn plot_data_without_results_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = jsqd(&[
        "plot-data",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = write_config(
        dir.path(),
        "a.toml",
        "kind = \"rate-table\"\noutput_dir = \"o\"\n[grid]\nepsilon = [1.0]\nhorizon = [1.0]\n",
    );
    assert_eq!(jsqd(&["run", &no_seed]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "b.toml", &format!("{RATE_TABLE}\nbogus = 1\n"));
    assert_eq!(jsqd(&["run", &unknown]).status.code(), Some(2));
    let empty = write_config(
        dir.path(),
        "c.toml",
        "kind = \"lln\"\nseed = 1\noutput_dir = \"o\"\n[grid]\n",
    );
    assert_eq!(jsqd(&["run", &empty]).status.code(), Some(2));
    assert_eq!(
        jsqd(&["run", dir.path().join("nope.toml").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_jsqd"))
        .args(["run", &no_seed])
        .env("JSQD_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_modes_report_threshold_failures() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "sk.toml",
        "kind = \"skorokhod-selftest\"\nseed = 3\noutput_dir = \"sk\"\ncases = 50\n[grid]\nm = [3, 6]\n",
    );
    assert!(jsqd(&["run", &ok]).status.success());
    // a tolerance no solver can meet
    let strict = write_config(
        dir.path(),
        "fl.toml",
        "kind = \"fluid-selftest\"\nseed = 3\noutput_dir = \"fl\"\n[grid]\nepsilon = [1.0]\nhorizon = [1.0]\n\
         [tolerances]\nrate_gap = 1e-6\nbrute_force_step = 1e-4\nslope_rel = 0.15\nlln_p95 = 0.05\nresidual = 1e-8\n\
         refinement = 1e-6\nfluid_mass = -1.0\nfluid_pinned = 1e-10\nfluid_cost = 1e-6\n",
    );
    assert_eq!(jsqd(&["run", &strict]).status.code(), Some(3));
    assert!(dir.path().join("fl/results.json").exists());
}

#[test]
fn builtin_selftest_passes() {
    let out = jsqd(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
