use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 5

[durations]
T_burnin = 150.0
T_exp = 10.0
T_train = 8.0
T_test = 2.0

[sweep]
n_seeds = 2
trials = 2

[task]
N_read = 8
"#;

fn critnet(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("small.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_critnet"))
        .arg("--config")
        .arg(&cfg)
        .arg("--jobs")
        .arg("1")
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn file_hash(m: &Value, path: &str) -> String {
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["path"] == path)
        .unwrap_or_else(|| panic!("{path} missing from manifest"))["sha256"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn burnin_then_simulate_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let b = tmp.path().join("burn");
    ok(critnet(tmp.path(), &["--out-dir", b.to_str().unwrap(), "burnin", "--trace-every", "5"]));
    let weights = b.join("weights.csv");
    assert!(weights.exists());
    assert!(b.join("long_weight_trace.csv").exists());
    let m = manifest(&b);
    assert_eq!(m["command"], "burnin");
    assert_eq!(m["seed"], 5);
    let bytes = std::fs::read(&weights).unwrap();
    assert_eq!(file_hash(&m, "weights.csv"), critnet::harness::sha256_hex(&bytes));

    let s = tmp.path().join("sim");
    ok(critnet(
        tmp.path(),
        &["--out-dir", s.to_str().unwrap(), "simulate", "--weights", weights.to_str().unwrap(), "--duration", "5"],
    ));
    let spikes = s.join("spikes.txt");
    let rec = critnet::SpikeRecord::read_from(std::io::BufReader::new(std::fs::File::open(&spikes).unwrap())).unwrap();
    assert_eq!(rec.n_sources, 32);
    assert!(rec.mean_rate() > 1.0, "burnt-in network is silent");

    let a = tmp.path().join("an");
    ok(critnet(tmp.path(), &["--out-dir", a.to_str().unwrap(), "analyze", spikes.to_str().unwrap()]));
    let table = std::fs::read_to_string(a.join("analysis.csv")).unwrap();
    assert!(table.starts_with("metric,value\n"));
    assert!(table.contains("rate_mean,"));
    assert!(table.contains("\nm,"));
}

#[test]
fn sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = tmp.path().join(name);
        ok(critnet(
            tmp.path(),
            &["--out-dir", d.to_str().unwrap(), "sweep", "--kext-grid", "8,32", "--analyses", "avalanches,branching"],
        ));
        manifest(&d)
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["cells.csv", "summary.csv", "long_branching.csv"] {
        assert_eq!(file_hash(&a, f), file_hash(&b, f), "{f} differs between identical runs");
    }
    let cells = std::fs::read_to_string(tmp.path().join("a/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 2 * 2);
    assert!(cells.lines().next().unwrap().starts_with("K_ext,K_ext_over_N,seed_index,seed,"));
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let d = tmp.path().join(name);
        ok(critnet(tmp.path(), &["--seed", seed, "--out-dir", d.to_str().unwrap(), "burnin"]));
        manifest(&d)
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    assert_eq!(b["seed"], 2);
    assert_ne!(file_hash(&a, "weights.csv"), file_hash(&b, "weights.csv"));
}

#[test]
fn pid_of_xor_table() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("xor.txt");
    std::fs::write(&table, "0 0 0 0.25\n1 0 1 0.25\n1 1 0 0.25\n0 1 1 0.25\n").unwrap();
    let d = tmp.path().join("pid");
    let out = ok(critnet(tmp.path(), &["--out-dir", d.to_str().unwrap(), "pid", "--table", table.to_str().unwrap()]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = stdout.lines().nth(1).unwrap().split(',').take(4).map(|v| v.parse().unwrap()).collect();
    assert!(row[0].abs() < 1e-6 && row[1].abs() < 1e-6 && row[2].abs() < 1e-6);
    assert!((row[3] - 1.0).abs() < 1e-6);
}

#[test]
fn rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[network]\nN = 8\nK_ext = 12\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_critnet"))
        .arg("--config")
        .arg(&cfg)
        .args(["--out-dir", tmp.path().join("o").to_str().unwrap(), "burnin"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let cfg2 = tmp.path().join("typo.toml");
    std::fs::write(&cfg2, "[network]\nKext = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_critnet"))
        .arg("--config")
        .arg(&cfg2)
        .args(["--out-dir", tmp.path().join("o2").to_str().unwrap(), "burnin"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
