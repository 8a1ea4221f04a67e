use critnet::config::Config;
use critnet::harness::{
    cell_seed, finite_size_scan, run_cell, stream_seed, sweep, task_switch, write_sweep, OutputDir,
    Stream,
};
use proptest::prelude::*;

fn small() -> Config {
    let mut c = Config::default();
    c.durations.burnin = 150.0;
    c.durations.exp = 10.0;
    c.durations.train = 8.0;
    c.durations.test = 2.0;
    c.sweep.kext_grid = vec![8, 32];
    c.sweep.n_seeds = 2;
    c.sweep.trials = 2;
    c.task.n_read = 8;
    c.analysis.info_pairs = Some(6);
    c.analysis.pid_pairs = 4;
    c
}

// NaN-safe equality for metric tables.
fn bits(m: &[(String, f64)]) -> Vec<(String, u64)> {
    m.iter().map(|(k, v)| (k.clone(), v.to_bits())).collect()
}

#[test]
fn sweep_matches_single_cells_for_any_thread_count() {
    let mut cfg = small();
    cfg.jobs = Some(1);
    let one = sweep(&cfg).unwrap();
    cfg.jobs = Some(3);
    let three = sweep(&cfg).unwrap();
    assert_eq!(one.cells.len(), 4);
    for (a, b) in one.cells.iter().zip(&three.cells) {
        assert_eq!((a.k_ext, a.seed_index), (b.k_ext, b.seed_index));
        assert_eq!(bits(&a.metrics()), bits(&b.metrics()));
    }
    let alone = run_cell(&cfg, 32, 1);
    let inside = one.cells.iter().find(|c| c.k_ext == 32 && c.seed_index == 1).unwrap();
    assert_eq!(bits(&alone.metrics()), bits(&inside.metrics()));
    assert_eq!(alone.seed, cell_seed(cfg.seed, 32, 1));
}

#[test]
fn all_analyses_run_on_a_small_cell() {
    let mut cfg = small();
    cfg.sweep.info = true;
    cfg.sweep.pid = true;
    cfg.sweep.tasks = true;
    let c = run_cell(&cfg, 8, 0);
    assert!(c.errors.is_empty(), "{:?}", c.errors);
    let info = c.info.as_ref().unwrap();
    assert_eq!(info.n_pairs, 6);
    assert!(info.chain_rule_residual < 1e-9);
    let pid = c.pid.as_ref().unwrap();
    assert!(pid.consistency_residual < 1e-6);
    assert_eq!(c.tasks.len(), cfg.task.tasks.len());
    let names: Vec<String> = c.metrics().into_iter().map(|m| m.0).collect();
    for m in ["rate_median", "m", "vrd", "chi", "te", "pid_syn", "task_parity_15"] {
        assert!(names.iter().any(|n| n == m), "missing {m}");
    }
}

#[test]
fn sweep_outputs_are_listed_in_manifest() {
    let cfg = small();
    let res = sweep(&cfg).unwrap();
    let dir = tempfile_dir();
    let mut out = OutputDir::create(&dir).unwrap();
    write_sweep(&mut out, &cfg, &res, true).unwrap();
    let m = out.finish("sweep", &["sweep".into()], &cfg).unwrap();
    for name in ["cells.csv", "summary.csv", "long_rates.csv", "weights/k8_s0.csv"] {
        let entry = m.files.iter().find(|f| f.path == name).unwrap_or_else(|| panic!("{name}"));
        let bytes = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(entry.sha256, critnet::harness::sha256_hex(&bytes));
    }
    let text = std::fs::read_to_string(dir.join("config.toml")).unwrap();
    assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("critnet-harness-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn switch_curve_has_every_checkpoint() {
    let mut cfg = small();
    cfg.switch.checkpoints = vec![5, 0, 2, 2];
    let c = task_switch(&cfg, 10, 26, 0, true).unwrap();
    let updates: Vec<u64> = c.points.iter().map(|p| p.updates).collect();
    assert_eq!(updates, vec![0, 2, 5]);
    assert!(c.points.iter().all(|p| p.m.is_finite() && p.parity.is_some()));
    assert_eq!(c.weights.snapshots.len(), 3);
}

#[test]
fn finite_size_scan_scales_inputs() {
    let mut cfg = small();
    cfg.fss.n_grid = vec![16, 32];
    cfg.sweep.n_seeds = 1;
    let r = finite_size_scan(&cfg).unwrap();
    assert_eq!(r.points[0].n, 16);
    assert_eq!(r.points[0].k_ext, 4);
    assert_eq!(r.points[1].k_ext, 8);
}

#[test]
fn config_rejects_unknown_keys_and_oversized_degree() {
    assert!(Config::from_toml("[network]\nKext = 4\n").is_err());
    assert!(Config::from_toml("[network]\nN = 8\nK_ext = 9\n").is_err());
    let c = Config::from_toml("seed = 3\n[network]\nK_ext = 12\n").unwrap();
    assert_eq!((c.seed, c.network.k_ext), (3, 12));
}

proptest! {
    #[test]
    fn streams_do_not_collide(seed in any::<u64>(), a in 0u64..64, b in 0u64..64) {
        let s1 = stream_seed(seed, Stream::TrialRun, &[0, a]);
        let s2 = stream_seed(seed, Stream::TrialRun, &[1, b]);
        let s3 = stream_seed(seed, Stream::TrialStimulus, &[0, a]);
        prop_assert_ne!(s1, s2);
        prop_assert_ne!(s1, s3);
    }
}
