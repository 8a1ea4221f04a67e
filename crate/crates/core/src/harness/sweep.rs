use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::analyze::{fit_range, TaskRow};
use super::{
    analyze_activity, burn_in, cell_seed, experiment_run, info_measures, perturbation_trials,
    pid_measures, quantile, task_measures, ActivityStats, InfoSummary, PerturbationSummary,
    PidSummary,
};
use crate::analysis::{fit_avalanches, AvalancheFit, Preferred};
use crate::config::{Config, Durations};
use crate::error::{Error, Result};
use crate::net::Topology;

/// Everything measured on one `(K_ext, seed)` cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub k_ext: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub activity: Option<ActivityStats>,
    pub perturbation: Option<PerturbationSummary>,
    pub info: Option<InfoSummary>,
    pub pid: Option<PidSummary>,
    pub tasks: Vec<TaskRow>,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub network: Option<(Topology, Vec<f64>)>,
}

impl CellResult {
    /// Flat `(metric, value)` list; absent analyses contribute nothing.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut m: Vec<(String, f64)> = Vec::new();
        let mut put = |k: &str, v: f64| m.push((k.to_string(), v));
        if let Some(a) = &self.activity {
            put("rate_median", a.rate_median);
            put("rate_mean", a.rate_mean);
            if let Some(f) = &a.avalanche {
                put("avalanche_bin", a.avalanche_bin);
                put("n_avalanches", f.n_avalanches as f64);
                put("alpha_s", f.alpha_s);
                put("s_cut", f.s_cut);
                put("lr", f.lr);
                put("lr_p_value", f.lr_p_value);
                put("power_law_preferred", f64::from(u8::from(f.preferred == Preferred::PowerLaw)));
            }
            if let Some(b) = &a.branching {
                put("m", b.m);
                put("tau_branch", b.tau_branch);
                put("tau_corr", b.tau_corr.unwrap_or(f64::NAN));
                put("fano", b.fano.unwrap_or(f64::NAN));
            }
        }
        if let Some(p) = &self.perturbation {
            put("vrd", p.vrd);
            put("chi", p.chi_median);
        }
        if let Some(i) = &self.info {
            put("h", i.h);
            put("mi", i.mi);
            put("ais", i.ais);
            put("te", i.te);
            put("joint_mi", i.joint);
            put("mc", i.mc);
        }
        if let Some(p) = &self.pid {
            put("pid_unq1", p.unq1);
            put("pid_unq2", p.unq2);
            put("pid_shd", p.shd);
            put("pid_syn", p.syn);
            put("pid_joint", p.joint);
        }
        for t in &self.tasks {
            put(&task_metric(t), t.result.i_norm);
        }
        m
    }
}

pub(crate) fn task_metric(t: &TaskRow) -> String {
    format!("task_{}_{}", t.task.as_str(), t.n)
}

/// Burn-in, frozen `T_exp` run and every analysis enabled in the sweep
/// section. Failures are recorded in the result rather than returned.
pub fn run_cell(cfg: &Config, k_ext: usize, seed_index: usize) -> CellResult {
    let seed = cell_seed(cfg.seed, k_ext, seed_index);
    let mut cell = CellResult {
        k_ext,
        seed_index,
        seed,
        activity: None,
        perturbation: None,
        info: None,
        pid: None,
        tasks: Vec::new(),
        errors: Vec::new(),
        network: None,
    };
    let net_cfg = cfg.network_config().with_k_ext(k_ext);
    let burn = match burn_in(&net_cfg, Durations::ms(cfg.durations.burnin), seed, None, false) {
        Ok(b) => b,
        Err(e) => {
            cell.errors.push(format!("burn-in: {e}"));
            return cell;
        }
    };
    let sw = &cfg.sweep;
    if sw.avalanches || sw.branching || sw.info || sw.pid {
        match experiment_run(cfg, &net_cfg, &burn, seed) {
            Ok(spikes) => {
                cell.activity = Some(analyze_activity(cfg, &spikes, &mut cell.errors));
                if sw.info {
                    match info_measures(cfg, &spikes, seed) {
                        Ok(v) => cell.info = Some(v),
                        Err(e) => cell.errors.push(format!("info: {e}")),
                    }
                }
                if sw.pid {
                    match pid_measures(cfg, &spikes, seed) {
                        Ok(v) => cell.pid = Some(v),
                        Err(e) => cell.errors.push(format!("pid: {e}")),
                    }
                }
            }
            Err(e) => cell.errors.push(format!("experiment run: {e}")),
        }
    }
    if sw.perturbation {
        match perturbation_trials(cfg, &net_cfg, &burn, seed) {
            Ok(v) => cell.perturbation = Some(v),
            Err(e) => cell.errors.push(format!("perturbation: {e}")),
        }
    }
    if sw.tasks {
        let mut errs = Vec::new();
        match task_measures(cfg, &net_cfg, &burn, seed, &mut errs) {
            Ok(rows) => cell.tasks = rows,
            Err(e) => errs.push(format!("tasks: {e}")),
        }
        cell.errors.extend(errs);
    }
    for e in &cell.errors {
        warn!("K_ext={k_ext} seed #{seed_index}: {e}");
    }
    cell.network = Some((burn.topology, burn.weights));
    cell
}

/// Runs `f(0..n)` on up to `jobs` threads; results come back in index order.
pub fn run_jobs<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                slots.lock().expect("result slots poisoned")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|v| v.expect("job finished"))
        .collect()
}

pub(crate) fn job_count(cfg: &Config) -> usize {
    cfg.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Median and 5-95 % interval of one metric at one `K_ext`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub k_ext: usize,
    pub metric: String,
    pub n: usize,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

/// Avalanche sizes of all seeds at one `K_ext`, fitted together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    pub k_ext: usize,
    pub n_seeds: usize,
    pub fit: Option<AvalancheFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
    pub pooled: Vec<PooledFit>,
}

impl SweepResult {
    pub fn aggregate(&self, k_ext: usize, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.k_ext == k_ext && a.metric == metric)
    }

    /// Per-seed values of a metric at one `K_ext`, in seed order.
    pub fn values(&self, k_ext: usize, metric: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.k_ext == k_ext)
            .filter_map(|c| c.metrics().into_iter().find(|(k, _)| k == metric).map(|(_, v)| v))
            .collect()
    }
}

fn grid(cfg: &Config) -> Result<Vec<usize>> {
    let mut g = cfg.sweep.kext_grid.clone();
    if g.is_empty() || cfg.sweep.n_seeds == 0 {
        return Err(Error::Config("sweep needs a K_ext grid and at least one seed".into()));
    }
    if let Some(&k) = g.iter().find(|&&k| k > cfg.network.n) {
        return Err(Error::Config(format!("K_ext = {k} exceeds N = {}", cfg.network.n)));
    }
    g.dedup();
    Ok(g)
}

pub fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    let mut keys: Vec<usize> = cells.iter().map(|c| c.k_ext).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = Vec::new();
    for k in keys {
        let mut names: Vec<String> = Vec::new();
        let mut vals: Vec<Vec<f64>> = Vec::new();
        for c in cells.iter().filter(|c| c.k_ext == k) {
            for (name, v) in c.metrics() {
                match names.iter().position(|n| *n == name) {
                    Some(i) => vals[i].push(v),
                    None => {
                        names.push(name);
                        vals.push(vec![v]);
                    }
                }
            }
        }
        for (metric, v) in names.into_iter().zip(vals) {
            out.push(Aggregate {
                k_ext: k,
                metric,
                n: v.iter().filter(|x| x.is_finite()).count(),
                median: quantile(&v, 0.5),
                p05: quantile(&v, 0.05),
                p95: quantile(&v, 0.95),
            });
        }
    }
    out
}

pub fn pooled_avalanches(cfg: &Config, cells: &[CellResult]) -> Vec<PooledFit> {
    let mut keys: Vec<usize> = cells.iter().map(|c| c.k_ext).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|k| {
            let members: Vec<&ActivityStats> = cells
                .iter()
                .filter(|c| c.k_ext == k)
                .filter_map(|c| c.activity.as_ref())
                .collect();
            let sizes: Vec<u64> = members.iter().flat_map(|a| a.sizes.iter().copied()).collect();
            let res = fit_avalanches(&sizes, fit_range(cfg, cfg.network.n));
            PooledFit {
                k_ext: k,
                n_seeds: members.len(),
                error: res.as_ref().err().map(|e| e.to_string()),
                fit: res.ok(),
            }
        })
        .collect()
}

/// Every `(K_ext, seed)` cell of the grid, run in parallel, then aggregated.
pub fn sweep(cfg: &Config) -> Result<SweepResult> {
    cfg.validate()?;
    let g = grid(cfg)?;
    let n_seeds = cfg.sweep.n_seeds;
    let total = g.len() * n_seeds;
    let done = AtomicUsize::new(0);
    let cells = run_jobs(total, job_count(cfg), |i| {
        let (k, s) = (g[i / n_seeds], i % n_seeds);
        let c = run_cell(cfg, k, s);
        let d = done.fetch_add(1, Ordering::Relaxed) + 1;
        info!("cell {d}/{total} done (K_ext={k}, seed #{s})");
        c
    });
    Ok(SweepResult {
        aggregates: aggregate(&cells),
        pooled: if cfg.sweep.avalanches {
            pooled_avalanches(cfg, &cells)
        } else {
            Vec::new()
        },
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jobs_keep_order() {
        let v = run_jobs(50, 4, |i| i * i);
        assert_eq!(v, (0..50).map(|i| i * i).collect::<Vec<_>>());
        assert!(run_jobs(0, 3, |i| i).is_empty());
    }

    #[test]
    fn grid_rejects_oversized_k() {
        let mut cfg = Config::default();
        cfg.sweep.kext_grid = vec![8, 40];
        assert!(grid(&cfg).is_err());
    }
}
