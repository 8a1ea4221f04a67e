use serde::{Deserialize, Serialize};

use super::analyze::analyze_activity;
use super::sweep::job_count;
use super::{burn_in, experiment_run, run_jobs};
use crate::analysis::{fit_avalanches, AvalancheFit, FitRange};
use crate::config::{Config, Durations};
use crate::error::{Error, Result};
use crate::net::TopologyMode;
use crate::rng::derive_seed;

/// Keeps scan seeds apart from sweep cells.
const FSS_TAG: u64 = 0x0f55;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FssPoint {
    pub n: usize,
    pub k_ext: usize,
    pub n_inh: usize,
    pub n_seeds: usize,
    pub rate_median: f64,
    pub fit: Option<AvalancheFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FssResult {
    pub points: Vec<FssPoint>,
    /// Slope of `ln s_cut` against `ln N`.
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
}

/// Ordinary least squares of `ln y` on `ln x`: `(slope, intercept)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Undefined("all sizes identical".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Burn-in and frozen runs at each size of `fss.n_grid` with the
/// probabilistic wiring and `K_ext = kext_ratio * N`; avalanche sizes of all
/// seeds at one size are fitted together.
pub fn finite_size_scan(cfg: &Config) -> Result<FssResult> {
    cfg.validate()?;
    let sizes = &cfg.fss.n_grid;
    let n_seeds = cfg.sweep.n_seeds;
    if n_seeds == 0 {
        return Err(Error::Config("finite-size scan needs at least one seed".into()));
    }
    let configs: Vec<Config> = sizes
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.network.n = n;
            c.network.k_ext = (cfg.fss.kext_ratio * n as f64).round() as usize;
            c.network.n_inh = ((cfg.network.n_inh * n) as f64 / cfg.network.n as f64).round() as usize;
            c.network.topology = TopologyMode::Probabilistic;
            c.task.n_read = c.task.n_read.min(n);
            c.sweep.avalanches = true;
            c.sweep.branching = false;
            c
        })
        .collect();
    let runs = run_jobs(sizes.len() * n_seeds, job_count(cfg), |i| {
        let (c, s) = (&configs[i / n_seeds], i % n_seeds);
        let net_cfg = c.network_config();
        let seed = derive_seed(cfg.seed, &[FSS_TAG, c.network.n as u64, s as u64]);
        let burn = burn_in(&net_cfg, Durations::ms(c.durations.burnin), seed, None, false)?;
        let spikes = experiment_run(c, &net_cfg, &burn, seed)?;
        let mut errors = Vec::new();
        Ok::<_, Error>(analyze_activity(c, &spikes, &mut errors))
    });
    let mut points = Vec::with_capacity(sizes.len());
    for (k, c) in configs.iter().enumerate() {
        let mut sizes_n = Vec::new();
        let mut rates = Vec::new();
        let mut error = None;
        for r in &runs[k * n_seeds..(k + 1) * n_seeds] {
            match r {
                Ok(a) => {
                    sizes_n.extend_from_slice(&a.sizes);
                    rates.push(a.rate_median);
                }
                Err(e) => error = Some(e.to_string()),
            }
        }
        let range = FitRange::new(c.analysis.s_min, Some(c.analysis.s_max_factor * c.network.n as u64));
        let fit = match fit_avalanches(&sizes_n, range) {
            Ok(f) => Some(f),
            Err(e) => {
                error.get_or_insert(e.to_string());
                None
            }
        };
        points.push(FssPoint {
            n: c.network.n,
            k_ext: c.network.k_ext,
            n_inh: c.network.n_inh,
            n_seeds: rates.len(),
            rate_median: super::median(&rates),
            fit,
            error,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.fit.as_ref().map(|f| (p.n as f64, f.s_cut)))
        .unzip();
    let reg = loglog_slope(&x, &y).ok();
    Ok(FssResult {
        points,
        exponent: reg.map(|r| r.0),
        intercept: reg.map(|r| r.1),
    })
}
