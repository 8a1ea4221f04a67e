//! Experiment protocols: burn-in, frozen-weight analysis runs, the K_ext
//! sweep, the task switch and the finite-size scan.

mod analyze;
mod fss;
mod output;
mod sweep;
mod switch;

pub use analyze::{
    analyze_activity, info_measures, perturbation_trials, pid_measures, task_measures,
    ActivityStats, InfoSummary, PerturbationSummary, PidSummary, TaskRow,
};
pub use fss::{finite_size_scan, loglog_slope, FssPoint, FssResult};
pub use output::{sha256_hex, write_fss, write_sweep, write_switch, FileEntry, Manifest, OutputDir};
pub use sweep::{
    aggregate, pooled_avalanches, run_cell, run_jobs, sweep, Aggregate, CellResult, PooledFit,
    SweepResult,
};
pub use switch::{fresh_band, relaxation, task_switch, SwitchCurve, SwitchPoint};

use crate::config::{Config, Durations};
use crate::error::Result;
use crate::net::{Network, NetworkConfig, RunOutput, SpikeRecord, Topology, WeightTrace};
use crate::rng::derive_seed;
use crate::stimulus::StimulusConfig;

/// Independent random streams of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    BurnStimulus = 2,
    BurnRun = 3,
    ExpStimulus = 4,
    ExpRun = 5,
    TrialStimulus = 6,
    TrialRun = 7,
    TaskStimulus = 8,
    TaskRun = 9,
    Readout = 10,
    Shuffle = 11,
    Pairs = 12,
    Pulse = 13,
    Rewire = 14,
    SwitchStimulus = 15,
    SwitchRun = 16,
}

pub fn stream_seed(cell_seed: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut p = Vec::with_capacity(path.len() + 1);
    p.push(stream as u64);
    p.extend_from_slice(path);
    derive_seed(cell_seed, &p)
}

/// Seed of grid cell `(k_ext, seed_index)` under the master seed.
pub fn cell_seed(master: u64, k_ext: usize, seed_index: usize) -> u64 {
    derive_seed(master, &[k_ext as u64, seed_index as u64])
}

/// Weights after burn-in together with the wiring they belong to.
#[derive(Clone, Debug)]
pub struct BurnIn {
    pub topology: Topology,
    pub weights: Vec<f64>,
    pub trace: WeightTrace,
    /// Burn-in spikes, kept only on request.
    pub spikes: Option<SpikeRecord>,
}

/// Plastic run from zero weights under independent Poisson drive.
pub fn burn_in(
    net_cfg: &NetworkConfig,
    burnin_ms: f64,
    seed: u64,
    trace_every: Option<f64>,
    keep_spikes: bool,
) -> Result<BurnIn> {
    let (net, out) = burn_in_network(net_cfg, burnin_ms, seed, trace_every)?;
    Ok(BurnIn {
        topology: net.topology().clone(),
        weights: net.into_weights(),
        trace: out.trace,
        spikes: keep_spikes.then_some(out.spikes),
    })
}

/// Same as [`burn_in`] but hands back the live network, so that plasticity
/// can continue from the exact final state.
pub fn burn_in_network(
    net_cfg: &NetworkConfig,
    burnin_ms: f64,
    seed: u64,
    trace_every: Option<f64>,
) -> Result<(Network, RunOutput)> {
    let topology = net_cfg.build_topology(stream_seed(seed, Stream::Topology, &[]))?;
    let weights = vec![0.0; topology.n_synapses()];
    let stim = StimulusConfig::independent(
        net_cfg.n,
        net_cfg.nu,
        burnin_ms,
        stream_seed(seed, Stream::BurnStimulus, &[]),
    )
    .generate(net_cfg.dt)?;
    let mut net = Network::new(net_cfg, topology, weights, stream_seed(seed, Stream::BurnRun, &[]))?;
    let out = net.run(&stim, burnin_ms, true, trace_every)?;
    Ok((net, out))
}

/// Frozen-weight run from a fresh network state.
pub fn frozen_run(
    net_cfg: &NetworkConfig,
    topology: &Topology,
    weights: &[f64],
    stimulus: &SpikeRecord,
    duration: f64,
    run_seed: u64,
) -> Result<SpikeRecord> {
    let mut net = Network::new(net_cfg, topology.clone(), weights.to_vec(), run_seed)?;
    Ok(net.run(stimulus, duration, false, None)?.spikes)
}

/// Frozen run of `T_exp` under independent Poisson drive.
pub fn experiment_run(cfg: &Config, net_cfg: &NetworkConfig, burn: &BurnIn, seed: u64) -> Result<SpikeRecord> {
    let t = Durations::ms(cfg.durations.exp);
    let stim = StimulusConfig::independent(
        net_cfg.n,
        net_cfg.nu,
        t,
        stream_seed(seed, Stream::ExpStimulus, &[]),
    )
    .generate(net_cfg.dt)?;
    frozen_run(
        net_cfg,
        &burn.topology,
        &burn.weights,
        &stim,
        t,
        stream_seed(seed, Stream::ExpRun, &[]),
    )
}

pub(crate) fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Linear-interpolation quantile of the finite values; NaN when none.
pub(crate) fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, f64::NAN, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn zero_burn_in_keeps_zero_weights() {
        let cfg = NetworkConfig::default();
        let b = burn_in(&cfg, 0.0, 3, None, false).unwrap();
        assert!(b.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn feed_forward_burn_in_has_no_recurrent_weights() {
        let cfg = NetworkConfig::default().with_k_ext(32);
        let b = burn_in(&cfg, 2000.0, 4, None, false).unwrap();
        assert!(b.topology.synapses().iter().all(|s| s.source.is_external()));
    }
}
