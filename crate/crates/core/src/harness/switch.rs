use serde::{Deserialize, Serialize};

use super::analyze::task_rows;
use super::sweep::job_count;
use super::{
    burn_in, burn_in_network, cell_seed, experiment_run, frozen_run, quantile, run_jobs,
    stream_seed, BurnIn, Stream,
};
use crate::analysis::{bin, estimate_branching};
use crate::config::{Config, Durations, TaskSpec};
use crate::error::{Error, Result};
use crate::net::{transfer_weights, NetworkConfig, SpikeRecord};
use crate::reservoir::TaskKind;
use crate::stimulus::StimulusConfig;
use crate::WeightTrace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchPoint {
    /// Plasticity updates since the switch.
    pub updates: u64,
    /// Simulated seconds since the switch.
    pub seconds: f64,
    pub m: f64,
    /// Hz
    pub rate: f64,
    /// Normalized parity information, when evaluated.
    pub parity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchCurve {
    pub from: usize,
    pub to: usize,
    pub seed_index: usize,
    pub points: Vec<SwitchPoint>,
    #[serde(skip)]
    pub weights: WeightTrace,
}

fn branching_of(spikes: &SpikeRecord, tau_ref: f64) -> Result<f64> {
    let b = bin(spikes, tau_ref)?;
    Ok(estimate_branching(&b.population_f64(), tau_ref)?.m)
}

fn evaluate(cfg: &Config, net_cfg: &NetworkConfig, state: &BurnIn, seed: u64, parity: bool) -> Result<(f64, f64, Option<f64>)> {
    let spikes = experiment_run(cfg, net_cfg, state, seed)?;
    let m = branching_of(&spikes, cfg.neuron.tau_ref)?;
    let rate = spikes.mean_rate();
    let parity = if parity {
        let t_total = Durations::ms(cfg.durations.train + cfg.durations.test);
        let stim = StimulusConfig::shared(
            net_cfg.n,
            net_cfg.nu,
            t_total,
            stream_seed(seed, Stream::TaskStimulus, &[]),
        )
        .generate(net_cfg.dt)?;
        let resp = frozen_run(
            net_cfg,
            &state.topology,
            &state.weights,
            &stim,
            t_total,
            stream_seed(seed, Stream::TaskRun, &[]),
        )?;
        let mut task_cfg = cfg.clone();
        task_cfg.task.tasks = vec![TaskSpec {
            task: TaskKind::Parity,
            n: cfg.switch.parity_n,
        }];
        let mut errs = Vec::new();
        let rows = task_rows(&task_cfg, &stim, &resp, seed, &mut errs)?;
        rows.first().map(|r| r.result.i_norm)
    } else {
        None
    };
    Ok((m, rate, parity))
}

/// Burns in at `from`, rewires to `to` and continues plasticity, evaluating
/// a frozen copy of the network at each checkpoint (update counts after the
/// switch). Slots that change role restart from zero weight unless
/// `keep_reassigned` is set.
pub fn task_switch(cfg: &Config, from: usize, to: usize, seed_index: usize, parity: bool) -> Result<SwitchCurve> {
    cfg.validate()?;
    let mut checkpoints = cfg.switch.checkpoints.clone();
    if checkpoints.is_empty() {
        return Err(Error::Input("task switch needs at least one checkpoint".into()));
    }
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let seed = cell_seed(cfg.seed, from, seed_index);
    let from_cfg = cfg.network_config().with_k_ext(from);
    let to_cfg = cfg.network_config().with_k_ext(to);
    let (mut net, _) = burn_in_network(&from_cfg, Durations::ms(cfg.durations.burnin), seed, None)?;
    let old = net.topology().clone();
    let new = old.rewired(to, stream_seed(seed, Stream::Rewire, &[to as u64]))?;
    let w = if cfg.switch.keep_reassigned {
        net.weights().to_vec()
    } else {
        transfer_weights(&old, net.weights(), &new)
    };
    net.rewire(new, w)?;

    let period = cfg.plasticity.period;
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut trace = WeightTrace::default();
    let mut done = 0u64;
    for (i, &c) in checkpoints.iter().enumerate() {
        if c > done {
            let dur = (c - done) as f64 * period;
            let stim = StimulusConfig::independent(
                to_cfg.n,
                to_cfg.nu,
                dur,
                stream_seed(seed, Stream::SwitchStimulus, &[to as u64, i as u64]),
            )
            .generate(to_cfg.dt)?;
            net.run(&stim, dur, true, None)?;
            done = c;
        }
        let state = BurnIn {
            topology: net.topology().clone(),
            weights: net.weights().to_vec(),
            trace: WeightTrace::default(),
            spikes: None,
        };
        let eval_seed = stream_seed(seed, Stream::SwitchRun, &[to as u64, c]);
        let (m, rate, par) = evaluate(cfg, &to_cfg, &state, eval_seed, parity)?;
        trace.times.push(c as f64 * period);
        trace.snapshots.push(state.weights);
        points.push(SwitchPoint {
            updates: c,
            seconds: c as f64 * period / 1000.0,
            m,
            rate,
            parity: par,
        });
    }
    Ok(SwitchCurve {
        from,
        to,
        seed_index,
        points,
        weights: trace,
    })
}

/// 5 and 95 % quantiles of `m` over fresh burn-ins at `k_ext`.
pub fn fresh_band(cfg: &Config, k_ext: usize, n_seeds: usize) -> Result<(f64, f64, Vec<f64>)> {
    let net_cfg = cfg.network_config().with_k_ext(k_ext);
    let ms = run_jobs(n_seeds, job_count(cfg), |s| -> Result<f64> {
        let seed = cell_seed(cfg.seed, k_ext, s);
        let burn = burn_in(&net_cfg, Durations::ms(cfg.durations.burnin), seed, None, false)?;
        let spikes = experiment_run(cfg, &net_cfg, &burn, seed)?;
        branching_of(&spikes, cfg.neuron.tau_ref)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok((quantile(&ms, 0.05), quantile(&ms, 0.95), ms))
}

/// First checkpoint from which `m` stays inside `band` up to the last
/// checkpoint; `None` when the final point is outside.
pub fn relaxation(points: &[SwitchPoint], band: (f64, f64)) -> Option<u64> {
    let inside = |p: &SwitchPoint| p.m >= band.0 && p.m <= band.1;
    let mut first = None;
    for p in points.iter().rev() {
        if inside(p) {
            first = Some(p.updates);
        } else {
            break;
        }
    }
    first
}
