use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{frozen_run, median, stream_seed, BurnIn, Stream};
use crate::analysis::{
    bin, characterize, extract_avalanches, fit_avalanches, mean_iei, susceptibility, vrd_trials,
    AvalancheFit, BranchingEstimate, FitRange,
};
use crate::config::{Config, Durations};
use crate::error::{Error, Result};
use crate::info::{entropy, memory_capacity, pair_info};
use crate::net::{NetworkConfig, SpikeRecord};
use crate::pid::{broja_pid, estimate_joint, informations};
use crate::reservoir::{readout_subset, run_task, TaskConfig, TaskKind, TaskResult};
use crate::rng::seeded;
use crate::stimulus::{perturb, Perturbation, StimulusConfig};

/// Pairs used by the MC estimate when all pairs are requested; the lag
/// scan is 100 times the cost of one pairwise measure.
const MC_PAIRS: usize = 32;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityStats {
    /// Hz
    pub rate_median: f64,
    pub rate_mean: f64,
    /// ms
    pub avalanche_bin: f64,
    #[serde(skip)]
    pub sizes: Vec<u64>,
    pub avalanche: Option<AvalancheFit>,
    pub branching: Option<BranchingEstimate>,
}

/// Rates, avalanches and branching statistics of one record. Failures of
/// individual estimators are appended to `errors`.
pub fn analyze_activity(cfg: &Config, spikes: &SpikeRecord, errors: &mut Vec<String>) -> ActivityStats {
    let rates = spikes.rates();
    let mut out = ActivityStats {
        rate_median: median(&rates),
        rate_mean: spikes.mean_rate(),
        ..Default::default()
    };
    if cfg.sweep.avalanches {
        let bin_width = match cfg.analysis.avalanche_bin {
            Some(w) => Ok(w),
            None => mean_iei(spikes),
        };
        let res = bin_width.and_then(|w| {
            out.avalanche_bin = w;
            let binned = bin(spikes, w)?;
            out.sizes = extract_avalanches(&binned.population);
            fit_avalanches(&out.sizes, fit_range(cfg, spikes.n_sources))
        });
        match res {
            Ok(fit) => out.avalanche = Some(fit),
            Err(e) => errors.push(format!("avalanches: {e}")),
        }
    }
    if cfg.sweep.branching {
        let res = bin(spikes, cfg.neuron.tau_ref)
            .and_then(|b| characterize(&b.population_f64(), cfg.neuron.tau_ref));
        match res {
            Ok(b) => out.branching = Some(b),
            Err(e) => errors.push(format!("branching: {e}")),
        }
    }
    out
}

pub(crate) fn fit_range(cfg: &Config, n: usize) -> FitRange {
    FitRange::new(cfg.analysis.s_min, Some(cfg.analysis.s_max_factor * n as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSummary {
    /// Summed over ordered trial pairs.
    pub vrd: f64,
    pub chi_median: f64,
    pub chi: Vec<f64>,
    pub trials: usize,
}

/// Frozen-weight repeats: `trials` runs of `T_static` on one stimulus for
/// the trial-to-trial distance, and `trials` pulse runs of `T_pert` for the
/// susceptibility.
pub fn perturbation_trials(
    cfg: &Config,
    net_cfg: &NetworkConfig,
    burn: &BurnIn,
    seed: u64,
) -> Result<PerturbationSummary> {
    let trials = cfg.sweep.trials;
    if trials < 2 {
        return Err(Error::Config("perturbation analysis needs at least 2 trials".into()));
    }
    let dt = net_cfg.dt;
    let t_static = Durations::ms(cfg.durations.static_trial);
    let stim = StimulusConfig::independent(
        net_cfg.n,
        net_cfg.nu,
        t_static,
        stream_seed(seed, Stream::TrialStimulus, &[0]),
    )
    .generate(dt)?;
    let runs = (0..trials)
        .map(|r| {
            frozen_run(
                net_cfg,
                &burn.topology,
                &burn.weights,
                &stim,
                t_static,
                stream_seed(seed, Stream::TrialRun, &[0, r as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let vrd = vrd_trials(&runs, cfg.sigma_vrd(), cfg.analysis.dt_int)?;

    let t_pert = Durations::ms(cfg.durations.pert);
    let pulse = Perturbation {
        t_pert: Durations::ms(cfg.durations.pert_at),
        n_pert: cfg.analysis.n_pert,
    };
    let mut chi = Vec::with_capacity(trials);
    for r in 0..trials as u64 {
        let base = StimulusConfig::independent(
            net_cfg.n,
            net_cfg.nu,
            t_pert,
            stream_seed(seed, Stream::TrialStimulus, &[1, r]),
        )
        .generate(dt)?;
        let stim = perturb(&base, pulse, stream_seed(seed, Stream::Pulse, &[r]), dt)?;
        let rec = frozen_run(
            net_cfg,
            &burn.topology,
            &burn.weights,
            &stim,
            t_pert,
            stream_seed(seed, Stream::TrialRun, &[1, r]),
        )?;
        chi.push(susceptibility(&rec, pulse.t_pert, net_cfg.k_ext, net_cfg.synapse.d_syn)?);
    }
    Ok(PerturbationSummary {
        vrd,
        chi_median: median(&chi),
        chi,
        trials,
    })
}

/// Ordered `(target, source)` pairs: all of them, or `count` drawn without
/// replacement.
fn ordered_pairs(n: usize, count: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n)
        .flat_map(|t| (0..n).filter(move |&s| s != t).map(move |s| (t, s)))
        .collect();
    match count {
        Some(c) if c < all.len() => {
            let mut idx = sample(&mut seeded(seed), all.len(), c).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| all[i]).collect()
        }
        _ => all,
    }
}

/// Medians over neuron pairs, each normalized by the target entropy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InfoSummary {
    pub n_pairs: usize,
    pub h: f64,
    pub mi: f64,
    pub ais: f64,
    pub te: f64,
    pub joint: f64,
    /// bits·ms, normalized by the target entropy.
    pub mc: f64,
    /// Largest `|ais + te - joint|` over pairs, in bits.
    pub chain_rule_residual: f64,
}

pub fn info_measures(cfg: &Config, spikes: &SpikeRecord, seed: u64) -> Result<InfoSummary> {
    let emb = &cfg.analysis.embedding;
    let binary = bin(spikes, emb.dt_bin)?.binary_all();
    let pairs = ordered_pairs(
        spikes.n_sources,
        cfg.analysis.info_pairs,
        stream_seed(seed, Stream::Pairs, &[0]),
    );
    if pairs.is_empty() {
        return Err(Error::InsufficientData { needed: 2, got: spikes.n_sources });
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    let mut residual: f64 = 0.0;
    for &(t, s) in &pairs {
        let p = pair_info(&binary[t], &binary[s], emb)?;
        residual = residual.max((p.ais + p.te - p.joint).abs());
        let q = p.normalized();
        for (c, v) in cols.iter_mut().zip([p.h, q.mi, q.ais, q.te, q.joint]) {
            c.push(v);
        }
    }
    let mc_pairs = ordered_pairs(
        spikes.n_sources,
        Some(cfg.analysis.info_pairs.unwrap_or(MC_PAIRS).min(MC_PAIRS)),
        stream_seed(seed, Stream::Pairs, &[1]),
    );
    let mut mc = Vec::with_capacity(mc_pairs.len());
    for &(t, s) in &mc_pairs {
        let h = entropy(&binary[t].iter().map(|&v| u32::from(v)).collect::<Vec<_>>())?;
        let (_, value) = memory_capacity(&binary[s], &binary[t], emb)?;
        mc.push(if h > 0.0 { value / h } else { 0.0 });
    }
    Ok(InfoSummary {
        n_pairs: pairs.len(),
        h: median(&cols[0]),
        mi: median(&cols[1]),
        ais: median(&cols[2]),
        te: median(&cols[3]),
        joint: median(&cols[4]),
        mc: median(&mc),
        chain_rule_residual: residual,
    })
}

/// Medians of the normalized decomposition of `I(x_t ; x_t past, x_s past)`
/// over sampled pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PidSummary {
    pub n_pairs: usize,
    pub unq1: f64,
    pub unq2: f64,
    pub shd: f64,
    pub syn: f64,
    pub joint: f64,
    /// Largest violation of the three consistency equations, in bits.
    pub consistency_residual: f64,
    pub max_gap: f64,
}

pub fn pid_measures(cfg: &Config, spikes: &SpikeRecord, seed: u64) -> Result<PidSummary> {
    let emb = &cfg.analysis.embedding;
    let binary = bin(spikes, emb.dt_bin)?.binary_all();
    let pairs = ordered_pairs(
        spikes.n_sources,
        Some(cfg.analysis.pid_pairs),
        stream_seed(seed, Stream::Pairs, &[2]),
    );
    let mut cols: [Vec<f64>; 5] = Default::default();
    let mut residual: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for &(t, s) in &pairs {
        let d = estimate_joint(&binary[t], &binary[t], &binary[s], emb.l)?;
        let r = broja_pid(&d)?;
        let inf = informations(&d);
        residual = residual
            .max((r.unq1 + r.shd - inf.i1).abs())
            .max((r.unq2 + r.shd - inf.i2).abs())
            .max((r.unq1 + r.unq2 + r.shd + r.syn - inf.joint).abs());
        max_gap = max_gap.max(r.duality_gap);
        let q = r.normalized(d.target_entropy());
        for (c, v) in cols.iter_mut().zip([q.unq1, q.unq2, q.shd, q.syn, q.joint_mi]) {
            c.push(v);
        }
    }
    Ok(PidSummary {
        n_pairs: pairs.len(),
        unq1: median(&cols[0]),
        unq2: median(&cols[1]),
        shd: median(&cols[2]),
        syn: median(&cols[3]),
        joint: median(&cols[4]),
        consistency_residual: residual,
        max_gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: TaskKind,
    pub n: usize,
    pub n_read: usize,
    pub result: TaskResult,
}

/// Frozen run under one shared Poisson train covering `T_train + T_test`,
/// then every configured task on a random readout subset.
pub fn task_measures(
    cfg: &Config,
    net_cfg: &NetworkConfig,
    burn: &BurnIn,
    seed: u64,
    errors: &mut Vec<String>,
) -> Result<Vec<TaskRow>> {
    let t_train = Durations::ms(cfg.durations.train);
    let t_total = t_train + Durations::ms(cfg.durations.test);
    let stim = StimulusConfig::shared(
        net_cfg.n,
        net_cfg.nu,
        t_total,
        stream_seed(seed, Stream::TaskStimulus, &[]),
    )
    .generate(net_cfg.dt)?;
    let spikes = frozen_run(
        net_cfg,
        &burn.topology,
        &burn.weights,
        &stim,
        t_total,
        stream_seed(seed, Stream::TaskRun, &[]),
    )?;
    task_rows(cfg, &stim, &spikes, seed, errors)
}

/// Tasks on an existing stimulus/response pair.
pub(crate) fn task_rows(
    cfg: &Config,
    stim: &SpikeRecord,
    spikes: &SpikeRecord,
    seed: u64,
    errors: &mut Vec<String>,
) -> Result<Vec<TaskRow>> {
    let dt_bin = cfg.task.dt_bin;
    let n_train = (Durations::ms(cfg.durations.train) / dt_bin).round() as usize;
    let s = bin(stim, dt_bin)?.binary(0);
    let neurons = bin(spikes, dt_bin)?.binary_all();
    let subset = readout_subset(spikes.n_sources, cfg.task.n_read, stream_seed(seed, Stream::Readout, &[]));
    let activity: Vec<Vec<u8>> = subset.iter().map(|&j| neurons[j].clone()).collect();
    let mut rows = Vec::new();
    for (k, spec) in cfg.task.tasks.iter().enumerate() {
        let tc = TaskConfig {
            task: spec.task,
            n: spec.n,
            n_read: cfg.task.n_read,
            dt_bin,
            t_train: Durations::ms(cfg.durations.train),
            t_test: Durations::ms(cfg.durations.test),
            intercept: cfg.task.intercept,
        };
        match run_task(&s, &activity, n_train, &tc, stream_seed(seed, Stream::Shuffle, &[k as u64])) {
            Ok(result) => rows.push(TaskRow {
                task: spec.task,
                n: spec.n,
                n_read: cfg.task.n_read,
                result,
            }),
            Err(e) => errors.push(format!("task {}-{}: {e}", spec.task.as_str(), spec.n)),
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sampling() {
        assert_eq!(ordered_pairs(3, None, 0).len(), 6);
        let p = ordered_pairs(10, Some(7), 1);
        assert_eq!(p.len(), 7);
        assert!(p.iter().all(|(t, s)| t != s));
        assert_eq!(p, ordered_pairs(10, Some(7), 1));
        assert_eq!(ordered_pairs(3, Some(100), 0).len(), 6);
    }
}
