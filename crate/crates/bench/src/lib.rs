//! Fixtures shared by the benchmarks.

use critnet::analysis::{bin, extract_avalanches};
use critnet::harness::{burn_in, experiment_run, BurnIn};
use critnet::config::Config;
use critnet::net::{NetworkConfig, SpikeRecord};
use critnet::stimulus::StimulusConfig;

/// A short burn-in at `k_ext` and a frozen run of `seconds` after it.
pub fn burned_network(k_ext: usize, seconds: f64) -> (Config, NetworkConfig, BurnIn, SpikeRecord) {
    let mut cfg = Config::default();
    cfg.durations.exp = seconds;
    let net_cfg = cfg.network_config().with_k_ext(k_ext);
    let burn = burn_in(&net_cfg, 60_000.0, 11, None, false).expect("burn-in");
    let spikes = experiment_run(&cfg, &net_cfg, &burn, 12).expect("frozen run");
    (cfg, net_cfg, burn, spikes)
}

pub fn poisson_drive(net_cfg: &NetworkConfig, ms: f64) -> SpikeRecord {
    StimulusConfig::independent(net_cfg.n, net_cfg.nu, ms, 13)
        .generate(net_cfg.dt)
        .expect("stimulus")
}

pub fn avalanche_sizes(spikes: &SpikeRecord, dt_bin: f64) -> Vec<u64> {
    let b = bin(spikes, dt_bin).expect("binning");
    let pop: Vec<u32> = b.population_f64().iter().map(|&v| v as u32).collect();
    extract_avalanches(&pop)
}
