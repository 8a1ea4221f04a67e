//! Experiment configuration file.
//!
//! Keys follow the parameter symbols of the model (`u_thresh`, `C_m`,
//! `K_ext`, `T_burnin`, ...). Every key is optional; missing keys take the
//! desk-scale defaults.
//!
//! ```toml
//! seed = 7
//!
//! [network]
//! N = 32
//! K_ext = 8
//!
//! [plasticity]
//! T = 1000.0
//!
//! [durations]
//! T_burnin = 300.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::EmbeddingConfig;
use crate::net::{NetworkConfig, NeuronParams, SynapseParams, TopologyMode};
use crate::plasticity::PlasticityParams;
use crate::reservoir::TaskKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K_ext")]
    pub k_ext: usize,
    #[serde(rename = "N_inh")]
    pub n_inh: usize,
    /// Hz
    pub nu: f64,
    /// ms
    pub dt: f64,
    pub topology: TopologyMode,
    pub random_initial_potential: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let d = NetworkConfig::default();
        Self {
            n: d.n,
            k_ext: d.k_ext,
            n_inh: d.n_inh,
            nu: d.nu,
            dt: d.dt,
            topology: d.mode,
            random_initial_potential: d.random_initial_potential,
        }
    }
}

/// Experiment durations in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    #[serde(rename = "T_burnin")]
    pub burnin: f64,
    #[serde(rename = "T_exp")]
    pub exp: f64,
    #[serde(rename = "T_static")]
    pub static_trial: f64,
    #[serde(rename = "T_train")]
    pub train: f64,
    #[serde(rename = "T_test")]
    pub test: f64,
    #[serde(rename = "T_pert")]
    pub pert: f64,
    /// Pulse time inside the perturbation run.
    #[serde(rename = "t_pert")]
    pub pert_at: f64,
}

impl Durations {
    pub fn paper() -> Self {
        Self {
            burnin: 625.0,
            exp: 104.0,
            static_trial: 1.0,
            train: 104.0,
            test: 21.0,
            pert: 2.0,
            pert_at: 1.0,
        }
    }

    pub fn desk() -> Self {
        Self {
            burnin: 300.0,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.burnin,
            self.exp,
            self.static_trial,
            self.train,
            self.test,
            self.pert,
            self.pert_at,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("durations must be non-negative".into()));
        }
        if !(self.pert_at < self.pert) {
            return Err(Error::Config(format!(
                "t_pert ({} s) must lie before the end of T_pert ({} s)",
                self.pert_at, self.pert
            )));
        }
        Ok(())
    }

    pub fn ms(seconds: f64) -> f64 {
        seconds * 1000.0
    }
}

impl Default for Durations {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Avalanche bin width in ms; the mean inter-event interval when unset.
    pub avalanche_bin: Option<f64>,
    pub s_min: u64,
    /// Upper fit bound as a multiple of `N`.
    pub s_max_factor: u64,
    /// Pulse size for the susceptibility.
    #[serde(rename = "N_pert")]
    pub n_pert: usize,
    /// Gaussian width for the van Rossum distance in ms; `tau_ref` when unset.
    pub sigma_vrd: Option<f64>,
    /// VRD integration step in ms.
    pub dt_int: f64,
    pub embedding: EmbeddingConfig,
    /// Neuron pairs per run for the pairwise measures; all ordered pairs
    /// when unset.
    pub info_pairs: Option<usize>,
    /// Neuron pairs per run for the decomposition.
    pub pid_pairs: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            avalanche_bin: None,
            s_min: 4,
            s_max_factor: 3,
            n_pert: 6,
            sigma_vrd: None,
            dt_int: 0.1,
            embedding: EmbeddingConfig::default(),
            info_pairs: None,
            pid_pairs: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    #[serde(rename = "N_read")]
    pub n_read: usize,
    /// ms
    pub dt_bin: f64,
    pub intercept: bool,
    pub tasks: Vec<TaskSpec>,
}

impl Default for TaskSection {
    fn default() -> Self {
        let tasks = [(TaskKind::Parity, 5), (TaskKind::Parity, 15), (TaskKind::Sum, 5)]
            .into_iter()
            .map(|(task, n)| TaskSpec { task, n })
            .collect();
        Self {
            n_read: 16,
            dt_bin: 1.0,
            intercept: true,
            tasks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kext_grid: Vec<usize>,
    pub n_seeds: usize,
    /// Frozen-weight trials per weight matrix for VRD and susceptibility.
    pub trials: usize,
    pub avalanches: bool,
    pub branching: bool,
    pub perturbation: bool,
    pub info: bool,
    pub pid: bool,
    pub tasks: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kext_grid: vec![8, 10, 12, 16, 24, 32],
            n_seeds: 10,
            trials: 10,
            avalanches: true,
            branching: true,
            perturbation: true,
            info: false,
            pid: false,
            tasks: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchSection {
    pub from: usize,
    pub to: usize,
    /// Update counts after the switch at which the network is evaluated.
    pub checkpoints: Vec<u64>,
    /// Parity history used for the performance curve.
    pub parity_n: usize,
    /// Slots that change role keep their weight instead of restarting at zero.
    pub keep_reassigned: bool,
}

impl Default for SwitchSection {
    fn default() -> Self {
        Self {
            from: 10,
            to: 26,
            checkpoints: vec![0, 1, 2, 5, 10, 20, 50, 100, 200, 300, 500, 750, 1000, 1500],
            parity_n: 5,
            keep_reassigned: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FssSection {
    pub n_grid: Vec<usize>,
    pub kext_ratio: f64,
}

impl Default for FssSection {
    fn default() -> Self {
        Self {
            n_grid: vec![16, 32, 64, 128],
            kext_ratio: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; all available cores when unset.
    pub jobs: Option<usize>,
    pub network: NetworkSection,
    pub neuron: NeuronParams,
    pub synapse: SynapseParams,
    pub plasticity: PlasticityParams,
    pub durations: Durations,
    pub analysis: AnalysisConfig,
    pub task: TaskSection,
    pub sweep: SweepSection,
    pub switch: SwitchSection,
    pub fss: FssSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            jobs: None,
            network: NetworkSection::default(),
            neuron: NeuronParams::default(),
            synapse: SynapseParams::default(),
            plasticity: PlasticityParams::default(),
            durations: Durations::default(),
            analysis: AnalysisConfig::default(),
            task: TaskSection::default(),
            sweep: SweepSection::default(),
            switch: SwitchSection::default(),
            fss: FssSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Full-scale protocol: paper durations and 100 seeds.
    pub fn paper_scale(mut self) -> Self {
        self.durations = Durations {
            burnin: Durations::paper().burnin,
            ..self.durations
        };
        self.sweep.n_seeds = 100;
        self
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            n: self.network.n,
            k_ext: self.network.k_ext,
            n_inh: self.network.n_inh,
            mode: self.network.topology,
            dt: self.network.dt,
            nu: self.network.nu,
            random_initial_potential: self.network.random_initial_potential,
            neuron: self.neuron,
            synapse: self.synapse,
            plasticity: self.plasticity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network_config().validate()?;
        self.durations.validate()?;
        self.analysis.embedding.validate()?;
        if self.task.n_read > self.network.n {
            return Err(Error::Config("N_read exceeds N".into()));
        }
        if self.fss.n_grid.is_empty() || !(self.fss.kext_ratio >= 0.0 && self.fss.kext_ratio <= 1.0) {
            return Err(Error::Config("fss needs sizes and a ratio in [0, 1]".into()));
        }
        Ok(())
    }

    /// `sigma_vrd`, defaulting to the refractory period.
    pub fn sigma_vrd(&self) -> f64 {
        self.analysis.sigma_vrd.unwrap_or(self.neuron.tau_ref)
    }
}
