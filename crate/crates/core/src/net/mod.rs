//! Clock-driven current-based LIF network with delayed delta-current
//! synapses.

mod params;
mod record;
mod sim;
mod topology;
mod weights;

pub use params::{NeuronParams, SynapseParams};
pub use record::{SourceKind, SpikeEvent, SpikeRecord};
pub use sim::{run, Network, NetworkState, RunOutput, WeightTrace};
pub use topology::{transfer_weights, Source, Synapse, Topology, TopologyMode};
pub use weights::{read_weights_csv, write_weights_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plasticity::PlasticityParams;

/// Everything needed to build and integrate a network, except seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    #[serde(rename = "K_ext", alias = "k_ext")]
    pub k_ext: usize,
    #[serde(rename = "N_inh", alias = "n_inh")]
    pub n_inh: usize,
    pub mode: TopologyMode,
    /// Integration step (ms).
    pub dt: f64,
    /// Poisson input rate (Hz).
    pub nu: f64,
    /// Start each run from potentials drawn uniformly in
    /// `[u_reset, u_thresh)` instead of `u_leak`.
    pub random_initial_potential: bool,
    pub neuron: NeuronParams,
    pub synapse: SynapseParams,
    pub plasticity: PlasticityParams,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n: 32,
            k_ext: 8,
            n_inh: 6,
            mode: TopologyMode::SlotExact,
            dt: 0.1,
            nu: 29.0,
            random_initial_potential: true,
            neuron: NeuronParams::default(),
            synapse: SynapseParams::default(),
            plasticity: PlasticityParams::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        self.synapse.validate()?;
        self.plasticity.validate()?;
        if self.k_ext > self.n || self.n_inh > self.n || self.n == 0 {
            return Err(Error::Config(format!(
                "need 0 <= k_ext, n_inh <= N and N > 0 (N={}, k_ext={}, n_inh={})",
                self.n, self.k_ext, self.n_inh
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        let fastest = self
            .neuron
            .tau_mem
            .min(self.synapse.tau_syn_exc)
            .min(self.synapse.tau_syn_inh);
        if self.dt > fastest / 10.0 + 1e-12 {
            return Err(Error::Config(format!(
                "dt = {} ms exceeds a tenth of the fastest time constant ({fastest} ms)",
                self.dt
            )));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::Config("input rate must be non-negative".into()));
        }
        let period = self.plasticity.period / self.dt;
        if (period - period.round()).abs() > 1e-6 {
            return Err(Error::Config("dt must divide the plasticity period".into()));
        }
        if self.delay_steps() == 0 {
            return Err(Error::Config("synaptic delay shorter than one step".into()));
        }
        Ok(())
    }

    /// Delay in steps, rounded to the grid.
    pub fn delay_steps(&self) -> usize {
        (self.synapse.d_syn / self.dt).round() as usize
    }

    pub fn refractory_steps(&self) -> usize {
        (self.neuron.tau_ref / self.dt).round() as usize
    }

    pub fn period_steps(&self) -> usize {
        (self.plasticity.period / self.dt).round().max(1.0) as usize
    }

    pub fn steps_for(&self, duration: f64) -> usize {
        (duration / self.dt).round() as usize
    }

    pub fn build_topology(&self, seed: u64) -> Result<Topology> {
        Topology::build(self.n, self.k_ext, self.n_inh, self.mode, seed)
    }

    /// Copy with a different input degree.
    pub fn with_k_ext(&self, k_ext: usize) -> Self {
        Self {
            k_ext,
            ..self.clone()
        }
    }
}
