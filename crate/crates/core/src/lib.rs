//! Plastic spiking reservoir simulator with criticality diagnostics,
//! information-theoretic measures and reservoir benchmarks.

pub mod analysis;
pub mod config;
pub mod error;
pub mod harness;
pub mod info;
pub mod net;
pub mod pid;
pub mod plasticity;
pub mod reservoir;
pub mod rng;
pub mod stimulus;

pub use error::{Error, Result};
pub use net::{
    NetworkConfig, NetworkState, NeuronParams, SourceKind, SpikeEvent, SpikeRecord,
    SynapseParams, Topology, TopologyMode, WeightTrace,
};
pub use plasticity::PlasticityParams;
pub use stimulus::{Perturbation, StimulusConfig, StimulusKind};
