//! Neuron and synapse parameter blocks.
//!
//! Potentials are in mV, times in ms, capacitance in nF. Currents use the
//! unit for which `I / g_leak` is a potential in mV (nA against a leak
//! conductance in µS), so one weight unit carries `gamma / g_leak` mV of
//! drive before synaptic filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    pub u_thresh: f64,
    pub u_leak: f64,
    pub u_reset: f64,
    #[serde(rename = "C_m", alias = "c_m")]
    pub c_m: f64,
    pub tau_mem: f64,
    pub tau_ref: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            u_thresh: 554.0,
            u_leak: 384.0,
            u_reset: 319.0,
            c_m: 2.38,
            tau_mem: 1.6,
            tau_ref: 4.9,
        }
    }
}

impl NeuronParams {
    /// Leak conductance `C_m / tau_mem` (µS).
    #[inline]
    pub fn g_leak(&self) -> f64 {
        self.c_m / self.tau_mem
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_reset < self.u_thresh) {
            return Err(Error::Config(format!(
                "u_reset ({}) must lie below u_thresh ({})",
                self.u_reset, self.u_thresh
            )));
        }
        if !(self.tau_mem > 0.0) || !(self.c_m > 0.0) {
            return Err(Error::Config("tau_mem and c_m must be positive".into()));
        }
        if !(self.tau_ref >= 0.0) {
            return Err(Error::Config("tau_ref must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynapseParams {
    pub tau_syn_exc: f64,
    pub tau_syn_inh: f64,
    pub d_syn: f64,
    /// Current per unit weight, shared by external and recurrent synapses.
    pub gamma: f64,
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self {
            tau_syn_exc: 3.7,
            tau_syn_inh: 2.8,
            d_syn: 1.9,
            gamma: 8.96,
        }
    }
}

impl SynapseParams {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.tau_syn_exc, self.tau_syn_inh, self.d_syn, self.gamma]
            .iter()
            .all(|v| *v > 0.0);
        if !all_positive {
            return Err(Error::Config("synapse parameters must be strictly positive".into()));
        }
        Ok(())
    }
}
