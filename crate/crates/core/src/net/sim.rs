use log::warn;
use rand::Rng;

use super::{NetworkConfig, Source, SourceKind, SpikeRecord, Topology};
use crate::error::{Error, Result};
use crate::plasticity::{update_weights, PairingState};
use crate::rng::{derive_seed, seeded, SimRng};

/// Exact one-step propagators of the linear subthreshold dynamics.
#[derive(Clone, Copy, Debug)]
struct Propagator {
    decay_mem: f64,
    decay_exc: f64,
    decay_inh: f64,
    /// Potential gained over one step per unit of current held at step start.
    gain_exc: f64,
    gain_inh: f64,
}

fn current_to_potential(dt: f64, tau_syn: f64, tau_mem: f64, g_leak: f64) -> f64 {
    let dm = (-dt / tau_mem).exp();
    if (tau_syn - tau_mem).abs() < 1e-12 {
        dt / tau_mem * dm / g_leak
    } else {
        let ds = (-dt / tau_syn).exp();
        tau_syn / (tau_syn - tau_mem) * (ds - dm) / g_leak
    }
}

impl Propagator {
    fn new(cfg: &NetworkConfig) -> Self {
        let n = &cfg.neuron;
        let s = &cfg.synapse;
        let g = n.g_leak();
        Self {
            decay_mem: (-cfg.dt / n.tau_mem).exp(),
            decay_exc: (-cfg.dt / s.tau_syn_exc).exp(),
            decay_inh: (-cfg.dt / s.tau_syn_inh).exp(),
            gain_exc: current_to_potential(cfg.dt, s.tau_syn_exc, n.tau_mem, g),
            gain_inh: current_to_potential(cfg.dt, s.tau_syn_inh, n.tau_mem, g),
        }
    }
}

/// Live dynamic variables. Inhibitory current is stored as a magnitude and
/// enters the membrane with negative sign.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub u: Vec<f64>,
    pub i_exc: Vec<f64>,
    pub i_inh: Vec<f64>,
    /// Last step (inclusive) of the refractory clamp, per neuron.
    pub refractory_until: Vec<i64>,
    pub step: u64,
}

impl NetworkState {
    pub fn time(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }
}

/// Snapshots of the weight vector taken during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightTrace {
    /// Run-relative times (ms).
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spikes: SpikeRecord,
    pub trace: WeightTrace,
}

pub struct Network {
    config: NetworkConfig,
    topology: Topology,
    weights: Vec<f64>,
    state: NetworkState,
    prop: Propagator,
    delay: usize,
    refractory: i64,
    period: u64,
    ring: Vec<Vec<Source>>,
    pairing: PairingState,
    noise_rng: SimRng,
    fired: Vec<u32>,
}

impl Network {
    /// `seed` drives the initial potentials and the plasticity noise.
    pub fn new(
        config: &NetworkConfig,
        topology: Topology,
        weights: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if topology.n != config.n {
            return Err(Error::Config("topology size differs from config".into()));
        }
        if weights.len() != topology.n_synapses() {
            return Err(Error::Config(format!(
                "{} weights for {} synapses",
                weights.len(),
                topology.n_synapses()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        let exact = config.synapse.d_syn / config.dt;
        if (exact - exact.round()).abs() > 1e-6 {
            warn!(
                "d_syn = {} ms is not a multiple of dt = {} ms; rounding to {} steps",
                config.synapse.d_syn,
                config.dt,
                config.delay_steps()
            );
        }
        let n = config.n;
        let mut init_rng = seeded(derive_seed(seed, &[0]));
        let nrn = config.neuron;
        let u = (0..n)
            .map(|_| {
                if config.random_initial_potential {
                    nrn.u_reset + (nrn.u_thresh - nrn.u_reset) * init_rng.random::<f64>()
                } else {
                    nrn.u_leak
                }
            })
            .collect();
        let delay = config.delay_steps();
        let n_syn = topology.n_synapses();
        Ok(Self {
            prop: Propagator::new(config),
            delay,
            refractory: config.refractory_steps() as i64,
            period: config.period_steps() as u64,
            ring: vec![Vec::new(); delay + 1],
            pairing: PairingState::new(n, n_syn),
            noise_rng: seeded(derive_seed(seed, &[1])),
            state: NetworkState {
                u,
                i_exc: vec![0.0; n],
                i_inh: vec![0.0; n],
                refractory_until: vec![-1; n],
                step: 0,
            },
            fired: Vec::with_capacity(n),
            config: config.clone(),
            topology,
            weights,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut NetworkState {
        &mut self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time(self.config.dt)
    }

    /// Swaps in a new wiring and weight vector, keeping neuron state.
    /// Pending deliveries survive; pairing history is cleared.
    pub fn rewire(&mut self, topology: Topology, weights: Vec<f64>) -> Result<()> {
        if topology.n != self.config.n || weights.len() != topology.n_synapses() {
            return Err(Error::Config("rewired topology does not fit the network".into()));
        }
        self.config.k_ext = topology.k_ext;
        self.pairing = PairingState::new(self.config.n, topology.n_synapses());
        self.topology = topology;
        self.weights = weights;
        Ok(())
    }

    /// Advances one step. `external` lists the input sources spiking at the
    /// current time; their events arrive `d_syn` later. Returns the neurons
    /// that fired at the current time.
    pub fn step(&mut self, external: &[u32], plastic: bool) -> &[u32] {
        let s = self.state.step;
        let t_now = s as f64 * self.config.dt;
        let params = self.config.plasticity;

        if plastic && s > 0 && s % self.period == 0 {
            update_weights(&mut self.weights, &mut self.pairing, &params, &mut self.noise_rng);
        }

        // deliveries due now
        let slot = (s % (self.delay as u64 + 1)) as usize;
        let mut due = std::mem::take(&mut self.ring[slot]);
        let gamma = self.config.synapse.gamma;
        let synapses = self.topology.synapses();
        for src in due.drain(..) {
            let targets = match src {
                Source::External(i) => self.topology.external_targets(i as usize),
                Source::Neuron(i) => self.topology.recurrent_targets(i as usize),
            };
            for &k in targets {
                let k = k as usize;
                let syn = synapses[k];
                let post = syn.post as usize;
                let amp = gamma * self.weights[k];
                if syn.inhibitory {
                    self.state.i_inh[post] += amp;
                } else {
                    self.state.i_exc[post] += amp;
                }
                if plastic {
                    self.pairing.on_pre(k, post, t_now, &params);
                }
            }
        }
        self.ring[slot] = due;

        // threshold and refractory clamp
        self.fired.clear();
        let u_thresh = self.config.neuron.u_thresh;
        let u_reset = self.config.neuron.u_reset;
        let si = s as i64;
        for j in 0..self.config.n {
            if si <= self.state.refractory_until[j] {
                self.state.u[j] = u_reset;
            } else if self.state.u[j] >= u_thresh {
                self.state.u[j] = u_reset;
                self.state.refractory_until[j] = si + self.refractory;
                self.fired.push(j as u32);
            }
        }
        let arrive = ((s + self.delay as u64) % (self.delay as u64 + 1)) as usize;
        for &j in &self.fired {
            self.ring[arrive].push(Source::Neuron(j));
            if plastic {
                self.pairing.on_post(j as usize, t_now);
            }
        }
        for &i in external {
            self.ring[arrive].push(Source::External(i));
        }

        // exact propagation to the next grid point
        let p = self.prop;
        let u_leak = self.config.neuron.u_leak;
        let st = &mut self.state;
        for j in 0..self.config.n {
            st.u[j] = u_leak
                + (st.u[j] - u_leak) * p.decay_mem
                + p.gain_exc * st.i_exc[j]
                - p.gain_inh * st.i_inh[j];
            st.i_exc[j] *= p.decay_exc;
            st.i_inh[j] *= p.decay_inh;
        }
        st.step += 1;
        &self.fired
    }

    /// Integrates for `duration` ms driven by `stimulus` (times relative to
    /// the start of this call). With `trace_every`, weight snapshots are
    /// taken at that cadence, plus one at the start and one at the end.
    pub fn run(
        &mut self,
        stimulus: &SpikeRecord,
        duration: f64,
        plastic: bool,
        trace_every: Option<f64>,
    ) -> Result<RunOutput> {
        if stimulus.duration + 1e-9 < duration {
            return Err(Error::Input(format!(
                "stimulus covers {} ms but the run needs {} ms",
                stimulus.duration, duration
            )));
        }
        if stimulus.n_sources != self.config.n {
            return Err(Error::Input(format!(
                "stimulus has {} sources, network expects {}",
                stimulus.n_sources, self.config.n
            )));
        }
        let dt = self.config.dt;
        let steps = self.config.steps_for(duration);
        let trace_steps = trace_every.map(|ms| self.config.steps_for(ms).max(1));
        let mut trace = WeightTrace::default();
        let mut out = SpikeRecord::empty(SourceKind::Neuron, self.config.n, duration);
        let events = stimulus.events();
        let mut cursor = 0;
        let mut ext = Vec::with_capacity(self.config.n);
        for k in 0..steps {
            if let Some(every) = trace_steps {
                if k % every == 0 {
                    trace.times.push(k as f64 * dt);
                    trace.snapshots.push(self.weights.clone());
                }
            }
            ext.clear();
            while cursor < events.len() && (events[cursor].time / dt).round() as usize <= k {
                if (events[cursor].time / dt).round() as usize == k {
                    ext.push(events[cursor].source);
                }
                cursor += 1;
            }
            if ext.len() > 1 {
                ext.sort_unstable();
                ext.dedup();
            }
            let t = k as f64 * dt;
            let fired = self.step(&ext, plastic);
            if t < duration {
                for &j in fired {
                    out.push(j, t);
                }
            }
        }
        if trace_steps.is_some() {
            trace.times.push(steps as f64 * dt);
            trace.snapshots.push(self.weights.clone());
        }
        Ok(RunOutput { spikes: out, trace })
    }
}

/// One-shot convenience wrapper: builds a network and runs it.
pub fn run(
    config: &NetworkConfig,
    topology: Topology,
    weights: Vec<f64>,
    stimulus: &SpikeRecord,
    duration: f64,
    plasticity_on: bool,
    seed: u64,
) -> Result<(RunOutput, Vec<f64>)> {
    let mut net = Network::new(config, topology, weights, seed)?;
    let out = net.run(stimulus, duration, plasticity_on, None)?;
    Ok((out, net.into_weights()))
}
