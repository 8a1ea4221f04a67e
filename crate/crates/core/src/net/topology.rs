//! Synapse-slot wiring between external sources and neurons.
//!
//! In slot-exact mode every neuron owns `N` slots and slot `s` is fed either
//! by external source `s` or by neuron `s`, never both. Autapses (slot `j`
//! of neuron `j` being recurrent) are allowed. In probabilistic mode each
//! neuron has up to `2N` slots: slot `s < N` is external source `s`, slot
//! `N + s` is neuron `s`, and each is present independently.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyMode {
    #[default]
    SlotExact,
    Probabilistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    External(u32),
    Neuron(u32),
}

impl Source {
    pub fn is_external(self) -> bool {
        matches!(self, Source::External(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Synapse {
    pub post: u32,
    pub slot: u32,
    pub source: Source,
    pub inhibitory: bool,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub n: usize,
    pub k_ext: usize,
    pub n_inh: usize,
    pub mode: TopologyMode,
    pub seed: u64,
    n_slots: usize,
    synapses: Vec<Synapse>,
    post_offsets: Vec<usize>,
    ext_targets: Vec<Vec<u32>>,
    rec_targets: Vec<Vec<u32>>,
}

impl Topology {
    /// Draws a random wiring. Deterministic for a fixed `seed`.
    pub fn build(
        n: usize,
        k_ext: usize,
        n_inh: usize,
        mode: TopologyMode,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("network needs at least one neuron".into()));
        }
        if k_ext > n {
            return Err(Error::Config(format!("k_ext ({k_ext}) exceeds N ({n})")));
        }
        if n_inh > n {
            return Err(Error::Config(format!("n_inh ({n_inh}) exceeds N ({n})")));
        }
        let mut rng = seeded(seed);
        let mut synapses = Vec::with_capacity(n * n);
        match mode {
            TopologyMode::SlotExact => {
                for post in 0..n {
                    let mut external = vec![false; n];
                    for s in sample(&mut rng, n, k_ext) {
                        external[s] = true;
                    }
                    let mut inhibitory = vec![false; n];
                    for s in sample(&mut rng, n, n_inh) {
                        inhibitory[s] = true;
                    }
                    for slot in 0..n {
                        let source = if external[slot] {
                            Source::External(slot as u32)
                        } else {
                            Source::Neuron(slot as u32)
                        };
                        synapses.push(Synapse {
                            post: post as u32,
                            slot: slot as u32,
                            source,
                            inhibitory: inhibitory[slot],
                        });
                    }
                }
            }
            TopologyMode::Probabilistic => {
                let p_ext = k_ext as f64 / n as f64;
                let p_rec = 1.0 - p_ext;
                let p_inh = n_inh as f64 / n as f64;
                for post in 0..n {
                    for slot in 0..2 * n {
                        let (p, source) = if slot < n {
                            (p_ext, Source::External(slot as u32))
                        } else {
                            (p_rec, Source::Neuron((slot - n) as u32))
                        };
                        if rng.random::<f64>() < p {
                            synapses.push(Synapse {
                                post: post as u32,
                                slot: slot as u32,
                                source,
                                inhibitory: rng.random::<f64>() < p_inh,
                            });
                        }
                    }
                }
            }
        }
        let n_slots = match mode {
            TopologyMode::SlotExact => n,
            TopologyMode::Probabilistic => 2 * n,
        };
        Ok(Self::from_synapses(n, k_ext, n_inh, mode, seed, n_slots, synapses))
    }

    fn from_synapses(
        n: usize,
        k_ext: usize,
        n_inh: usize,
        mode: TopologyMode,
        seed: u64,
        n_slots: usize,
        synapses: Vec<Synapse>,
    ) -> Self {
        let mut post_offsets = vec![0usize; n + 1];
        for syn in &synapses {
            post_offsets[syn.post as usize + 1] += 1;
        }
        for j in 0..n {
            post_offsets[j + 1] += post_offsets[j];
        }
        let mut ext_targets = vec![Vec::new(); n];
        let mut rec_targets = vec![Vec::new(); n];
        for (idx, syn) in synapses.iter().enumerate() {
            match syn.source {
                Source::External(i) => ext_targets[i as usize].push(idx as u32),
                Source::Neuron(i) => rec_targets[i as usize].push(idx as u32),
            }
        }
        Self {
            n,
            k_ext,
            n_inh,
            mode,
            seed,
            n_slots,
            synapses,
            post_offsets,
            ext_targets,
            rec_targets,
        }
    }

    /// Reassigns slots so that each neuron has `k_ext` external slots,
    /// changing as few slots as possible. Inhibitory flags stay with their
    /// slot. Only slot-exact wirings can be rewired.
    pub fn rewired(&self, k_ext: usize, seed: u64) -> Result<Self> {
        if self.mode != TopologyMode::SlotExact {
            return Err(Error::Config("only slot-exact topologies can be rewired".into()));
        }
        if k_ext > self.n {
            return Err(Error::Config(format!("k_ext ({k_ext}) exceeds N ({})", self.n)));
        }
        let mut rng = seeded(seed);
        let mut synapses = self.synapses.clone();
        for post in 0..self.n {
            let range = self.post_offsets[post]..self.post_offsets[post + 1];
            let block = &mut synapses[range];
            let (ext, rec): (Vec<usize>, Vec<usize>) =
                (0..block.len()).partition(|&s| block[s].source.is_external());
            let (pool, to_external) = if k_ext > ext.len() {
                (rec, true)
            } else {
                (ext, false)
            };
            let flips = k_ext.abs_diff(block.iter().filter(|s| s.source.is_external()).count());
            for pick in sample(&mut rng, pool.len(), flips) {
                let syn = &mut block[pool[pick]];
                syn.source = if to_external {
                    Source::External(syn.slot)
                } else {
                    Source::Neuron(syn.slot)
                };
            }
        }
        Ok(Self::from_synapses(
            self.n,
            k_ext,
            self.n_inh,
            self.mode,
            seed,
            self.n_slots,
            synapses,
        ))
    }

    #[inline]
    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    #[inline]
    pub fn n_synapses(&self) -> usize {
        self.synapses.len()
    }

    #[inline]
    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Index range of the synapses onto neuron `post`.
    #[inline]
    pub fn range_of(&self, post: usize) -> std::ops::Range<usize> {
        self.post_offsets[post]..self.post_offsets[post + 1]
    }

    pub fn synapses_of(&self, post: usize) -> &[Synapse] {
        &self.synapses[self.range_of(post)]
    }

    /// Synapse indices driven by external source `i`.
    #[inline]
    pub fn external_targets(&self, i: usize) -> &[u32] {
        &self.ext_targets[i]
    }

    /// Synapse indices driven by neuron `i`.
    #[inline]
    pub fn recurrent_targets(&self, i: usize) -> &[u32] {
        &self.rec_targets[i]
    }

    /// External source ids feeding neuron `post`.
    pub fn ext_map(&self, post: usize) -> Vec<u32> {
        self.synapses_of(post)
            .iter()
            .filter_map(|s| match s.source {
                Source::External(i) => Some(i),
                Source::Neuron(_) => None,
            })
            .collect()
    }

    /// Presynaptic neuron ids feeding neuron `post`.
    pub fn rec_map(&self, post: usize) -> Vec<u32> {
        self.synapses_of(post)
            .iter()
            .filter_map(|s| match s.source {
                Source::Neuron(i) => Some(i),
                Source::External(_) => None,
            })
            .collect()
    }

    pub fn inhibitory_count(&self, post: usize) -> usize {
        self.synapses_of(post).iter().filter(|s| s.inhibitory).count()
    }

    /// Index of the synapse occupying `(post, slot)`, if present.
    pub fn find(&self, post: usize, slot: usize) -> Option<usize> {
        let range = self.range_of(post);
        self.synapses[range.clone()]
            .binary_search_by_key(&(slot as u32), |s| s.slot)
            .ok()
            .map(|k| range.start + k)
    }
}

/// Carries weights over to a rewired topology: slots that keep their role
/// keep their weight, reassigned or new slots start at zero.
pub fn transfer_weights(old: &Topology, weights: &[f64], new: &Topology) -> Vec<f64> {
    new.synapses()
        .iter()
        .map(|syn| {
            old.find(syn.post as usize, syn.slot as usize)
                .filter(|&k| old.synapses()[k].source == syn.source)
                .map_or(0.0, |k| weights[k])
        })
        .collect()
}
