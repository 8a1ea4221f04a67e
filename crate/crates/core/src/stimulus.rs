//! Input spike streams: independent or shared Poisson trains, replayed
//! records, and perturbation pulses.

use std::path::PathBuf;

use rand::seq::index::sample;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{SourceKind, SpikeEvent, SpikeRecord};
use crate::rng::{derive_seed, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusKind {
    IndependentPoisson,
    SharedPoisson,
    Replay,
}

/// `n_pert` extra spikes on distinct sources at `t_pert` (ms).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub t_pert: f64,
    pub n_pert: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusConfig {
    pub kind: StimulusKind,
    /// Hz
    pub nu: f64,
    pub n_sources: usize,
    /// ms
    pub duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    /// Spike file read when `kind` is `Replay`.
    #[serde(default)]
    pub replay_file: Option<PathBuf>,
}

impl StimulusConfig {
    pub fn independent(n_sources: usize, nu: f64, duration: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::IndependentPoisson,
            nu,
            n_sources,
            duration,
            seed,
            perturbation: None,
            replay_file: None,
        }
    }

    pub fn shared(n_sources: usize, nu: f64, duration: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::SharedPoisson,
            ..Self::independent(n_sources, nu, duration, seed)
        }
    }

    pub fn with_perturbation(mut self, t_pert: f64, n_pert: usize) -> Self {
        self.perturbation = Some(Perturbation { t_pert, n_pert });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return Err(Error::Config("input rate must be finite and non-negative".into()));
        }
        if !(self.duration >= 0.0) {
            return Err(Error::Config("stimulus duration must be non-negative".into()));
        }
        if let Some(p) = self.perturbation {
            if !(p.t_pert >= 0.0 && p.t_pert < self.duration) {
                return Err(Error::Config(format!(
                    "perturbation at {} ms outside [0, {})",
                    p.t_pert, self.duration
                )));
            }
            if p.n_pert > self.n_sources {
                return Err(Error::Config(format!(
                    "{} perturbation spikes need as many distinct sources, have {}",
                    p.n_pert, self.n_sources
                )));
            }
        }
        Ok(())
    }

    /// Realizes the stimulus on a grid of step `dt` (ms).
    pub fn generate(&self, dt: f64) -> Result<SpikeRecord> {
        self.validate()?;
        let base = match self.kind {
            StimulusKind::IndependentPoisson => {
                let mut slots: Vec<(u64, u32)> = Vec::new();
                for src in 0..self.n_sources {
                    let mut rng = seeded(derive_seed(self.seed, &[src as u64]));
                    for k in poisson_slots(self.nu, self.duration, dt, &mut rng) {
                        slots.push((k, src as u32));
                    }
                }
                slots.sort_unstable();
                to_record(slots, self.n_sources, self.duration, dt)?
            }
            StimulusKind::SharedPoisson => {
                let mut rng = seeded(derive_seed(self.seed, &[0]));
                let train = poisson_slots(self.nu, self.duration, dt, &mut rng);
                let mut slots = Vec::with_capacity(train.len() * self.n_sources);
                for k in train {
                    for src in 0..self.n_sources {
                        slots.push((k, src as u32));
                    }
                }
                to_record(slots, self.n_sources, self.duration, dt)?
            }
            StimulusKind::Replay => {
                let path = self.replay_file.as_ref().ok_or_else(|| {
                    Error::Config("replay stimulus needs a spike file".into())
                })?;
                let file = std::fs::File::open(path)?;
                let rec = SpikeRecord::read_from(std::io::BufReader::new(file))?;
                if rec.n_sources != self.n_sources {
                    return Err(Error::Input(format!(
                        "replayed record has {} sources, expected {}",
                        rec.n_sources, self.n_sources
                    )));
                }
                rec
            }
        };
        match self.perturbation {
            Some(p) => perturb(&base, p, derive_seed(self.seed, &[u64::MAX]), dt),
            None => Ok(base),
        }
    }
}

/// Grid slots of one homogeneous Poisson train, duplicates merged.
fn poisson_slots<R: rand::Rng>(nu: f64, duration: f64, dt: f64, rng: &mut R) -> Vec<u64> {
    let mut out = Vec::new();
    if nu <= 0.0 || duration <= 0.0 {
        return out;
    }
    let exp = Exp::new(nu * 1e-3).expect("positive rate");
    let n_slots = (duration / dt).round() as u64;
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration {
            break;
        }
        let k = (t / dt).round() as u64;
        if k >= n_slots {
            break;
        }
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

fn to_record(
    mut slots: Vec<(u64, u32)>,
    n_sources: usize,
    duration: f64,
    dt: f64,
) -> Result<SpikeRecord> {
    slots.dedup();
    let events = slots
        .into_iter()
        .map(|(k, source)| SpikeEvent {
            source,
            time: k as f64 * dt,
        })
        .collect();
    SpikeRecord::from_events(SourceKind::Stimulus, n_sources, duration, events)
}

/// Adds a pulse of `n_pert` spikes on distinct random sources at `t_pert`,
/// merging with spikes already present in that slot.
pub fn perturb(
    record: &SpikeRecord,
    pert: Perturbation,
    seed: u64,
    dt: f64,
) -> Result<SpikeRecord> {
    if !(pert.t_pert >= 0.0 && pert.t_pert < record.duration) {
        return Err(Error::Input(format!(
            "perturbation at {} ms outside the record",
            pert.t_pert
        )));
    }
    if pert.n_pert > record.n_sources {
        return Err(Error::Input("more perturbation spikes than sources".into()));
    }
    let k_pert = (pert.t_pert / dt).round() as u64;
    let mut slots: Vec<(u64, u32)> = record
        .events()
        .iter()
        .map(|e| ((e.time / dt).round() as u64, e.source))
        .collect();
    let mut rng = seeded(seed);
    for src in sample(&mut rng, record.n_sources, pert.n_pert) {
        slots.push((k_pert, src as u32));
    }
    slots.sort_unstable();
    to_record(slots, record.n_sources, record.duration, dt)
}

/// Sources hit by the pulse, for bookkeeping.
pub fn perturbed_sources(n_sources: usize, n_pert: usize, seed: u64) -> Vec<u32> {
    let mut rng = seeded(seed);
    let mut v: Vec<u32> = sample(&mut rng, n_sources, n_pert)
        .into_iter()
        .map(|s| s as u32)
        .collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        let rec = StimulusConfig::independent(8, 0.0, 1000.0, 1)
            .generate(0.1)
            .unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn shared_streams_identical() {
        let rec = StimulusConfig::shared(32, 29.0, 5000.0, 4)
            .generate(0.1)
            .unwrap();
        let trains = rec.trains();
        assert!(!trains[0].is_empty());
        assert!(trains.iter().all(|t| t == &trains[0]));
    }

    #[test]
    fn events_on_grid_and_in_range() {
        let rec = StimulusConfig::independent(4, 200.0, 1000.0, 9)
            .generate(0.1)
            .unwrap();
        for e in rec.events() {
            let k = e.time / 0.1;
            assert!((k - k.round()).abs() < 1e-9);
            assert!(e.time < 1000.0);
        }
        rec.validate().unwrap();
    }

    #[test]
    fn perturbation_adds_distinct_sources() {
        let base = StimulusConfig::independent(32, 29.0, 2000.0, 2);
        let plain = base.generate(0.1).unwrap();
        let pert = base.clone().with_perturbation(1000.0, 6).generate(0.1).unwrap();
        let at: Vec<u32> = pert
            .events()
            .iter()
            .filter(|e| (e.time - 1000.0).abs() < 1e-9)
            .map(|e| e.source)
            .collect();
        assert!(at.len() >= 6);
        let before = plain
            .events()
            .iter()
            .filter(|e| (e.time - 1000.0).abs() < 1e-9)
            .count();
        assert!(pert.len() - plain.len() <= 6 && pert.len() - plain.len() >= 6 - before);
    }

    #[test]
    fn perturbation_outside_duration_rejected() {
        let cfg = StimulusConfig::independent(32, 29.0, 500.0, 2).with_perturbation(600.0, 6);
        assert!(cfg.generate(0.1).is_err());
    }
}
