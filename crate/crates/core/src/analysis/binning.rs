use crate::error::{Error, Result};
use crate::net::SpikeRecord;

/// Spike counts on a regular grid; bin `t` covers `[t*dt_bin, (t+1)*dt_bin)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedSeries {
    pub dt_bin: f64,
    pub n_bins: usize,
    /// `counts[i][t]` for source `i`.
    pub counts: Vec<Vec<u32>>,
    pub population: Vec<u32>,
}

impl BinnedSeries {
    pub fn n_sources(&self) -> usize {
        self.counts.len()
    }

    /// `min(1, count)` for one source.
    pub fn binary(&self, source: usize) -> Vec<u8> {
        self.counts[source].iter().map(|&c| u8::from(c > 0)).collect()
    }

    pub fn binary_all(&self) -> Vec<Vec<u8>> {
        (0..self.n_sources()).map(|i| self.binary(i)).collect()
    }

    pub fn population_f64(&self) -> Vec<f64> {
        self.population.iter().map(|&a| f64::from(a)).collect()
    }
}

/// Index of the bin containing `time`; tolerant to grid round-off.
#[inline]
pub(crate) fn bin_index(time: f64, dt_bin: f64) -> usize {
    (time / dt_bin + 1e-9).floor() as usize
}

pub fn bin(record: &SpikeRecord, dt_bin: f64) -> Result<BinnedSeries> {
    if !(dt_bin > 0.0) {
        return Err(Error::Input("bin width must be positive".into()));
    }
    let n_bins = (record.duration / dt_bin - 1e-9).ceil().max(0.0) as usize;
    let mut counts = vec![vec![0u32; n_bins]; record.n_sources];
    let mut population = vec![0u32; n_bins];
    for e in record.events() {
        let b = bin_index(e.time, dt_bin).min(n_bins.saturating_sub(1));
        counts[e.source as usize][b] += 1;
        population[b] += 1;
    }
    Ok(BinnedSeries {
        dt_bin,
        n_bins,
        counts,
        population,
    })
}

/// Mean gap between consecutive events of the merged population train.
pub fn mean_iei(record: &SpikeRecord) -> Result<f64> {
    let ev = record.events();
    if ev.len() < 2 {
        return Err(Error::Undefined(format!(
            "mean inter-event interval needs two events, got {}",
            ev.len()
        )));
    }
    Ok((ev[ev.len() - 1].time - ev[0].time) / (ev.len() - 1) as f64)
}
