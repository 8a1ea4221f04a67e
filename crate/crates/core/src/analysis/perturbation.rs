use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::SpikeRecord;

/// Gaussian traces are evaluated out to this many widths; beyond it the
/// kernel is below 1e-14.
const KERNEL_REACH: f64 = 8.0;
const SILENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub vrd: f64,
    pub chi: f64,
    /// ms
    pub sigma_vrd: f64,
}

fn add_trace(trace: &mut [f64], times: &[f64], sigma: f64, dt_int: f64) {
    let reach = KERNEL_REACH * sigma;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let n = trace.len();
    for &s in times {
        let lo = ((s - reach) / dt_int).ceil().max(0.0) as usize;
        let hi = (((s + reach) / dt_int).floor().max(-1.0) + 1.0) as usize;
        for (i, v) in trace.iter_mut().enumerate().take(hi.min(n)).skip(lo) {
            let d = i as f64 * dt_int - s;
            *v += (-d * d * inv).exp();
        }
    }
}

/// Normalized squared difference of Gaussian-filtered traces, summed over
/// neurons, integrated on `[0, max duration)` by the rectangle rule and
/// divided by `sigma`.
pub fn vrd(a: &SpikeRecord, b: &SpikeRecord, sigma: f64, dt_int: f64) -> Result<f64> {
    if a.n_sources != b.n_sources {
        return Err(Error::Input(format!(
            "records differ in size ({} vs {})",
            a.n_sources, b.n_sources
        )));
    }
    if !(sigma > 0.0 && dt_int > 0.0) {
        return Err(Error::Input("sigma and integration step must be positive".into()));
    }
    let domain = a.duration.max(b.duration);
    let n_pts = (domain / dt_int).round() as usize;
    let (ta, tb) = (a.trains(), b.trains());
    let mut xa = vec![0.0; n_pts];
    let mut xb = vec![0.0; n_pts];
    let mut total = 0.0;
    for (sa, sb) in ta.iter().zip(&tb) {
        if sa.is_empty() && sb.is_empty() {
            continue;
        }
        xa.iter_mut().for_each(|v| *v = 0.0);
        xb.iter_mut().for_each(|v| *v = 0.0);
        add_trace(&mut xa, sa, sigma, dt_int);
        add_trace(&mut xb, sb, sigma, dt_int);
        for (u, v) in xa.iter().zip(&xb) {
            let s = u + v;
            if s >= SILENT {
                let d = u - v;
                total += d * d / (s * s);
            }
        }
    }
    Ok(total * dt_int / sigma)
}

/// Sum of [`vrd`] over all ordered pairs of distinct trials.
pub fn vrd_trials(trials: &[SpikeRecord], sigma: f64, dt_int: f64) -> Result<f64> {
    let mut total = 0.0;
    for m in 0..trials.len() {
        for n in m + 1..trials.len() {
            total += 2.0 * vrd(&trials[m], &trials[n], sigma, dt_int)?;
        }
    }
    Ok(total)
}

/// `(a(t_pert + dt) - a(t_pert)) / K_ext^2` with bins of width `dt_bin`
/// starting at `t_pert`.
pub fn susceptibility(record: &SpikeRecord, t_pert: f64, k_ext: usize, dt_bin: f64) -> Result<f64> {
    if !(t_pert >= 0.0 && t_pert + 2.0 * dt_bin <= record.duration + 1e-9) {
        return Err(Error::Input(format!(
            "perturbation at {t_pert} ms leaves no response bin inside {} ms",
            record.duration
        )));
    }
    if k_ext == 0 {
        return Err(Error::Undefined("susceptibility needs K_ext > 0".into()));
    }
    let count = |lo: f64, hi: f64| {
        record
            .events()
            .iter()
            .filter(|e| e.time >= lo - 1e-9 && e.time < hi - 1e-9)
            .count() as f64
    };
    let before = count(t_pert, t_pert + dt_bin);
    let after = count(t_pert + dt_bin, t_pert + 2.0 * dt_bin);
    Ok((after - before) / (k_ext * k_ext) as f64)
}
