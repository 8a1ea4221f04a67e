use serde::{Deserialize, Serialize};

use super::optimize::NelderMead;
use crate::error::{Error, Result};

const MIN_BINS: usize = 100;
/// A fitted amplitude far above 1 means the decay is not resolved by the
/// lag grid.
const MAX_AMPLITUDE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingEstimate {
    pub m: f64,
    pub h: f64,
    /// `-dt_bin / ln m` (ms); infinite for `m >= 1`, zero for `m <= 0`.
    pub tau_branch: f64,
    /// Fitted autocorrelation time (ms), if the fit succeeded.
    pub tau_corr: Option<f64>,
    pub fano: Option<f64>,
    pub dt_bin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrFit {
    pub amplitude: f64,
    /// In bins.
    pub tau_bins: f64,
    /// In ms.
    pub tau: f64,
    pub max_lag: usize,
}

pub fn tau_from_m(m: f64, dt_bin: f64) -> f64 {
    if m >= 1.0 {
        f64::INFINITY
    } else if m <= 0.0 {
        0.0
    } else {
        -dt_bin / m.ln()
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Least-squares regression of `a(t+1)` on `a(t)`.
pub fn estimate_branching(population: &[f64], dt_bin: f64) -> Result<BranchingEstimate> {
    if population.len() < MIN_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_BINS,
            got: population.len(),
        });
    }
    let n = population.len() - 1;
    let (x, y) = (&population[..n], &population[1..]);
    let (mx, vx) = mean_var(x);
    let my = y.iter().sum::<f64>() / n as f64;
    if !(vx > 0.0) {
        return Err(Error::Undefined(
            "activity has zero variance; regression undefined".into(),
        ));
    }
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n as f64;
    let m = cov / vx;
    Ok(BranchingEstimate {
        m,
        h: my - m * mx,
        tau_branch: tau_from_m(m, dt_bin),
        tau_corr: None,
        fano: None,
        dt_bin,
    })
}

/// `rho(k) = 1/(n var) Σ_{t<n-k} (a_t - mean)(a_{t+k} - mean)` for
/// `k = 0..=max_lag`.
pub fn autocorrelation(population: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = population.len();
    let (mean, var) = mean_var(population);
    if !(var > 0.0) {
        return Err(Error::Undefined("activity has zero variance".into()));
    }
    let centred: Vec<f64> = population.iter().map(|a| a - mean).collect();
    Ok((0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (n as f64 * var)
        })
        .collect())
}

/// Exponential fit `A exp(-k/tau)` to the autocorrelation over lags
/// `1..=min(200, n/10)`.
pub fn autocorrelation_time(population: &[f64], dt_bin: f64) -> Result<AutocorrFit> {
    if population.len() < MIN_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_BINS,
            got: population.len(),
        });
    }
    let max_lag = (population.len() / 10).clamp(1, 200);
    let rho = autocorrelation(population, max_lag)?;
    let (amplitude, tau_bins) = fit_decay(&rho)?;
    Ok(AutocorrFit {
        amplitude,
        tau_bins,
        tau: tau_bins * dt_bin,
        max_lag,
    })
}

/// Least-squares `A exp(-k/tau)` over `rho[1..]`; returns `(A, tau)`.
fn fit_decay(rho: &[f64]) -> Result<(f64, f64)> {
    let max_lag = rho.len() - 1;
    if max_lag < 1 || !(rho[1] > 0.0) {
        return Err(Error::Fit(format!(
            "autocorrelation at lag 1 is {:.4}; exponential fit degenerate",
            rho.get(1).copied().unwrap_or(f64::NAN)
        )));
    }
    // start from a log-linear fit over the leading positive lags
    let mut k_pos = 1;
    while k_pos + 1 < rho.len() && rho[k_pos + 1] > 0.0 {
        k_pos += 1;
    }
    let (tau0, amp0) = if k_pos >= 2 {
        let pts: Vec<(f64, f64)> = (1..=k_pos).map(|k| (k as f64, rho[k].ln())).collect();
        let np = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 {
            (-1.0 / slope, (my - slope * mx).exp())
        } else {
            (max_lag as f64, rho[1])
        }
    } else {
        (1.0 / (-rho[1].ln()).max(1e-3), 1.0)
    };
    let sse = |p: &[f64]| {
        let (amp, tau) = (p[0].exp(), p[1].exp());
        (1..=max_lag)
            .map(|k| (rho[k] - amp * (-(k as f64) / tau).exp()).powi(2))
            .sum::<f64>()
    };
    let nm = NelderMead {
        step: vec![0.2, 0.3],
        f_tol: 1e-16,
        max_iter: 10_000,
    };
    let m = nm.minimize(sse, &[amp0.ln(), tau0.ln()]);
    let (amp, tau) = (m.x[0].exp(), m.x[1].exp());
    if amp > MAX_AMPLITUDE {
        return Err(Error::Fit(format!(
            "autocorrelation decays within one bin (fitted amplitude {amp:.3e})"
        )));
    }
    Ok((amp, tau))
}

/// Variance over mean of the binned population activity.
pub fn fano(population: &[f64]) -> Result<f64> {
    if population.is_empty() {
        return Err(Error::Input("empty activity".into()));
    }
    let (mean, var) = mean_var(population);
    if !(mean > 0.0) {
        return Err(Error::Undefined("silent network; Fano factor undefined".into()));
    }
    Ok(var / mean)
}

/// Branching ratio with the autocorrelation time and Fano factor attached
/// where they are defined.
pub fn characterize(population: &[f64], dt_bin: f64) -> Result<BranchingEstimate> {
    let mut est = estimate_branching(population, dt_bin)?;
    est.tau_corr = autocorrelation_time(population, dt_bin).ok().map(|f| f.tau);
    est.fano = fano(population).ok();
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, Poisson};

    fn ar1(m: f64, h: f64, n: usize, seed: u64) -> Vec<f64> {
        // branching process with Poisson offspring and Poisson drive
        let mut rng = seeded(seed);
        let mut a = h / (1.0 - m);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let lam = m * a + h;
            a = if lam > 0.0 {
                Poisson::new(lam).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            out.push(a);
        }
        out
    }

    #[test]
    fn noiseless_regression() {
        let mut a = vec![100.0];
        for _ in 0..200 {
            let last = *a.last().unwrap();
            a.push(0.5 * last + 2.0);
        }
        let est = estimate_branching(&a, 1.0).unwrap();
        assert!((est.m - 0.5).abs() < 1e-10);
        assert!((est.h - 2.0).abs() < 1e-8);
    }

    #[test]
    fn tau_closed_form() {
        assert!((tau_from_m((-1.0f64).exp(), 4.9) - 4.9).abs() < 1e-12);
        assert_eq!(tau_from_m(1.0, 4.9), f64::INFINITY);
    }

    #[test]
    fn ar1_recovery() {
        let a = ar1(0.9, 2.0, 100_000, 1);
        let est = estimate_branching(&a, 1.0).unwrap();
        assert!((est.m - 0.9).abs() < 0.02, "m {}", est.m);
    }

    #[test]
    fn exact_exponential_curve() {
        let rho: Vec<f64> = (0..=200).map(|k| (-(k as f64) / 10.0).exp()).collect();
        let (amp, tau) = fit_decay(&rho).unwrap();
        assert!((tau - 10.0).abs() < 1e-4, "tau {tau}");
        assert!((amp - 1.0).abs() < 1e-5);
    }

    #[test]
    fn autocorrelation_matches_branching() {
        let a = ar1(0.9, 2.0, 100_000, 2);
        let fit = autocorrelation_time(&a, 1.0).unwrap();
        let expected = -1.0 / 0.9f64.ln();
        assert!((fit.tau_bins - expected).abs() / expected < 0.1, "tau {}", fit.tau_bins);
    }

    #[test]
    fn estimators_consistent_over_m() {
        for (i, &m) in [0.7, 0.8, 0.9, 0.95, 0.97].iter().enumerate() {
            let a = ar1(m, 1.0, 100_000, 10 + i as u64);
            let est = estimate_branching(&a, 1.0).unwrap();
            let fit = autocorrelation_time(&a, 1.0).unwrap();
            let rel = (fit.tau_bins - est.tau_branch).abs() / fit.tau_bins;
            assert!(rel < 0.1, "m {m}: tau_corr {} tau_branch {}", fit.tau_bins, est.tau_branch);
        }
    }

    #[test]
    fn white_noise_autocorrelation_degenerate_or_short() {
        let mut rng = seeded(3);
        let p = Poisson::new(5.0).unwrap();
        let a: Vec<f64> = (0..20_000).map(|_| p.sample(&mut rng)).collect();
        match autocorrelation_time(&a, 1.0) {
            Ok(fit) => assert!(fit.tau_bins < 1.0 || fit.amplitude < 0.05),
            Err(Error::Fit(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn unresolved_decay_is_a_fit_error() {
        let mut rho = vec![0.0; 21];
        rho[0] = 1.0;
        rho[1] = 0.2;
        assert!(matches!(fit_decay(&rho), Err(Error::Fit(_))));
    }

    #[test]
    fn fano_examples() {
        assert_eq!(fano(&[3.0; 50]).unwrap(), 0.0);
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 8.0 }).collect();
        assert!((fano(&alt).unwrap() - 4.0).abs() < 1e-12);
        assert!(fano(&[0.0; 10]).is_err());
        let mut rng = seeded(4);
        let p = Poisson::new(7.0).unwrap();
        let a: Vec<f64> = (0..100_000).map(|_| p.sample(&mut rng)).collect();
        assert!((fano(&a).unwrap() - 1.0).abs() < 0.03);
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(
            estimate_branching(&[2.0; 200], 1.0),
            Err(Error::Undefined(_))
        ));
        assert!(estimate_branching(&[1.0; 50], 1.0).is_err());
    }
}
