//! Discrete maximum-likelihood fits of avalanche sizes and the
//! likelihood-ratio model comparison.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::optimize::NelderMead;
use crate::error::{Error, Result};

/// Upper summation bound for normalizing constants of unbounded ranges.
pub const S_MAX: u64 = 1_000_000;

const MIN_SAMPLES: usize = 50;
const LL_TOL: f64 = 1e-6;
/// Largest cutoff the optimizer may explore.
const MAX_LN_CUT: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub s_min: u64,
    /// `None` means unbounded (normalized up to [`S_MAX`]).
    pub s_max: Option<u64>,
}

impl FitRange {
    pub fn new(s_min: u64, s_max: Option<u64>) -> Self {
        Self { s_min, s_max }
    }

    /// `[4, 3N]`, the convention used for network avalanches.
    pub fn for_network(n: usize) -> Self {
        Self::new(4, Some(3 * n as u64))
    }

    pub fn upper(&self) -> u64 {
        self.s_max.unwrap_or(S_MAX)
    }

    fn contains(&self, s: u64) -> bool {
        s >= self.s_min && s <= self.upper()
    }

    fn validate(&self) -> Result<()> {
        if self.s_min == 0 || self.upper() < self.s_min {
            return Err(Error::Input(format!(
                "invalid fit range [{}, {}]",
                self.s_min,
                self.upper()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preferred {
    PowerLaw,
    Exponential,
    Undecided,
}

impl Preferred {
    pub fn as_str(self) -> &'static str {
        match self {
            Preferred::PowerLaw => "power-law",
            Preferred::Exponential => "exponential",
            Preferred::Undecided => "undecided",
        }
    }
}

/// `P(s) ∝ s^-alpha exp(-s/s_cut)` on the fit range, `alpha > 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TplFit {
    pub alpha: f64,
    pub s_cut: f64,
    pub loglik: f64,
    pub n: usize,
    pub iterations: usize,
}

/// `P(s) ∝ exp(-s/beta)` on the fit range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub beta: f64,
    pub loglik: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvalancheFit {
    pub n_avalanches: usize,
    pub n_in_range: usize,
    pub alpha_s: f64,
    pub s_cut: f64,
    pub fit_range: FitRange,
    pub loglik_pl: f64,
    pub loglik_exp: f64,
    pub preferred: Preferred,
    /// Normalized log-likelihood ratio (power law minus exponential).
    pub lr: f64,
    pub lr_p_value: f64,
}

fn in_range(sizes: &[u64], range: &FitRange) -> Result<Vec<u64>> {
    range.validate()?;
    let v: Vec<u64> = sizes.iter().copied().filter(|&s| range.contains(s)).collect();
    if v.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: v.len(),
        });
    }
    Ok(v)
}

/// `ln Σ_{s=s_min}^{upper} s^-alpha e^{-s/s_cut}`, summed in log space
/// relative to the first term and stopped once the tail is negligible.
fn tpl_log_norm(alpha: f64, s_cut: f64, range: &FitRange) -> f64 {
    let s0 = range.s_min as f64;
    let lead = -alpha * s0.ln() - s0 / s_cut;
    let mut sum = 0.0;
    let upper = range.upper();
    let mut s = range.s_min;
    while s <= upper {
        let sf = s as f64;
        let term = (-alpha * sf.ln() - sf / s_cut - lead).exp();
        sum += term;
        // beyond many cutoffs the remaining mass is below double precision
        if term < 1e-18 * sum && sf > s0 + 40.0 * s_cut {
            break;
        }
        s += 1;
    }
    lead + sum.ln()
}

fn exp_log_norm(beta: f64, range: &FitRange) -> f64 {
    let q_ln = -1.0 / beta;
    let len = (range.upper() - range.s_min + 1) as f64;
    // ln[q^{s_min} (1 - q^len) / (1 - q)]
    range.s_min as f64 * q_ln + (-(len * q_ln).exp_m1()).ln() - (-q_ln.exp_m1()).ln()
}

fn tpl_from_params(p: &[f64]) -> (f64, f64) {
    (1.0 + p[0].exp(), p[1].min(MAX_LN_CUT).exp())
}

/// Discrete truncated power-law MLE. The optimizer works on
/// `(ln(alpha - 1), ln s_cut)` starting from `alpha = 1.5` and a cutoff of a
/// third of the upper bound (`N` for the network range).
pub fn fit_truncated_powerlaw(sizes: &[u64], range: FitRange) -> Result<TplFit> {
    let data = in_range(sizes, &range)?;
    let n = data.len() as f64;
    let sum_ln: f64 = data.iter().map(|&s| (s as f64).ln()).sum();
    let sum_s: f64 = data.iter().map(|&s| s as f64).sum();
    let negll = |p: &[f64]| {
        let (alpha, s_cut) = tpl_from_params(p);
        alpha * sum_ln + sum_s / s_cut + n * tpl_log_norm(alpha, s_cut, &range)
    };
    let cut0 = match range.s_max {
        Some(m) => (m as f64 / 3.0).max(range.s_min as f64 + 1.0),
        None => 100.0,
    };
    let nm = NelderMead::new(vec![0.5, 0.7], LL_TOL);
    let m = nm.minimize(negll, &[0.5f64.ln(), cut0.ln()]);
    if !m.converged {
        return Err(Error::Fit(format!(
            "truncated power law: no convergence after {} iterations (alpha {:.4}, ln s_cut {:.3}, -ll {:.6})",
            m.iterations,
            1.0 + m.x[0].exp(),
            m.x[1],
            m.f
        )));
    }
    let (alpha, s_cut) = tpl_from_params(&m.x);
    Ok(TplFit {
        alpha,
        s_cut,
        loglik: -m.f,
        n: data.len(),
        iterations: m.iterations,
    })
}

pub fn fit_exponential(sizes: &[u64], range: FitRange) -> Result<ExpFit> {
    let data = in_range(sizes, &range)?;
    let n = data.len() as f64;
    let sum_s: f64 = data.iter().map(|&s| s as f64).sum();
    let excess = (sum_s / n - range.s_min as f64).max(0.5);
    let negll = |p: &[f64]| {
        let beta = p[0].exp();
        sum_s / beta + n * exp_log_norm(beta, &range)
    };
    let nm = NelderMead::new(vec![0.3], LL_TOL);
    let m = nm.minimize(negll, &[excess.ln()]);
    if !m.converged {
        return Err(Error::Fit(format!(
            "exponential: no convergence after {} iterations",
            m.iterations
        )));
    }
    Ok(ExpFit {
        beta: m.x[0].exp(),
        loglik: -m.f,
        n: data.len(),
    })
}

/// Vuong test between the fitted truncated power law and exponential.
/// Returns `(preferred, normalized ratio, two-sided p)`.
pub fn compare_models(sizes: &[u64], range: FitRange) -> Result<(Preferred, f64, f64)> {
    let tpl = fit_truncated_powerlaw(sizes, range)?;
    let ex = fit_exponential(sizes, range)?;
    Ok(vuong(sizes, range, &tpl, &ex))
}

fn vuong(sizes: &[u64], range: FitRange, tpl: &TplFit, ex: &ExpFit) -> (Preferred, f64, f64) {
    let ln_z_pl = tpl_log_norm(tpl.alpha, tpl.s_cut, &range);
    let ln_z_ex = exp_log_norm(ex.beta, &range);
    let d: Vec<f64> = sizes
        .iter()
        .filter(|&&s| range.contains(s))
        .map(|&s| {
            let sf = s as f64;
            let l_pl = -tpl.alpha * sf.ln() - sf / tpl.s_cut - ln_z_pl;
            let l_ex = -sf / ex.beta - ln_z_ex;
            l_pl - l_ex
        })
        .collect();
    let n = d.len() as f64;
    let r: f64 = d.iter().sum();
    let mean = r / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || r == 0.0 {
        return (Preferred::Undecided, 0.0, 1.0);
    }
    let stat = r / (var.sqrt() * n.sqrt());
    let p = erfc(stat.abs() / std::f64::consts::SQRT_2);
    let preferred = if p < 0.05 {
        if stat > 0.0 {
            Preferred::PowerLaw
        } else {
            Preferred::Exponential
        }
    } else {
        Preferred::Undecided
    };
    (preferred, stat, p)
}

/// Both fits plus the comparison in one record.
pub fn fit_avalanches(sizes: &[u64], range: FitRange) -> Result<AvalancheFit> {
    let tpl = fit_truncated_powerlaw(sizes, range)?;
    let ex = fit_exponential(sizes, range)?;
    let (preferred, lr, p) = vuong(sizes, range, &tpl, &ex);
    Ok(AvalancheFit {
        n_avalanches: sizes.len(),
        n_in_range: tpl.n,
        alpha_s: tpl.alpha,
        s_cut: tpl.s_cut,
        fit_range: range,
        loglik_pl: tpl.loglik,
        loglik_exp: ex.loglik,
        preferred,
        lr,
        lr_p_value: p,
    })
}
