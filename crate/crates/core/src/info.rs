//! Plug-in discrete information measures on binarized activity.
//!
//! All quantities are in bits. Past states are the `l` bins ending at
//! `t - 1`, packed into an integer with the most recent bin in the lowest
//! bit. Quantities involving pasts are evaluated on `t = l..n`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub l: usize,
    /// ms
    pub dt_bin: f64,
    #[serde(rename = "N_tau", alias = "n_tau")]
    pub n_tau: usize,
    /// Smallest number of samples accepted after embedding truncation.
    pub min_samples: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            l: 4,
            dt_bin: 4.9,
            n_tau: 100,
            min_samples: 1000,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l > 12 || self.n_tau == 0 || !(self.dt_bin > 0.0) {
            return Err(Error::Config(
                "need 1 <= l <= 12, n_tau >= 1 and dt_bin > 0".into(),
            ));
        }
        Ok(())
    }

    fn check(&self, n: usize) -> Result<()> {
        if n < self.min_samples.max(1) {
            return Err(Error::InsufficientData {
                needed: self.min_samples.max(1),
                got: n,
            });
        }
        Ok(())
    }
}

/// Entropy of an empirical distribution given by counts.
fn entropy_of_counts<I: IntoIterator<Item = usize>>(counts: I, total: usize) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Counts of small integer symbols; dense storage.
fn dense_counts(symbols: impl Iterator<Item = usize>, size: usize) -> (Vec<usize>, usize) {
    let mut c = vec![0usize; size];
    let mut total = 0;
    for s in symbols {
        c[s] += 1;
        total += 1;
    }
    (c, total)
}

pub fn entropy(series: &[u32]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    let mut c: HashMap<u32, usize> = HashMap::new();
    for &s in series {
        *c.entry(s).or_default() += 1;
    }
    Ok(entropy_of_counts(c.into_values(), series.len()))
}

pub fn mutual_information(x: &[u32], y: &[u32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input("series lengths differ".into()));
    }
    if x.is_empty() {
        return Err(Error::Input("empty series".into()));
    }
    let mut cx: HashMap<u32, usize> = HashMap::new();
    let mut cy: HashMap<u32, usize> = HashMap::new();
    let mut cxy: HashMap<(u32, u32), usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *cx.entry(a).or_default() += 1;
        *cy.entry(b).or_default() += 1;
        *cxy.entry((a, b)).or_default() += 1;
    }
    let n = x.len();
    let mi = entropy_of_counts(cx.into_values(), n) + entropy_of_counts(cy.into_values(), n)
        - entropy_of_counts(cxy.into_values(), n);
    Ok(mi.max(0.0))
}

/// Past-state codes for `t = l..n`.
pub fn embed(x: &[u8], l: usize) -> Vec<u32> {
    if x.len() <= l {
        return Vec::new();
    }
    (l..x.len())
        .map(|t| {
            (1..=l).fold(0u32, |acc, k| acc | (u32::from(x[t - k] & 1) << (k - 1)))
        })
        .collect()
}

fn check_binary(x: &[u8]) -> Result<()> {
    if x.iter().any(|&v| v > 1) {
        return Err(Error::Input("series must be binary".into()));
    }
    Ok(())
}

/// Measures of a target neuron relative to a source neuron.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    /// Entropy of the target's present value.
    pub h: f64,
    /// Same-bin mutual information between source and target.
    pub mi: f64,
    /// `I(target ; target past)`.
    pub ais: f64,
    /// `I(target ; source past | target past)`.
    pub te: f64,
    /// `I(target ; target past, source past)`.
    pub joint: f64,
}

impl PairInfo {
    /// Each measure divided by the target entropy; zeros when `h == 0`.
    pub fn normalized(&self) -> PairInfo {
        let f = |v: f64| if self.h > 0.0 { v / self.h } else { 0.0 };
        PairInfo {
            h: if self.h > 0.0 { 1.0 } else { 0.0 },
            mi: f(self.mi),
            ais: f(self.ais),
            te: f(self.te),
            joint: f(self.joint),
        }
    }
}

/// Joint counts of `(target(t), target past, source past)` packed as
/// `x | tp << 1 | sp << (1 + l)`.
fn pair_table(target: &[u8], source: &[u8], l: usize) -> (Vec<usize>, usize) {
    let tp = embed(target, l);
    let sp = embed(source, l);
    dense_counts(
        (0..tp.len()).map(|i| {
            usize::from(target[i + l]) | (tp[i] as usize) << 1 | (sp[i] as usize) << (1 + l)
        }),
        1 << (1 + 2 * l),
    )
}

/// Entropies of marginals of a packed table.
fn marginal_entropy(table: &[usize], total: usize, mask: usize) -> f64 {
    let mut m: HashMap<usize, usize> = HashMap::new();
    for (code, &c) in table.iter().enumerate() {
        if c > 0 {
            *m.entry(code & mask).or_default() += c;
        }
    }
    entropy_of_counts(m.into_values(), total)
}

/// AIS, TE and joint MI from one joint table, so that
/// `ais + te == joint` up to rounding. `mi` and `h` use all bins.
pub fn pair_info(target: &[u8], source: &[u8], cfg: &EmbeddingConfig) -> Result<PairInfo> {
    cfg.validate()?;
    if target.len() != source.len() {
        return Err(Error::Input("series lengths differ".into()));
    }
    check_binary(target)?;
    check_binary(source)?;
    cfg.check(target.len().saturating_sub(cfg.l))?;
    let l = cfg.l;
    let (table, total) = pair_table(target, source, l);
    let x = 1usize;
    let tp = ((1usize << l) - 1) << 1;
    let sp = ((1usize << l) - 1) << (1 + l);
    let h_x = marginal_entropy(&table, total, x);
    let h_tp = marginal_entropy(&table, total, tp);
    let h_x_tp = marginal_entropy(&table, total, x | tp);
    let h_tp_sp = marginal_entropy(&table, total, tp | sp);
    let h_all = entropy_of_counts(table.iter().copied(), total);
    let ais = h_x + h_tp - h_x_tp;
    let te = h_x_tp + h_tp_sp - h_tp - h_all;
    let joint = h_x + h_tp_sp - h_all;
    let t32: Vec<u32> = target.iter().map(|&v| u32::from(v)).collect();
    let s32: Vec<u32> = source.iter().map(|&v| u32::from(v)).collect();
    Ok(PairInfo {
        h: entropy(&t32)?,
        mi: mutual_information(&t32, &s32)?,
        ais: ais.max(0.0),
        te: te.max(0.0),
        joint: joint.max(0.0),
    })
}

pub fn ais(x: &[u8], cfg: &EmbeddingConfig) -> Result<f64> {
    Ok(pair_info(x, x, cfg)?.ais)
}

pub fn transfer_entropy(source: &[u8], target: &[u8], cfg: &EmbeddingConfig) -> Result<f64> {
    Ok(pair_info(target, source, cfg)?.te)
}

/// `I(x(t) ; y(t + tau))` over `t = 0..n-tau`.
pub fn lagged_mi(x: &[u8], y: &[u8], tau: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Input("series lengths differ".into()));
    }
    if tau >= x.len() {
        return Err(Error::Input(format!("lag {tau} exceeds series length {}", x.len())));
    }
    let n = x.len() - tau;
    let (c, total) = dense_counts((0..n).map(|t| usize::from(x[t]) | usize::from(y[t + tau]) << 8), 1 << 16);
    let (cx, _) = dense_counts((0..n).map(|t| usize::from(x[t])), 256);
    let (cy, _) = dense_counts((0..n).map(|t| usize::from(y[t + tau])), 256);
    let mi = entropy_of_counts(cx, total) + entropy_of_counts(cy, total) - entropy_of_counts(c, total);
    Ok(mi.max(0.0))
}

/// Lagged MI for `tau = 1..=n_tau` and the bias-corrected integral
/// `Σ dt (I_tau - I_{n_tau})`, in bits·ms.
pub fn memory_capacity(x: &[u8], y: &[u8], cfg: &EmbeddingConfig) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    if x.len() < cfg.n_tau + 1 {
        return Err(Error::Input(format!(
            "series of {} bins is shorter than n_tau + 1 = {}",
            x.len(),
            cfg.n_tau + 1
        )));
    }
    let curve: Vec<f64> = (1..=cfg.n_tau)
        .map(|tau| lagged_mi(x, y, tau))
        .collect::<Result<_>>()?;
    let floor = curve[cfg.n_tau - 1];
    let mc = curve.iter().map(|i| cfg.dt_bin * (i - floor)).sum();
    Ok((curve, mc))
}
