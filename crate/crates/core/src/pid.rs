//! Partial information decomposition of `I(T ; S1, S2)` under the
//! definition that minimizes the joint mutual information over all
//! distributions sharing the `(T, S1)` and `(T, S2)` marginals.

use std::f64::consts::LN_2;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::embed;

const MAX_ITER: usize = 100_000;
const MAX_NEWTON: usize = 200;
const MU_MIN: f64 = 1e-18;
const GAP_TOL: f64 = 1e-8;

/// Dense table `p[t][s1][s2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    pub nt: usize,
    pub n1: usize,
    pub n2: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(nt: usize, n1: usize, n2: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != nt * n1 * n2 || nt == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Input("table size does not match alphabets".into()));
        }
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("probabilities sum to {total}")));
        }
        Ok(Self { nt, n1, n2, p })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_counts(nt: usize, n1: usize, n2: usize, counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Input("empty table".into()));
        }
        Self::new(nt, n1, n2, counts.iter().map(|c| c / total).collect())
    }

    #[inline]
    fn idx(&self, t: usize, s1: usize, s2: usize) -> usize {
        (t * self.n1 + s1) * self.n2 + s2
    }

    pub fn get(&self, t: usize, s1: usize, s2: usize) -> f64 {
        self.p[self.idx(t, s1, s2)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// `H(T)` in bits.
    pub fn target_entropy(&self) -> f64 {
        let block = self.n1 * self.n2;
        -(0..self.nt)
            .map(|t| self.p[t * block..(t + 1) * block].iter().sum::<f64>())
            .filter(|&q| q > 0.0)
            .map(|q| q * q.log2())
            .sum::<f64>()
    }

    fn marginal_ts1(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nt * self.n1];
        for t in 0..self.nt {
            for s1 in 0..self.n1 {
                m[t * self.n1 + s1] = (0..self.n2).map(|s2| self.get(t, s1, s2)).sum();
            }
        }
        m
    }

    fn marginal_ts2(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nt * self.n2];
        for t in 0..self.nt {
            for s1 in 0..self.n1 {
                for s2 in 0..self.n2 {
                    m[t * self.n2 + s2] += self.get(t, s1, s2);
                }
            }
        }
        m
    }

    /// Parses whitespace-separated `t s1 s2 prob` rows; `#` starts a
    /// comment. Alphabet sizes are one more than the largest index seen.
    pub fn read_table<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let parts: Vec<&str> = body.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 4 fields, found {}", parts.len()),
                });
            }
            let parse_idx = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })
            };
            let prob = parts[3].parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            rows.push((parse_idx(parts[0])?, parse_idx(parts[1])?, parse_idx(parts[2])?, prob));
        }
        if rows.is_empty() {
            return Err(Error::Input("no table rows".into()));
        }
        let nt = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let n1 = rows.iter().map(|r| r.1).max().unwrap() + 1;
        let n2 = rows.iter().map(|r| r.2).max().unwrap() + 1;
        let mut p = vec![0.0; nt * n1 * n2];
        for (t, s1, s2, v) in rows {
            p[(t * n1 + s1) * n2 + s2] += v;
        }
        Self::new(nt, n1, n2, p)
    }

    pub fn write_table(&self) -> String {
        let mut out = String::from("# t s1 s2 prob\n");
        for t in 0..self.nt {
            for s1 in 0..self.n1 {
                for s2 in 0..self.n2 {
                    let v = self.get(t, s1, s2);
                    if v > 0.0 {
                        out.push_str(&format!("{t} {s1} {s2} {v:e}\n"));
                    }
                }
            }
        }
        out
    }
}

/// Empirical joint of `(target(t), past of src1, past of src2)` with pasts
/// of `l` bins ending at `t - 1`.
pub fn estimate_joint(target: &[u8], src1: &[u8], src2: &[u8], l: usize) -> Result<JointDistribution> {
    if target.len() != src1.len() || target.len() != src2.len() {
        return Err(Error::Input("series lengths differ".into()));
    }
    if l == 0 || l > 12 {
        return Err(Error::Config("embedding length must be in 1..=12".into()));
    }
    if target.len() <= l {
        return Err(Error::InsufficientData {
            needed: l + 1,
            got: target.len(),
        });
    }
    if target.iter().any(|&v| v > 1) {
        return Err(Error::Input("target must be binary".into()));
    }
    let p1 = embed(src1, l);
    let p2 = embed(src2, l);
    let k = 1usize << l;
    let mut counts = vec![0.0; 2 * k * k];
    for i in 0..p1.len() {
        let t = usize::from(target[i + l]);
        counts[(t * k + p1[i] as usize) * k + p2[i] as usize] += 1.0;
    }
    JointDistribution::from_counts(2, k, k, &counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidResult {
    pub unq1: f64,
    pub unq2: f64,
    pub shd: f64,
    pub syn: f64,
    pub joint_mi: f64,
    pub iterations: usize,
    pub duality_gap: f64,
}

impl PidResult {
    pub const CSV_HEADER: &'static str = "unq1,unq2,shd,syn,joint_mi,iterations,duality_gap";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12},{:.12},{:.12},{:.12},{:.12},{},{:.3e}",
            self.unq1, self.unq2, self.shd, self.syn, self.joint_mi, self.iterations, self.duality_gap
        )
    }

    pub fn normalized(&self, h: f64) -> PidResult {
        let f = |v: f64| if h > 0.0 { v / h } else { 0.0 };
        PidResult {
            unq1: f(self.unq1),
            unq2: f(self.unq2),
            shd: f(self.shd),
            syn: f(self.syn),
            joint_mi: f(self.joint_mi),
            ..*self
        }
    }
}

fn xlogx_ratio(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        a * (a / b).log2()
    } else {
        0.0
    }
}

/// Mutual informations of a table: `(I(T;S1), I(T;S2), I(T;S1,S2))`,
/// plus the two conditional terms `I(T;S1|S2)` and `I(T;S2|S1)`.
pub(crate) struct Informations {
    pub i1: f64,
    pub i2: f64,
    pub joint: f64,
    pub cond1: f64,
    pub cond2: f64,
}

pub(crate) fn informations(d: &JointDistribution) -> Informations {
    let (nt, n1, n2) = (d.nt, d.n1, d.n2);
    let pt: Vec<f64> = (0..nt)
        .map(|t| (0..n1 * n2).map(|k| d.p[t * n1 * n2 + k]).sum())
        .collect();
    let pts1 = d.marginal_ts1();
    let pts2 = d.marginal_ts2();
    let mut ps1 = vec![0.0; n1];
    let mut ps2 = vec![0.0; n2];
    let mut ps = vec![0.0; n1 * n2];
    for t in 0..nt {
        for s1 in 0..n1 {
            ps1[s1] += pts1[t * n1 + s1];
            for s2 in 0..n2 {
                ps[s1 * n2 + s2] += d.get(t, s1, s2);
            }
        }
        for s2 in 0..n2 {
            ps2[s2] += pts2[t * n2 + s2];
        }
    }
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    let mut joint = 0.0;
    let mut cond1 = 0.0;
    let mut cond2 = 0.0;
    for t in 0..nt {
        for s1 in 0..n1 {
            i1 += xlogx_ratio(pts1[t * n1 + s1], pt[t] * ps1[s1]);
        }
        for s2 in 0..n2 {
            i2 += xlogx_ratio(pts2[t * n2 + s2], pt[t] * ps2[s2]);
        }
        for s1 in 0..n1 {
            for s2 in 0..n2 {
                let v = d.get(t, s1, s2);
                if v > 0.0 {
                    let s = ps[s1 * n2 + s2];
                    joint += xlogx_ratio(v, pt[t] * s);
                    // p(t,s1,s2) p(s2) / (p(t,s2) p(s1,s2))
                    let lv = v.ln() - s.ln();
                    cond1 += v * (lv + ps2[s2].ln() - pts2[t * n2 + s2].ln()) / LN_2;
                    cond2 += v * (lv + ps1[s1].ln() - pts1[t * n1 + s1].ln()) / LN_2;
                }
            }
        }
    }
    Informations {
        i1,
        i2,
        joint,
        cond1,
        cond2,
    }
}

/// Scales the rows and columns of `m` (an `n1 x n2` block) to the given
/// margins.
fn sinkhorn(m: &mut [f64], n1: usize, n2: usize, row: &[f64], col: &[f64]) {
    for _ in 0..10_000 {
        for s1 in 0..n1 {
            let z: f64 = m[s1 * n2..(s1 + 1) * n2].iter().sum();
            if z > 0.0 {
                let k = row[s1] / z;
                m[s1 * n2..(s1 + 1) * n2].iter_mut().for_each(|v| *v *= k);
            }
        }
        let mut err = 0.0;
        for s2 in 0..n2 {
            let z: f64 = (0..n1).map(|s1| m[s1 * n2 + s2]).sum();
            if z > 0.0 {
                err += (z - col[s2]).abs();
                let k = col[s2] / z;
                (0..n1).for_each(|s1| m[s1 * n2 + s2] *= k);
            }
        }
        if err < 1e-15 {
            break;
        }
    }
}

/// Working state of the constrained Newton solver. Variables are the cells
/// `(t, s1, s2)` whose two marginals are both positive; all other cells are
/// pinned to zero.
struct Problem<'a> {
    d: &'a JointDistribution,
    m1: Vec<f64>,
    m2: Vec<f64>,
    /// Allowed target values per `(s1, s2)` cell.
    cells: Vec<Vec<usize>>,
    /// Compact constraint index for `(t, s1)` rows and `(t, s2)` columns.
    /// Per target value the row and column sums agree, so one column
    /// constraint is redundant; it maps to the slot `n_constraints`, whose
    /// multiplier is held at zero.
    row_id: Vec<Option<usize>>,
    col_id: Vec<Option<usize>>,
    n_constraints: usize,
}

impl<'a> Problem<'a> {
    fn new(d: &'a JointDistribution) -> Self {
        let (nt, n1, n2) = (d.nt, d.n1, d.n2);
        let m1 = d.marginal_ts1();
        let m2 = d.marginal_ts2();
        let mut cells = vec![Vec::new(); n1 * n2];
        for s1 in 0..n1 {
            for s2 in 0..n2 {
                for t in 0..nt {
                    if m1[t * n1 + s1] > 0.0 && m2[t * n2 + s2] > 0.0 {
                        cells[s1 * n2 + s2].push(t);
                    }
                }
            }
        }
        let mut next = 0;
        let mut id = |p: f64| {
            if p > 0.0 {
                next += 1;
                Some(next - 1)
            } else {
                None
            }
        };
        let row_id: Vec<Option<usize>> = m1.iter().map(|&p| id(p)).collect();
        let mut col_id = vec![None; nt * n2];
        for t in 0..nt {
            let last = (0..n2).rev().find(|&s2| m2[t * n2 + s2] > 0.0);
            for s2 in 0..n2 {
                if Some(s2) != last {
                    col_id[t * n2 + s2] = id(m2[t * n2 + s2]);
                }
            }
            if let Some(s2) = last {
                col_id[t * n2 + s2] = Some(usize::MAX);
            }
        }
        let col_id = col_id
            .into_iter()
            .map(|c| c.map(|i| if i == usize::MAX { next } else { i }))
            .collect();
        Self {
            d,
            m1,
            m2,
            cells,
            row_id,
            col_id,
            n_constraints: next,
        }
    }

    fn idx(&self, t: usize, s1: usize, s2: usize) -> usize {
        self.d.idx(t, s1, s2)
    }

    /// Product coupling per target value: feasible and positive on every
    /// allowed cell.
    fn start(&self) -> Vec<f64> {
        let (nt, n1, n2) = (self.d.nt, self.d.n1, self.d.n2);
        let mut q = vec![0.0; nt * n1 * n2];
        for t in 0..nt {
            let pt: f64 = self.m1[t * n1..(t + 1) * n1].iter().sum();
            if pt == 0.0 {
                continue;
            }
            for s1 in 0..n1 {
                for s2 in 0..n2 {
                    q[self.idx(t, s1, s2)] = self.m1[t * n1 + s1] * self.m2[t * n2 + s2] / pt;
                }
            }
        }
        q
    }

    /// `-H_Q(T | S1, S2)` in nats.
    fn objective(&self, q: &[f64]) -> f64 {
        let n2 = self.d.n2;
        let mut f = 0.0;
        for (c, ts) in self.cells.iter().enumerate() {
            let (s1, s2) = (c / n2, c % n2);
            let z: f64 = ts.iter().map(|&t| q[self.idx(t, s1, s2)]).sum();
            for &t in ts {
                let v = q[self.idx(t, s1, s2)];
                if v > 0.0 {
                    f += v * (v / z).ln();
                }
            }
        }
        f
    }

    /// Lower bound on the optimum from multipliers `nu`, after shifting the
    /// row multipliers so that the dual constraints hold.
    fn dual_bound(&self, nu: &[f64]) -> f64 {
        let (nt, n1, n2) = (self.d.nt, self.d.n1, self.d.n2);
        let lam = |t: usize, s1: usize| self.row_id[t * n1 + s1].map(|i| nu[i]);
        let mu = |t: usize, s2: usize| self.col_id[t * n2 + s2].map(|i| nu[i]);
        let mut bound = 0.0;
        for t in 0..nt {
            for s1 in 0..n1 {
                if let Some(l) = lam(t, s1) {
                    bound += l * self.m1[t * n1 + s1];
                }
            }
            for s2 in 0..n2 {
                if let Some(m) = mu(t, s2) {
                    bound += m * self.m2[t * n2 + s2];
                }
            }
        }
        for s1 in 0..n1 {
            let ps1: f64 = (0..nt).map(|t| self.m1[t * n1 + s1]).sum();
            if ps1 == 0.0 {
                continue;
            }
            let mut worst = f64::NEG_INFINITY;
            for s2 in 0..n2 {
                let ts = &self.cells[s1 * n2 + s2];
                if ts.is_empty() {
                    continue;
                }
                let exps: Vec<f64> = ts
                    .iter()
                    .map(|&t| lam(t, s1).unwrap() + mu(t, s2).unwrap())
                    .collect();
                let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln();
                worst = worst.max(lse);
            }
            if worst.is_finite() {
                bound -= ps1 * worst;
            }
        }
        bound
    }

    /// Newton direction for `f(q) - mu * Σ ln q` restricted to the
    /// constraint subspace. Returns `(direction, multipliers, gradient)`.
    fn direction(&self, q: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n1, n2) = (self.d.n1, self.d.n2);
        let m = self.n_constraints + 1;
        let mut s = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        let mut grad = vec![0.0; q.len()];
        let mut blocks: Vec<(Vec<f64>, Vec<[usize; 2]>)> = Vec::with_capacity(self.cells.len());
        for (c, ts) in self.cells.iter().enumerate() {
            let (s1, s2) = (c / n2, c % n2);
            let k = ts.len();
            if k == 0 {
                blocks.push((Vec::new(), Vec::new()));
                continue;
            }
            let qs: Vec<f64> = ts.iter().map(|&t| q[self.idx(t, s1, s2)]).collect();
            let z: f64 = qs.iter().sum();
            let g: Vec<f64> = qs.iter().map(|&v| (v / z).ln() - mu / v).collect();
            // Hessian block diag(1/q + mu/q^2) - 11'/z, inverted by
            // Sherman-Morrison
            let dinv: Vec<f64> = qs.iter().map(|&v| v * v / (v + mu)).collect();
            let denom = z - dinv.iter().sum::<f64>();
            let mut minv = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    minv[i * k + j] = dinv[i] * dinv[j] / denom;
                }
                minv[i * k + i] += dinv[i];
            }
            let ids: Vec<[usize; 2]> = ts
                .iter()
                .map(|&t| {
                    [
                        self.row_id[t * n1 + s1].unwrap(),
                        self.col_id[t * n2 + s2].unwrap(),
                    ]
                })
                .collect();
            for i in 0..k {
                grad[self.idx(ts[i], s1, s2)] = g[i];
                let wi: f64 = (0..k).map(|j| minv[i * k + j] * g[j]).sum();
                for &a in &ids[i] {
                    rhs[a] += wi;
                }
                for j in 0..k {
                    let v = minv[i * k + j];
                    for &a in &ids[i] {
                        for &b in &ids[j] {
                            s[(a, b)] += v;
                        }
                    }
                }
            }
            blocks.push((minv, ids));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return (vec![0.0; q.len()], vec![0.0; m], grad);
        }
        let fixed = m - 1;
        s.row_mut(fixed).fill(0.0);
        s.column_mut(fixed).fill(0.0);
        s[(fixed, fixed)] = 1.0;
        rhs[fixed] = 0.0;
        let nu = match s.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let svd = s.svd(true, true);
                let top = svd.singular_values.max();
                svd.solve(&rhs, 1e-13 * top)
                    .unwrap_or_else(|_| DVector::zeros(m))
            }
        };
        let mut dir = vec![0.0; q.len()];
        for (c, ts) in self.cells.iter().enumerate() {
            let (s1, s2) = (c / n2, c % n2);
            let (minv, ids) = &blocks[c];
            let k = ts.len();
            let u: Vec<f64> = (0..k)
                .map(|i| nu[ids[i][0]] + nu[ids[i][1]] - grad[self.idx(ts[i], s1, s2)])
                .collect();
            for i in 0..k {
                dir[self.idx(ts[i], s1, s2)] = (0..k).map(|j| minv[i * k + j] * u[j]).sum();
            }
        }
        (dir, nu.iter().copied().collect(), grad)
    }

    fn barrier(&self, q: &[f64], mu: f64) -> f64 {
        let n2 = self.d.n2;
        let mut b = 0.0;
        for (c, ts) in self.cells.iter().enumerate() {
            let (s1, s2) = (c / n2, c % n2);
            for &t in ts {
                b -= q[self.idx(t, s1, s2)].ln();
            }
        }
        self.objective(q) + mu * b
    }

    fn restore_margins(&self, q: &mut [f64]) {
        let (nt, n1, n2) = (self.d.nt, self.d.n1, self.d.n2);
        for t in 0..nt {
            let block = &mut q[t * n1 * n2..(t + 1) * n1 * n2];
            sinkhorn(
                block,
                n1,
                n2,
                &self.m1[t * n1..(t + 1) * n1],
                &self.m2[t * n2..(t + 1) * n2],
            );
        }
    }
}

/// Decomposes `I(T ; S1, S2)` into unique, shared and synergistic parts.
///
/// Minimizes `I_Q(T ; S1, S2)` over distributions with the same `(T, S1)`
/// and `(T, S2)` marginals with a log-barrier interior-point method. The
/// duality gap is certified with the dual of the problem,
/// `max Σ λ P(t,s1) + Σ μ P(t,s2)` subject to
/// `Σ_t exp(λ(t,s1) + μ(t,s2)) <= 1` on every cell.
pub fn broja_pid(d: &JointDistribution) -> Result<PidResult> {
    broja_solve(d).map(|(_, r)| r)
}

/// Like [`broja_pid`], also returning the optimal distribution `Q*`.
pub fn broja_solve(d: &JointDistribution) -> Result<(JointDistribution, PidResult)> {
    let prob = Problem::new(d);
    let mut q = prob.start();
    let mut mu = 1e-4;
    let mut iterations = 0;
    let mut gap;
    loop {
        // centre on the barrier path for the current mu
        for _ in 0..MAX_NEWTON {
            iterations += 1;
            let (dir, _, grad) = prob.direction(&q, mu);
            let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
            if !(slope < -1e-16) {
                break;
            }
            let mut alpha: f64 = 1.0;
            for (&qi, &di) in q.iter().zip(&dir) {
                if di < 0.0 {
                    alpha = alpha.min(0.99 * qi / -di);
                }
            }
            let phi = prob.barrier(&q, mu);
            let mut next = None;
            for _ in 0..60 {
                let trial: Vec<f64> = q.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                if prob.barrier(&trial, mu) <= phi + 1e-4 * alpha * slope {
                    next = Some(trial);
                    break;
                }
                alpha *= 0.5;
            }
            match next {
                Some(trial) => q = trial,
                None => break,
            }
            if -slope < 1e-14 {
                break;
            }
        }
        let (_, nu, _) = prob.direction(&q, mu);
        gap = ((prob.objective(&q) - prob.dual_bound(&nu)) / LN_2).max(0.0);
        if gap < GAP_TOL || mu < MU_MIN {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(Error::Solver { iterations, gap });
        }
        mu *= 0.1;
    }
    prob.restore_margins(&mut q);
    let opt = JointDistribution {
        nt: d.nt,
        n1: d.n1,
        n2: d.n2,
        p: q,
    };
    let at_p = informations(d);
    let at_q = informations(&opt);
    let unq1 = at_q.cond1.max(0.0);
    let unq2 = at_q.cond2.max(0.0);
    let shd = at_p.i1 - unq1;
    debug_assert!((at_p.i2 - unq2 - shd).abs() < 1e-6);
    let result = PidResult {
        unq1,
        unq2,
        shd,
        syn: at_p.joint - at_q.joint,
        joint_mi: at_p.joint,
        iterations,
        duality_gap: gap,
    };
    Ok((opt, result))
}
