//! n-bit parity and n-bit sum benchmarks with a linear readout.
//!
//! Features are binary activity bins `a_j(t)` of a readout subset; the label
//! at bin `t` is computed from the stimulus bins `s(t-n+1) ..= s(t)`. Bins
//! with `t < n - 1` have no label and are dropped.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{entropy, mutual_information};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Parity,
    Sum,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Parity => "parity",
            TaskKind::Sum => "sum",
        }
    }

    pub fn n_classes(self, n: usize) -> usize {
        match self {
            TaskKind::Parity => 2,
            TaskKind::Sum => n + 1,
        }
    }

    pub fn labels(self, s: &[u8], n: usize) -> Vec<u8> {
        match self {
            TaskKind::Parity => label_parity(s, n),
            TaskKind::Sum => label_sum(s, n),
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity" => Ok(TaskKind::Parity),
            "sum" => Ok(TaskKind::Sum),
            other => Err(Error::Input(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub task: TaskKind,
    /// History length in bins.
    pub n: usize,
    pub n_read: usize,
    /// ms
    pub dt_bin: f64,
    /// ms
    pub t_train: f64,
    /// ms
    pub t_test: f64,
    /// Adds a constant feature to the regression.
    pub intercept: bool,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Parity,
            n: 5,
            n_read: 16,
            dt_bin: 1.0,
            t_train: 104_000.0,
            t_test: 21_000.0,
            intercept: true,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self, n_neurons: usize) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("task history n must be at least 1".into()));
        }
        if self.n_read == 0 || self.n_read > n_neurons {
            return Err(Error::Config(format!(
                "n_read must lie in 1..={n_neurons}, got {}",
                self.n_read
            )));
        }
        if !(self.dt_bin > 0.0 && self.t_train > 0.0 && self.t_test > 0.0) {
            return Err(Error::Config("task durations and bin width must be positive".into()));
        }
        Ok(())
    }
}

/// `s(t) xor ... xor s(t-n+1)` for every `t >= n - 1`.
pub fn label_parity(s: &[u8], n: usize) -> Vec<u8> {
    label_sum(s, n).into_iter().map(|z| z & 1).collect()
}

/// `s(t) + ... + s(t-n+1)` for every `t >= n - 1`.
pub fn label_sum(s: &[u8], n: usize) -> Vec<u8> {
    assert!(n >= 1 && n < 256);
    if s.len() < n {
        return Vec::new();
    }
    let mut acc: usize = s[..n - 1].iter().map(|&b| usize::from(b)).sum();
    let mut out = Vec::with_capacity(s.len() + 1 - n);
    for t in n - 1..s.len() {
        acc += usize::from(s[t]);
        out.push(acc as u8);
        acc -= usize::from(s[t + 1 - n]);
    }
    out
}

/// Draws `n_read` distinct neuron ids.
pub fn readout_subset(n_neurons: usize, n_read: usize, seed: u64) -> Vec<usize> {
    let ids: Vec<usize> = (0..n_neurons).collect();
    let mut rng = seeded(seed);
    let mut pick: Vec<usize> = ids.choose_multiple(&mut rng, n_read).copied().collect();
    pick.sort_unstable();
    pick
}

/// Linear readout. One weight vector per unit; with an intercept the bias is
/// the last entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    pub task: TaskKind,
    pub n_classes: usize,
    pub intercept: bool,
    pub weights: Vec<Vec<f64>>,
}

impl Readout {
    fn score(&self, unit: usize, features: &[Vec<u8>], t: usize) -> f64 {
        let w = &self.weights[unit];
        let mut v: f64 = features
            .iter()
            .zip(w)
            .map(|(f, wj)| f64::from(f[t]) * wj)
            .sum();
        if self.intercept {
            v += w[features.len()];
        }
        v
    }

    /// Parity: `Θ(score - 1/2)`. Sum: the unit with the largest score, ties
    /// to the smaller class.
    pub fn predict(&self, features: &[Vec<u8>]) -> Vec<u8> {
        let len = features.first().map_or(0, Vec::len);
        (0..len)
            .map(|t| match self.task {
                TaskKind::Parity => u8::from(self.score(0, features, t) > 0.5),
                TaskKind::Sum => {
                    let mut best = (0, f64::NEG_INFINITY);
                    for c in 0..self.n_classes {
                        let v = self.score(c, features, t);
                        if v > best.1 {
                            best = (c, v);
                        }
                    }
                    best.0 as u8
                }
            })
            .collect()
    }
}

/// Weighted least squares with per-sample class weights `1/freq`, scaled to
/// mean one, and a ridge of `1e-6 * trace / p`.
///
/// `features[j][t]` is the activity of readout neuron `j` in bin `t`.
pub fn train_readout(
    features: &[Vec<u8>],
    labels: &[u8],
    task: TaskKind,
    n_classes: usize,
    intercept: bool,
) -> Result<Readout> {
    let len = labels.len();
    if features.iter().any(|f| f.len() != len) {
        return Err(Error::Input("feature and label lengths differ".into()));
    }
    let mut freq = vec![0usize; n_classes];
    for &l in labels {
        let l = usize::from(l);
        if l >= n_classes {
            return Err(Error::Input(format!("label {l} exceeds class count {n_classes}")));
        }
        freq[l] += 1;
    }
    let present = freq.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateTask(format!(
            "training labels contain {present} class(es)"
        )));
    }
    let class_w: Vec<f64> = freq
        .iter()
        .map(|&c| if c > 0 { len as f64 / (present as f64 * c as f64) } else { 0.0 })
        .collect();

    let p = features.len() + usize::from(intercept);
    // accumulate X'WX and X'W·onehot per feature pattern row
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let n_units = if task == TaskKind::Parity { 1 } else { n_classes };
    let mut xty = DMatrix::<f64>::zeros(p, n_units);
    let mut row = vec![0.0; p];
    for t in 0..len {
        for (j, f) in features.iter().enumerate() {
            row[j] = f64::from(f[t]);
        }
        if intercept {
            row[p - 1] = 1.0;
        }
        let label = usize::from(labels[t]);
        let w = class_w[label];
        let active: Vec<usize> = (0..p).filter(|&j| row[j] != 0.0).collect();
        for &a in &active {
            for &b in &active {
                gram[(a, b)] += w * row[a] * row[b];
            }
        }
        let unit = match task {
            TaskKind::Parity if label == 1 => Some(0),
            TaskKind::Parity => None,
            TaskKind::Sum => Some(label),
        };
        if let Some(u) = unit {
            for &a in &active {
                xty[(a, u)] += w * row[a];
            }
        }
    }
    let ridge = 1e-6 * gram.trace() / p as f64;
    for j in 0..p {
        gram[(j, j)] += ridge.max(f64::MIN_POSITIVE);
    }
    let solved = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => gram
            .svd(true, true)
            .solve(&xty, 1e-12)
            .map_err(|e| Error::Input(format!("readout normal equations: {e}")))?,
    };
    let weights = (0..n_units)
        .map(|u| solved.column(u).iter().copied().collect())
        .collect();
    Ok(Readout {
        task,
        n_classes,
        intercept,
        weights,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    /// bits
    pub i_raw: f64,
    pub i_shuffle: f64,
    pub i_corrected: f64,
    /// `i_corrected / H(test labels)`
    pub i_norm: f64,
    pub h_labels: f64,
}

fn as_u32(x: &[u8]) -> Vec<u32> {
    x.iter().map(|&v| u32::from(v)).collect()
}

/// Plug-in `I(labels ; predictions)` in bits.
pub fn prediction_information(labels: &[u8], predicted: &[u8]) -> Result<f64> {
    mutual_information(&as_u32(labels), &as_u32(predicted))
}

/// Trains on the training segment, scores the test segment and subtracts
/// the score of the same pipeline trained on shuffled training labels.
pub fn evaluate(
    train: (&[Vec<u8>], &[u8]),
    test: (&[Vec<u8>], &[u8]),
    task: TaskKind,
    n_classes: usize,
    intercept: bool,
    shuffle_seed: u64,
) -> Result<TaskResult> {
    let readout = train_readout(train.0, train.1, task, n_classes, intercept)?;
    let i_raw = prediction_information(test.1, &readout.predict(test.0))?;
    let mut shuffled = train.1.to_vec();
    shuffled.shuffle(&mut seeded(shuffle_seed));
    let baseline = train_readout(train.0, &shuffled, task, n_classes, intercept)?;
    let i_shuffle = prediction_information(test.1, &baseline.predict(test.0))?;
    let h_labels = entropy(&as_u32(test.1))?;
    let i_corrected = i_raw - i_shuffle;
    let i_norm = if h_labels > 0.0 { i_corrected / h_labels } else { 0.0 };
    Ok(TaskResult {
        i_raw,
        i_shuffle,
        i_corrected,
        i_norm,
        h_labels,
    })
}

/// Aligns binary stimulus and activity bins and runs [`evaluate`].
///
/// `stimulus` is the binned input train; `activity[j]` the binned spikes of
/// readout neuron `j` over the same bins. The first `n_train` bins train the
/// readout, the remaining bins test it.
pub fn run_task(
    stimulus: &[u8],
    activity: &[Vec<u8>],
    n_train: usize,
    cfg: &TaskConfig,
    shuffle_seed: u64,
) -> Result<TaskResult> {
    let n = cfg.n;
    if activity.iter().any(|a| a.len() != stimulus.len()) {
        return Err(Error::Input("stimulus and activity bins differ in length".into()));
    }
    if n_train < n || n_train >= stimulus.len() {
        return Err(Error::InsufficientData {
            needed: n + 1,
            got: stimulus.len(),
        });
    }
    let labels_train = cfg.task.labels(&stimulus[..n_train], n);
    let labels_test = cfg.task.labels(&stimulus[n_train..], n);
    if labels_test.is_empty() {
        return Err(Error::InsufficientData {
            needed: n_train + n,
            got: stimulus.len(),
        });
    }
    let slice = |lo: usize, hi: usize| -> Vec<Vec<u8>> {
        activity.iter().map(|a| a[lo + n - 1..hi].to_vec()).collect()
    };
    let f_train = slice(0, n_train);
    let f_test = slice(n_train, stimulus.len());
    evaluate(
        (&f_train, &labels_train),
        (&f_test, &labels_test),
        cfg.task,
        cfg.task.n_classes(n),
        cfg.intercept,
        shuffle_seed,
    )
}
