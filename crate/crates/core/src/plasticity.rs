//! Drift + anticausal STDP + biased-noise weight update.
//!
//! Every period `T` each synapse receives
//! `dw = -lambda_stdp * gain * f - lambda_drift * w + n`, with `f` the
//! nearest-neighbour anticausal kernel sum collected since the previous
//! update and `n ~ U(-n_amp, n_amp) + n_mean`. Weights are clipped to
//! `[0, w_max]`.
//!
//! Pairing: a presynaptic arrival pairs with the most recent earlier
//! postsynaptic spike of its target, provided that spike has not already
//! been paired on this synapse. Memory of the last spike survives update
//! boundaries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlasticityParams {
    pub lambda_stdp: f64,
    pub lambda_drift: f64,
    #[serde(rename = "eta", alias = "eta_stdp")]
    pub eta_stdp: f64,
    /// ms
    pub tau_stdp: f64,
    pub n_amp: f64,
    pub n_mean: f64,
    /// Update period `T` in ms.
    #[serde(rename = "T", alias = "period")]
    pub period: f64,
    /// Scale from kernel units to weight units in the depression term.
    pub correlation_gain: f64,
    pub w_max: f64,
    /// A postsynaptic spike pairs with at most one presynaptic arrival per
    /// synapse. When false, every arrival pairs with the latest earlier
    /// postsynaptic spike.
    pub consume_post: bool,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        Self {
            lambda_stdp: 11.0 / 128.0,
            lambda_drift: 1.0 / 512.0,
            eta_stdp: 0.071,
            tau_stdp: 6.8,
            n_amp: 15.0 / 16.0,
            n_mean: 3.0 / 16.0,
            period: 1000.0,
            correlation_gain: 6.0,
            w_max: 63.0,
            consume_post: true,
        }
    }
}

impl PlasticityParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.lambda_stdp,
            self.lambda_drift,
            self.eta_stdp,
            self.tau_stdp,
            self.n_amp,
            self.n_mean,
            self.correlation_gain,
        ];
        if vals.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("plasticity parameters must be non-negative".into()));
        }
        if !(self.period > 0.0) || !(self.tau_stdp > 0.0) || !(self.w_max > 0.0) {
            return Err(Error::Config("period, tau_stdp and w_max must be positive".into()));
        }
        Ok(())
    }

    /// Kernel contribution of a single anticausal pair, `lag = t_pre - t_post > 0`.
    #[inline]
    pub fn pair_value(&self, lag: f64) -> f64 {
        self.eta_stdp * (-lag / self.tau_stdp).exp()
    }
}

/// Per-synapse pairing memory and kernel accumulators.
#[derive(Clone, Debug)]
pub struct PairingState {
    /// Last postsynaptic spike per neuron.
    last_post: Vec<f64>,
    /// Postsynaptic spike already consumed on each synapse.
    paired_post: Vec<f64>,
    /// Last presynaptic arrival per synapse.
    last_pre: Vec<f64>,
    /// Kernel sum accumulated since the last update.
    f: Vec<f64>,
}

impl PairingState {
    pub fn new(n_neurons: usize, n_synapses: usize) -> Self {
        Self {
            last_post: vec![f64::NEG_INFINITY; n_neurons],
            paired_post: vec![f64::NEG_INFINITY; n_synapses],
            last_pre: vec![f64::NEG_INFINITY; n_synapses],
            f: vec![0.0; n_synapses],
        }
    }

    #[inline]
    pub fn on_post(&mut self, post: usize, time: f64) {
        self.last_post[post] = time;
    }

    /// Registers a presynaptic arrival at `time` on `synapse` onto `post`.
    #[inline]
    pub fn on_pre(&mut self, synapse: usize, post: usize, time: f64, params: &PlasticityParams) {
        self.last_pre[synapse] = time;
        let tp = self.last_post[post];
        if tp < time && (tp > self.paired_post[synapse] || !params.consume_post) {
            self.f[synapse] += params.pair_value(time - tp);
            self.paired_post[synapse] = tp;
        }
    }

    pub fn kernel(&self, synapse: usize) -> f64 {
        self.f[synapse]
    }

    pub fn last_pre(&self, synapse: usize) -> f64 {
        self.last_pre[synapse]
    }

    pub fn last_post(&self, post: usize) -> f64 {
        self.last_post[post]
    }

    /// Adds an externally computed kernel value to a synapse accumulator.
    pub fn add_kernel(&mut self, synapse: usize, value: f64) {
        self.f[synapse] += value;
    }

    pub fn n_synapses(&self) -> usize {
        self.f.len()
    }

    /// Forgets all history, e.g. after rewiring.
    pub fn reset(&mut self) {
        self.last_post.fill(f64::NEG_INFINITY);
        self.paired_post.fill(f64::NEG_INFINITY);
        self.last_pre.fill(f64::NEG_INFINITY);
        self.f.fill(0.0);
    }
}

/// Kernel value for one synapse from sorted spike times inside a window.
/// Only anticausal pairs (pre strictly after post) contribute.
pub fn stdp_kernel(pre_times: &[f64], post_times: &[f64], params: &PlasticityParams) -> f64 {
    let mut state = PairingState::new(1, 1);
    let (mut i, mut j) = (0, 0);
    // merge in time order; a post spike simultaneous with a pre is processed
    // first but cannot pair because the lag must be strictly positive
    while i < pre_times.len() {
        if j < post_times.len() && post_times[j] <= pre_times[i] {
            state.on_post(0, post_times[j]);
            j += 1;
        } else {
            state.on_pre(0, 0, pre_times[i], params);
            i += 1;
        }
    }
    state.kernel(0)
}

/// Applies one update tick to every synapse and clears the kernel sums.
/// Synapses are visited in index order, one noise draw each.
pub fn update_weights<R: Rng + ?Sized>(
    weights: &mut [f64],
    pairing: &mut PairingState,
    params: &PlasticityParams,
    rng: &mut R,
) {
    debug_assert_eq!(weights.len(), pairing.f.len());
    let depress = params.lambda_stdp * params.correlation_gain;
    let keep = 1.0 - params.lambda_drift;
    let span = 2.0 * params.n_amp;
    let offset = params.n_mean - params.n_amp;
    for (w, f) in weights.iter_mut().zip(pairing.f.iter_mut()) {
        let noise = offset + span * rng.random::<f64>();
        let next = keep * *w - depress * *f + noise;
        *w = next.clamp(0.0, params.w_max);
        *f = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn table_params() -> PlasticityParams {
        PlasticityParams::default()
    }

    #[test]
    fn single_anticausal_pair() {
        let p = table_params();
        let f = stdp_kernel(&[p.tau_stdp], &[0.0], &p);
        assert!((f - 0.071 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((f - 0.0261).abs() < 1e-4);
    }

    #[test]
    fn causal_pair_contributes_nothing() {
        let p = table_params();
        assert_eq!(stdp_kernel(&[0.0], &[2.0], &p), 0.0);
    }

    #[test]
    fn zero_lag_limit_approaches_eta() {
        let p = table_params();
        let f = stdp_kernel(&[1e-9], &[0.0], &p);
        assert!((f - p.eta_stdp).abs() < 1e-10);
        assert_eq!(stdp_kernel(&[0.0], &[0.0], &p), 0.0);
    }

    #[test]
    fn post_spike_is_consumed_once() {
        let p = table_params();
        // two pre spikes after one post: only the first pairs
        let f = stdp_kernel(&[1.0, 2.0], &[0.0], &p);
        assert!((f - p.pair_value(1.0)).abs() < 1e-15);
        // interleaved: each pre pairs with its own nearest post
        let f = stdp_kernel(&[1.0, 5.0], &[0.0, 4.0], &p);
        assert!((f - 2.0 * p.pair_value(1.0)).abs() < 1e-15);
    }

    /// Independent statement of the nearest-neighbour rule: for each pre
    /// spike, look back for the latest post; count it unless an earlier pre
    /// already took the same post.
    fn brute_kernel(pre: &[f64], post: &[f64], p: &PlasticityParams) -> f64 {
        let mut used: Vec<usize> = Vec::new();
        let mut f = 0.0;
        for &tp in pre {
            let latest = post
                .iter()
                .enumerate()
                .filter(|(_, &t)| t < tp)
                .max_by(|a, b| a.1.total_cmp(b.1));
            if let Some((k, &t)) = latest {
                if !used.contains(&k) {
                    used.push(k);
                    f += p.pair_value(tp - t);
                }
            }
        }
        f
    }

    proptest::proptest! {
        #[test]
        fn kernel_matches_brute_force(
            mut pre in proptest::collection::vec(0.0f64..50.0, 0..12),
            mut post in proptest::collection::vec(0.0f64..50.0, 0..12),
        ) {
            pre.sort_by(f64::total_cmp);
            post.sort_by(f64::total_cmp);
            post.dedup();
            let p = table_params();
            let a = stdp_kernel(&pre, &post, &p);
            let b = brute_kernel(&pre, &post, &p);
            proptest::prop_assert!((a - b).abs() < 1e-12);
            proptest::prop_assert!(a >= 0.0);
        }

        #[test]
        fn extra_anticausal_pairs_depress(
            base in proptest::collection::vec(0.0f64..40.0, 1..8),
            lag in 0.1f64..20.0,
        ) {
            // a post spike placed after every existing spike, followed by a pre
            let p = table_params();
            let mut pre = base.clone();
            pre.sort_by(f64::total_cmp);
            let post = vec![45.0];
            let before = stdp_kernel(&pre, &post, &p);
            let mut more = pre.clone();
            more.push(45.0 + lag);
            let after = stdp_kernel(&more, &post, &p);
            proptest::prop_assert!(after > before);
        }
    }

    #[test]
    fn pure_decay_without_noise() {
        let p = PlasticityParams {
            n_amp: 0.0,
            n_mean: 0.0,
            ..table_params()
        };
        let mut w = vec![10.0, 40.0];
        let mut pairing = PairingState::new(1, 2);
        update_weights(&mut w, &mut pairing, &p, &mut seeded(1));
        assert!((w[0] - 10.0 * (1.0 - 1.0 / 512.0)).abs() < 1e-12);
        assert!((w[1] - 40.0 * (1.0 - 1.0 / 512.0)).abs() < 1e-12);
    }

    #[test]
    fn bias_only_growth() {
        let p = PlasticityParams {
            n_amp: 0.0,
            ..table_params()
        };
        let mut w = vec![0.0; 3];
        let mut pairing = PairingState::new(1, 3);
        update_weights(&mut w, &mut pairing, &p, &mut seeded(2));
        assert!(w.iter().all(|v| (*v - 3.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn weights_stay_clipped() {
        let p = table_params();
        let mut w = vec![0.0, 62.9, 63.0];
        let mut pairing = PairingState::new(1, 3);
        let mut rng = seeded(3);
        for _ in 0..2000 {
            update_weights(&mut w, &mut pairing, &p, &mut rng);
            assert!(w.iter().all(|v| (0.0..=63.0).contains(v)));
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let p = table_params();
        let run = |seed| {
            let mut w = vec![5.0; 16];
            let mut pairing = PairingState::new(1, 16);
            let mut rng = seeded(seed);
            for _ in 0..50 {
                update_weights(&mut w, &mut pairing, &p, &mut rng);
            }
            w
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    /// Scalar weight under Poisson-timed anticausal pairs: the long-run mean
    /// must sit where the expected drift vanishes,
    /// `w* = (n_mean - lambda_stdp * gain * E[f]) / lambda_drift`.
    #[test]
    fn fixed_point_matches_expected_drift() {
        use rand_distr::{Distribution, Exp};
        // gain chosen so the fixed point lies well inside (0, w_max)
        let p = PlasticityParams {
            correlation_gain: 40.0,
            ..table_params()
        };
        let mut rng = seeded(11);
        // per update: one anticausal pair with probability q at Exp(lag) delay
        let q = 0.8;
        let lag = Exp::new(1.0 / 3.0).unwrap();
        let mut e_f = 0.0;
        let trials = 200_000;
        let mut w = vec![0.0];
        let mut pairing = PairingState::new(1, 1);
        let mut acc = 0.0;
        let mut counted = 0usize;
        for k in 0..trials {
            if rng.random::<f64>() < q {
                let v = p.pair_value(lag.sample(&mut rng));
                pairing.add_kernel(0, v);
                e_f += v;
            }
            update_weights(&mut w, &mut pairing, &p, &mut rng);
            if k > 20_000 {
                acc += w[0];
                counted += 1;
            }
        }
        e_f /= trials as f64;
        let predicted = (p.n_mean - p.lambda_stdp * p.correlation_gain * e_f) / p.lambda_drift;
        let observed = acc / counted as f64;
        assert!(predicted > 5.0 && predicted < 58.0);
        assert!(
            (observed - predicted).abs() / predicted < 0.05,
            "observed {observed}, predicted {predicted}"
        );
    }
}
