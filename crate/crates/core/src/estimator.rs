//! Kernel-weighted empirical model.
//!
//! For a query `(x, a)` and samples `(x_s, a_s, x'_s, r_s)`:
//!
//! ```text
//! w_s   = psi_sigma((x, a), (x_s, a_s))
//! C     = beta + sum_s w_s                 (generalized count)
//! w~_s  = w_s / C
//! r^    = sum_s w~_s r_s
//! P^ V  = sum_s w~_s V(x'_s)
//! ```
//!
//! [`StepDataset`] stores samples column-wise so that queries are a single
//! linear pass. [`FiniteStateModel`] aggregates the same statistics by
//! source state when the state set is finite.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{MotherKernel, ProductMetric};

/// One observed transition at step `h` of episode `k` (both 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub x: Vec<f64>,
    pub a: usize,
    pub x_next: Vec<f64>,
    pub r: f64,
    pub h: usize,
    pub k: usize,
}

/// Whether a dataset holds a single step or pools all steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetMode {
    PerStep(usize),
    Stationary,
}

/// Ordered history of transitions, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDataset {
    dim: usize,
    mode: DatasetMode,
    xs: Vec<f64>,
    next: Vec<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    steps: Vec<usize>,
    episodes: Vec<usize>,
}

impl StepDataset {
    pub fn new(dim: usize, mode: DatasetMode) -> Self {
        StepDataset {
            dim,
            mode,
            xs: Vec::new(),
            next: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            steps: Vec::new(),
            episodes: Vec::new(),
        }
    }

    pub fn per_step(dim: usize, h: usize) -> Self {
        Self::new(dim, DatasetMode::PerStep(h))
    }

    pub fn stationary(dim: usize) -> Self {
        Self::new(dim, DatasetMode::Stationary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DatasetMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn append(&mut self, sample: TransitionSample) -> Result<()> {
        if let DatasetMode::PerStep(h) = self.mode {
            if sample.h != h {
                return Err(Error::StepMismatch {
                    expected: h,
                    got: sample.h,
                });
            }
        }
        if sample.x.len() != self.dim || sample.x_next.len() != self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: sample.x.len().max(sample.x_next.len()),
            });
        }
        self.xs.extend_from_slice(&sample.x);
        self.next.extend_from_slice(&sample.x_next);
        self.actions.push(sample.a);
        self.rewards.push(sample.r);
        self.steps.push(sample.h);
        self.episodes.push(sample.k);
        Ok(())
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn next_state(&self, i: usize) -> &[f64] {
        &self.next[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn action(&self, i: usize) -> usize {
        self.actions[i]
    }

    #[inline]
    pub fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    pub fn step(&self, i: usize) -> usize {
        self.steps[i]
    }

    pub fn episode(&self, i: usize) -> usize {
        self.episodes[i]
    }

    pub fn sample(&self, i: usize) -> TransitionSample {
        TransitionSample {
            x: self.state(i).to_vec(),
            a: self.actions[i],
            x_next: self.next_state(i).to_vec(),
            r: self.rewards[i],
            h: self.steps[i],
            k: self.episodes[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TransitionSample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// CSV with columns `k, h, x0.., a, xn0.., r`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_samples_csv(self.dim, self.iter(), w)
    }

    /// Reads samples written by [`StepDataset::write_csv`] into a dataset of
    /// the given mode.
    pub fn read_csv<R: Read>(dim: usize, mode: DatasetMode, r: R) -> Result<Self> {
        let mut data = StepDataset::new(dim, mode);
        for s in read_samples_csv(dim, r)? {
            data.append(s)?;
        }
        Ok(data)
    }
}

pub fn samples_csv_header(dim: usize) -> Vec<String> {
    let mut header = vec!["k".to_string(), "h".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("a".into());
    header.extend((0..dim).map(|i| format!("xn{i}")));
    header.push("r".into());
    header
}

pub fn write_samples_csv<W: Write>(dim: usize, samples: impl Iterator<Item = TransitionSample>, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(samples_csv_header(dim))?;
    for s in samples {
        let mut rec = vec![s.k.to_string(), s.h.to_string()];
        rec.extend(s.x.iter().map(|v| format!("{v:?}")));
        rec.push(s.a.to_string());
        rec.extend(s.x_next.iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", s.r));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(dim: usize, r: R) -> Result<Vec<TransitionSample>> {
    let mut rdr = csv::Reader::from_reader(r);
    let expected = samples_csv_header(dim);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::Parse(format!(
            "unexpected dataset header {header:?}, expected {expected:?}"
        )));
    }
    let parse_f = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
    };
    let parse_u = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad integer `{s}`: {e}")))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let k = parse_u(&rec[0])?;
        let h = parse_u(&rec[1])?;
        let x = (0..dim).map(|i| parse_f(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
        let a = parse_u(&rec[2 + dim])?;
        let x_next = (0..dim)
            .map(|i| parse_f(&rec[3 + dim + i]))
            .collect::<Result<Vec<_>>>()?;
        let r = parse_f(&rec[3 + 2 * dim])?;
        out.push(TransitionSample { x, a, x_next, r, h, k });
    }
    Ok(out)
}

/// Raw kernel weights of every sample with respect to one query.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub count: f64,
    pub beta: f64,
}

/// `w~_s = w_s / C`.
pub fn normalized_weights(wv: &WeightVector) -> Vec<f64> {
    wv.weights.iter().map(|w| w / wv.count).collect()
}

/// Per-action weighted sums gathered in one pass over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionSums {
    /// `beta + sum_s w_s`
    pub count: f64,
    /// `sum_s w_s r_s`
    pub reward_sum: f64,
    /// `sum_s w_s V(x'_s)`
    pub value_sum: f64,
}

impl ActionSums {
    /// `sum_s w~_s (r_s + V(x'_s))`
    pub fn target(&self) -> f64 {
        (self.reward_sum + self.value_sum) / self.count
    }
}

/// The kernel smoother: kernel, metric, bandwidth and regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSmoother {
    pub kernel: MotherKernel,
    pub metric: ProductMetric,
    pub sigma: f64,
    pub beta: f64,
}

impl KernelSmoother {
    pub fn new(kernel: MotherKernel, metric: ProductMetric, sigma: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
        }
        if !(beta > 0.0) {
            return Err(Error::param("beta", format!("must be > 0, got {beta}")));
        }
        Ok(KernelSmoother {
            kernel,
            metric,
            sigma,
            beta,
        })
    }

    #[inline]
    pub fn weight(&self, x: &[f64], a: usize, y: &[f64], b: usize) -> f64 {
        let rho = self.metric.distance(x, a, y, b);
        self.kernel.profile(rho / self.sigma)
    }

    pub fn raw_weights(&self, data: &StepDataset, x: &[f64], a: usize) -> WeightVector {
        let weights: Vec<f64> = (0..data.len())
            .map(|s| self.weight(x, a, data.state(s), data.action(s)))
            .collect();
        let count = self.beta + weights.iter().sum::<f64>();
        WeightVector {
            weights,
            count,
            beta: self.beta,
        }
    }

    pub fn count(&self, data: &StepDataset, x: &[f64], a: usize) -> f64 {
        self.beta
            + (0..data.len())
                .map(|s| self.weight(x, a, data.state(s), data.action(s)))
                .sum::<f64>()
    }

    /// `r^(x, a)`; zero on empty data.
    pub fn reward_estimate(&self, data: &StepDataset, x: &[f64], a: usize) -> f64 {
        let sums = self.sums(data, x, a, |_| 0.0);
        sums.reward_sum / sums.count
    }

    /// `P^ V(x, a)` with `V` given as a function of the next state.
    pub fn transition_expectation<F>(&self, data: &StepDataset, x: &[f64], a: usize, v_next: F) -> f64
    where
        F: Fn(&[f64]) -> f64,
    {
        let sums = self.sums(data, x, a, |s| v_next(data.next_state(s)));
        sums.value_sum / sums.count
    }

    /// Weighted sums for a single query. `value(s)` gives `V(x'_s)`.
    pub fn sums<F>(&self, data: &StepDataset, x: &[f64], a: usize, value: F) -> ActionSums
    where
        F: Fn(usize) -> f64,
    {
        let mut out = ActionSums {
            count: self.beta,
            ..Default::default()
        };
        for s in 0..data.len() {
            let w = self.weight(x, a, data.state(s), data.action(s));
            if w == 0.0 {
                continue;
            }
            out.count += w;
            out.reward_sum += w * data.reward(s);
            out.value_sum += w * value(s);
        }
        out
    }

    /// Weighted sums for every action at state `x`, with `values[s] = V(x'_s)`.
    ///
    /// Under the finite-action metric each sample only weighs on its own
    /// action, so this is a single pass with one kernel evaluation per
    /// sample. Returns the sums and the number of kernel evaluations.
    pub fn sums_all_actions(
        &self,
        data: &StepDataset,
        x: &[f64],
        n_actions: usize,
        values: &[f64],
    ) -> (Vec<ActionSums>, u64) {
        debug_assert_eq!(values.len(), data.len());
        let mut out = vec![
            ActionSums {
                count: self.beta,
                ..Default::default()
            };
            n_actions
        ];
        if self.metric.action.is_discrete() {
            for s in 0..data.len() {
                let b = data.action(s);
                let rho = self.metric.state.distance(x, data.state(s));
                let w = self.kernel.profile(rho / self.sigma);
                let acc = &mut out[b];
                acc.count += w;
                acc.reward_sum += w * data.reward(s);
                acc.value_sum += w * values[s];
            }
            (out, data.len() as u64)
        } else {
            for (a, acc) in out.iter_mut().enumerate() {
                *acc = self.sums(data, x, a, |s| values[s]);
            }
            (out, (data.len() * n_actions) as u64)
        }
    }
}

/// Aggregated statistics over a finite state set, indexed by source state
/// and action. Equivalent to the sample-list estimator whenever every
/// sample's state belongs to the set.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteStateModel {
    n_states: usize,
    n_actions: usize,
    counts: Vec<f64>,
    reward_sums: Vec<f64>,
    next_counts: Vec<f64>,
}

impl FiniteStateModel {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        FiniteStateModel {
            n_states,
            n_actions,
            counts: vec![0.0; n_states * n_actions],
            reward_sums: vec![0.0; n_states * n_actions],
            next_counts: vec![0.0; n_states * n_actions * n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn record(&mut self, state: usize, action: usize, next: usize, reward: f64) {
        let i = state * self.n_actions + action;
        self.counts[i] += 1.0;
        self.reward_sums[i] += reward;
        self.next_counts[i * self.n_states + next] += 1.0;
    }

    /// Number of visits to `(state, action)`.
    pub fn visits(&self, state: usize, action: usize) -> f64 {
        self.counts[state * self.n_actions + action]
    }

    /// Generalized counts `C(x, a)` for every state and action, using the
    /// state Gram matrix `gram[x][y] = g(rho_X(x, y) / sigma)`.
    pub fn generalized_counts(&self, gram: &StateGram, beta: f64) -> Vec<f64> {
        let (ns, na) = (self.n_states, self.n_actions);
        let mut out = vec![beta; ns * na];
        for x in 0..ns {
            for y in 0..ns {
                let g = gram.get(x, y);
                if g == 0.0 {
                    continue;
                }
                for a in 0..na {
                    out[x * na + a] += g * self.counts[y * na + a];
                }
            }
        }
        out
    }

    /// `sum_s w~_s (r_s + V(x'_s))` for every `(x, a)`, plus the counts.
    pub fn targets(&self, gram: &StateGram, beta: f64, v_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (ns, na) = (self.n_states, self.n_actions);
        debug_assert_eq!(v_next.len(), ns);
        // per-source sums: rsum(y, a) + sum_y' n(y, a, y') V(y')
        let mut source = vec![0.0; ns * na];
        for (i, src) in source.iter_mut().enumerate() {
            if self.counts[i] == 0.0 {
                continue;
            }
            let row = &self.next_counts[i * ns..(i + 1) * ns];
            *src = self.reward_sums[i] + row.iter().zip(v_next).map(|(n, v)| n * v).sum::<f64>();
        }
        let counts = self.generalized_counts(gram, beta);
        let mut targets = vec![0.0; ns * na];
        for x in 0..ns {
            for y in 0..ns {
                let g = gram.get(x, y);
                if g == 0.0 {
                    continue;
                }
                for a in 0..na {
                    targets[x * na + a] += g * source[y * na + a];
                }
            }
        }
        for (t, c) in targets.iter_mut().zip(&counts) {
            *t /= c;
        }
        (targets, counts)
    }
}

/// Symmetric state-kernel matrix over a finite state set.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGram {
    n: usize,
    values: Vec<f64>,
}

impl StateGram {
    /// `g(rho_X(x_i, x_j) / sigma)`.
    pub fn kernel(kernel: &MotherKernel, metric: &ProductMetric, states: &[Vec<f64>], sigma: f64) -> Self {
        let n = states.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = kernel.profile(metric.state.distance(&states[i], &states[j]) / sigma);
            }
        }
        StateGram { n, values }
    }

    /// Indicator weights (the `sigma -> 0` limit, i.e. tabular counts).
    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        StateGram { n, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}
