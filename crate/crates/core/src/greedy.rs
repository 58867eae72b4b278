//! Greedy-Kernel-UCBVI: one optimistic Bellman backup at the visited state,
//! greedy action, and a running-minimum Lipschitz upper bound on each `V_h`.
//!
//! `V_h` only ever gains anchors, so for every state its value is pointwise
//! non-increasing across episodes. The values of `V_{h+1}` at stored next
//! states are cached and lowered in place whenever an anchor is added, which
//! keeps the cost of one step linear in the amount of data.

use crate::bonus::BonusRule;
use crate::error::{Error, Result};
use crate::estimator::{KernelSmoother, StepDataset, TransitionSample};
use crate::kernel::StateMetric;
use crate::planner::{argmax, LipschitzConstants};

/// `V(x) = min(cap, min_s [v_s + L rho_X(x, x_s)])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzV {
    dim: usize,
    states: Vec<f64>,
    values: Vec<f64>,
    lipschitz: f64,
    cap: f64,
    metric: StateMetric,
}

impl LipschitzV {
    pub fn new(dim: usize, lipschitz: f64, cap: f64, metric: StateMetric) -> Self {
        LipschitzV {
            dim,
            states: Vec::new(),
            values: Vec::new(),
            lipschitz,
            cap,
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Minimum over anchor cones, `+inf` without anchors.
    pub fn query_raw(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for s in 0..self.values.len() {
            let y = &self.states[s * self.dim..(s + 1) * self.dim];
            let v = self.values[s] + self.lipschitz * self.metric.distance(x, y);
            if v < best {
                best = v;
            }
        }
        best
    }

    pub fn query(&self, x: &[f64]) -> f64 {
        self.query_raw(x).min(self.cap)
    }

    /// Cone of a single anchor evaluated at `x`.
    #[inline]
    fn cone(&self, anchor: &[f64], value: f64, x: &[f64]) -> f64 {
        value + self.lipschitz * self.metric.distance(x, anchor)
    }
}

/// Adds the anchor `(x, new_target)`; never increases any query.
pub fn refine_value(v: &mut LipschitzV, x: &[f64], new_target: f64) {
    debug_assert_eq!(x.len(), v.dim);
    v.states.extend_from_slice(x);
    v.values.push(new_target);
}

/// Outcome of one greedy backup.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub action: usize,
    /// `min(H - h + 1, max_a Q~(x, a))`
    pub target: f64,
    pub q: Vec<f64>,
    pub kernel_evaluations: u64,
}

/// Optimistic targets `Q~_h(x, a)` for every action, with `v_next[s]` the
/// value of `V_{h+1}` at the next state of sample `s`.
pub fn greedy_step_with_values(
    x: &[f64],
    h: usize,
    horizon: usize,
    data: &StepDataset,
    v_next: &[f64],
    smoother: &KernelSmoother,
    bonus: &BonusRule,
    n_actions: usize,
) -> Result<GreedyStep> {
    if n_actions == 0 {
        return Err(Error::EmptyActionSet);
    }
    let (sums, evals) = smoother.sums_all_actions(data, x, n_actions, v_next);
    let q: Vec<f64> = sums.iter().map(|s| s.target() + bonus.eval(s.count, h)).collect();
    let (action, best) = argmax(q.iter().copied()).expect("non-empty");
    Ok(GreedyStep {
        action,
        target: best.min((horizon - h + 1) as f64),
        q,
        kernel_evaluations: evals,
    })
}

/// Greedy backup at `x` using the step-`(h+1)` bound `v_next` (`None` for
/// `h = H`, where `V_{H+1} = 0`).
pub fn greedy_step(
    x: &[f64],
    h: usize,
    horizon: usize,
    data: &StepDataset,
    v_next: Option<&LipschitzV>,
    smoother: &KernelSmoother,
    bonus: &BonusRule,
    n_actions: usize,
) -> Result<GreedyStep> {
    let values: Vec<f64> = match v_next {
        Some(v) => (0..data.len()).map(|s| v.query(data.next_state(s))).collect(),
        None => vec![0.0; data.len()],
    };
    greedy_step_with_values(x, h, horizon, data, &values, smoother, bonus, n_actions)
}

/// Full Greedy-Kernel-UCBVI learner state.
#[derive(Debug, Clone)]
pub struct GreedyKernelAgent {
    smoother: KernelSmoother,
    bonus: BonusRule,
    horizon: usize,
    n_actions: usize,
    stationary: bool,
    data: Vec<StepDataset>,
    v: Vec<LipschitzV>,
    /// `cache[h - 1][s]`: `V_{h+1}` at the next state of sample `s` of the
    /// dataset read at step `h`.
    cache: Vec<Vec<f64>>,
    pending: Vec<TransitionSample>,
    kernel_evaluations: u64,
}

impl GreedyKernelAgent {
    pub fn new(
        smoother: KernelSmoother,
        bonus: BonusRule,
        lipschitz: &LipschitzConstants,
        horizon: usize,
        n_actions: usize,
        dim: usize,
        stationary: bool,
    ) -> Self {
        let data = if stationary {
            vec![StepDataset::stationary(dim)]
        } else {
            (1..=horizon).map(|h| StepDataset::per_step(dim, h)).collect()
        };
        let v = (1..=horizon)
            .map(|h| LipschitzV::new(dim, lipschitz.get(h), (horizon - h + 1) as f64, smoother.metric.state))
            .collect();
        GreedyKernelAgent {
            smoother,
            bonus,
            horizon,
            n_actions,
            stationary,
            data,
            v,
            cache: vec![Vec::new(); horizon],
            pending: Vec::new(),
            kernel_evaluations: 0,
        }
    }

    fn data_index(&self, h: usize) -> usize {
        if self.stationary {
            0
        } else {
            h - 1
        }
    }

    pub fn set_bandwidth(&mut self, sigma: f64) {
        self.smoother.sigma = sigma;
    }

    pub fn set_bonus(&mut self, bonus: BonusRule) {
        self.bonus = bonus;
    }

    pub fn value_function(&self, h: usize) -> &LipschitzV {
        &self.v[h - 1]
    }

    pub fn kernel_evaluations(&self) -> u64 {
        self.kernel_evaluations
    }

    pub fn committed_samples(&self) -> usize {
        self.data.iter().map(StepDataset::len).sum()
    }

    /// Greedy backup without side effects.
    pub fn evaluate(&self, h: usize, x: &[f64]) -> GreedyStep {
        let d = &self.data[self.data_index(h)];
        greedy_step_with_values(
            x,
            h,
            self.horizon,
            d,
            &self.cache[h - 1],
            &self.smoother,
            &self.bonus,
            self.n_actions,
        )
        .expect("agent has actions")
    }

    /// Backup at the visited state, then lower `V_h` with the new target.
    pub fn step(&mut self, h: usize, x: &[f64]) -> GreedyStep {
        let out = self.evaluate(h, x);
        self.kernel_evaluations += out.kernel_evaluations;
        self.refine(h, x, out.target);
        out
    }

    fn refine(&mut self, h: usize, x: &[f64], target: f64) {
        refine_value(&mut self.v[h - 1], x, target);
        if h >= 2 {
            // V_h is read at step h - 1
            let d = &self.data[self.data_index(h - 1)];
            let v = &self.v[h - 1];
            for (s, c) in self.cache[h - 2].iter_mut().enumerate() {
                let cand = v.cone(x, target, d.next_state(s));
                if cand < *c {
                    *c = cand;
                }
            }
        }
    }

    /// Samples become visible to the estimator at the end of the episode.
    pub fn record(&mut self, sample: TransitionSample) {
        self.pending.push(sample);
    }

    pub fn end_episode(&mut self) -> Result<()> {
        let pending = std::mem::take(&mut self.pending);
        for s in pending {
            let idx = self.data_index(s.h);
            if self.stationary {
                for h in 1..=self.horizon {
                    let v = self.v_next_at(h, &s.x_next);
                    self.cache[h - 1].push(v);
                }
            } else {
                let v = self.v_next_at(s.h, &s.x_next);
                self.cache[s.h - 1].push(v);
            }
            self.data[idx].append(s)?;
        }
        Ok(())
    }

    /// `V_{h+1}(x)`.
    fn v_next_at(&self, h: usize, x: &[f64]) -> f64 {
        if h >= self.horizon {
            0.0
        } else {
            self.v[h].query(x)
        }
    }
}
