//! Kernel-UCBVI planning: Lipschitz constants of the optimal Q functions,
//! backward induction of optimistic targets, Lipschitz interpolation of Q and
//! greedy action selection.
//!
//! Two planning paths share the same targets:
//! * [`optimistic_backward_induction`] works on arbitrary metric state spaces
//!   and interpolates Q between visited state-action pairs;
//! * [`plan_finite`] evaluates targets directly at every state of a finite
//!   state set from aggregated statistics, without interpolation.

use rayon::prelude::*;

use crate::bonus::BonusRule;
use crate::error::{Error, Result};
use crate::estimator::{FiniteStateModel, KernelSmoother, StateGram, StepDataset};
use crate::kernel::ProductMetric;

/// `L_h = lambda_r * sum_{h'=h}^{H} lambda_p^(H - h')` for `h = 1..=H`, and
/// `L_{H+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstants {
    values: Vec<f64>,
}

impl LipschitzConstants {
    /// `L_h`, 1-based; `h = H + 1` gives 0.
    pub fn get(&self, h: usize) -> f64 {
        self.values[h - 1]
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

pub fn lipschitz_constants(lambda_r: f64, lambda_p: f64, horizon: usize) -> Result<LipschitzConstants> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be >= 1"));
    }
    if !(lambda_r >= 0.0 && lambda_p >= 0.0) {
        return Err(Error::param("lambda", "Lipschitz constants must be >= 0"));
    }
    let mut values = vec![0.0; horizon + 1];
    // direct sum so that lambda_p^0 = 1 also for lambda_p = 0
    for h in 1..=horizon {
        values[h - 1] = (h..=horizon)
            .map(|hp| lambda_r * lambda_p.powi((horizon - hp) as i32))
            .sum();
    }
    Ok(LipschitzConstants { values })
}

#[inline]
fn cone(value: f64, lipschitz: f64, distance: f64) -> f64 {
    if distance.is_infinite() {
        f64::INFINITY
    } else {
        value + lipschitz * distance
    }
}

/// Minimum of cones over state-action anchors:
/// `Q(x, a) = min_s [q_s + L rho((x, a), (x_s, a_s))]`, `+inf` without anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzQ {
    dim: usize,
    states: Vec<f64>,
    actions: Vec<usize>,
    values: Vec<f64>,
    lipschitz: f64,
    metric: ProductMetric,
}

impl LipschitzQ {
    pub fn new(dim: usize, lipschitz: f64, metric: ProductMetric) -> Self {
        LipschitzQ {
            dim,
            states: Vec::new(),
            actions: Vec::new(),
            values: Vec::new(),
            lipschitz,
            metric,
        }
    }

    pub fn push(&mut self, x: &[f64], a: usize, value: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.states.extend_from_slice(x);
        self.actions.push(a);
        self.values.push(value);
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

    pub fn anchor_values(&self) -> &[f64] {
        &self.values
    }

    pub fn query(&self, x: &[f64], a: usize) -> f64 {
        interpolate_query(self, x, a)
    }
}

pub fn interpolate_query(q: &LipschitzQ, x: &[f64], a: usize) -> f64 {
    let mut best = f64::INFINITY;
    for s in 0..q.values.len() {
        let y = &q.states[s * q.dim..(s + 1) * q.dim];
        let d = q.metric.distance(x, a, y, q.actions[s]);
        let v = cone(q.values[s], q.lipschitz, d);
        if v < best {
            best = v;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Where the planner reads step-`h` samples from.
#[derive(Debug, Clone, Copy)]
pub enum DataSource<'a> {
    /// One dataset per step, `datasets[h - 1]`.
    PerStep(&'a [StepDataset]),
    /// A single dataset pooled over all steps.
    Stationary(&'a StepDataset),
}

impl<'a> DataSource<'a> {
    pub fn for_step(&self, h: usize) -> &'a StepDataset {
        match self {
            DataSource::PerStep(d) => &d[h - 1],
            DataSource::Stationary(d) => d,
        }
    }
}

/// Result of one round of optimistic backward induction.
#[derive(Debug, Clone)]
pub struct OptimisticPlan {
    /// `q[h - 1]` is the interpolated `Q_h`.
    pub q: Vec<LipschitzQ>,
    /// `values[h - 1]`: `V_h` at the next states of the step-`(h-1)` data
    /// (for `h >= 2`) or at the supplied initial states (for `h = 1`).
    pub values: Vec<Vec<f64>>,
    pub horizon: usize,
    pub n_actions: usize,
}

impl OptimisticPlan {
    /// `V_h(x) = min(H - h + 1, max_a Q_h(x, a))`, `V_{H+1} = 0`.
    pub fn value(&self, h: usize, x: &[f64]) -> f64 {
        if h > self.horizon {
            return 0.0;
        }
        optimistic_value(&self.q[h - 1], x, self.n_actions, (self.horizon - h + 1) as f64)
    }

    pub fn q_value(&self, h: usize, x: &[f64], a: usize) -> f64 {
        self.q[h - 1].query(x, a)
    }
}

fn optimistic_value(q: &LipschitzQ, x: &[f64], n_actions: usize, cap: f64) -> f64 {
    let best = (0..n_actions).map(|a| q.query(x, a)).fold(f64::NEG_INFINITY, f64::max);
    best.min(cap)
}

/// Inputs shared by both planning paths.
#[derive(Debug, Clone)]
pub struct PlanningContext<'a> {
    pub smoother: &'a KernelSmoother,
    pub bonus: &'a BonusRule,
    pub lipschitz: &'a LipschitzConstants,
    pub horizon: usize,
    pub n_actions: usize,
}

/// Backward induction with Lipschitz interpolation of the optimistic Q.
///
/// For `h = H..1`, targets `r^ + P^ V_{h+1} + B` are computed at every stored
/// step-`h` pair and interpolated into `Q_h`; `V_{h+1}` is evaluated at the
/// stored next states. `initial_states` are the states where `V_1` is
/// reported in `values[0]`.
pub fn optimistic_backward_induction(
    ctx: &PlanningContext<'_>,
    data: DataSource<'_>,
    initial_states: &[Vec<f64>],
) -> OptimisticPlan {
    let horizon = ctx.horizon;
    let mut q: Vec<Option<LipschitzQ>> = vec![None; horizon];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon];

    for h in (1..=horizon).rev() {
        let d = data.for_step(h);
        let dim = d.dim();
        // V_{h+1} at the stored next states
        let v_next: Vec<f64> = match q.get(h).and_then(Option::as_ref) {
            None => vec![0.0; d.len()],
            Some(q_next) => {
                let cap = (horizon - h) as f64;
                let v: Vec<f64> = (0..d.len())
                    .into_par_iter()
                    .map(|s| optimistic_value(q_next, d.next_state(s), ctx.n_actions, cap))
                    .collect();
                v
            }
        };
        if h < horizon {
            values[h] = v_next.clone();
        }

        let targets: Vec<f64> = (0..d.len())
            .into_par_iter()
            .map(|m| {
                let sums = ctx.smoother.sums(d, d.state(m), d.action(m), |s| v_next[s]);
                sums.target() + ctx.bonus.eval(sums.count, h)
            })
            .collect();

        let mut qh = LipschitzQ::new(dim, ctx.lipschitz.get(h), ctx.smoother.metric.clone());
        for (m, t) in targets.iter().enumerate() {
            qh.push(d.state(m), d.action(m), *t);
        }
        q[h - 1] = Some(qh);
    }

    let q: Vec<LipschitzQ> = q.into_iter().map(|x| x.expect("every step planned")).collect();
    values[0] = initial_states
        .iter()
        .map(|x| optimistic_value(&q[0], x, ctx.n_actions, horizon as f64))
        .collect();
    OptimisticPlan {
        q,
        values,
        horizon,
        n_actions: ctx.n_actions,
    }
}

/// `argmax_a Q_h(x, a)` over `actions`, ties broken by position.
pub fn act_greedy(plan: &OptimisticPlan, h: usize, x: &[f64], actions: &[usize]) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::EmptyActionSet);
    }
    let (i, _) = argmax(actions.iter().map(|&a| plan.q_value(h, x, a))).expect("non-empty");
    Ok(actions[i])
}

/// Optimistic Q tables on a finite state set.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePlan {
    /// `q[h - 1][x * A + a]`
    pub q: Vec<Vec<f64>>,
    /// `v[h - 1][x]`, with `v[H]` identically zero.
    pub v: Vec<Vec<f64>>,
    pub n_actions: usize,
}

impl FinitePlan {
    /// Plan before any data: every Q is `+inf` and `V_h = H - h + 1`.
    pub fn initial(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        let q = vec![vec![f64::INFINITY; n_states * n_actions]; horizon];
        let mut v: Vec<Vec<f64>> = (1..=horizon)
            .map(|h| vec![(horizon - h + 1) as f64; n_states])
            .collect();
        v.push(vec![0.0; n_states]);
        FinitePlan { q, v, n_actions }
    }

    pub fn q_row(&self, h: usize, x: usize) -> &[f64] {
        &self.q[h - 1][x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn greedy_action(&self, h: usize, x: usize) -> usize {
        argmax(self.q_row(h, x).iter().copied()).expect("at least one action").0
    }
}

/// Statistics for [`plan_finite`]: one model per step, or one pooled model.
#[derive(Debug, Clone, Copy)]
pub enum FiniteSource<'a> {
    PerStep(&'a [FiniteStateModel]),
    Stationary(&'a FiniteStateModel),
}

impl<'a> FiniteSource<'a> {
    fn for_step(&self, h: usize) -> &'a FiniteStateModel {
        match self {
            FiniteSource::PerStep(m) => &m[h - 1],
            FiniteSource::Stationary(m) => m,
        }
    }
}

/// Backward induction evaluated directly at every state of a finite set.
/// `gram` is the state kernel matrix, or the identity for tabular counts.
pub fn plan_finite(
    source: FiniteSource<'_>,
    gram: &StateGram,
    beta: f64,
    bonus: &BonusRule,
    horizon: usize,
) -> FinitePlan {
    let first = source.for_step(1);
    let (ns, na) = (first.n_states(), first.n_actions());
    let mut plan = FinitePlan::initial(ns, na, horizon);
    for h in (1..=horizon).rev() {
        let model = source.for_step(h);
        let (targets, counts) = model.targets(gram, beta, &plan.v[h]);
        let q: Vec<f64> = targets
            .iter()
            .zip(&counts)
            .map(|(t, c)| t + bonus.eval(*c, h))
            .collect();
        let cap = (horizon - h + 1) as f64;
        for x in 0..ns {
            let best = q[x * na..(x + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            plan.v[h - 1][x] = best.min(cap);
        }
        plan.q[h - 1] = q;
    }
    plan
}
