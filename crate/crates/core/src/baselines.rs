//! Comparison algorithms: UCB(delta) bonus, tabular UCBVI bonus,
//! Greedy-UCBVI on a fixed grid discretization, and optimistic Q-learning.

use serde::{Deserialize, Serialize};

use crate::bonus::{bandit_radius, practical_bonus, PracticalVariant};
use crate::error::{Error, Result};
use crate::planner::argmax;

/// UCB(delta) radius for an arm pulled `n` times (unit weights). The
/// confidence term is scaled by `1/sqrt(beta + n)`, so unlike the MDP
/// bonuses it is not monotone in `n`.
pub fn ucb_delta_bound(n: u64, c: f64, beta: f64, delta: f64) -> f64 {
    let n = n as f64;
    bandit_radius(beta + n, beta, n, 0.0, c, delta)
}

/// `1/sqrt(beta + N) + (H - h + 1)/(beta + N) + 2 beta/(beta + N)`.
pub fn ucbvi_bonus(n: u64, h: usize, horizon: usize, beta: f64) -> Result<f64> {
    practical_bonus(beta + n as f64, h, horizon, beta, 0.0, PracticalVariant::Discrete)
}

/// `1/sqrt(N) + (H - h + 1)/N` with `N = max(1, n)`.
pub fn discretized_bonus(n: u64, h: usize, horizon: usize) -> f64 {
    let n = n.max(1) as f64;
    1.0 / n.sqrt() + (horizon - h + 1) as f64 / n
}

/// Uniform grid on `[0, 1]^dim`; a state maps to its nearest grid point
/// (`floor(x / step + 0.5)` per axis, so halves round up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    step: f64,
    dim: usize,
    per_axis: usize,
}

impl DiscretizationMap {
    pub fn new(step: f64, dim: usize) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::param("discretization.step", "must lie in (0, 1]"));
        }
        if dim == 0 {
            return Err(Error::param("discretization.dim", "must be >= 1"));
        }
        let per_axis = (1.0 / step + 0.5).floor() as usize + 1;
        Ok(DiscretizationMap { step, dim, per_axis })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn n_cells(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn coords(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dim || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Unmapped(x.to_vec()));
        }
        Ok(x.iter()
            .map(|v| ((v / self.step + 0.5).floor() as usize).min(self.per_axis - 1))
            .collect())
    }

    /// Flattened cell index, first axis fastest.
    pub fn cell(&self, x: &[f64]) -> Result<usize> {
        let c = self.coords(x)?;
        Ok(c.iter().rev().fold(0, |acc, &i| acc * self.per_axis + i))
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        let mut rest = cell;
        (0..self.dim)
            .map(|_| {
                let i = rest % self.per_axis;
                rest /= self.per_axis;
                (i as f64 * self.step).min(1.0)
            })
            .collect()
    }
}

/// Visit counts keyed by `(key, h)` or pooled over `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounts {
    n_keys: usize,
    per_step: bool,
    table: Vec<u64>,
}

impl VisitCounts {
    pub fn pooled(n_keys: usize) -> Self {
        VisitCounts {
            n_keys,
            per_step: false,
            table: vec![0; n_keys],
        }
    }

    pub fn per_step(n_keys: usize, horizon: usize) -> Self {
        VisitCounts {
            n_keys,
            per_step: true,
            table: vec![0; n_keys * horizon],
        }
    }

    fn slot(&self, h: usize, key: usize) -> usize {
        if self.per_step {
            (h - 1) * self.n_keys + key
        } else {
            key
        }
    }

    pub fn get(&self, h: usize, key: usize) -> u64 {
        self.table[self.slot(h, key)]
    }

    /// `max(1, N)`.
    pub fn clamped(&self, h: usize, key: usize) -> u64 {
        self.get(h, key).max(1)
    }

    pub fn increment(&mut self, h: usize, key: usize) {
        let s = self.slot(h, key);
        self.table[s] += 1;
    }
}

/// Output of one Greedy-UCBVI backup.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularStep {
    pub action: usize,
    pub target: f64,
    pub q: Vec<f64>,
}

/// Greedy-UCBVI on the cells of a [`DiscretizationMap`]: empirical cell
/// model, one optimistic backup per visited state and a running-min value
/// table per step. Samples are committed at the end of each episode.
#[derive(Debug, Clone)]
pub struct GreedyUcbviAgent {
    map: DiscretizationMap,
    horizon: usize,
    n_actions: usize,
    stationary: bool,
    counts: VisitCounts,
    reward_sums: Vec<f64>,
    /// `next_counts[m][key * n_cells + next]`, one model per step or pooled.
    next_counts: Vec<Vec<u32>>,
    v: Vec<Vec<f64>>,
    pending: Vec<(usize, usize, usize, usize, f64)>,
}

impl GreedyUcbviAgent {
    pub fn new(map: DiscretizationMap, horizon: usize, n_actions: usize, stationary: bool) -> Self {
        let nc = map.n_cells();
        let keys = nc * n_actions;
        let models = if stationary { 1 } else { horizon };
        GreedyUcbviAgent {
            counts: if stationary {
                VisitCounts::pooled(keys)
            } else {
                VisitCounts::per_step(keys, horizon)
            },
            reward_sums: vec![0.0; keys * models],
            next_counts: vec![vec![0; keys * nc]; models],
            v: (1..=horizon).map(|h| vec![(horizon - h + 1) as f64; nc]).collect(),
            pending: Vec::new(),
            map,
            horizon,
            n_actions,
            stationary,
        }
    }

    fn model(&self, h: usize) -> usize {
        if self.stationary {
            0
        } else {
            h - 1
        }
    }

    pub fn map(&self) -> &DiscretizationMap {
        &self.map
    }

    pub fn counts(&self) -> &VisitCounts {
        &self.counts
    }

    /// `V_h` at every cell.
    pub fn value_table(&self, h: usize) -> &[f64] {
        &self.v[h - 1]
    }

    pub fn evaluate(&self, h: usize, x: &[f64]) -> Result<TabularStep> {
        let cell = self.map.cell(x)?;
        let nc = self.map.n_cells();
        let m = self.model(h);
        let q: Vec<f64> = (0..self.n_actions)
            .map(|a| {
                let key = cell * self.n_actions + a;
                let n = self.counts.clamped(h, key) as f64;
                let mut next_value = 0.0;
                if h < self.horizon {
                    let row = &self.next_counts[m][key * nc..(key + 1) * nc];
                    let vn = &self.v[h];
                    for (t, &c) in row.iter().enumerate() {
                        if c > 0 {
                            next_value += c as f64 * vn[t];
                        }
                    }
                }
                let r_sum = self.reward_sums[m * nc * self.n_actions + key];
                (r_sum + next_value) / n + discretized_bonus(self.counts.get(h, key), h, self.horizon)
            })
            .collect();
        let (action, best) = argmax(q.iter().copied()).ok_or(Error::EmptyActionSet)?;
        Ok(TabularStep {
            action,
            target: best.min((self.horizon - h + 1) as f64),
            q,
        })
    }

    /// Backup at `x`, then `V_h(I(x)) = min(V_h(I(x)), target)`.
    pub fn step(&mut self, h: usize, x: &[f64]) -> Result<TabularStep> {
        let out = self.evaluate(h, x)?;
        let cell = self.map.cell(x)?;
        let slot = &mut self.v[h - 1][cell];
        if out.target < *slot {
            *slot = out.target;
        }
        Ok(out)
    }

    pub fn record(&mut self, h: usize, x: &[f64], a: usize, x_next: &[f64], r: f64) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::OutOfRange {
                index: a,
                len: self.n_actions,
            });
        }
        let cell = self.map.cell(x)?;
        let next = self.map.cell(x_next)?;
        self.pending.push((h, cell, a, next, r));
        Ok(())
    }

    pub fn end_episode(&mut self) {
        let nc = self.map.n_cells();
        for (h, cell, a, next, r) in std::mem::take(&mut self.pending) {
            let key = cell * self.n_actions + a;
            let m = self.model(h);
            self.counts.increment(h, key);
            self.reward_sums[m * nc * self.n_actions + key] += r;
            self.next_counts[m][key * nc + next] += 1;
        }
    }
}

/// Learning rate `alpha_t = (H + 1)/(H + t)`.
pub fn optql_learning_rate(t: u64, horizon: usize) -> f64 {
    (horizon + 1) as f64 / (horizon as f64 + t as f64)
}

/// Optimistic Q-learning on grid cells with step-indexed counts.
#[derive(Debug, Clone)]
pub struct OptQlAgent {
    map: DiscretizationMap,
    horizon: usize,
    n_actions: usize,
    counts: VisitCounts,
    /// `q[h - 1][cell * A + a]`, initialized to `H - h + 1`.
    q: Vec<Vec<f64>>,
}

impl OptQlAgent {
    pub fn new(map: DiscretizationMap, horizon: usize, n_actions: usize) -> Self {
        let keys = map.n_cells() * n_actions;
        OptQlAgent {
            counts: VisitCounts::per_step(keys, horizon),
            q: (1..=horizon).map(|h| vec![(horizon - h + 1) as f64; keys]).collect(),
            map,
            horizon,
            n_actions,
        }
    }

    pub fn counts(&self) -> &VisitCounts {
        &self.counts
    }

    pub fn q_row(&self, h: usize, cell: usize) -> &[f64] {
        &self.q[h - 1][cell * self.n_actions..(cell + 1) * self.n_actions]
    }

    /// `min(H - h + 1, max_a Q_h(I(x), a))`, zero past the horizon.
    pub fn value(&self, h: usize, x: &[f64]) -> Result<f64> {
        if h > self.horizon {
            return Ok(0.0);
        }
        let cell = self.map.cell(x)?;
        let best = self.q_row(h, cell).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(best.min((self.horizon - h + 1) as f64))
    }

    pub fn act(&self, h: usize, x: &[f64]) -> Result<usize> {
        let cell = self.map.cell(x)?;
        Ok(argmax(self.q_row(h, cell).iter().copied())
            .ok_or(Error::EmptyActionSet)?
            .0)
    }

    /// `Q <- (1 - alpha_t) Q + alpha_t (r + V_{h+1}(x') + B)` with `t` the
    /// count after this visit and the bonus at the count before it.
    pub fn update(&mut self, h: usize, x: &[f64], a: usize, r: f64, x_next: &[f64]) -> Result<()> {
        if a >= self.n_actions {
            return Err(Error::OutOfRange {
                index: a,
                len: self.n_actions,
            });
        }
        let key = self.map.cell(x)? * self.n_actions + a;
        let before = self.counts.get(h, key);
        let alpha = optql_learning_rate(before + 1, self.horizon);
        let bonus = discretized_bonus(before, h, self.horizon);
        let v_next = self.value(h + 1, x_next)?;
        let q = &mut self.q[h - 1][key];
        *q = (1.0 - alpha) * *q + alpha * (r + v_next + bonus);
        self.counts.increment(h, key);
        Ok(())
    }
}
