//! Benchmark environments: a Lipschitz bandit, a discrete GridWorld and a
//! continuous GridWorld, plus exact dynamic programming on the discrete one.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Movement of each grid action as `(dx, dy)` in units of one cell.
pub const GRID_MOVES: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];
pub const GRID_ACTION_NAMES: [&str; 4] = ["left", "right", "up", "down"];

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `exp(-||x - goal||^2 / (2 width^2))`
pub fn bump(x: &[f64], goal: [f64; 2], width: f64) -> f64 {
    let d2 = (x[0] - goal[0]).powi(2) + (x[1] - goal[1]).powi(2);
    (-0.5 * d2 / (width * width)).exp()
}

/// Arms on a uniform grid of `[0, 1]` with mean reward `max(a, 1 - a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzBanditEnv {
    arms: Vec<f64>,
    noise_std: f64,
}

impl LipschitzBanditEnv {
    pub fn new(n_arms: usize, noise_std: f64) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::param("env.arms", "need at least 2 arms"));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::param("env.noise_std", "must be >= 0"));
        }
        let arms = (0..n_arms).map(|i| i as f64 / (n_arms - 1) as f64).collect();
        Ok(LipschitzBanditEnv { arms, noise_std })
    }

    pub fn arms(&self) -> &[f64] {
        &self.arms
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn mean(&self, arm: usize) -> Result<f64> {
        let a = *self.arms.get(arm).ok_or(Error::OutOfRange {
            index: arm,
            len: self.arms.len(),
        })?;
        Ok(a.max(1.0 - a))
    }

    pub fn best_mean(&self) -> f64 {
        (0..self.arms.len())
            .map(|i| self.mean(i).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let m = self.mean(arm)?;
        Ok(m + self.noise_std * gaussian(rng))
    }
}

/// `n x n` grid of points in `[0, 1]^2` with slippery moves.
///
/// The intended neighbor receives `1 - slip`; if it is off the grid that
/// mass stays in place. The slip mass is split uniformly over the other
/// valid neighbors (and stays in place if there are none).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGridWorldEnv {
    size: usize,
    slip: f64,
    reward_noise_std: f64,
    goal: [f64; 2],
    reward_width: f64,
    start: usize,
    states: Vec<Vec<f64>>,
    /// `transitions[s * 4 + a]` = list of `(next, prob)`
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
}

impl DiscreteGridWorldEnv {
    pub fn new(
        size: usize,
        slip: f64,
        reward_noise_std: f64,
        goal: [f64; 2],
        reward_width: f64,
        start: [f64; 2],
    ) -> Result<Self> {
        if size < 2 {
            return Err(Error::param("env.size", "grid needs at least 2 points per side"));
        }
        if !(0.0..=1.0).contains(&slip) {
            return Err(Error::param("env.slip", "must lie in [0, 1]"));
        }
        if !(reward_noise_std >= 0.0) {
            return Err(Error::param("env.reward_noise_std", "must be >= 0"));
        }
        if !(reward_width > 0.0) {
            return Err(Error::param("env.reward_width", "must be > 0"));
        }
        let n = size;
        let coord = |i: usize| i as f64 / (n - 1) as f64;
        let states: Vec<Vec<f64>> = (0..n * n).map(|s| vec![coord(s % n), coord(s / n)]).collect();
        let rewards = states.iter().map(|x| bump(x, goal, reward_width)).collect();
        let neighbor = |s: usize, a: usize| -> Option<usize> {
            let (ix, iy) = ((s % n) as i64, (s / n) as i64);
            let (dx, dy) = GRID_MOVES[a];
            let (jx, jy) = (ix + dx, iy + dy);
            if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                None
            } else {
                Some(jy as usize * n + jx as usize)
            }
        };
        let mut transitions = Vec::with_capacity(n * n * 4);
        for s in 0..n * n {
            for a in 0..4 {
                let mut row: Vec<(usize, f64)> = Vec::new();
                let mut add = |t: usize, p: f64| {
                    if p == 0.0 {
                        return;
                    }
                    match row.iter_mut().find(|(u, _)| *u == t) {
                        Some(e) => e.1 += p,
                        None => row.push((t, p)),
                    }
                };
                add(neighbor(s, a).unwrap_or(s), 1.0 - slip);
                let others: Vec<usize> = (0..4).filter(|&b| b != a).filter_map(|b| neighbor(s, b)).collect();
                if others.is_empty() {
                    add(s, slip);
                } else {
                    for t in &others {
                        add(*t, slip / others.len() as f64);
                    }
                }
                transitions.push(row);
            }
        }
        let start = Self::index_of(n, &start)?;
        Ok(DiscreteGridWorldEnv {
            size,
            slip,
            reward_noise_std,
            goal,
            reward_width,
            start,
            states,
            transitions,
            rewards,
        })
    }

    fn index_of(n: usize, x: &[f64]) -> Result<usize> {
        let scale = (n - 1) as f64;
        let ix = (x[0] * scale).round();
        let iy = (x[1] * scale).round();
        if x.len() != 2 || ix < 0.0 || iy < 0.0 || ix > scale || iy > scale {
            return Err(Error::Unmapped(x.to_vec()));
        }
        Ok(iy as usize * n + ix as usize)
    }

    /// Index of the grid point nearest to `x`.
    pub fn state_index(&self, x: &[f64]) -> Result<usize> {
        Self::index_of(self.size, x)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        4
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, s: usize) -> &[f64] {
        &self.states[s]
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn mean_reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * 4 + a]
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<(usize, f64)> {
        if s >= self.n_states() {
            return Err(Error::OutOfRange {
                index: s,
                len: self.n_states(),
            });
        }
        if a >= 4 {
            return Err(Error::OutOfRange { index: a, len: 4 });
        }
        let u: f64 = rng.random();
        let row = self.transition_row(s, a);
        let mut acc = 0.0;
        let mut next = row[row.len() - 1].0;
        for &(t, p) in row {
            acc += p;
            if u < acc {
                next = t;
                break;
            }
        }
        let r = self.rewards[s] + self.reward_noise_std * gaussian(rng);
        Ok((next, r))
    }

    /// `V*_h` for `h = 1..=H+1` (`[h - 1][s]`), with `V*_{H+1} = 0`.
    pub fn optimal_values(&self, horizon: usize) -> Vec<Vec<f64>> {
        exact_optimal_values(self, horizon)
    }
}

/// Backward dynamic programming on the true model.
pub fn exact_optimal_values(env: &DiscreteGridWorldEnv, horizon: usize) -> Vec<Vec<f64>> {
    let ns = env.n_states();
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let best = (0..4)
                .map(|a| env.mean_reward(s) + expectation(env.transition_row(s, a), &v[h]))
                .fold(f64::NEG_INFINITY, f64::max);
            v[h - 1][s] = best;
        }
    }
    v
}

/// Value of a deterministic, step-dependent policy `policy(h, s) -> a`.
pub fn evaluate_policy<F>(env: &DiscreteGridWorldEnv, horizon: usize, mut policy: F) -> Vec<Vec<f64>>
where
    F: FnMut(usize, usize) -> usize,
{
    let ns = env.n_states();
    let mut v = vec![vec![0.0; ns]; horizon + 1];
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let a = policy(h, s);
            v[h - 1][s] = env.mean_reward(s) + expectation(env.transition_row(s, a), &v[h]);
        }
    }
    v
}

fn expectation(row: &[(usize, f64)], v: &[f64]) -> f64 {
    row.iter().map(|&(t, p)| p * v[t]).sum()
}

/// `[0, 1]^2` with displacement `0.1` per action, Gaussian transition and
/// reward noise; next states are clamped to the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousGridWorldEnv {
    pub step_size: f64,
    pub transition_noise_std: f64,
    pub reward_noise_std: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub reward_width: f64,
}

impl ContinuousGridWorldEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::param("env.step_size", "must be > 0"));
        }
        if !(self.transition_noise_std >= 0.0 && self.reward_noise_std >= 0.0) {
            return Err(Error::param("env.noise", "must be >= 0"));
        }
        if !(self.reward_width > 0.0) {
            return Err(Error::param("env.reward_width", "must be > 0"));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        4
    }

    pub fn mean_reward(&self, x: &[f64]) -> f64 {
        bump(x, self.goal, self.reward_width)
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], a: usize, rng: &mut R) -> Result<(Vec<f64>, f64)> {
        if a >= 4 {
            return Err(Error::OutOfRange { index: a, len: 4 });
        }
        let (dx, dy) = GRID_MOVES[a];
        let nx = x[0] + dx as f64 * self.step_size + self.transition_noise_std * gaussian(rng);
        let ny = x[1] + dy as f64 * self.step_size + self.transition_noise_std * gaussian(rng);
        let next = vec![nx.clamp(0.0, 1.0), ny.clamp(0.0, 1.0)];
        let r = self.mean_reward(x) + self.reward_noise_std * gaussian(rng);
        Ok((next, r))
    }
}
