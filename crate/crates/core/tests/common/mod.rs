//! Direct-summation reference implementations shared by the integration tests.
#![allow(dead_code)]

use kucbvi::{ActionMetric, MotherKernel, PracticalVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn profile(kernel: &MotherKernel, z: f64) -> f64 {
    match kernel {
        MotherKernel::Gaussian => (-0.5 * z * z).exp(),
        MotherKernel::ExpPower { p } => (-0.5 * z.abs().powf(*p)).exp(),
    }
}

pub fn action_distance(metric: &ActionMetric, a: usize, b: usize) -> f64 {
    match metric {
        ActionMetric::Discrete if a == b => 0.0,
        ActionMetric::Discrete => f64::INFINITY,
        ActionMetric::Line(p) => (p[a] - p[b]).abs(),
    }
}

pub fn distance(metric: &ActionMetric, x: &[f64], a: usize, y: &[f64], b: usize) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.len() {
        sq += (x[i] - y[i]).powi(2);
    }
    sq.sqrt() + action_distance(metric, a, b)
}

/// A toy sample set in `[0, 1]^dim` with everything the estimators read.
#[derive(Debug, Clone)]
pub struct Instance {
    pub kernel: MotherKernel,
    pub metric: ActionMetric,
    pub n_actions: usize,
    pub sigma: f64,
    pub beta: f64,
    pub xs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub next: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub query: Vec<f64>,
    pub query_action: usize,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, max_samples: usize) -> Self {
        let dim = rng.random_range(1..=3);
        let n_actions = rng.random_range(1..=4);
        let kernel = if rng.random::<bool>() {
            MotherKernel::Gaussian
        } else {
            MotherKernel::ExpPower {
                p: rng.random_range(2.0..4.0),
            }
        };
        let metric = if rng.random::<bool>() {
            ActionMetric::Discrete
        } else {
            ActionMetric::Line((0..n_actions).map(|_| rng.random::<f64>()).collect())
        };
        let point = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
        let n = rng.random_range(0..=max_samples);
        let xs = (0..n).map(|_| point(rng)).collect();
        let next = (0..n).map(|_| point(rng)).collect();
        Instance {
            kernel,
            metric,
            n_actions,
            sigma: 10f64.powf(rng.random_range(-1.5..0.5)),
            beta: 10f64.powf(rng.random_range(-2.0..0.5)),
            xs,
            actions: (0..n).map(|_| rng.random_range(0..n_actions)).collect(),
            next,
            rewards: (0..n).map(|_| rng.random::<f64>()).collect(),
            query: point(rng),
            query_action: rng.random_range(0..n_actions),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.xs.len())
            .map(|s| {
                let d = distance(
                    &self.metric,
                    &self.query,
                    self.query_action,
                    &self.xs[s],
                    self.actions[s],
                );
                profile(&self.kernel, d / self.sigma)
            })
            .collect()
    }

    pub fn count(&self) -> f64 {
        self.beta + self.weights().iter().sum::<f64>()
    }

    pub fn reward(&self) -> f64 {
        let w = self.weights();
        (0..w.len()).map(|s| w[s] * self.rewards[s]).sum::<f64>() / self.count()
    }

    pub fn expectation(&self, v: impl Fn(&[f64]) -> f64) -> f64 {
        let w = self.weights();
        (0..w.len()).map(|s| w[s] * v(&self.next[s])).sum::<f64>() / self.count()
    }
}

pub fn test_value(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (i as f64 + 1.0) * v.sin())
        .sum::<f64>()
        + 0.25
}

pub fn practical_bonus(count: f64, h: usize, horizon: usize, beta: f64, sigma_term: f64, discrete: bool) -> f64 {
    let m = if discrete { 2.0 } else { 1.0 };
    1.0 / count.sqrt() + (horizon + 1 - h) as f64 / count + m * beta / count + sigma_term
}

pub fn variant(discrete: bool) -> PracticalVariant {
    if discrete {
        PracticalVariant::Discrete
    } else {
        PracticalVariant::Continuous
    }
}

/// `min_s [v_s + L rho(u, u_s)]` over the anchors.
pub fn cone_min(metric: &ActionMetric, l: f64, anchors: &[(Vec<f64>, usize, f64)], x: &[f64], a: usize) -> f64 {
    anchors
        .iter()
        .map(|(y, b, v)| {
            let d = distance(metric, x, a, y, *b);
            if d.is_infinite() {
                f64::INFINITY
            } else {
                v + l * d
            }
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
