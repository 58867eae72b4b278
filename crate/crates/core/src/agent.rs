//! A common interface over every learner, so that one episode loop drives
//! them all.

use crate::baselines::{DiscretizationMap, GreedyUcbviAgent, OptQlAgent};
use crate::bonus::{bandit_radius, BonusParams, BonusRule};
use crate::config::{Algorithm, BonusSpec, EnvSpec, RunConfig};
use crate::envs::DiscreteGridWorldEnv;
use crate::error::{Error, Result};
use crate::estimator::{FiniteStateModel, KernelSmoother, StateGram, StepDataset, TransitionSample};
use crate::greedy::GreedyKernelAgent;
use crate::kernel::{psi_sigma, ProductMetric};
use crate::planner::{
    act_greedy, argmax, lipschitz_constants, optimistic_backward_induction, plan_finite, DataSource, FinitePlan,
    FiniteSource, LipschitzConstants, OptimisticPlan, PlanningContext,
};

/// Episode protocol: `begin_episode`, then `act`/`observe` for each step,
/// then `end_episode`.
pub trait Agent: Send {
    fn algorithm(&self) -> Algorithm;

    /// Prepares episode `k` (1-based) with bandwidth `sigma`.
    fn begin_episode(&mut self, k: usize, sigma: f64) -> Result<()>;

    /// Action at step `h`; may update internal value bounds.
    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize>;

    /// Action the current policy takes at `(h, x)`, without side effects.
    fn policy(&self, h: usize, x: &[f64]) -> Result<usize>;

    fn observe(&mut self, sample: &TransitionSample) -> Result<()>;

    fn end_episode(&mut self) -> Result<()>;

    /// Current optimistic estimate of `V_1(x)`, when the method keeps one.
    fn optimistic_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// Resolves the configured MDP bonus for episode `k` at bandwidth `sigma`.
pub fn resolve_bonus(cfg: &RunConfig, k: usize, sigma: f64) -> Result<BonusRule> {
    match cfg.bonus {
        BonusSpec::Practical { variant, sigma_factor } => Ok(BonusRule::Practical {
            variant,
            horizon: cfg.horizon,
            beta: cfg.beta,
            sigma_term: sigma_factor * sigma,
        }),
        BonusSpec::Theoretical { delta, covering } => BonusRule::theoretical(
            BonusParams {
                delta,
                beta: cfg.beta,
                sigma,
                horizon: cfg.horizon,
                episodes: cfg.episodes,
                lambda_r: cfg.lambda_r,
                lambda_p: cfg.lambda_p,
                covering,
                kernel: cfg.kernel,
            },
            k,
        ),
        BonusSpec::Bandit { .. } => Err(Error::param("bonus.kind", "bandit bonus used for an MDP")),
    }
}

fn grid_env(cfg: &RunConfig) -> Result<DiscreteGridWorldEnv> {
    match cfg.env {
        EnvSpec::DiscreteGrid {
            size,
            slip,
            reward_noise_std,
            goal,
            reward_width,
            start,
        } => DiscreteGridWorldEnv::new(size, slip, reward_noise_std, goal, reward_width, start),
        _ => Err(Error::param(
            "env.kind",
            "a finite-state planner needs the discrete grid",
        )),
    }
}

/// Builds the learner for `algo` under `cfg`.
pub fn build_agent(cfg: &RunConfig, algo: Algorithm) -> Result<Box<dyn Agent>> {
    let n_actions = 4;
    let dim = cfg.env.state_dim();
    match algo {
        Algorithm::KernelUcbvi if !cfg.interpolate => Ok(Box::new(FiniteUcbvi::new(cfg, true)?)),
        Algorithm::KernelUcbvi => Ok(Box::new(InterpolatedKernelUcbvi::new(cfg)?)),
        Algorithm::Ucbvi => Ok(Box::new(FiniteUcbvi::new(cfg, false)?)),
        Algorithm::GreedyKernelUcbvi => {
            let smoother = KernelSmoother::new(cfg.kernel, ProductMetric::discrete_actions(), 1.0, cfg.beta)?;
            let lipschitz = lipschitz_constants(cfg.lambda_r, cfg.lambda_p, cfg.horizon)?;
            let bonus = resolve_bonus(cfg, 1, 1.0)?;
            Ok(Box::new(GreedyKernel {
                cfg: cfg.clone(),
                inner: GreedyKernelAgent::new(smoother, bonus, &lipschitz, cfg.horizon, n_actions, dim, cfg.stationary),
            }))
        }
        Algorithm::GreedyUcbvi => {
            let map = DiscretizationMap::new(cfg.discretization_step, dim)?;
            Ok(Box::new(GreedyUcbvi(GreedyUcbviAgent::new(
                map,
                cfg.horizon,
                n_actions,
                cfg.stationary,
            ))))
        }
        Algorithm::OptQl => {
            let map = DiscretizationMap::new(cfg.discretization_step, dim)?;
            Ok(Box::new(OptQl(OptQlAgent::new(map, cfg.horizon, n_actions))))
        }
        Algorithm::KernelUcb | Algorithm::UcbDelta => Ok(Box::new(KernelBandit::new(cfg, algo)?)),
    }
}

/// Kernel-UCBVI (kernel Gram matrix) or UCBVI (identity) evaluated directly
/// at every state of a finite grid, without interpolation.
pub struct FiniteUcbvi {
    cfg: RunConfig,
    env: DiscreteGridWorldEnv,
    kernel_counts: bool,
    models: Vec<FiniteStateModel>,
    gram: StateGram,
    gram_sigma: f64,
    plan: FinitePlan,
}

impl FiniteUcbvi {
    pub fn new(cfg: &RunConfig, kernel_counts: bool) -> Result<Self> {
        let env = grid_env(cfg)?;
        let (ns, na) = (env.n_states(), env.n_actions());
        let n_models = if cfg.stationary { 1 } else { cfg.horizon };
        Ok(FiniteUcbvi {
            models: (0..n_models).map(|_| FiniteStateModel::new(ns, na)).collect(),
            gram: StateGram::identity(ns),
            gram_sigma: f64::NAN,
            plan: FinitePlan::initial(ns, na, cfg.horizon),
            cfg: cfg.clone(),
            env,
            kernel_counts,
        })
    }

    pub fn plan(&self) -> &FinitePlan {
        &self.plan
    }
}

impl Agent for FiniteUcbvi {
    fn algorithm(&self) -> Algorithm {
        if self.kernel_counts {
            Algorithm::KernelUcbvi
        } else {
            Algorithm::Ucbvi
        }
    }

    fn begin_episode(&mut self, k: usize, sigma: f64) -> Result<()> {
        if !(k - 1).is_multiple_of(self.cfg.plan_every) {
            return Ok(());
        }
        // tabular counts carry no kernel bias
        let sigma = if self.kernel_counts { sigma } else { 0.0 };
        if self.kernel_counts && sigma != self.gram_sigma {
            let metric = ProductMetric::discrete_actions();
            self.gram = StateGram::kernel(&self.cfg.kernel, &metric, self.env.states(), sigma);
            self.gram_sigma = sigma;
        }
        let bonus = resolve_bonus(&self.cfg, k, sigma)?;
        let source = if self.cfg.stationary {
            FiniteSource::Stationary(&self.models[0])
        } else {
            FiniteSource::PerStep(&self.models)
        };
        self.plan = plan_finite(source, &self.gram, self.cfg.beta, &bonus, self.cfg.horizon);
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        self.policy(h, x)
    }

    fn policy(&self, h: usize, x: &[f64]) -> Result<usize> {
        Ok(self.plan.greedy_action(h, self.env.state_index(x)?))
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        let from = self.env.state_index(&s.x)?;
        let to = self.env.state_index(&s.x_next)?;
        let m = if self.cfg.stationary { 0 } else { s.h - 1 };
        self.models[m].record(from, s.a, to, s.r);
        Ok(())
    }

    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }

    fn optimistic_value(&self, x: &[f64]) -> Option<f64> {
        let s = self.env.state_index(x).ok()?;
        Some(self.plan.v[0][s])
    }
}

/// Kernel-UCBVI with Lipschitz interpolation of the optimistic Q functions.
pub struct InterpolatedKernelUcbvi {
    cfg: RunConfig,
    smoother: KernelSmoother,
    lipschitz: LipschitzConstants,
    data: Vec<StepDataset>,
    plan: Option<OptimisticPlan>,
    start: Vec<f64>,
}

impl InterpolatedKernelUcbvi {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let dim = cfg.env.state_dim();
        let data = if cfg.stationary {
            vec![StepDataset::stationary(dim)]
        } else {
            (1..=cfg.horizon).map(|h| StepDataset::per_step(dim, h)).collect()
        };
        let start = match cfg.env {
            EnvSpec::DiscreteGrid { start, .. } | EnvSpec::ContinuousGrid { start, .. } => start.to_vec(),
            EnvSpec::LipschitzBandit { .. } => Vec::new(),
        };
        Ok(InterpolatedKernelUcbvi {
            smoother: KernelSmoother::new(cfg.kernel, ProductMetric::discrete_actions(), 1.0, cfg.beta)?,
            lipschitz: lipschitz_constants(cfg.lambda_r, cfg.lambda_p, cfg.horizon)?,
            cfg: cfg.clone(),
            data,
            plan: None,
            start,
        })
    }

    pub fn plan(&self) -> Option<&OptimisticPlan> {
        self.plan.as_ref()
    }
}

impl Agent for InterpolatedKernelUcbvi {
    fn algorithm(&self) -> Algorithm {
        Algorithm::KernelUcbvi
    }

    fn begin_episode(&mut self, k: usize, sigma: f64) -> Result<()> {
        if !(k - 1).is_multiple_of(self.cfg.plan_every) && self.plan.is_some() {
            return Ok(());
        }
        self.smoother.sigma = sigma;
        let bonus = resolve_bonus(&self.cfg, k, sigma)?;
        let ctx = PlanningContext {
            smoother: &self.smoother,
            bonus: &bonus,
            lipschitz: &self.lipschitz,
            horizon: self.cfg.horizon,
            n_actions: 4,
        };
        let source = if self.cfg.stationary {
            DataSource::Stationary(&self.data[0])
        } else {
            DataSource::PerStep(&self.data)
        };
        self.plan = Some(optimistic_backward_induction(
            &ctx,
            source,
            std::slice::from_ref(&self.start),
        ));
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        self.policy(h, x)
    }

    fn policy(&self, h: usize, x: &[f64]) -> Result<usize> {
        let plan = self
            .plan
            .as_ref()
            .ok_or(Error::Domain("no plan before the first episode".into()))?;
        act_greedy(plan, h, x, &[0, 1, 2, 3])
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        let i = if self.cfg.stationary { 0 } else { s.h - 1 };
        self.data[i].append(s.clone())
    }

    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }

    fn optimistic_value(&self, x: &[f64]) -> Option<f64> {
        self.plan.as_ref().map(|p| p.value(1, x))
    }
}

pub struct GreedyKernel {
    cfg: RunConfig,
    inner: GreedyKernelAgent,
}

impl GreedyKernel {
    pub fn inner(&self) -> &GreedyKernelAgent {
        &self.inner
    }
}

impl Agent for GreedyKernel {
    fn algorithm(&self) -> Algorithm {
        Algorithm::GreedyKernelUcbvi
    }

    fn begin_episode(&mut self, k: usize, sigma: f64) -> Result<()> {
        self.inner.set_bandwidth(sigma);
        self.inner.set_bonus(resolve_bonus(&self.cfg, k, sigma)?);
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        Ok(self.inner.step(h, x).action)
    }

    fn policy(&self, h: usize, x: &[f64]) -> Result<usize> {
        Ok(self.inner.evaluate(h, x).action)
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        self.inner.record(s.clone());
        Ok(())
    }

    fn end_episode(&mut self) -> Result<()> {
        self.inner.end_episode()
    }

    fn optimistic_value(&self, x: &[f64]) -> Option<f64> {
        Some(self.inner.value_function(1).query(x))
    }
}

pub struct GreedyUcbvi(pub GreedyUcbviAgent);

impl Agent for GreedyUcbvi {
    fn algorithm(&self) -> Algorithm {
        Algorithm::GreedyUcbvi
    }

    fn begin_episode(&mut self, _k: usize, _sigma: f64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        Ok(self.0.step(h, x)?.action)
    }

    fn policy(&self, h: usize, x: &[f64]) -> Result<usize> {
        Ok(self.0.evaluate(h, x)?.action)
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        self.0.record(s.h, &s.x, s.a, &s.x_next, s.r)
    }

    fn end_episode(&mut self) -> Result<()> {
        self.0.end_episode();
        Ok(())
    }

    fn optimistic_value(&self, x: &[f64]) -> Option<f64> {
        let cell = self.0.map().cell(x).ok()?;
        Some(self.0.value_table(1)[cell])
    }
}

/// Optimistic Q-learning updates online, within the episode.
pub struct OptQl(pub OptQlAgent);

impl Agent for OptQl {
    fn algorithm(&self) -> Algorithm {
        Algorithm::OptQl
    }

    fn begin_episode(&mut self, _k: usize, _sigma: f64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        self.0.act(h, x)
    }

    fn policy(&self, h: usize, x: &[f64]) -> Result<usize> {
        self.0.act(h, x)
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        self.0.update(s.h, &s.x, s.a, s.r, &s.x_next)
    }

    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }

    fn optimistic_value(&self, x: &[f64]) -> Option<f64> {
        self.0.value(1, x).ok()
    }
}

/// `new` where `old` is larger, elementwise.
pub fn enforce_monotone_bounds(old: &[f64], new: &[f64]) -> Result<Vec<f64>> {
    if old.len() != new.len() {
        return Err(Error::LengthMismatch {
            left: old.len(),
            right: new.len(),
        });
    }
    Ok(old.iter().zip(new).map(|(o, n)| o.min(*n)).collect())
}

/// Upper-confidence bandit over a finite arm net. With kernel weights this
/// is the bandit instance of Kernel-UCBVI; with unit weights on identical
/// arms it is UCB(delta). Statistics are aggregated per arm, so an index
/// update costs `O(arms^2)` regardless of the number of rounds.
pub struct KernelBandit {
    algo: Algorithm,
    cfg: RunConfig,
    arms: Vec<f64>,
    c: f64,
    delta: f64,
    pulls: Vec<u64>,
    reward_sums: Vec<f64>,
    /// `weights[i * n + j] = psi(a_i, a_j)` at `weights_sigma`.
    weights: Vec<f64>,
    weights_sigma: f64,
    bounds: Vec<f64>,
}

impl KernelBandit {
    pub fn new(cfg: &RunConfig, algo: Algorithm) -> Result<Self> {
        let n = match cfg.env {
            EnvSpec::LipschitzBandit { arms, .. } => arms,
            _ => {
                return Err(Error::param(
                    "env.kind",
                    "bandit algorithms need the bandit environment",
                ))
            }
        };
        let BonusSpec::Bandit { c, delta } = cfg.bonus else {
            return Err(Error::param("bonus.kind", "bandit algorithms need the bandit bonus"));
        };
        let arms: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        Ok(KernelBandit {
            algo,
            cfg: cfg.clone(),
            arms,
            c,
            delta,
            pulls: vec![0; n],
            reward_sums: vec![0.0; n],
            weights,
            weights_sigma: f64::NAN,
            bounds: vec![f64::INFINITY; n],
        })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    fn rebuild_weights(&mut self, sigma: f64) -> Result<()> {
        let n = self.arms.len();
        let metric = ProductMetric::line_actions(self.arms.clone());
        for i in 0..n {
            for j in 0..n {
                self.weights[i * n + j] = psi_sigma(&self.cfg.kernel, &metric, sigma, (&[], i), (&[], j))?;
            }
        }
        self.weights_sigma = sigma;
        Ok(())
    }

    /// Index of every arm from the current statistics.
    pub fn indices(&self) -> Vec<f64> {
        let n = self.arms.len();
        let beta = self.cfg.beta;
        (0..n)
            .map(|i| {
                let row = &self.weights[i * n..(i + 1) * n];
                let (mut count, mut reward, mut sq, mut dist) = (beta, 0.0, 0.0, 0.0);
                for j in 0..n {
                    let (w, pulls) = (row[j], self.pulls[j] as f64);
                    if w == 0.0 || pulls == 0.0 {
                        continue;
                    }
                    count += pulls * w;
                    reward += w * self.reward_sums[j];
                    sq += pulls * w * w;
                    dist += pulls * w * (self.arms[i] - self.arms[j]).abs();
                }
                reward / count + bandit_radius(count, beta, sq, dist, self.c, self.delta)
            })
            .collect()
    }
}

impl Agent for KernelBandit {
    fn algorithm(&self) -> Algorithm {
        self.algo
    }

    fn begin_episode(&mut self, _k: usize, sigma: f64) -> Result<()> {
        if self.algo == Algorithm::KernelUcb && sigma != self.weights_sigma {
            self.rebuild_weights(sigma)?;
        }
        let fresh = self.indices();
        self.bounds = if self.cfg.monotone_bounds {
            enforce_monotone_bounds(&self.bounds, &fresh)?
        } else {
            fresh
        };
        Ok(())
    }

    fn act(&mut self, h: usize, x: &[f64]) -> Result<usize> {
        self.policy(h, x)
    }

    fn policy(&self, _h: usize, _x: &[f64]) -> Result<usize> {
        Ok(argmax(self.bounds.iter().copied()).ok_or(Error::EmptyActionSet)?.0)
    }

    fn observe(&mut self, s: &TransitionSample) -> Result<()> {
        if s.a >= self.arms.len() {
            return Err(Error::OutOfRange {
                index: s.a,
                len: self.arms.len(),
            });
        }
        self.pulls[s.a] += 1;
        self.reward_sums[s.a] += s.r;
        Ok(())
    }

    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }
}
