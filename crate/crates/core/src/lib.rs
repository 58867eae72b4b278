//! Kernel-based optimistic reinforcement learning in metric spaces.
//!
//! Kernel-UCBVI estimates rewards and transitions with kernel smoothing,
//! adds exploration bonuses that shrink with the generalized count, and
//! plans by backward induction with Lipschitz interpolation of the Q
//! functions. Greedy-Kernel-UCBVI replaces full planning with one
//! optimistic backup per visited state. The crate also provides the
//! comparison baselines, benchmark environments, an experiment harness
//! with CSV/JSON output, and Monte-Carlo checks of the concentration
//! inequalities behind the bonuses.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod bonus;
pub mod concentration;
pub mod config;
pub mod envs;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod greedy;
pub mod kernel;
pub mod output;
pub mod planner;
pub mod presets;
pub mod rng;

pub use agent::{build_agent, enforce_monotone_bounds, Agent};
pub use baselines::{ucb_delta_bound, ucbvi_bonus, DiscretizationMap, GreedyUcbviAgent, OptQlAgent, VisitCounts};
pub use bonus::{
    bandit_upper_bound, practical_bonus, theoretical_bonus, BonusParams, BonusRule, CoveringModel, PracticalVariant,
    TheoreticalBonusConstants,
};
pub use concentration::{
    bernstein_radius, coverage_test, hoeffding_radius, kernel_bias_check, BoundKind, MartingaleTrialConfig, NoiseModel,
    WeightProcess,
};
pub use config::{Algorithm, BandwidthSchedule, BonusSpec, EnvSpec, RunConfig};
pub use envs::{exact_optimal_values, ContinuousGridWorldEnv, DiscreteGridWorldEnv, LipschitzBanditEnv};
pub use error::{Error, Result};
pub use estimator::{KernelSmoother, StepDataset, TransitionSample, WeightVector};
pub use experiment::{aggregate, bandwidth_schedule, replay, run, run_all, RunLog, RunOptions, Summary};
pub use greedy::{refine_value, GreedyKernelAgent, LipschitzV};
pub use kernel::{psi_sigma, ActionMetric, MotherKernel, ProductMetric, StateMetric};
pub use planner::{
    act_greedy, interpolate_query, lipschitz_constants, optimistic_backward_induction, LipschitzConstants, LipschitzQ,
    OptimisticPlan,
};
