//! Run configuration: environment, algorithms, schedules and bonuses.
//!
//! Configurations are TOML (or JSON) files; [`RunConfig::validate`] reports
//! every violated constraint with the path of the offending field.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bonus::{CoveringModel, PracticalVariant};
use crate::envs::ContinuousGridWorldEnv;
use crate::error::{Error, Result};
use crate::kernel::MotherKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    LipschitzBandit {
        arms: usize,
        noise_std: f64,
    },
    DiscreteGrid {
        size: usize,
        slip: f64,
        reward_noise_std: f64,
        goal: [f64; 2],
        reward_width: f64,
        start: [f64; 2],
    },
    ContinuousGrid {
        step_size: f64,
        transition_noise_std: f64,
        reward_noise_std: f64,
        start: [f64; 2],
        goal: [f64; 2],
        reward_width: f64,
    },
}

impl EnvSpec {
    pub fn label(&self) -> &'static str {
        match self {
            EnvSpec::LipschitzBandit { .. } => "lipschitz_bandit",
            EnvSpec::DiscreteGrid { .. } => "discrete_grid",
            EnvSpec::ContinuousGrid { .. } => "continuous_grid",
        }
    }

    pub fn is_bandit(&self) -> bool {
        matches!(self, EnvSpec::LipschitzBandit { .. })
    }

    pub fn state_dim(&self) -> usize {
        if self.is_bandit() {
            0
        } else {
            2
        }
    }

    pub fn continuous(&self) -> Option<ContinuousGridWorldEnv> {
        match *self {
            EnvSpec::ContinuousGrid {
                step_size,
                transition_noise_std,
                reward_noise_std,
                start,
                goal,
                reward_width,
            } => Some(ContinuousGridWorldEnv {
                step_size,
                transition_noise_std,
                reward_noise_std,
                start,
                goal,
                reward_width,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Kernel-UCBVI with full backward induction.
    KernelUcbvi,
    /// Tabular UCBVI on a finite state set.
    Ucbvi,
    GreedyKernelUcbvi,
    GreedyUcbvi,
    #[serde(rename = "optql")]
    OptQl,
    /// Kernel upper-confidence bandit over a finite arm net.
    KernelUcb,
    UcbDelta,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::KernelUcbvi,
        Algorithm::Ucbvi,
        Algorithm::GreedyKernelUcbvi,
        Algorithm::GreedyUcbvi,
        Algorithm::OptQl,
        Algorithm::KernelUcb,
        Algorithm::UcbDelta,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::KernelUcbvi => "kernel_ucbvi",
            Algorithm::Ucbvi => "ucbvi",
            Algorithm::GreedyKernelUcbvi => "greedy_kernel_ucbvi",
            Algorithm::GreedyUcbvi => "greedy_ucbvi",
            Algorithm::OptQl => "optql",
            Algorithm::KernelUcb => "kernel_ucb",
            Algorithm::UcbDelta => "ucb_delta",
        }
    }

    pub fn is_bandit(&self) -> bool {
        matches!(self, Algorithm::KernelUcb | Algorithm::UcbDelta)
    }

    fn supports(&self, env: &EnvSpec) -> bool {
        match self {
            Algorithm::KernelUcb | Algorithm::UcbDelta => env.is_bandit(),
            Algorithm::Ucbvi => matches!(env, EnvSpec::DiscreteGrid { .. }),
            Algorithm::KernelUcbvi | Algorithm::GreedyKernelUcbvi | Algorithm::GreedyUcbvi | Algorithm::OptQl => {
                !env.is_bandit()
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}`")))
    }
}

/// How the bandwidth `sigma_k` evolves with the episode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthSchedule {
    Constant {
        sigma: f64,
    },
    /// `1 / sqrt(k)`, refreshed every `refresh` rounds.
    Bandit {
        #[serde(default = "default_bandit_refresh")]
        refresh: usize,
    },
    /// `scale log(k / period) / sqrt(k / period)`, refreshed every `refresh`
    /// episodes and floored at `sigma_min`.
    Discrete {
        #[serde(default = "default_discrete_scale")]
        scale: f64,
        #[serde(default = "default_discrete_period")]
        period: f64,
        #[serde(default = "default_discrete_refresh")]
        refresh: usize,
        #[serde(default = "default_sigma_min")]
        sigma_min: f64,
    },
}

fn default_bandit_refresh() -> usize {
    200
}
fn default_discrete_scale() -> f64 {
    0.1
}
fn default_discrete_period() -> f64 {
    25.0
}
fn default_discrete_refresh() -> usize {
    500
}
fn default_sigma_min() -> f64 {
    1e-3
}

/// Which exploration bonus the MDP algorithms add.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BonusSpec {
    /// Practical bonus; its bandwidth term is `sigma_factor * sigma_k`.
    Practical {
        variant: PracticalVariant,
        sigma_factor: f64,
    },
    /// High-probability bonus at confidence `delta`.
    Theoretical { delta: f64, covering: CoveringModel },
    /// Bandit upper-confidence radius with noise scale `c`.
    Bandit { c: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub env: EnvSpec,
    pub algorithms: Vec<Algorithm>,
    pub episodes: usize,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub kernel: MotherKernel,
    pub bandwidth: BandwidthSchedule,
    pub bonus: BonusSpec,
    pub beta: f64,
    #[serde(default = "one")]
    pub lambda_r: f64,
    #[serde(default = "one")]
    pub lambda_p: f64,
    /// Pool samples over steps (transitions independent of `h`).
    #[serde(default = "yes")]
    pub stationary: bool,
    /// Recompute the plan every this many episodes (full-planning methods).
    #[serde(default = "one_usize")]
    pub plan_every: usize,
    /// Use Lipschitz interpolation in Kernel-UCBVI; otherwise targets are
    /// evaluated directly at every state of a finite environment.
    #[serde(default)]
    pub interpolate: bool,
    /// Grid step for the discretization baselines.
    #[serde(default = "default_step")]
    pub discretization_step: f64,
    /// Keep bandit upper bounds non-increasing over rounds.
    #[serde(default = "yes")]
    pub monotone_bounds: bool,
    /// Clip observed rewards to `[0, 1]` before the learner sees them.
    /// Logged rewards and the reported metric are never clipped.
    #[serde(default)]
    pub clip_rewards: bool,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_step() -> f64 {
    0.1
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML, then validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v: Vec<String> = Vec::new();
        let mut bad = |path: &str, msg: &str| v.push(format!("{path}: {msg}"));

        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            bad("name", "must be non-empty and use only [A-Za-z0-9_-]");
        }
        if self.episodes == 0 {
            bad("episodes", "must be >= 1");
        }
        if self.horizon == 0 {
            bad("horizon", "must be >= 1");
        }
        if self.env.is_bandit() && self.horizon != 1 {
            bad("horizon", "must be 1 for bandit environments");
        }
        if self.seeds.is_empty() {
            bad("seeds", "must list at least one seed");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            bad("seeds", "must be distinct");
        }
        if self.algorithms.is_empty() {
            bad("algorithms", "must list at least one algorithm");
        }
        if self.algorithms.iter().collect::<BTreeSet<_>>().len() != self.algorithms.len() {
            bad("algorithms", "must be distinct");
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if !a.supports(&self.env) {
                bad(
                    &format!("algorithms[{i}]"),
                    &format!("`{a}` does not apply to env `{}`", self.env.label()),
                );
            }
        }
        if self.kernel.validate().is_err() {
            bad("kernel.p", "exp_power kernel needs p >= 2 and g(4) > 0");
        }
        if !(self.beta > 0.0) {
            bad("beta", "must be > 0");
        }
        if !(self.lambda_r >= 0.0) {
            bad("lambda_r", "must be >= 0");
        }
        if !(self.lambda_p >= 0.0) {
            bad("lambda_p", "must be >= 0");
        }
        if self.plan_every == 0 {
            bad("plan_every", "must be >= 1");
        }
        if !(self.discretization_step > 0.0 && self.discretization_step <= 1.0) {
            bad("discretization_step", "must lie in (0, 1]");
        }

        match self.bandwidth {
            BandwidthSchedule::Constant { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    bad("bandwidth.sigma", "must be > 0");
                }
            }
            BandwidthSchedule::Bandit { refresh } => {
                if refresh == 0 {
                    bad("bandwidth.refresh", "must be >= 1");
                }
            }
            BandwidthSchedule::Discrete {
                scale,
                period,
                refresh,
                sigma_min,
            } => {
                if !(scale > 0.0) {
                    bad("bandwidth.scale", "must be > 0");
                }
                if !(period > 0.0) {
                    bad("bandwidth.period", "must be > 0");
                }
                if refresh == 0 {
                    bad("bandwidth.refresh", "must be >= 1");
                }
                if !(sigma_min > 0.0) {
                    bad("bandwidth.sigma_min", "must be > 0");
                }
            }
        }

        match self.bonus {
            BonusSpec::Practical { sigma_factor, .. } => {
                if !(sigma_factor >= 0.0) {
                    bad("bonus.sigma_factor", "must be >= 0");
                }
            }
            BonusSpec::Theoretical { delta, covering } => {
                if !(delta > 0.0 && delta < 1.0) {
                    bad("bonus.delta", "must lie in (0, 1)");
                }
                if !(covering.constant > 0.0) {
                    bad("bonus.covering.constant", "must be > 0");
                }
                if !(covering.dimension >= 0.0) {
                    bad("bonus.covering.dimension", "must be >= 0");
                }
            }
            BonusSpec::Bandit { c, delta } => {
                if !(c > 0.0) {
                    bad("bonus.c", "must be > 0");
                }
                if !(delta > 0.0 && delta <= 1.0) {
                    bad("bonus.delta", "must lie in (0, 1]");
                }
            }
        }
        let bandit_bonus = matches!(self.bonus, BonusSpec::Bandit { .. });
        if self.env.is_bandit() != bandit_bonus {
            bad(
                "bonus.kind",
                "bandit environments need the `bandit` bonus and MDPs an MDP bonus",
            );
        }

        match &self.env {
            EnvSpec::LipschitzBandit { arms, noise_std } => {
                if *arms < 2 {
                    bad("env.arms", "must be >= 2");
                }
                if !(*noise_std >= 0.0) {
                    bad("env.noise_std", "must be >= 0");
                }
            }
            EnvSpec::DiscreteGrid {
                size,
                slip,
                reward_noise_std,
                reward_width,
                start,
                ..
            } => {
                if *size < 2 {
                    bad("env.size", "must be >= 2");
                }
                if !(0.0..=1.0).contains(slip) {
                    bad("env.slip", "must lie in [0, 1]");
                }
                if !(*reward_noise_std >= 0.0) {
                    bad("env.reward_noise_std", "must be >= 0");
                }
                if !(*reward_width > 0.0) {
                    bad("env.reward_width", "must be > 0");
                }
                if start.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    bad("env.start", "must lie in [0, 1]^2");
                }
            }
            EnvSpec::ContinuousGrid {
                step_size,
                transition_noise_std,
                reward_noise_std,
                start,
                reward_width,
                ..
            } => {
                if !(*step_size > 0.0) {
                    bad("env.step_size", "must be > 0");
                }
                if !(*transition_noise_std >= 0.0) {
                    bad("env.transition_noise_std", "must be >= 0");
                }
                if !(*reward_noise_std >= 0.0) {
                    bad("env.reward_noise_std", "must be >= 0");
                }
                if !(*reward_width > 0.0) {
                    bad("env.reward_width", "must be > 0");
                }
                if start.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    bad("env.start", "must lie in [0, 1]^2");
                }
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Hex SHA-256 of the configuration with the seed list removed, plus the
    /// algorithm label. Runs of one algorithm across seeds share it.
    pub fn fingerprint(&self, algo: Algorithm) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        let text = serde_json::to_string(&c).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update(b"\0");
        hasher.update(algo.label().as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `{name}-{algo}-{hash8}-s{seed}`.
    pub fn run_id(&self, algo: Algorithm, seed: u64) -> String {
        format!(
            "{}-{}-{}-s{seed}",
            self.name,
            algo.label(),
            &self.fingerprint(algo)[..8]
        )
    }
}
