//! Self-normalized concentration bounds for weighted martingale sums, their
//! Monte-Carlo coverage, and the kernel-bias inequality.
//!
//! For weights `w_t` chosen before `Y_t` is revealed:
//!
//! ```text
//! S_t = sum_s w_s Y_s,   W_t = sum_s w_s,   V_t = sum_s w_s^2 E[Y_s^2 | past]
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::MotherKernel;
use crate::rng::stream_rng;

/// Hoeffding-type radius for `|S_t| / (W_t + beta)` with `w_s <= 1`:
/// `sqrt(2 c^2 log(sqrt(1 + t/beta)/delta) / (W_t + beta))`.
pub fn hoeffding_radius(sum_w: f64, t: usize, beta: f64, c: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0 && c >= 0.0 && delta > 0.0 && sum_w >= 0.0) {
        return Err(Error::Domain(format!(
            "hoeffding radius needs sum_w >= 0, beta > 0, c >= 0, delta > 0; got {sum_w}, {beta}, {c}, {delta}"
        )));
    }
    let log = ((1.0 + t as f64 / beta).sqrt() / delta).ln();
    if log < 0.0 {
        return Err(Error::Domain(format!("log(sqrt(1 + t/beta)/delta) = {log} < 0")));
    }
    Ok((2.0 * c * c * log / (sum_w + beta)).sqrt())
}

/// `log(4 e (2t + 1) / delta)`
pub fn bernstein_log(t: usize, delta: f64) -> f64 {
    (4.0 * std::f64::consts::E * (2 * t + 1) as f64 / delta).ln()
}

/// Explicit Bernstein-type radius for `|S_t| / (beta + W_t)`.
pub fn bernstein_radius(sum_w: f64, v_t: f64, t: usize, beta: f64, b: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0 && b > 0.0 && delta > 0.0 && sum_w >= 0.0 && v_t >= 0.0) {
        return Err(Error::Domain(format!(
            "bernstein radius needs sum_w, v_t >= 0 and beta, b, delta > 0; got {sum_w}, {v_t}, {beta}, {b}, {delta}"
        )));
    }
    let l = bernstein_log(t, delta);
    let n = beta + sum_w;
    Ok((2.0 * l * (v_t + b * b)).sqrt() / n + 2.0 * b / 3.0 * l / n)
}

/// `h(x) = (x + 1) log(x + 1) - x`
pub fn bennett_h(x: f64) -> f64 {
    (x + 1.0) * (x + 1.0).ln() - x
}

/// True when the tight implicit Bernstein event is violated:
/// `(V/b^2 + 1) h(b|S| / (V + b^2)) >= log(1/delta) + log(4e(2t+1))`.
pub fn bernstein_implicit_violated(s: f64, v_t: f64, t: usize, b: f64, delta: f64) -> bool {
    let lhs = (v_t / (b * b) + 1.0) * bennett_h(b * s.abs() / (v_t + b * b));
    lhs >= bernstein_log(t, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `Y = 0`.
    Zero,
    /// `Y = +-b` with equal probability.
    Bounded { b: f64 },
    /// `Y ~ N(0, c^2)`.
    Subgaussian { c: f64 },
}

impl NoiseModel {
    fn second_moment(&self) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Bounded { b } => b * b,
            NoiseModel::Subgaussian { c } => c * c,
        }
    }

    fn subgaussian_scale(&self) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Bounded { b } => b,
            NoiseModel::Subgaussian { c } => c,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Bounded { b } => {
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            }
            NoiseModel::Subgaussian { c } => c * rng.sample::<f64, _>(StandardNormal),
        }
    }
}

/// How `w_t` is chosen from the history before time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightProcess {
    Constant {
        w: f64,
    },
    IidUniform,
    /// `1` if `S_{t-1} > 0`, else `0.1`.
    Adversarial,
}

impl WeightProcess {
    pub fn label(&self) -> String {
        match self {
            WeightProcess::Constant { w } => format!("constant({w})"),
            WeightProcess::IidUniform => "iid_uniform".into(),
            WeightProcess::Adversarial => "adversarial".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Hoeffding,
    Bernstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrialConfig {
    pub t_max: usize,
    pub noise: NoiseModel,
    pub weights: WeightProcess,
    pub beta: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Post-hoc factor applied to `S_t` before the check (1 = none).
    pub inflate: f64,
}

impl MartingaleTrialConfig {
    pub fn validate(&self, which: BoundKind) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::param("t_max", "must be >= 1"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param("beta", "must be > 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if let WeightProcess::Constant { w } = self.weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::param("weights.w", "must lie in [0, 1]"));
            }
        }
        if which == BoundKind::Bernstein && matches!(self.noise, NoiseModel::Subgaussian { .. }) {
            return Err(Error::param("noise", "the Bernstein bound needs bounded noise"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub bound: BoundKind,
    pub config: MartingaleTrialConfig,
    pub failures: usize,
    pub failure_rate: f64,
    /// Trials violating the tight implicit Bernstein event (Bernstein only).
    pub implicit_failures: Option<usize>,
}

/// Returns `(explicit failure, implicit failure)` for one trajectory.
fn trial(cfg: &MartingaleTrialConfig, which: BoundKind, index: u64) -> Result<(bool, bool)> {
    let mut rng = stream_rng(cfg.seed, index);
    let (mut s, mut w_sum, mut v) = (0.0f64, 0.0f64, 0.0f64);
    let second = cfg.noise.second_moment();
    let c = cfg.noise.subgaussian_scale();
    let b = match cfg.noise {
        NoiseModel::Bounded { b } if b > 0.0 => b,
        _ => 1.0,
    };
    let (mut explicit, mut implicit) = (false, false);
    for t in 1..=cfg.t_max {
        let w = match cfg.weights {
            WeightProcess::Constant { w } => w,
            WeightProcess::IidUniform => rng.random::<f64>(),
            WeightProcess::Adversarial => {
                if s > 0.0 {
                    1.0
                } else {
                    0.1
                }
            }
        };
        let y = cfg.noise.sample(&mut rng);
        s += w * y;
        w_sum += w;
        let s_eff = cfg.inflate * s;
        match which {
            BoundKind::Hoeffding => {
                let r = hoeffding_radius(w_sum, t, cfg.beta, c, cfg.delta)?;
                if s_eff.abs() / (w_sum + cfg.beta) > r {
                    explicit = true;
                }
            }
            BoundKind::Bernstein => {
                v += w * w * second;
                let r = bernstein_radius(w_sum, v, t, cfg.beta, b, cfg.delta)?;
                if s_eff.abs() / (w_sum + cfg.beta) > r {
                    explicit = true;
                }
                if bernstein_implicit_violated(s_eff, v, t, b, cfg.delta) {
                    implicit = true;
                }
            }
        }
    }
    Ok((explicit, implicit))
}

/// Simulates `cfg.trials` independent trajectories (trial `i` uses stream
/// `i`) and counts those where the anytime bound fails at some `t <= t_max`.
pub fn coverage_test(cfg: &MartingaleTrialConfig, which: BoundKind) -> Result<CoverageReport> {
    cfg.validate(which)?;
    let outcomes: Vec<(bool, bool)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| trial(cfg, which, i))
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|o| o.0).count();
    let implicit = outcomes.iter().filter(|o| o.1).count();
    Ok(CoverageReport {
        bound: which,
        config: *cfg,
        failures,
        failure_rate: failures as f64 / cfg.trials.max(1) as f64,
        implicit_failures: (which == BoundKind::Bernstein).then_some(implicit),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBiasCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `sum_s w~_s z_s` against `2 sigma (1 + sqrt(log(C1 t / beta + e)))` with
/// `w_s = g(z_s / sigma)`.
pub fn kernel_bias_check(z: &[f64], sigma: f64, beta: f64, kernel: &MotherKernel) -> Result<KernelBiasCheck> {
    if z.is_empty() {
        return Err(Error::param("z", "need t >= 1 values"));
    }
    if !(sigma > 0.0 && beta > 0.0) {
        return Err(Error::param("sigma/beta", "must be > 0"));
    }
    let weights: Vec<f64> = z.iter().map(|&v| kernel.eval(v / sigma)).collect::<Result<_>>()?;
    let count = beta + weights.iter().sum::<f64>();
    let lhs = weights.iter().zip(z).map(|(w, v)| w / count * v).sum::<f64>();
    let t = z.len() as f64;
    let rhs = 2.0 * sigma * (1.0 + (kernel.c1() * t / beta + std::f64::consts::E).ln().sqrt());
    Ok(KernelBiasCheck {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBiasSweep {
    pub sequences: usize,
    pub violations: usize,
    pub max_ratio: f64,
}

/// Random nonnegative sequences with `t <= t_max`, bandwidths from `sigmas`
/// and regularizations from `betas`, checked against the kernel-bias bound.
pub fn kernel_bias_sweep(
    kernel: &MotherKernel,
    sequences: usize,
    t_max: usize,
    sigmas: &[f64],
    betas: &[f64],
    seed: u64,
) -> Result<KernelBiasSweep> {
    let mut rng = stream_rng(seed, 0);
    let (mut violations, mut max_ratio) = (0usize, 0.0f64);
    for i in 0..sequences {
        let sigma = sigmas[i % sigmas.len()];
        let beta = betas[(i / sigmas.len()) % betas.len()];
        let t = rng.random_range(1..=t_max);
        // mix of scales so that some points sit inside the bandwidth
        let scale = sigma * [0.1, 1.0, 3.0, 10.0][i % 4];
        let z: Vec<f64> = (0..t).map(|_| rng.random::<f64>() * scale).collect();
        let c = kernel_bias_check(&z, sigma, beta, kernel)?;
        if !c.pass {
            violations += 1;
        }
        max_ratio = max_ratio.max(c.lhs / c.rhs);
    }
    Ok(KernelBiasSweep {
        sequences,
        violations,
        max_ratio,
    })
}

/// Coverage of both bounds under every weight process, plus the
/// kernel-bias sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub coverage: Vec<CoverageReport>,
    pub kernel_bias: KernelBiasSweep,
    pub passed: bool,
}

pub fn verification_suite(trials: usize, t_max: usize, delta: f64, seed: u64) -> Result<VerificationReport> {
    let processes = [
        WeightProcess::Constant { w: 1.0 },
        WeightProcess::IidUniform,
        WeightProcess::Adversarial,
    ];
    let cases = [
        (BoundKind::Hoeffding, NoiseModel::Subgaussian { c: 1.0 }),
        (BoundKind::Hoeffding, NoiseModel::Bounded { b: 1.0 }),
        (BoundKind::Bernstein, NoiseModel::Bounded { b: 1.0 }),
    ];
    let mut coverage = Vec::new();
    for (i, (bound, noise)) in cases.iter().enumerate() {
        for (j, weights) in processes.iter().enumerate() {
            let cfg = MartingaleTrialConfig {
                t_max,
                noise: *noise,
                weights: *weights,
                beta: 1.0,
                delta,
                trials,
                seed: seed.wrapping_add((i * processes.len() + j) as u64),
                inflate: 1.0,
            };
            coverage.push(coverage_test(&cfg, *bound)?);
        }
    }
    let kernel_bias = kernel_bias_sweep(
        &MotherKernel::Gaussian,
        1000,
        500,
        &[0.01, 0.1, 1.0],
        &[0.05, 1.0],
        seed,
    )?;
    let passed = coverage.iter().all(|c| c.failure_rate <= delta) && kernel_bias.violations == 0;
    Ok(VerificationReport {
        coverage,
        kernel_bias,
        passed,
    })
}
