//! Exploration bonuses: the high-probability bonus built from the
//! concentration constants `v_r, b_r, v_p, b_p`, the practical bonuses used
//! in the benchmark experiments and the bandit upper-confidence radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::WeightVector;
use crate::kernel::MotherKernel;
use crate::planner::lipschitz_constants;

/// Parametric covering-number model `N(eps) = ceil(constant * eps^-dimension)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringModel {
    pub constant: f64,
    pub dimension: f64,
}

impl CoveringModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.constant > 0.0) {
            return Err(Error::param("covering.constant", "must be > 0"));
        }
        if !(self.dimension >= 0.0) {
            return Err(Error::param("covering.dimension", "must be >= 0"));
        }
        Ok(())
    }
}

/// `ceil(constant * eps^-d)`, at least 1. Saturates at `u64::MAX`.
pub fn covering_number(model: &CoveringModel, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("covering radius must be > 0, got {eps}")));
    }
    let n = (model.constant * eps.powf(-model.dimension)).ceil();
    Ok(if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        (n as u64).max(1)
    })
}

/// Everything the high-probability bonus depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusParams {
    pub delta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub episodes: usize,
    pub lambda_r: f64,
    pub lambda_p: f64,
    pub covering: CoveringModel,
    pub kernel: MotherKernel,
}

impl BonusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param("beta", "must be > 0"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be > 0"));
        }
        if self.horizon == 0 || self.episodes == 0 {
            return Err(Error::param("horizon/episodes", "must be >= 1"));
        }
        if !(self.lambda_r >= 0.0 && self.lambda_p >= 0.0) {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        self.covering.validate()
    }

    /// Constants at `delta / 6`, the split used inside [`theoretical_bonus`].
    pub fn constants_for(&self, k: usize) -> Result<TheoreticalBonusConstants> {
        theoretical_constants(self, k, self.delta / 6.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBonusConstants {
    pub v_r: f64,
    pub b_r: f64,
    pub v_p: f64,
    pub b_p: f64,
}

/// `log+(x) = log(x + e)`
fn log_plus(x: f64) -> f64 {
    (x + std::f64::consts::E).ln()
}

pub fn theoretical_constants(params: &BonusParams, k: usize, delta: f64) -> Result<TheoreticalBonusConstants> {
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1]"));
    }
    let h = params.horizon as f64;
    let kf = k as f64;
    let beta = params.beta;
    let eps = params.sigma * params.sigma / (params.episodes as f64 * h);
    let n = covering_number(&params.covering, eps)? as f64;
    let v = 2.0 * (h * n * (1.0 + kf / beta).sqrt() / delta).ln();
    let l1 = lipschitz_constants(params.lambda_r, params.lambda_p, params.horizon)?.first();
    let (c1, c2) = (params.kernel.c1(), params.kernel.c2());
    let bias = 1.0 + log_plus(c1 * kf / beta).sqrt();
    let common = 4.0 * c2 / beta + v.sqrt() * c2 / beta.powf(1.5);
    Ok(TheoreticalBonusConstants {
        v_r: v,
        b_r: common + 2.0 * params.lambda_r * l1 * bias,
        v_p: v,
        b_p: common + 2.0 * params.lambda_p * l1 * bias,
    })
}

/// Transition bonus plus reward bonus at generalized count `count`.
///
/// `constants` must come from [`BonusParams::constants_for`].
pub fn theoretical_bonus(count: f64, constants: &TheoreticalBonusConstants, params: &BonusParams) -> Result<f64> {
    if !(count >= params.beta) {
        return Err(Error::Domain(format!(
            "count {count} below regularization {}",
            params.beta
        )));
    }
    let h = params.horizon as f64;
    let beta = params.beta;
    let transition = (h * h * constants.v_p / count).sqrt() + beta * h / count + constants.b_p * params.sigma;
    let reward = (constants.v_r / count).sqrt() + beta / count + constants.b_r * params.sigma;
    Ok(transition + reward)
}

/// Bias term in the practical bonuses: `2 beta / C` (discrete) or
/// `beta / C` (continuous).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PracticalVariant {
    Discrete,
    Continuous,
}

/// `1/sqrt(C) + (H - h + 1)/C + m beta / C + sigma_term`, `m = 2` for the
/// discrete variant and `1` for the continuous one.
pub fn practical_bonus(
    count: f64,
    h: usize,
    horizon: usize,
    beta: f64,
    sigma_term: f64,
    variant: PracticalVariant,
) -> Result<f64> {
    if !(beta > 0.0 && count >= beta) {
        return Err(Error::Domain(format!(
            "need count >= beta > 0, got count {count}, beta {beta}"
        )));
    }
    if h == 0 || h > horizon {
        return Err(Error::OutOfRange { index: h, len: horizon });
    }
    let m = match variant {
        PracticalVariant::Discrete => 2.0,
        PracticalVariant::Continuous => 1.0,
    };
    let remaining = (horizon - h + 1) as f64;
    Ok(1.0 / count.sqrt() + remaining / count + m * beta / count + sigma_term)
}

/// Bandit radius from raw statistics; see [`bandit_upper_bound`].
pub fn bandit_radius(
    count: f64,
    beta: f64,
    squared_weight_sum: f64,
    weighted_distance_sum: f64,
    c: f64,
    delta: f64,
) -> f64 {
    let v = squared_weight_sum;
    let log_term = (1.0 / delta).ln() + 0.5 * (1.0 + v / beta).ln();
    c * (2.0 * log_term * (v + beta)).sqrt() / count.sqrt() + beta / count + weighted_distance_sum / count
}

/// Optimistic reward radius for one arm:
///
/// ```text
/// c sqrt(2 (log(1/delta) + log(1 + V/beta)/2) (V + beta)) / sqrt(C) + beta/C + (1/C) sum_s w_s |a - a_s|
/// ```
///
/// with `V = sum_s w_s^2`.
pub fn bandit_upper_bound(
    weights: &WeightVector,
    squared_weight_sum: f64,
    weighted_distance_sum: f64,
    c: f64,
    delta: f64,
) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param("c", "must be > 0"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1]"));
    }
    Ok(bandit_radius(
        weights.count,
        weights.beta,
        squared_weight_sum,
        weighted_distance_sum,
        c,
        delta,
    ))
}

/// A resolved bonus for one planning round (fixed `k` and `sigma`).
#[derive(Debug, Clone, PartialEq)]
pub enum BonusRule {
    Practical {
        variant: PracticalVariant,
        horizon: usize,
        beta: f64,
        sigma_term: f64,
    },
    Theoretical {
        params: BonusParams,
        constants: TheoreticalBonusConstants,
    },
}

impl BonusRule {
    pub fn theoretical(params: BonusParams, k: usize) -> Result<Self> {
        params.validate()?;
        let constants = params.constants_for(k)?;
        Ok(BonusRule::Theoretical { params, constants })
    }

    /// Bonus at step `h` (1-based) for generalized count `count`.
    pub fn eval(&self, count: f64, h: usize) -> f64 {
        let value = match self {
            BonusRule::Practical {
                variant,
                horizon,
                beta,
                sigma_term,
            } => practical_bonus(count, h, *horizon, *beta, *sigma_term, *variant),
            BonusRule::Theoretical { params, constants } => theoretical_bonus(count, constants, params),
        };
        value.expect("bonus evaluated at a count below beta")
    }
}
