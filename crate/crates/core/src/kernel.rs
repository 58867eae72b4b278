//! Mother kernels `g`, the product metric on state-action pairs and the
//! smoothing kernel `psi_sigma(u, v) = g(rho(u, v) / sigma)`.
//!
//! An infinite distance (different actions under the finite-action metric)
//! maps to `g(inf) = 0`, so per-action estimation needs no special casing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the kernel profile `g: [0, inf) -> [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotherKernel {
    /// `g(z) = exp(-z^2 / 2)`
    #[default]
    Gaussian,
    /// `g(z) = exp(-|z|^p / 2)` with `p >= 2`
    ExpPower { p: f64 },
}

impl MotherKernel {
    pub fn exp_power(p: f64) -> Result<Self> {
        let k = MotherKernel::ExpPower { p };
        k.validate()?;
        Ok(k)
    }

    /// Rejects profiles outside the supported family (p < 2, or `g(4)`
    /// underflowing to zero).
    pub fn validate(&self) -> Result<()> {
        if let MotherKernel::ExpPower { p } = *self {
            if !(p.is_finite() && p >= 2.0) {
                return Err(Error::param("kernel.p", format!("must be >= 2, got {p}")));
            }
        }
        if self.profile(4.0) <= 0.0 {
            return Err(Error::param("kernel", "g(4) must be positive"));
        }
        Ok(())
    }

    /// `g(z)` for `z >= 0`; `g(inf) = 0`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if z.is_nan() || z < 0.0 {
            return Err(Error::Domain(format!("kernel argument must be >= 0, got {z}")));
        }
        Ok(self.profile(z))
    }

    /// Unchecked profile, `z` assumed non-negative.
    #[inline]
    pub(crate) fn profile(&self, z: f64) -> f64 {
        if z.is_infinite() {
            return 0.0;
        }
        match *self {
            MotherKernel::Gaussian => (-0.5 * z * z).exp(),
            MotherKernel::ExpPower { p } => (-0.5 * z.powf(p)).exp(),
        }
    }

    /// Envelope constant: `g(z) <= C1 exp(-z^2/2)`.
    pub fn c1(&self) -> f64 {
        match *self {
            MotherKernel::Gaussian => 1.0,
            MotherKernel::ExpPower { p } => {
                if p == 2.0 {
                    return 1.0;
                }
                // maximiser of (z^2 - z^p)/2
                let z = (2.0 / p).powf(1.0 / (p - 2.0));
                (0.5 * (z * z - z.powf(p))).exp()
            }
        }
    }

    /// Derivative bound: `sup |g'| <= C2`.
    pub fn c2(&self) -> f64 {
        match *self {
            MotherKernel::Gaussian => (-0.5f64).exp(),
            MotherKernel::ExpPower { p } => {
                let zp = 2.0 * (p - 1.0) / p;
                let z = zp.powf(1.0 / p);
                0.5 * p * z.powf(p - 1.0) * (-0.5 * zp).exp()
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            MotherKernel::Gaussian => "gaussian".into(),
            MotherKernel::ExpPower { p } => format!("exp_power(p={p})"),
        }
    }
}

/// Distance on the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMetric {
    #[default]
    Euclidean,
}

impl StateMetric {
    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            StateMetric::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    }
}

/// Distance on the action set. Actions are always indices into a finite set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMetric {
    /// 0 if equal, +inf otherwise.
    Discrete,
    /// Actions are points on the real line (e.g. a net of `[0, 1]`).
    Line(Vec<f64>),
}

impl ActionMetric {
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            ActionMetric::Discrete => {
                if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ActionMetric::Line(pos) => (pos[a] - pos[b]).abs(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionMetric::Discrete)
    }
}

/// `rho((x, a), (y, b)) = rho_X(x, y) + rho_A(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMetric {
    pub state: StateMetric,
    pub action: ActionMetric,
}

impl ProductMetric {
    pub fn discrete_actions() -> Self {
        ProductMetric {
            state: StateMetric::Euclidean,
            action: ActionMetric::Discrete,
        }
    }

    pub fn line_actions(positions: Vec<f64>) -> Self {
        ProductMetric {
            state: StateMetric::Euclidean,
            action: ActionMetric::Line(positions),
        }
    }

    #[inline]
    pub fn distance(&self, x: &[f64], a: usize, y: &[f64], b: usize) -> f64 {
        let da = self.action.distance(a, b);
        if da.is_infinite() {
            return da;
        }
        self.state.distance(x, y) + da
    }
}

/// `psi_sigma(u, v) = g(rho(u, v) / sigma)`.
pub fn psi_sigma(
    kernel: &MotherKernel,
    metric: &ProductMetric,
    sigma: f64,
    u: (&[f64], usize),
    v: (&[f64], usize),
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let rho = metric.distance(u.0, u.1, v.0, v.1);
    Ok(kernel.profile(rho / sigma))
}

/// Outcome of [`check_assumption3`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiagnostic {
    pub monotone_violations: Vec<f64>,
    pub envelope_violations: Vec<f64>,
    pub derivative_violations: Vec<(f64, f64)>,
    pub g4_positive: bool,
    pub c1: f64,
    pub c2: f64,
}

impl KernelDiagnostic {
    pub fn passed(&self) -> bool {
        self.monotone_violations.is_empty()
            && self.envelope_violations.is_empty()
            && self.derivative_violations.is_empty()
            && self.g4_positive
    }
}

/// Checks the kernel requirements on a grid using the kernel's own constants.
pub fn check_assumption3(kernel: &MotherKernel, grid: &[f64]) -> Result<KernelDiagnostic> {
    check_assumption3_with(kernel, grid, kernel.c1(), kernel.c2())
}

/// Same as [`check_assumption3`] with explicitly declared `C1`, `C2`.
///
/// Monotonicity and the finite-difference slope are checked between
/// consecutive grid points after sorting.
pub fn check_assumption3_with(kernel: &MotherKernel, grid: &[f64], c1: f64, c2: f64) -> Result<KernelDiagnostic> {
    if grid.is_empty() {
        return Err(Error::Domain("assumption check needs a non-empty grid".into()));
    }
    let mut zs = grid.to_vec();
    for &z in &zs {
        if z.is_nan() || z < 0.0 {
            return Err(Error::Domain(format!("grid point {z} is negative")));
        }
    }
    zs.sort_by(f64::total_cmp);
    const TOL: f64 = 1e-12;

    let mut report = KernelDiagnostic {
        monotone_violations: Vec::new(),
        envelope_violations: Vec::new(),
        derivative_violations: Vec::new(),
        g4_positive: kernel.profile(4.0) > 0.0,
        c1,
        c2,
    };
    for &z in &zs {
        let g = kernel.profile(z);
        if g > c1 * (-0.5 * z * z).exp() + TOL {
            report.envelope_violations.push(z);
        }
    }
    for w in zs.windows(2) {
        let (z0, z1) = (w[0], w[1]);
        let (g0, g1) = (kernel.profile(z0), kernel.profile(z1));
        if g1 > g0 + TOL {
            report.monotone_violations.push(z1);
        }
        if z1 > z0 {
            let slope = ((g1 - g0) / (z1 - z0)).abs();
            if slope > c2 * (1.0 + 1e-9) {
                report.derivative_violations.push((z0, slope));
            }
        }
    }
    Ok(report)
}
