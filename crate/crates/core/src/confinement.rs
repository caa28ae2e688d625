//! The model-free confinement law and its feasibility conditions.
//!
//! Stage I turns the distance to the VCZ center into a saturated velocity
//! reference; stage II tracks that reference inside a shrinking funnel with a
//! saturated torque. Nothing here knows the plant beyond the bounds in
//! [`FeasibilityBounds`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfinementError {
    #[error("{name} must have {expected} entries, got {got}")]
    Length {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("funnel needs 0 < q < p on every axis (axis {0})")]
    BadFunnel(usize),
    #[error(
        "torque budget exhausted on axis {axis}: m*tau_bar - V - m_i*d_bar - mu(p-q) = {margin}"
    )]
    Infeasible { axis: usize, margin: f64 },
    #[error("lambda = {lambda} is below the least feasible radius {lambda_min}")]
    LambdaTooSmall { lambda: f64, lambda_min: f64 },
}

pub const DEFAULT_SHARPNESS: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PsiVariant {
    /// `tanh(a s)^3`
    #[default]
    Smooth,
    /// `clamp(s, -1, 1)`
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    #[serde(default = "default_sharpness")]
    pub a: f64,
    #[serde(default)]
    pub variant: PsiVariant,
}

fn default_sharpness() -> f64 {
    DEFAULT_SHARPNESS
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig {
            a: DEFAULT_SHARPNESS,
            variant: PsiVariant::Smooth,
        }
    }
}

impl PsiConfig {
    pub fn exact() -> Self {
        PsiConfig {
            a: DEFAULT_SHARPNESS,
            variant: PsiVariant::Exact,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.variant {
            PsiVariant::Smooth => (self.a * s).tanh().powi(3),
            PsiVariant::Exact => s.clamp(-1.0, 1.0),
        }
    }

    /// Derivative of the smooth variant; the exact one has slope 1 inside
    /// `(-1, 1)` and 0 outside.
    pub fn slope(&self, s: f64) -> f64 {
        match self.variant {
            PsiVariant::Smooth => {
                let t = (self.a * s).tanh();
                3.0 * self.a * t * t * (1.0 - t * t)
            }
            PsiVariant::Exact => {
                if s.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn psi(s: &[f64], cfg: &PsiConfig) -> Vec<f64> {
    s.iter().map(|&v| cfg.eval(v)).collect()
}

/// Largest slope and largest `psi(e)/e` over `(0, 1]` on a uniform grid.
pub fn psi_constants(cfg: &PsiConfig, resolution: f64) -> (f64, f64) {
    let steps = (1.0 / resolution).round() as usize;
    let mut slope: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for k in 0..=steps {
        let e = k as f64 / steps as f64;
        slope = slope.max(cfg.slope(e));
        if k > 0 {
            ratio = ratio.max(cfg.eval(e) / e);
        }
    }
    (slope, ratio)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Stage I reference `-v_bar ⊙ psi(|x - xi| / lambda) (x - xi) / |x - xi|`,
/// zero at `x = xi`.
pub fn velocity_reference(
    x: &[f64],
    xi: &[f64],
    lambda: f64,
    v_bar: &[f64],
    cfg: &PsiConfig,
) -> Vec<f64> {
    let d: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - b).collect();
    let r = norm(&d);
    if r == 0.0 {
        return vec![0.0; x.len()];
    }
    let s = cfg.eval(r / lambda);
    d.iter()
        .zip(v_bar)
        .map(|(di, vb)| -vb * s * di / r)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelParams {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
}

impl FunnelParams {
    pub fn new(p: Vec<f64>, q: Vec<f64>, mu: Vec<f64>) -> Result<Self, ConfinementError> {
        let f = FunnelParams { p, q, mu };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ConfinementError> {
        let n = self.p.len();
        check_len("funnel q", &self.q, n)?;
        check_len("funnel mu", &self.mu, n)?;
        for i in 0..n {
            if !(0.0 < self.q[i] && self.q[i] < self.p[i] && self.p[i].is_finite()) {
                return Err(ConfinementError::BadFunnel(i));
            }
            if !(self.mu[i] > 0.0 && self.mu[i].is_finite()) {
                return Err(ConfinementError::NotPositive("funnel mu"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// `mu (p - q)` per axis, the funnel's contribution to the torque budget.
    pub fn decay_term(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.mu[i] * (self.p[i] - self.q[i]))
            .collect()
    }
}

/// `rho(t) = exp(-mu t) (p - q) + q` per axis.
pub fn funnel(t: f64, fp: &FunnelParams) -> Vec<f64> {
    (0..fp.dim())
        .map(|i| (-fp.mu[i] * t).exp() * (fp.p[i] - fp.q[i]) + fp.q[i])
        .collect()
}

/// Output of one evaluation of the confinement law.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueEval {
    pub tau: Vec<f64>,
    pub v_ref: Vec<f64>,
    pub e_v: Vec<f64>,
    pub rho: Vec<f64>,
    pub eps: Vec<f64>,
    /// Some `|eps_i| >= 1`: the velocity error left the funnel.
    pub funnel_breach: bool,
}

/// The two-stage law with its gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementLaw {
    pub lambda: f64,
    pub v_bar: Vec<f64>,
    pub tau_bar: Vec<f64>,
    pub funnel: FunnelParams,
    pub psi: PsiConfig,
}

impl ConfinementLaw {
    /// `tau = -tau_bar ⊙ psi(e_v / rho(t))` with `e_v = v - v_ref`; `t` is
    /// the funnel clock.
    pub fn torque(&self, x: &[f64], v: &[f64], xi: &[f64], t: f64) -> TorqueEval {
        let v_ref = velocity_reference(x, xi, self.lambda, &self.v_bar, &self.psi);
        let rho = funnel(t, &self.funnel);
        let e_v: Vec<f64> = v.iter().zip(&v_ref).map(|(a, b)| a - b).collect();
        let eps: Vec<f64> = e_v.iter().zip(&rho).map(|(e, r)| e / r).collect();
        let tau = eps
            .iter()
            .zip(&self.tau_bar)
            .map(|(&e, tb)| -tb * self.psi.eval(e))
            .collect();
        let funnel_breach = eps.iter().any(|e| e.abs() >= 1.0);
        TorqueEval {
            tau,
            v_ref,
            e_v,
            rho,
            eps,
            funnel_breach,
        }
    }
}

/// Uniform bound `2.25 v_bar (v_bar + u_bar) / lambda` on the reference
/// acceleration.
pub fn a_r_bound(v_bar: f64, u_bar: f64, lambda: f64) -> f64 {
    2.25 * v_bar * (v_bar + u_bar) / lambda
}

/// Plant-side bounds the confinement law is designed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityBounds {
    /// Lower bound on the inverse inertia's action on the torque.
    pub m_lower: f64,
    /// Bound on the inverse inertia's action on the disturbance.
    pub m_i_lower: f64,
    /// Bound on the Coriolis and gravity accelerations, per axis.
    pub v_m_max: Vec<f64>,
    pub d_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    pub tau_bar: Vec<f64>,
}

fn check_len(name: &'static str, v: &[f64], n: usize) -> Result<(), ConfinementError> {
    if v.len() != n {
        return Err(ConfinementError::Length {
            name,
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

fn check_positive(name: &'static str, v: &[f64]) -> Result<(), ConfinementError> {
    if v.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(ConfinementError::NotPositive(name))
    }
}

impl FeasibilityBounds {
    pub fn dim(&self) -> usize {
        self.tau_bar.len()
    }

    pub fn validate(&self) -> Result<(), ConfinementError> {
        let n = self.dim();
        check_len("v_m_max", &self.v_m_max, n)?;
        check_len("d_bar", &self.d_bar, n)?;
        check_len("v_bar", &self.v_bar, n)?;
        check_positive("m_lower", &[self.m_lower])?;
        check_positive("m_i_lower", &[self.m_i_lower])?;
        check_positive("v_bar", &self.v_bar)?;
        check_positive("tau_bar", &self.tau_bar)?;
        if self
            .v_m_max
            .iter()
            .chain(&self.d_bar)
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(ConfinementError::NotPositive("v_m_max and d_bar"));
        }
        Ok(())
    }

    fn v_max(&self) -> f64 {
        self.v_bar.iter().cloned().fold(0.0, f64::max)
    }

    /// `m tau_bar - V - m_i d_bar - mu (p - q)` per axis: torque authority
    /// left for tracking the reference.
    pub fn authority(&self, fp: &FunnelParams) -> Result<Vec<f64>, ConfinementError> {
        self.validate()?;
        fp.validate()?;
        check_len("funnel p", &fp.p, self.dim())?;
        let decay = fp.decay_term();
        Ok((0..self.dim())
            .map(|i| {
                self.m_lower * self.tau_bar[i]
                    - self.v_m_max[i]
                    - self.m_i_lower * self.d_bar[i]
                    - decay[i]
            })
            .collect())
    }

    fn worst_authority(&self, fp: &FunnelParams) -> Result<f64, ConfinementError> {
        let auth = self.authority(fp)?;
        let (axis, margin) = auth
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one axis");
        if margin <= 0.0 {
            return Err(ConfinementError::Infeasible { axis, margin });
        }
        Ok(margin)
    }
}

/// VCZ design parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VczParams {
    pub lambda: f64,
    pub u_bar: Vec<f64>,
    pub h: f64,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub a_r: f64,
    /// Right-hand side of the torque inequality per axis.
    pub rhs: Vec<f64>,
    pub tau_bar: Vec<f64>,
    /// `tau_bar - rhs`
    pub torque_slack: Vec<f64>,
    /// `v_bar - u_bar`
    pub velocity_slack: Vec<f64>,
    pub pass: bool,
}

// The most efficient design sits exactly on the torque boundary.
const FEASIBILITY_TOL: f64 = 1e-9;

pub fn check_feasibility(
    bounds: &FeasibilityBounds,
    fp: &FunnelParams,
    params: &VczParams,
) -> Result<FeasibilityReport, ConfinementError> {
    bounds.validate()?;
    fp.validate()?;
    let n = bounds.dim();
    check_len("funnel p", &fp.p, n)?;
    check_len("u_bar", &params.u_bar, n)?;
    check_positive("lambda", &[params.lambda])?;
    check_positive("u_bar", &params.u_bar)?;
    let u_max = params.u_bar.iter().cloned().fold(0.0, f64::max);
    let a_r = a_r_bound(bounds.v_max(), u_max, params.lambda);
    let decay = fp.decay_term();
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            (bounds.v_m_max[i] + bounds.m_i_lower * bounds.d_bar[i] + decay[i] + a_r)
                / bounds.m_lower
        })
        .collect();
    let torque_slack: Vec<f64> = (0..n).map(|i| bounds.tau_bar[i] - rhs[i]).collect();
    let velocity_slack: Vec<f64> = (0..n).map(|i| bounds.v_bar[i] - params.u_bar[i]).collect();
    let ok = |slack: f64, scale: f64| slack >= -FEASIBILITY_TOL * scale.max(1.0);
    let pass = (0..n)
        .all(|i| ok(torque_slack[i], bounds.tau_bar[i]) && ok(velocity_slack[i], bounds.v_bar[i]));
    Ok(FeasibilityReport {
        a_r,
        rhs,
        tau_bar: bounds.tau_bar.clone(),
        torque_slack,
        velocity_slack,
        pass,
    })
}

/// Most efficient design: `u_bar = v_bar` and the smallest radius that the
/// worst axis can afford, `lambda = 4.5 v_bar^2 / authority`.
pub fn solve_most_efficient(
    bounds: &FeasibilityBounds,
    fp: &FunnelParams,
) -> Result<(f64, Vec<f64>), ConfinementError> {
    let d = bounds.worst_authority(fp)?;
    let v = bounds.v_max();
    Ok((2.0 * 2.25 * v * v / d, bounds.v_bar.clone()))
}

/// Least conservative design: the smallest radius for which some positive
/// input bound is feasible, and the largest input bound for a given radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastConservative {
    pub lambda_min: f64,
    v_bar: f64,
    authority: f64,
}

impl LeastConservative {
    /// Slope of `u_max` in `lambda`: `authority / (2.25 v_bar)`.
    pub fn slope(&self) -> f64 {
        self.authority / (2.25 * self.v_bar)
    }

    /// `min(v_bar, lambda * slope - v_bar)`; non-positive below `lambda_min`.
    pub fn u_max(&self, lambda: f64) -> f64 {
        (lambda * self.slope() - self.v_bar).min(self.v_bar)
    }

    pub fn u_bar(&self, lambda: f64) -> Result<f64, ConfinementError> {
        let u = self.u_max(lambda);
        if u <= 0.0 {
            return Err(ConfinementError::LambdaTooSmall {
                lambda,
                lambda_min: self.lambda_min,
            });
        }
        Ok(u)
    }
}

pub fn solve_least_conservative(
    bounds: &FeasibilityBounds,
    fp: &FunnelParams,
) -> Result<LeastConservative, ConfinementError> {
    let d = bounds.worst_authority(fp)?;
    let v = bounds.v_max();
    Ok(LeastConservative {
        lambda_min: 2.25 * v * v / d,
        v_bar: v,
        authority: d,
    })
}
