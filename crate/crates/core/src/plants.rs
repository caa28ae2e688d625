//! Euler–Lagrange plants used only by the simulator, and bounded disturbances.
//!
//! The confinement law never sees anything in this module; it exchanges
//! `(x, v)` measurements and torque commands with the simulator only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confinement::FeasibilityBounds;
use crate::geometry::IntervalBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("unknown plant {0:?} (expected pendulum, scara2 or agents2x2d)")]
    UnknownPlant(String),
    #[error("plant parameter {0} must be positive and finite")]
    BadParameter(&'static str),
    #[error("disturbance has {got} axes, plant has {expected}")]
    DisturbanceDim { expected: usize, got: usize },
    #[error("disturbance parameter {0} is invalid")]
    BadDisturbance(&'static str),
}

pub trait Plant: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Inverse mass matrix, row-major.
    fn inverse_mass(&self, x: &[f64]) -> Vec<Vec<f64>>;
    /// Coriolis, centrifugal and gravity forces `V + G`.
    fn bias(&self, x: &[f64], v: &[f64]) -> Vec<f64>;

    /// `M^-1 (tau + d - V - G)`
    fn accel(&self, x: &[f64], v: &[f64], tau: &[f64], d: &[f64]) -> Vec<f64> {
        let b = self.bias(x, v);
        let f: Vec<f64> = (0..self.dim()).map(|i| tau[i] + d[i] - b[i]).collect();
        mat_vec(&self.inverse_mass(x), &f)
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn positive(name: &'static str, v: f64) -> Result<f64, PlantError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(PlantError::BadParameter(name))
    }
}

/// `(m l^2 / 3) x'' + (m g l / 2) sin x = tau + d`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    pub m: f64,
    pub l: f64,
    pub g: f64,
}

impl Pendulum {
    pub fn new(m: f64, l: f64, g: f64) -> Result<Self, PlantError> {
        Ok(Pendulum {
            m: positive("m", m)?,
            l: positive("l", l)?,
            g,
        })
    }
}

impl Plant for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }
    fn dim(&self) -> usize {
        1
    }
    fn inverse_mass(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![3.0 / (self.m * self.l * self.l)]]
    }
    fn bias(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![self.m * self.g * self.l / 2.0 * x[0].sin()]
    }
}

/// Pendulum angular acceleration.
pub fn pendulum_accel(p: &Pendulum, x: f64, v: f64, tau: f64, d: f64) -> f64 {
    p.accel(&[x], &[v], &[tau], &[d])[0]
}

/// Two-link planar arm. The mass matrix keeps its reference form, which is
/// not symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scara2 {
    pub m: f64,
    pub l: f64,
    pub g: f64,
}

impl Scara2 {
    pub fn new(m: f64, l: f64, g: f64) -> Result<Self, PlantError> {
        Ok(Scara2 {
            m: positive("m", m)?,
            l: positive("l", l)?,
            g,
        })
    }

    pub fn mass(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let k = self.m * self.l * self.l;
        let c2 = x[1].cos();
        [
            [k * (5.0 / 3.0 + c2), k * (1.0 / 3.0 + 0.5 * c2)],
            [k * 0.5 * c2, k / 3.0],
        ]
    }
}

impl Plant for Scara2 {
    fn name(&self) -> &'static str {
        "scara2"
    }
    fn dim(&self) -> usize {
        2
    }
    fn inverse_mass(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let [[a, b], [c, d]] = self.mass(x);
        let det = a * d - b * c;
        assert!(det.abs() > 1e-12, "mass matrix is singular at {x:?}");
        vec![vec![d / det, -b / det], vec![-c / det, a / det]]
    }
    fn bias(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let k = self.m * self.l * self.l;
        let s2 = x[1].sin();
        let c1 = x[0].cos();
        let c12 = (x[0] + x[1]).cos();
        let mgl = self.m * self.g * self.l;
        vec![
            k * s2 * (-0.5 * v[1] * v[1] - v[0] * v[1]) + mgl * (1.5 * c1 + 0.5 * c12),
            k * s2 * 0.5 * v[1] * v[1] + mgl * 0.5 * c12,
        ]
    }
}

pub fn scara_accel(p: &Scara2, x: &[f64], v: &[f64], tau: &[f64], d: &[f64]) -> Vec<f64> {
    p.accel(x, v, tau, d)
}

/// Two planar double integrators stacked as `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Agents2x2d;

impl Plant for Agents2x2d {
    fn name(&self) -> &'static str {
        "agents2x2d"
    }
    fn dim(&self) -> usize {
        4
    }
    fn inverse_mass(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }
    fn bias(&self, _x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; 4]
    }
}

pub fn multi_agent_accel(tau: &[f64], d: &[f64]) -> Vec<f64> {
    Agents2x2d.accel(&[0.0; 4], &[0.0; 4], tau, d)
}

/// Plant selection as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Pendulum { m: f64, l: f64, g: f64 },
    Scara2 { m: f64, l: f64, g: f64 },
    Agents2x2d,
}

impl PlantSpec {
    pub fn build(&self) -> Result<Box<dyn Plant>, PlantError> {
        Ok(match *self {
            PlantSpec::Pendulum { m, l, g } => Box::new(Pendulum::new(m, l, g)?),
            PlantSpec::Scara2 { m, l, g } => Box::new(Scara2::new(m, l, g)?),
            PlantSpec::Agents2x2d => Box::new(Agents2x2d),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            PlantSpec::Pendulum { .. } => 1,
            PlantSpec::Scara2 { .. } => 2,
            PlantSpec::Agents2x2d => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    Zero,
    /// `amplitude_i sin(2 pi frequency_i t + phase_i)`
    Sinusoidal {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        #[serde(default)]
        phase: Vec<f64>,
    },
    /// Independent uniform draws on `[-amplitude, amplitude]`, held for
    /// `period` seconds.
    UniformRandom {
        amplitude: Vec<f64>,
        period: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl DisturbanceSpec {
    pub fn validate(&self, n: usize) -> Result<(), PlantError> {
        let check = |a: &[f64]| {
            if a.len() != n {
                Err(PlantError::DisturbanceDim {
                    expected: n,
                    got: a.len(),
                })
            } else if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                Err(PlantError::BadDisturbance("amplitude"))
            } else {
                Ok(())
            }
        };
        match self {
            DisturbanceSpec::Zero => Ok(()),
            DisturbanceSpec::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                check(amplitude)?;
                if frequency.len() != n || frequency.iter().any(|f| !f.is_finite()) {
                    return Err(PlantError::BadDisturbance("frequency"));
                }
                if !(phase.is_empty() || phase.len() == n) {
                    return Err(PlantError::BadDisturbance("phase"));
                }
                Ok(())
            }
            DisturbanceSpec::UniformRandom {
                amplitude, period, ..
            } => {
                check(amplitude)?;
                if !(period.is_finite() && *period > 0.0) {
                    return Err(PlantError::BadDisturbance("period"));
                }
                Ok(())
            }
        }
    }

    /// Same spec with a different random seed; other kinds are unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            DisturbanceSpec::UniformRandom {
                amplitude, period, ..
            } => DisturbanceSpec::UniformRandom {
                amplitude: amplitude.clone(),
                period: *period,
                seed,
            },
            other => other.clone(),
        }
    }
}

/// `d(t)` for an `n`-axis plant; a pure function of the spec and `t`.
pub fn sample_disturbance(spec: &DisturbanceSpec, t: f64, n: usize) -> Vec<f64> {
    match spec {
        DisturbanceSpec::Zero => vec![0.0; n],
        DisturbanceSpec::Sinusoidal {
            amplitude,
            frequency,
            phase,
        } => (0..n)
            .map(|i| {
                let ph = phase.get(i).copied().unwrap_or(0.0);
                amplitude[i] * (std::f64::consts::TAU * frequency[i] * t + ph).sin()
            })
            .collect(),
        DisturbanceSpec::UniformRandom {
            amplitude,
            period,
            seed,
        } => {
            let k = (t / period).floor().max(0.0) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(k);
            amplitude
                .iter()
                .map(|&a| {
                    if a > 0.0 {
                        rng.random_range(-a..=a)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Worst values seen by [`audit_bounds`], next to what the bounds claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub plant: String,
    pub samples: usize,
    /// Largest `|M^-1 (V + G)|` per axis.
    pub max_v_m: Vec<f64>,
    /// Smallest `(M^-1 tau_bar)_i / tau_bar_i` per axis.
    pub min_torque_gain: Vec<f64>,
    /// Largest `|M^-1 d|_i / d_bar_i` per axis over `|d| <= d_bar`.
    pub max_disturbance_gain: Vec<f64>,
    pub v_m_ok: bool,
    pub torque_ok: bool,
    pub disturbance_ok: bool,
}

impl BoundAudit {
    pub fn passed(&self) -> bool {
        self.v_m_ok && self.torque_ok && self.disturbance_ok
    }
}

/// Samples configurations in `domain` and velocities in `[-v_bar, v_bar]` and
/// checks the plant against the declared bounds.
pub fn audit_bounds(
    plant: &dyn Plant,
    bounds: &FeasibilityBounds,
    domain: &IntervalBox,
    samples: usize,
    seed: u64,
) -> BoundAudit {
    let n = plant.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_v_m = vec![0.0f64; n];
    let mut min_gain = vec![f64::INFINITY; n];
    let mut max_dist = vec![0.0f64; n];
    for _ in 0..samples {
        let x: Vec<f64> = (0..n)
            .map(|i| rng.random_range(domain.lo()[i]..=domain.hi()[i]))
            .collect();
        let v: Vec<f64> = (0..n)
            .map(|i| rng.random_range(-bounds.v_bar[i]..=bounds.v_bar[i]))
            .collect();
        let minv = plant.inverse_mass(&x);
        let vm = mat_vec(&minv, &plant.bias(&x, &v));
        let gain = mat_vec(&minv, &bounds.tau_bar);
        for i in 0..n {
            max_v_m[i] = max_v_m[i].max(vm[i].abs());
            min_gain[i] = min_gain[i].min(gain[i] / bounds.tau_bar[i]);
            // linear in d, so the worst case is the absolute row sum
            let worst: f64 = (0..n).map(|j| (minv[i][j] * bounds.d_bar[j]).abs()).sum();
            if bounds.d_bar[i] > 0.0 {
                max_dist[i] = max_dist[i].max(worst / bounds.d_bar[i]);
            }
        }
    }
    let tol = 1e-12;
    BoundAudit {
        plant: plant.name().to_string(),
        samples,
        v_m_ok: (0..n).all(|i| max_v_m[i] <= bounds.v_m_max[i] + tol),
        torque_ok: (0..n).all(|i| min_gain[i] >= bounds.m_lower - tol),
        disturbance_ok: (0..n).all(|i| max_dist[i] <= bounds.m_i_lower + tol),
        max_v_m,
        min_torque_gain: min_gain,
        max_disturbance_gain: max_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    #[test]
    fn pendulum_examples() {
        let p = Pendulum::new(1.0, 1.0, 9.81).unwrap();
        assert_eq!(pendulum_accel(&p, 0.0, 0.0, 0.0, 0.0), 0.0);
        let a = pendulum_accel(&p, std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0);
        assert!((a + 14.715).abs() < 1e-12);
        let x: f64 = 0.3;
        let tau = p.m * p.g * p.l / 2.0 * x.sin();
        assert!(pendulum_accel(&p, x, 0.2, tau, 0.0).abs() < 1e-12);
    }

    #[test]
    fn scara_rest_cases() {
        let p = Scara2::new(1.0, 1.0, 9.81).unwrap();
        let g0 = p.bias(&[0.0, 0.0], &[0.0, 0.0]);
        let a = scara_accel(&p, &[0.0, 0.0], &[0.0, 0.0], &g0, &[0.0, 0.0]);
        assert!(a.iter().all(|v| v.abs() < 1e-12));
        let flat = Scara2::new(2.0, 0.5, 0.0).unwrap();
        let a = scara_accel(&flat, &[0.4, -1.0], &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(a.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scara_matches_independent_solve() {
        let (m, l, g) = (1.0, 1.0, 9.81);
        let p = Scara2::new(m, l, g).unwrap();
        for &(t1, t2, w1, w2) in &[
            (0.0f64, std::f64::consts::FRAC_PI_2, 0.0f64, 0.0f64),
            (0.3, -0.7, 0.1, -0.2),
            (-1.2, 2.0, 0.5, 0.4),
        ] {
            let (c1, c2, s2, c12) = (t1.cos(), t2.cos(), t2.sin(), (t1 + t2).cos());
            let mm =
                m * l * l * Matrix2::new(5.0 / 3.0 + c2, 1.0 / 3.0 + 0.5 * c2, 0.5 * c2, 1.0 / 3.0);
            let vv = m * l * l * s2 * Vector2::new(-0.5 * w2 * w2 - w1 * w2, 0.5 * w2 * w2);
            let gg = m * g * l * Vector2::new(1.5 * c1 + 0.5 * c12, 0.5 * c12);
            let tau = Vector2::new(0.7, -0.3);
            let d = Vector2::new(0.05, 0.1);
            let expected = mm.lu().solve(&(tau + d - vv - gg)).unwrap();
            let got = scara_accel(&p, &[t1, t2], &[w1, w2], &[0.7, -0.3], &[0.05, 0.1]);
            assert!((got[0] - expected[0]).abs() < 1e-10);
            assert!((got[1] - expected[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn agents_are_unit_mass() {
        assert_eq!(multi_agent_accel(&[0.0; 4], &[0.0; 4]), vec![0.0; 4]);
        assert_eq!(
            multi_agent_accel(&[0.2, 0.0, 0.0, 0.0], &[0.0; 4]),
            vec![0.2, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn disturbance_examples() {
        assert_eq!(
            sample_disturbance(&DisturbanceSpec::Zero, 3.0, 2),
            vec![0.0, 0.0]
        );
        let s = DisturbanceSpec::Sinusoidal {
            amplitude: vec![0.5],
            frequency: vec![1.0],
            phase: vec![],
        };
        assert!((sample_disturbance(&s, 0.25, 1)[0] - 0.5).abs() < 1e-12);
        let r = DisturbanceSpec::UniformRandom {
            amplitude: vec![0.5],
            period: 1e-6,
            seed: 4,
        };
        let mut max: f64 = 0.0;
        for k in 0..1_000_000 {
            let d = sample_disturbance(&r, (k as f64 + 0.5) * 1e-6, 1)[0];
            max = max.max(d.abs());
        }
        assert!(max <= 0.5 && max > 0.49);
    }

    #[test]
    fn random_disturbance_is_a_function_of_time() {
        let r = DisturbanceSpec::UniformRandom {
            amplitude: vec![0.5, 0.2],
            period: 0.1,
            seed: 7,
        };
        assert_eq!(
            sample_disturbance(&r, 0.31, 2),
            sample_disturbance(&r, 0.39, 2)
        );
        assert_ne!(
            sample_disturbance(&r, 0.31, 2),
            sample_disturbance(&r, 0.41, 2)
        );
        assert_ne!(
            sample_disturbance(&r, 0.31, 2),
            sample_disturbance(&r.with_seed(8), 0.31, 2)
        );
    }

    #[test]
    fn pendulum_bounds_audit() {
        let b = FeasibilityBounds {
            m_lower: 3.0,
            m_i_lower: 3.0,
            v_m_max: vec![1.0],
            d_bar: vec![0.5],
            v_bar: vec![0.1],
            tau_bar: vec![2.0],
        };
        let dom = IntervalBox::from_bounds(&[[-0.2, 0.2]]).unwrap();
        let ok = audit_bounds(
            &Pendulum::new(1.0 / 9.0, 3.0, 9.81).unwrap(),
            &b,
            &dom,
            10_000,
            1,
        );
        assert!(ok.passed(), "{ok:?}");
        // a unit pendulum has more gravity than the declared bound allows
        let unit = audit_bounds(&Pendulum::new(1.0, 1.0, 9.81).unwrap(), &b, &dom, 10_000, 1);
        assert!(!unit.v_m_ok && unit.torque_ok);
    }

    #[test]
    fn energy_is_conserved_without_input() {
        let p = Pendulum::new(1.0, 1.0, 9.81).unwrap();
        let energy =
            |x: f64, v: f64| p.m * p.l * p.l / 6.0 * v * v - p.m * p.g * p.l / 2.0 * x.cos();
        let (mut x, mut v) = (0.5, 0.0);
        let e0 = energy(x, v);
        let dt = 1e-3;
        let f = |x: f64, v: f64| (v, pendulum_accel(&p, x, v, 0.0, 0.0));
        for _ in 0..10_000 {
            let k1 = f(x, v);
            let k2 = f(x + 0.5 * dt * k1.0, v + 0.5 * dt * k1.1);
            let k3 = f(x + 0.5 * dt * k2.0, v + 0.5 * dt * k2.1);
            let k4 = f(x + dt * k3.0, v + dt * k3.1);
            x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        assert!((energy(x, v) - e0).abs() < 1e-9);
    }
}
