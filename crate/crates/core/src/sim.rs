//! Closed-loop simulation: the plant under the confinement torque, the VCZ
//! center driven by the refined symbolic controller, and dense monitors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confinement::ConfinementLaw;
use crate::plants::{sample_disturbance, DisturbanceSpec, Plant};
use crate::specification::{check_task_satisfaction, tighten, RasSequence, SpecError, SpecVerdict};
use crate::synthesis::{refine, SymbolicController, TaskKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dt = {dt} must be positive and divide h = {h} into at least 10 steps")]
    BadStep { dt: f64, h: f64 },
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("{what} has {got} entries, the plant has {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("initial state is {distance} from the VCZ center, not inside radius {lambda}")]
    InitialOutsideZone { distance: f64, lambda: f64 },
    #[error("initial velocity error {e_v:?} is not inside the funnel width {p:?}")]
    InitialFunnel { e_v: Vec<f64>, p: Vec<f64> },
    #[error("task 0 has no winning cell to place the VCZ center in")]
    NoWinningCell,
    #[error("initial VCZ center is outside the winning domain of task 0")]
    InitialOutsideDomain,
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// `|x - xi| < lambda`
    pub conf: bool,
    /// `-rho < e_v < rho`
    pub funnel: bool,
    /// `|tau| <= tau_bar`
    pub torque: bool,
    /// The center satisfies the lambda-tightened active task.
    pub vcz_spec: bool,
}

impl Flags {
    pub fn all(&self) -> bool {
        self.conf && self.funnel && self.torque && self.vcz_spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
    pub e_v: Vec<f64>,
    pub rho: Vec<f64>,
    pub task: usize,
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Record>,
}

fn push_vec(line: &mut String, v: &[f64]) {
    for a in v {
        let _ = write!(line, ",{a}");
    }
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.x.len())
    }

    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("t");
        for name in ["x", "v", "xi", "u", "tau"] {
            for i in 1..=n {
                let _ = write!(h, ",{name}{i}");
            }
        }
        h.push_str(",task,conf,funnel,torque,vczspec");
        h
    }

    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = Self::csv_header(n);
        out.push('\n');
        for r in &self.records {
            let mut line = format!("{}", r.t);
            push_vec(&mut line, &r.x);
            push_vec(&mut line, &r.v);
            push_vec(&mut line, &r.xi);
            push_vec(&mut line, &r.u);
            push_vec(&mut line, &r.tau);
            let f = r.flags;
            let _ = writeln!(
                line,
                ",{},{},{},{},{}",
                r.task, f.conf as u8, f.funnel as u8, f.torque as u8, f.vcz_spec as u8
            );
            out.push_str(&line);
        }
        out
    }
}

/// Evaluates the monitors on a complete record.
pub fn monitor_step(r: &Record, lambda: f64, tau_bar: &[f64], center_ok: bool) -> Flags {
    let dist =
        r.x.iter()
            .zip(&r.xi)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
    Flags {
        conf: dist < lambda,
        funnel: r.e_v.iter().zip(&r.rho).all(|(e, p)| e.abs() < *p),
        torque: r.tau.iter().zip(tau_bar).all(|(t, b)| t.abs() <= *b),
        vcz_spec: center_ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreachKind {
    Confinement,
    Funnel,
    Torque,
    VczSpec,
    /// The funnel precondition failed when a new task engaged.
    FunnelReset,
    OutsideDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub kind: BreachKind,
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorCounts {
    pub conf: usize,
    pub funnel: usize,
    pub torque: usize,
    pub vcz_spec: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub steps: usize,
    pub dt: f64,
    /// Records on which each monitor held.
    pub passed: MonitorCounts,
    pub first_failure: Option<usize>,
    pub breach: Option<Breach>,
    pub xi0: Vec<f64>,
    pub xi0_rule: String,
    /// Time at which the center entered each task's goal cells.
    pub goal_times: Vec<Option<f64>>,
    /// Largest `|x - xi| / lambda`.
    pub max_confinement_ratio: f64,
    /// Largest `|e_v_i| / rho_i`.
    pub max_funnel_ratio: f64,
    /// Largest `|tau_i| / tau_bar_i`.
    pub max_torque_ratio: f64,
    pub spec: SpecVerdict,
}

impl SimReport {
    pub fn all_monitors_passed(&self) -> bool {
        self.breach.is_none() && self.first_failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    /// Defaults to the center of the task-0 winning cell nearest `x0`.
    #[serde(default)]
    pub xi0: Option<Vec<f64>>,
}

/// Everything one closed-loop run needs. The plant is only reached through
/// [`Plant::accel`] inside the integrator.
pub struct ClosedLoop<'a> {
    pub plant: &'a dyn Plant,
    pub law: &'a ConfinementLaw,
    pub controller: &'a SymbolicController,
    pub spec: &'a RasSequence,
    pub disturbance: &'a DisturbanceSpec,
    pub dt: f64,
    pub duration: f64,
    pub initial: &'a InitialState,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

struct Stage<'s> {
    plant: &'s dyn Plant,
    law: &'s ConfinementLaw,
    disturbance: &'s DisturbanceSpec,
    n: usize,
}

impl Stage<'_> {
    // (x', v') at absolute time t with funnel clock `clock`.
    fn deriv(&self, x: &[f64], v: &[f64], xi: &[f64], t: f64, clock: f64) -> (Vec<f64>, Vec<f64>) {
        let tau = self.law.torque(x, v, xi, clock).tau;
        let d = sample_disturbance(self.disturbance, t, self.n);
        (v.to_vec(), self.plant.accel(x, v, &tau, &d))
    }
}

/// Runs the closed loop. Setup problems are errors; monitor violations stop
/// the run and are reported in the outcome together with the partial
/// trajectory.
pub fn run(cl: &ClosedLoop) -> Result<SimOutcome, SimError> {
    let n = cl.plant.dim();
    let ctrl = cl.controller;
    let h = ctrl.h;
    let steps_per_sample = (h / cl.dt).round() as usize;
    if cl.dt.is_nan()
        || cl.dt <= 0.0
        || steps_per_sample < 10
        || (steps_per_sample as f64 * cl.dt - h).abs() > 1e-9 * h
    {
        return Err(SimError::BadStep { dt: cl.dt, h });
    }
    if !(cl.duration > 0.0 && cl.duration.is_finite()) {
        return Err(SimError::BadDuration(cl.duration));
    }
    let check = |what, v: &[f64]| {
        if v.len() == n {
            Ok(())
        } else {
            Err(SimError::Dimension {
                what,
                expected: n,
                got: v.len(),
            })
        }
    };
    check("x0", &cl.initial.x0)?;
    check("spec", &vec![0.0; cl.spec.dim()])?;
    check("grid", &vec![0.0; ctrl.grid.dim()])?;
    let refined = refine(ctrl);
    let (xi0, rule) = match &cl.initial.xi0 {
        Some(xi) => {
            check("xi0", xi)?;
            (xi.clone(), "given".to_string())
        }
        None => (
            refined
                .nearest_winning_center(0, &cl.initial.x0)
                .ok_or(SimError::NoWinningCell)?,
            "nearest task-0 winning cell center".to_string(),
        ),
    };
    if !refined.in_domain(0, &xi0) {
        return Err(SimError::InitialOutsideDomain);
    }
    let lambda = cl.law.lambda;
    let d0 = dist(&cl.initial.x0, &xi0);
    if d0 >= lambda {
        return Err(SimError::InitialOutsideZone {
            distance: d0,
            lambda,
        });
    }
    let v0 = cl.initial.v0.clone().unwrap_or_else(|| vec![0.0; n]);
    check("v0", &v0)?;
    let probe = cl.law.torque(&cl.initial.x0, &v0, &xi0, 0.0);
    if probe.funnel_breach {
        return Err(SimError::InitialFunnel {
            e_v: probe.e_v,
            p: cl.law.funnel.p.clone(),
        });
    }
    let centers = tighten(cl.spec, lambda, &vec![0.0; n])?;
    let stage = Stage {
        plant: cl.plant,
        law: cl.law,
        disturbance: cl.disturbance,
        n,
    };

    let total_steps = (cl.duration / cl.dt).round() as usize;
    let last_task = ctrl.tasks.len() - 1;
    let mut x = cl.initial.x0.clone();
    let mut v = v0;
    let mut xi_sample = xi0.clone();
    let mut u = vec![0.0; n];
    let mut task = 0usize;
    let mut clock_origin = 0.0;
    let mut goal_times = vec![None; ctrl.tasks.len()];
    let mut records = Vec::with_capacity(total_steps + 1);
    let mut breach = None;

    for k in 0..=total_steps {
        let t = k as f64 * cl.dt;
        let j = k % steps_per_sample;
        if j == 0 {
            if k > 0 {
                xi_sample = axpy(h, &u, &xi_sample);
            }
            if goal_times[task].is_none()
                && ctrl.tasks[task].kind == TaskKind::ReachAvoid
                && refined.in_goal(task, &xi_sample)
            {
                goal_times[task] = Some(t);
                if task < last_task {
                    task += 1;
                    clock_origin = t;
                    let reset = cl.law.torque(&x, &v, &xi_sample, 0.0);
                    if reset.funnel_breach {
                        breach = Some(Breach {
                            kind: BreachKind::FunnelReset,
                            step: k,
                            t,
                        });
                    }
                }
            }
            match refined.select(task, &xi_sample) {
                Ok(a) => u = a.u,
                Err(_) => {
                    breach.get_or_insert(Breach {
                        kind: BreachKind::OutsideDomain,
                        step: k,
                        t,
                    });
                }
            }
        }
        let xi = axpy(j as f64 * cl.dt, &u, &xi_sample);
        let clock = t - clock_origin;
        let eval = cl.law.torque(&x, &v, &xi, clock);
        let active = &centers.tasks[task];
        let center_ok =
            active.stay.contains(&xi) && !active.hits_obstacle(&xi) && active.separated(&xi);
        let mut rec = Record {
            t,
            x: x.clone(),
            v: v.clone(),
            xi: xi.clone(),
            u: u.clone(),
            tau: eval.tau,
            e_v: eval.e_v,
            rho: eval.rho,
            task,
            flags: Flags {
                conf: true,
                funnel: true,
                torque: true,
                vcz_spec: true,
            },
        };
        rec.flags = monitor_step(&rec, lambda, &cl.law.tau_bar, center_ok);
        let flags = rec.flags;
        records.push(rec);
        if breach.is_none() && !flags.all() {
            let kind = if !flags.conf {
                BreachKind::Confinement
            } else if !flags.funnel {
                BreachKind::Funnel
            } else if !flags.torque {
                BreachKind::Torque
            } else {
                BreachKind::VczSpec
            };
            breach = Some(Breach { kind, step: k, t });
        }
        if breach.is_some() || k == total_steps {
            break;
        }
        // RK4 over [t, t + dt]; the center moves linearly inside the step
        let dt = cl.dt;
        let xi_mid = axpy(0.5 * dt, &u, &xi);
        let xi_end = axpy(dt, &u, &xi);
        let (k1x, k1v) = stage.deriv(&x, &v, &xi, t, clock);
        let (k2x, k2v) = stage.deriv(
            &axpy(0.5 * dt, &k1x, &x),
            &axpy(0.5 * dt, &k1v, &v),
            &xi_mid,
            t + 0.5 * dt,
            clock + 0.5 * dt,
        );
        let (k3x, k3v) = stage.deriv(
            &axpy(0.5 * dt, &k2x, &x),
            &axpy(0.5 * dt, &k2v, &v),
            &xi_mid,
            t + 0.5 * dt,
            clock + 0.5 * dt,
        );
        let (k4x, k4v) = stage.deriv(
            &axpy(dt, &k3x, &x),
            &axpy(dt, &k3v, &v),
            &xi_end,
            t + dt,
            clock + dt,
        );
        for i in 0..n {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }

    let trajectory = Trajectory { records };
    let spec = check_task_satisfaction(&trajectory, cl.spec)?;
    let report = summarize(&trajectory, cl, breach, xi0, rule, goal_times, spec);
    Ok(SimOutcome { trajectory, report })
}

fn summarize(
    traj: &Trajectory,
    cl: &ClosedLoop,
    breach: Option<Breach>,
    xi0: Vec<f64>,
    xi0_rule: String,
    goal_times: Vec<Option<f64>>,
    spec: SpecVerdict,
) -> SimReport {
    let rs = &traj.records;
    let count = |f: fn(&Flags) -> bool| rs.iter().filter(|r| f(&r.flags)).count();
    let max_of = |f: &dyn Fn(&Record) -> f64| rs.iter().map(f).fold(0.0, f64::max);
    SimReport {
        steps: rs.len(),
        dt: cl.dt,
        passed: MonitorCounts {
            conf: count(|f| f.conf),
            funnel: count(|f| f.funnel),
            torque: count(|f| f.torque),
            vcz_spec: count(|f| f.vcz_spec),
        },
        first_failure: rs.iter().position(|r| !r.flags.all()),
        breach,
        xi0,
        xi0_rule,
        goal_times,
        max_confinement_ratio: max_of(&|r| dist(&r.x, &r.xi) / cl.law.lambda),
        max_funnel_ratio: max_of(&|r| {
            r.e_v
                .iter()
                .zip(&r.rho)
                .map(|(e, p)| e.abs() / p)
                .fold(0.0, f64::max)
        }),
        max_torque_ratio: max_of(&|r| {
            r.tau
                .iter()
                .zip(&cl.law.tau_bar)
                .map(|(t, b)| t.abs() / b)
                .fold(0.0, f64::max)
        }),
        spec,
    }
}
