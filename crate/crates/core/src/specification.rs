//! Reach-avoid-stay task sequences and their tightening.
//!
//! A sequence `φ¹ → φ² → … → φᴺ` is satisfied when the trajectory reaches the
//! goal of each task in order while staying inside the shared stay set and
//! avoiding the obstacles of whichever task is active.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dilate, erode, GeometryError, IntervalBox};
use crate::sim::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("sequence has no tasks")]
    NoTasks,
    #[error("task {task} has an empty goal list")]
    EmptyGoalList { task: usize },
    #[error("goal box {goal} of task {task} is not inside the stay set")]
    GoalOutsideStay { task: usize, goal: usize },
    #[error("tightening empties {set} of task {task}")]
    SpecificationInfeasible { task: usize, set: String },
    #[error("separation constraint of task {task} is malformed: {reason}")]
    BadSeparation { task: usize, reason: String },
    #[error("task {task} does not share the sequence's stay set")]
    StayMismatch { task: usize },
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

/// Minimum Euclidean distance between two groups of configuration axes, e.g.
/// the planar positions of two agents stacked into one configuration vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Separation {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub min_distance: f64,
}

impl Separation {
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(&a, &b)| (x[a] - x[b]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest separation attained by any point of `b`.
    pub fn min_distance_over(&self, b: &IntervalBox) -> f64 {
        self.first
            .iter()
            .zip(&self.second)
            .map(|(&a, &c)| {
                let lo = b.lo()[a] - b.hi()[c];
                let hi = b.hi()[a] - b.lo()[c];
                let gap = if lo > 0.0 {
                    lo
                } else if hi < 0.0 {
                    -hi
                } else {
                    0.0
                };
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        self.distance(x) >= self.min_distance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasTask {
    pub goals: Vec<IntervalBox>,
    pub obstacles: Vec<IntervalBox>,
    pub stay: IntervalBox,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separations: Vec<Separation>,
}

impl RasTask {
    pub fn in_goal(&self, x: &[f64]) -> bool {
        self.goals.iter().any(|g| g.contains(x))
    }

    pub fn hits_obstacle(&self, x: &[f64]) -> bool {
        self.obstacles.iter().any(|o| o.contains(x))
    }

    pub fn separated(&self, x: &[f64]) -> bool {
        self.separations.iter().all(|s| s.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasSequence {
    tasks: Vec<RasTask>,
}

impl RasSequence {
    pub fn new(tasks: Vec<RasTask>) -> Result<Self, SpecError> {
        let first = tasks.first().ok_or(SpecError::NoTasks)?;
        let n = first.stay.dim();
        for (i, t) in tasks.iter().enumerate() {
            let dims_ok =
                t.stay.dim() == n && t.goals.iter().chain(&t.obstacles).all(|b| b.dim() == n);
            if !dims_ok {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: t.stay.dim(),
                }
                .into());
            }
            if t.stay != first.stay {
                return Err(SpecError::StayMismatch { task: i });
            }
            if t.goals.is_empty() {
                return Err(SpecError::EmptyGoalList { task: i });
            }
            if let Some(g) = t.goals.iter().position(|g| !g.is_subset_of(&t.stay)) {
                return Err(SpecError::GoalOutsideStay { task: i, goal: g });
            }
            for s in &t.separations {
                let valid = s.first.len() == s.second.len()
                    && !s.first.is_empty()
                    && s.first.iter().chain(&s.second).all(|&a| a < n)
                    && s.min_distance >= 0.0;
                if !valid {
                    return Err(SpecError::BadSeparation {
                        task: i,
                        reason: format!("{s:?}"),
                    });
                }
            }
        }
        Ok(RasSequence { tasks })
    }

    pub fn tasks(&self) -> &[RasTask] {
        &self.tasks
    }

    pub fn dim(&self) -> usize {
        self.tasks[0].stay.dim()
    }

    pub fn stay(&self) -> &IntervalBox {
        &self.tasks[0].stay
    }
}

/// A sequence whose sets were tightened by `margin_used` per axis.
///
/// `sample_slack` is the inter-sample allowance folded into the margin; the
/// abstraction uses it when testing separation constraints on cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightenedSequence {
    pub tasks: Vec<RasTask>,
    pub margin_used: Vec<f64>,
    pub sample_slack: Vec<f64>,
}

impl TightenedSequence {
    pub fn stay(&self) -> &IntervalBox {
        &self.tasks[0].stay
    }
}

/// Tightens every task by the VCZ radius `lambda` plus the per-axis margin
/// `delta`: goals and the stay set are eroded, obstacles dilated.
///
/// Separation distances grow by `sqrt(2) * lambda`, the largest change in
/// the distance between two axis groups when the whole configuration moves
/// inside a ball of radius `lambda`.
pub fn tighten(
    seq: &RasSequence,
    lambda: f64,
    delta: &[f64],
) -> Result<TightenedSequence, SpecError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SpecError::BadLambda(lambda));
    }
    let n = seq.dim();
    if delta.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: delta.len(),
        }
        .into());
    }
    let margin: Vec<f64> = delta.iter().map(|d| lambda + d).collect();
    let stay = erode(seq.stay(), &margin)?;
    if stay.is_empty() {
        return Err(SpecError::SpecificationInfeasible {
            task: 0,
            set: "the stay set".into(),
        });
    }
    let mut tasks = Vec::with_capacity(seq.tasks.len());
    for (i, t) in seq.tasks.iter().enumerate() {
        let mut goals = Vec::with_capacity(t.goals.len());
        for (j, g) in t.goals.iter().enumerate() {
            let eg = erode(g, &margin)?;
            if eg.is_empty() {
                return Err(SpecError::SpecificationInfeasible {
                    task: i,
                    set: format!("goal box {j}"),
                });
            }
            goals.push(eg);
        }
        let obstacles = t
            .obstacles
            .iter()
            .map(|o| dilate(o, &margin))
            .collect::<Result<Vec<_>, _>>()?;
        let separations = t
            .separations
            .iter()
            .map(|s| Separation {
                min_distance: s.min_distance + std::f64::consts::SQRT_2 * lambda,
                ..s.clone()
            })
            .collect();
        tasks.push(RasTask {
            goals,
            obstacles,
            stay: stay.clone(),
            separations,
        });
    }
    Ok(TightenedSequence {
        tasks,
        margin_used: margin,
        sample_slack: delta.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVerdict {
    /// First sample index with the position inside a goal box.
    pub reached_at: Option<usize>,
    /// First sample in the task's active window that touched an obstacle or
    /// broke a separation constraint.
    pub first_collision: Option<usize>,
    pub avoided: bool,
    pub stayed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecVerdict {
    pub tasks: Vec<TaskVerdict>,
    pub first_stay_exit: Option<usize>,
    pub satisfied: bool,
}

fn evaluate(xs: &[&[f64]], seq: &RasSequence, windows: &[Option<(usize, usize)>]) -> SpecVerdict {
    let first_stay_exit = xs.iter().position(|x| !seq.stay().contains(x));
    let stayed = first_stay_exit.is_none();
    let mut tasks = Vec::with_capacity(seq.tasks.len());
    let mut satisfied = stayed;
    for (task, window) in seq.tasks.iter().zip(windows) {
        let verdict = match *window {
            None => TaskVerdict {
                reached_at: None,
                first_collision: None,
                avoided: true,
                stayed,
            },
            Some((start, end)) => {
                let reached_at = (start..=end.min(xs.len() - 1)).find(|&k| task.in_goal(xs[k]));
                let first_collision = (start..end.min(xs.len()))
                    .find(|&k| task.hits_obstacle(xs[k]) || !task.separated(xs[k]));
                TaskVerdict {
                    reached_at,
                    first_collision,
                    avoided: first_collision.is_none(),
                    stayed,
                }
            }
        };
        satisfied &= verdict.reached_at.is_some() && verdict.avoided;
        tasks.push(verdict);
    }
    SpecVerdict {
        tasks,
        first_stay_exit,
        satisfied,
    }
}

/// Checks a simulated run against `seq`, using the task index recorded at
/// each sample to delimit the window in which each task's obstacles apply.
/// The goal of task `i` must be reached no later than the sample at which
/// task `i + 1` engages.
pub fn check_task_satisfaction(
    traj: &Trajectory,
    seq: &RasSequence,
) -> Result<SpecVerdict, SpecError> {
    if traj.records.is_empty() {
        return Err(SpecError::EmptyTrajectory);
    }
    let xs: Vec<&[f64]> = traj.records.iter().map(|r| r.x.as_slice()).collect();
    let len = xs.len();
    let mut windows = vec![None; seq.tasks.len()];
    for (i, w) in windows.iter_mut().enumerate() {
        let Some(start) = traj.records.iter().position(|r| r.task == i) else {
            continue;
        };
        let next = traj.records[start..]
            .iter()
            .position(|r| r.task > i)
            .map(|off| start + off);
        *w = Some((start, next.unwrap_or(len)));
    }
    Ok(evaluate(&xs, seq, &windows))
}

/// Checks a bare sequence of positions, switching greedily to the next task
/// at the first sample inside the current goal.
pub fn check_trace(xs: &[Vec<f64>], seq: &RasSequence) -> Result<SpecVerdict, SpecError> {
    if xs.is_empty() {
        return Err(SpecError::EmptyTrajectory);
    }
    let xs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let last = seq.tasks.len() - 1;
    let mut windows = vec![None; seq.tasks.len()];
    let mut start = Some(0usize);
    for (i, task) in seq.tasks.iter().enumerate() {
        let Some(s) = start else { break };
        let reach = (s..xs.len()).find(|&k| task.in_goal(xs[k]));
        let end = if i == last {
            xs.len()
        } else {
            reach.unwrap_or(xs.len())
        };
        windows[i] = Some((s, end));
        start = reach;
    }
    Ok(evaluate(&xs, seq, &windows))
}
