//! Fixed-point games on the symbolic model and their refinement to a
//! concrete feedback on the VCZ center.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{AbstractTask, InputGrid, SymbolicModel};
use crate::geometry::{CellId, GeometryError, GridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("margin inputs must be finite and nonnegative (h positive)")]
    BadMargin,
    #[error("task {task} is infeasible: {reason}")]
    InfeasibleTask { task: usize, reason: String },
    #[error("goal cells {cells:?} of task {task} are not winning for task {}", task + 1)]
    CompositionError { task: usize, cells: Vec<usize> },
    #[error("an invariance task may only be the last task (task {0} is not)")]
    InvarianceNotLast(usize),
    #[error("point quantizes to {cell:?}, outside the winning domain of task {task}")]
    OutsideDomain { task: usize, cell: CellId },
    #[error("task index {0} out of range")]
    NoSuchTask(usize),
    #[error("expected {expected} task kinds, got {got}")]
    KindCount { expected: usize, got: usize },
}

/// Per-axis robustness margin `delta = u_bar * h / 2 + eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub delta: Vec<f64>,
}

pub fn compute_delta(u_bound: &[f64], h: f64, eta: &[f64]) -> Result<Margin, SynthesisError> {
    if u_bound.len() != eta.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: eta.len(),
            got: u_bound.len(),
        }
        .into());
    }
    let ok = |v: f64| v.is_finite() && v >= 0.0;
    if !(h > 0.0 && h.is_finite()) || !u_bound.iter().chain(eta).all(|&v| ok(v)) {
        return Err(SynthesisError::BadMargin);
    }
    Ok(Margin {
        delta: u_bound
            .iter()
            .zip(eta)
            .map(|(u, e)| u * h / 2.0 + e)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Reach the goal cells while staying safe.
    ReachAvoid,
    /// Stay inside the safe cells forever.
    Invariance,
}

const LOSING: u32 = u32::MAX;

/// Winning domain, permissive policy, ranks and the runtime choice of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskController {
    pub kind: TaskKind,
    /// Cells whose entry completes the task (sorted).
    pub goal: Vec<usize>,
    /// Winning cells, goal included (sorted).
    pub winning: Vec<usize>,
    value: Vec<u32>,
    policy_offsets: Vec<u32>,
    policy_inputs: Vec<u32>,
    choice: Vec<u32>,
}

impl TaskController {
    pub fn num_cells(&self) -> usize {
        self.value.len()
    }

    pub fn is_winning(&self, cell: usize) -> bool {
        self.value[cell] != LOSING
    }

    pub fn is_goal(&self, cell: usize) -> bool {
        self.goal.binary_search(&cell).is_ok()
    }

    /// Steps-to-goal rank; `None` outside the winning domain.
    pub fn value(&self, cell: usize) -> Option<u32> {
        (self.value[cell] != LOSING).then_some(self.value[cell])
    }

    /// All admissible inputs at a cell (empty outside the winning domain).
    pub fn policy(&self, cell: usize) -> &[u32] {
        &self.policy_inputs
            [self.policy_offsets[cell] as usize..self.policy_offsets[cell + 1] as usize]
    }

    /// The single input the refined controller applies at a cell.
    pub fn choice(&self, cell: usize) -> Option<usize> {
        (self.choice[cell] != LOSING).then_some(self.choice[cell] as usize)
    }

    fn from_parts(
        model: &SymbolicModel,
        kind: TaskKind,
        goal: Vec<usize>,
        value: Vec<u32>,
        admissible: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let n = model.num_cells();
        let norms: Vec<f64> = (0..model.num_inputs())
            .map(|u| model.input_value(u).iter().map(|v| v * v).sum())
            .collect();
        let mut policy_offsets = Vec::with_capacity(n + 1);
        let mut policy_inputs = Vec::new();
        let mut choice = vec![LOSING; n];
        policy_offsets.push(0u32);
        for c in 0..n {
            if value[c] != LOSING {
                let mut best: Option<(u32, f64, usize)> = None;
                for (u, &norm) in norms.iter().enumerate() {
                    if !admissible(c, u) {
                        continue;
                    }
                    policy_inputs.push(u as u32);
                    let worst = model
                        .post(c, u)
                        .iter()
                        .map(|&s| value[s as usize])
                        .max()
                        .unwrap_or(LOSING);
                    let key = (worst, norm, u);
                    if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                        best = Some(key);
                    }
                }
                if let Some((_, _, u)) = best {
                    choice[c] = u as u32;
                }
            }
            policy_offsets.push(policy_inputs.len() as u32);
        }
        let winning = (0..n).filter(|&c| value[c] != LOSING).collect();
        TaskController {
            kind,
            goal,
            winning,
            value,
            policy_offsets,
            policy_inputs,
            choice,
        }
    }
}

fn membership(n: usize, cells: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &c in cells {
        m[c] = true;
    }
    m
}

/// Least fixed point of `Z -> goal ∪ (CPre(Z) ∩ stay \ unsafe)`.
///
/// Cells enter `Z` in layers; a cell's value is the layer index. The policy at
/// a non-goal cell keeps every input whose successors all have a strictly
/// smaller value, so any choice among them makes progress. At goal cells the
/// policy keeps the inputs that stay inside the goal, falling back to inputs
/// that stay winning.
pub fn solve_reach_avoid(
    model: &SymbolicModel,
    task: &AbstractTask,
    task_index: usize,
) -> Result<TaskController, SynthesisError> {
    let n = model.num_cells();
    let nu = model.num_inputs();
    let unsafe_m = membership(n, &task.unsafe_cells);
    let stay_m = membership(n, &task.stay);
    let goal: Vec<usize> = task
        .goal
        .iter()
        .copied()
        .filter(|&c| !unsafe_m[c])
        .collect();
    if goal.is_empty() {
        return Err(SynthesisError::InfeasibleTask {
            task: task_index,
            reason: "no goal cell survives obstacle pruning".into(),
        });
    }
    let goal_m = membership(n, &goal);
    let (starts, preds) = model.predecessors();
    let mut remaining: Vec<u32> = (0..n * nu)
        .map(|p| model.post(p / nu, p % nu).len() as u32)
        .collect();
    let mut value = vec![LOSING; n];
    let mut frontier: Vec<usize> = goal.clone();
    for &c in &goal {
        value[c] = 0;
    }
    let mut level = 0u32;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &c in &frontier {
            for &p in &preds[starts[c] as usize..starts[c + 1] as usize] {
                let p = p as usize;
                remaining[p] -= 1;
                if remaining[p] == 0 {
                    let q = p / nu;
                    if value[q] == LOSING && stay_m[q] && !unsafe_m[q] {
                        value[q] = level + 1;
                        next.push(q);
                    }
                }
            }
        }
        next.sort_unstable();
        frontier = next;
        level += 1;
    }
    let inside_goal = |c: usize, u: usize| {
        let post = model.post(c, u);
        !post.is_empty() && post.iter().all(|&s| goal_m[s as usize])
    };
    let goal_holds: Vec<bool> = (0..n)
        .map(|c| goal_m[c] && (0..nu).any(|u| inside_goal(c, u)))
        .collect();
    let ctrl =
        TaskController::from_parts(model, TaskKind::ReachAvoid, goal, value.clone(), |c, u| {
            let post = model.post(c, u);
            if post.is_empty() {
                return false;
            }
            if goal_m[c] {
                if goal_holds[c] {
                    inside_goal(c, u)
                } else {
                    post.iter().all(|&s| value[s as usize] != LOSING)
                }
            } else {
                post.iter().all(|&s| value[s as usize] < value[c])
            }
        });
    Ok(ctrl)
}

/// Greatest fixed point of `Z -> safe ∩ CPre(Z)` with `safe = stay \ unsafe`.
pub fn solve_invariance(
    model: &SymbolicModel,
    task: &AbstractTask,
    task_index: usize,
) -> Result<TaskController, SynthesisError> {
    let n = model.num_cells();
    let nu = model.num_inputs();
    let unsafe_m = membership(n, &task.unsafe_cells);
    let mut inside: Vec<bool> = (0..n)
        .map(|c| !unsafe_m[c])
        .zip(membership(n, &task.stay))
        .map(|(a, b)| a && b)
        .collect();
    if !inside.iter().any(|&b| b) {
        return Err(SynthesisError::InfeasibleTask {
            task: task_index,
            reason: "the safe set is empty".into(),
        });
    }
    let mut good: Vec<bool> = (0..n * nu)
        .map(|p| {
            let post = model.post(p / nu, p % nu);
            !post.is_empty() && post.iter().all(|&s| inside[s as usize])
        })
        .collect();
    let mut good_count: Vec<u32> = (0..n)
        .map(|c| (0..nu).filter(|&u| good[c * nu + u]).count() as u32)
        .collect();
    let mut queue: VecDeque<usize> = (0..n)
        .filter(|&c| inside[c] && good_count[c] == 0)
        .collect();
    for &c in &queue {
        inside[c] = false;
    }
    let (starts, preds) = model.predecessors();
    while let Some(c) = queue.pop_front() {
        for &p in &preds[starts[c] as usize..starts[c + 1] as usize] {
            let p = p as usize;
            if good[p] {
                good[p] = false;
                let q = p / nu;
                good_count[q] -= 1;
                if good_count[q] == 0 && inside[q] {
                    inside[q] = false;
                    queue.push_back(q);
                }
            }
        }
    }
    let value: Vec<u32> = inside.iter().map(|&b| if b { 0 } else { LOSING }).collect();
    let winning: Vec<usize> = (0..n).filter(|&c| inside[c]).collect();
    if winning.is_empty() {
        return Err(SynthesisError::InfeasibleTask {
            task: task_index,
            reason: "no cell can be kept inside the safe set".into(),
        });
    }
    Ok(TaskController::from_parts(
        model,
        TaskKind::Invariance,
        winning,
        value,
        |c, u| good[c * nu + u],
    ))
}

/// Controllers for a whole task sequence on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicController {
    pub grid: GridSpec,
    pub inputs: InputGrid,
    pub h: f64,
    pub tasks: Vec<TaskController>,
}

impl SymbolicController {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("controller serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Solves every task in order and checks that each task's goal cells are
/// winning for the next one, so the switch can always be taken.
pub fn synthesize_sequence(
    model: &SymbolicModel,
    tasks: &[AbstractTask],
    kinds: &[TaskKind],
) -> Result<SymbolicController, SynthesisError> {
    if kinds.len() != tasks.len() {
        return Err(SynthesisError::KindCount {
            expected: tasks.len(),
            got: kinds.len(),
        });
    }
    let mut out = Vec::with_capacity(tasks.len());
    for (i, (t, k)) in tasks.iter().zip(kinds).enumerate() {
        let c = match k {
            TaskKind::ReachAvoid => solve_reach_avoid(model, t, i)?,
            TaskKind::Invariance if i + 1 == tasks.len() => solve_invariance(model, t, i)?,
            TaskKind::Invariance => return Err(SynthesisError::InvarianceNotLast(i)),
        };
        log::debug!("task {i}: {} winning cells", c.winning.len());
        out.push(c);
    }
    for i in 0..out.len().saturating_sub(1) {
        let gap: Vec<usize> = out[i]
            .goal
            .iter()
            .copied()
            .filter(|&c| out[i].is_winning(c) && !out[i + 1].is_winning(c))
            .collect();
        if !gap.is_empty() {
            return Err(SynthesisError::CompositionError {
                task: i,
                cells: gap,
            });
        }
    }
    Ok(SymbolicController {
        grid: model.grid.clone(),
        inputs: model.inputs.clone(),
        h: model.h,
        tasks: out,
    })
}

/// The input picked for a concrete center.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub cell: usize,
    pub input: usize,
    pub u: Vec<f64>,
}

/// `C_q ∘ Q`: quantize the center, then apply the cell's chosen input.
#[derive(Debug, Clone, Copy)]
pub struct Refined<'a> {
    ctrl: &'a SymbolicController,
}

pub fn refine(controller: &SymbolicController) -> Refined<'_> {
    Refined { ctrl: controller }
}

impl Refined<'_> {
    pub fn controller(&self) -> &SymbolicController {
        self.ctrl
    }

    fn task(&self, task: usize) -> Result<&TaskController, SynthesisError> {
        self.ctrl
            .tasks
            .get(task)
            .ok_or(SynthesisError::NoSuchTask(task))
    }

    fn cell(&self, xi: &[f64]) -> Result<CellId, SynthesisError> {
        Ok(self.ctrl.grid.quantize(xi)?)
    }

    pub fn select(&self, task: usize, xi: &[f64]) -> Result<Action, SynthesisError> {
        let tc = self.task(task)?;
        let id = self.cell(xi)?;
        let choice = id.index().and_then(|c| tc.choice(c).map(|u| (c, u)));
        match choice {
            Some((cell, input)) => Ok(Action {
                cell,
                input,
                u: self.ctrl.inputs.value(input),
            }),
            None => Err(SynthesisError::OutsideDomain { task, cell: id }),
        }
    }

    pub fn in_domain(&self, task: usize, xi: &[f64]) -> bool {
        match (self.task(task), self.cell(xi)) {
            (Ok(tc), Ok(CellId::Cell(c))) => tc.is_winning(c),
            _ => false,
        }
    }

    pub fn in_goal(&self, task: usize, xi: &[f64]) -> bool {
        match (self.task(task), self.cell(xi)) {
            (Ok(tc), Ok(CellId::Cell(c))) => tc.is_goal(c),
            _ => false,
        }
    }

    /// Center of the winning cell of `task` closest to `x` (Euclidean, ties
    /// to the smaller index).
    pub fn nearest_winning_center(&self, task: usize, x: &[f64]) -> Option<Vec<f64>> {
        let tc = self.task(task).ok()?;
        tc.winning
            .iter()
            .map(|&c| {
                let ctr = self.ctrl.grid.cell_center(c);
                let d: f64 = ctr.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                (d, ctr)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c)
    }
}
