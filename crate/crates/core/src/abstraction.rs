//! Finite abstraction of the VCZ single integrator on a uniform grid.
//!
//! Successor lists are stored CSR-style: `offsets[p]..offsets[p + 1]` indexes
//! `successors` for the flat pair `p = cell * num_inputs + input`. An empty
//! range is a blocked transition (the reach box left the grid).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dilate, CellId, GeometryError, GridSpec, IntervalBox};
use crate::specification::TightenedSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("input grid needs an odd sample count of at least 3 on every axis, got {0:?}")]
    BadSamples(Vec<usize>),
    #[error("input bound must be positive on every axis, got {0:?}")]
    BadInputBound(Vec<f64>),
    #[error("sampling time must be positive, got {0}")]
    BadHorizon(f64),
    #[error("h * u_bar = {shift} reaches the domain width {width} on axis {axis}")]
    DegenerateHorizon { axis: usize, shift: f64, width: f64 },
    #[error("model has {0} transitions, more than 32-bit indexing allows")]
    TooLarge(usize),
    #[error("grid does not cover the tightened stay set")]
    GridDoesNotCover,
    #[error("task {task} has no abstract goal cell; try a finer eta")]
    AbstractGoalEmpty { task: usize },
}

/// The finite input alphabet: a per-axis uniform sampling of `[-bound, bound]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGrid {
    pub bound: Vec<f64>,
    pub samples_per_axis: Vec<usize>,
}

impl InputGrid {
    pub fn new(bound: Vec<f64>, samples_per_axis: Vec<usize>) -> Result<Self, AbstractionError> {
        if bound.len() != samples_per_axis.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: bound.len(),
                got: samples_per_axis.len(),
            }
            .into());
        }
        if bound.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(AbstractionError::BadInputBound(bound));
        }
        if samples_per_axis.iter().any(|&k| k < 3 || k % 2 == 0) {
            return Err(AbstractionError::BadSamples(samples_per_axis));
        }
        Ok(InputGrid {
            bound,
            samples_per_axis,
        })
    }

    /// Three samples per axis: `{-bound, 0, +bound}`.
    pub fn extremes(bound: Vec<f64>) -> Result<Self, AbstractionError> {
        let n = bound.len();
        Self::new(bound, vec![3; n])
    }

    pub fn dim(&self) -> usize {
        self.bound.len()
    }

    pub fn len(&self) -> usize {
        self.samples_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axis_value(&self, axis: usize, k: usize) -> f64 {
        let n = self.samples_per_axis[axis];
        let mid = n / 2;
        if k == mid {
            0.0
        } else {
            self.bound[axis] * (k as f64 - mid as f64) / mid as f64
        }
    }

    /// Input vector of a flat input index (row-major, axis 0 slowest).
    pub fn value(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.samples_per_axis[axis];
            out[axis] = self.axis_value(axis, rest % n);
            rest /= n;
        }
        out
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

/// Finite transition system over grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicModel {
    pub grid: GridSpec,
    pub inputs: InputGrid,
    pub h: f64,
    num_inputs: usize,
    offsets: Vec<u32>,
    successors: Vec<u32>,
}

impl SymbolicModel {
    /// Builds a model from a successor oracle. `post` returns `None` for a
    /// blocked pair; returned lists are sorted and deduplicated here.
    pub fn from_post_fn(
        grid: GridSpec,
        inputs: InputGrid,
        h: f64,
        mut post: impl FnMut(usize, &[f64]) -> Option<Vec<usize>>,
    ) -> Result<Self, AbstractionError> {
        let values = inputs.values();
        let num_inputs = values.len();
        let pairs = grid.num_cells() * num_inputs;
        if pairs >= u32::MAX as usize {
            return Err(AbstractionError::TooLarge(pairs));
        }
        let mut offsets = Vec::with_capacity(pairs + 1);
        let mut successors: Vec<u32> = Vec::new();
        offsets.push(0u32);
        for cell in 0..grid.num_cells() {
            for u in &values {
                if let Some(mut list) = post(cell, u) {
                    list.sort_unstable();
                    list.dedup();
                    successors.extend(list.into_iter().map(|c| c as u32));
                }
                if successors.len() >= u32::MAX as usize {
                    return Err(AbstractionError::TooLarge(successors.len()));
                }
                offsets.push(successors.len() as u32);
            }
        }
        Ok(SymbolicModel {
            grid,
            inputs,
            h,
            num_inputs,
            offsets,
            successors,
        })
    }

    /// Builds a model from explicit successor lists indexed `[cell][input]`.
    pub fn from_successor_lists(
        grid: GridSpec,
        inputs: InputGrid,
        h: f64,
        lists: &[Vec<Vec<usize>>],
    ) -> Result<Self, AbstractionError> {
        let num_inputs = inputs.len();
        if lists.len() != grid.num_cells() || lists.iter().any(|r| r.len() != num_inputs) {
            return Err(GeometryError::DimensionMismatch {
                expected: grid.num_cells() * num_inputs,
                got: lists.iter().map(Vec::len).sum(),
            }
            .into());
        }
        let mut offsets = vec![0u32];
        let mut successors = Vec::new();
        for list in lists.iter().flatten() {
            let mut l: Vec<u32> = list.iter().map(|&c| c as u32).collect();
            l.sort_unstable();
            l.dedup();
            successors.extend(l);
            offsets.push(successors.len() as u32);
        }
        Ok(SymbolicModel {
            grid,
            inputs,
            h,
            num_inputs,
            offsets,
            successors,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_pairs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_transitions(&self) -> usize {
        self.successors.len()
    }

    /// Bytes held by the transition table (successor ids plus offsets).
    pub fn transition_bytes(&self) -> usize {
        std::mem::size_of::<u32>() * (self.successors.len() + self.offsets.len())
    }

    pub fn post(&self, cell: usize, input: usize) -> &[u32] {
        let p = cell * self.num_inputs + input;
        &self.successors[self.offsets[p] as usize..self.offsets[p + 1] as usize]
    }

    pub fn input_value(&self, input: usize) -> Vec<f64> {
        self.inputs.value(input)
    }

    /// Copy of the model with one successor removed from one pair.
    pub fn without_successor(&self, cell: usize, input: usize, succ: usize) -> Self {
        let lists: Vec<Vec<Vec<usize>>> = (0..self.num_cells())
            .map(|c| {
                (0..self.num_inputs)
                    .map(|u| {
                        self.post(c, u)
                            .iter()
                            .map(|&s| s as usize)
                            .filter(|&s| !(c == cell && u == input && s == succ))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::from_successor_lists(self.grid.clone(), self.inputs.clone(), self.h, &lists)
            .expect("same shape as the source model")
    }

    /// Predecessor pairs of every cell, CSR-style: for cell `c`,
    /// `pairs[starts[c]..starts[c + 1]]` lists flat pair ids `(p, u)` whose
    /// successor list contains `c`.
    pub fn predecessors(&self) -> (Vec<u32>, Vec<u32>) {
        let n = self.num_cells();
        let mut counts = vec![0u32; n + 1];
        for &s in &self.successors {
            counts[s as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut pairs = vec![0u32; self.successors.len()];
        for p in 0..self.num_pairs() {
            for &s in &self.successors[self.offsets[p] as usize..self.offsets[p + 1] as usize] {
                let slot = &mut fill[s as usize];
                pairs[*slot as usize] = p as u32;
                *slot += 1;
            }
        }
        (starts, pairs)
    }
}

// Shifts within this many cells of an integer are treated as integral.
const SHIFT_SNAP: f64 = 1e-9;

// Per-axis cell offsets `floor(s) ..= ceil(s)` of the shift `s = h u / eta`.
fn shift_range(grid: &GridSpec, u: &[f64], h: f64) -> Vec<(i64, i64)> {
    (0..grid.dim())
        .map(|axis| {
            let mut s = h * u[axis] / grid.eta()[axis];
            if (s - s.round()).abs() < SHIFT_SNAP {
                s = s.round();
            }
            (s.floor() as i64, s.ceil() as i64)
        })
        .collect()
}

// Appends the successor cells of `coords` under precomputed shift ranges;
// false when the translated cell leaves the grid.
fn push_successors(
    grid: &GridSpec,
    coords: &[usize],
    shifts: &[(i64, i64)],
    lo: &mut [usize],
    hi: &mut [usize],
    out: &mut Vec<usize>,
) -> bool {
    let n = grid.dim();
    for axis in 0..n {
        let (a, b) = shifts[axis];
        let l = coords[axis] as i64 + a;
        let u = coords[axis] as i64 + b;
        if l < 0 || u >= grid.counts()[axis] as i64 {
            return false;
        }
        lo[axis] = l as usize;
        hi[axis] = u as usize;
    }
    // odometer over the box lo..=hi, last axis fastest, so flat ids ascend
    let mut cur = lo.to_vec();
    loop {
        out.push(grid.flat_index(&cur));
        let mut axis = n;
        loop {
            if axis == 0 {
                return true;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
        }
    }
}

/// Successor cells of `cell` under the constant input `u` held for `h`, or
/// `None` when the translated cell leaves the grid.
///
/// A half-open cell `[k, k+1)` (in cell units) shifted by `s` covers cells
/// `k + floor(s) ..= k + ceil(s)`; this is exact for half-open binning, so a
/// zero input yields the cell itself.
pub fn integrator_post(grid: &GridSpec, cell: usize, u: &[f64], h: f64) -> Option<Vec<usize>> {
    let n = grid.dim();
    let shifts = shift_range(grid, u, h);
    let mut out = Vec::new();
    let (mut lo, mut hi) = (vec![0; n], vec![0; n]);
    push_successors(
        grid,
        &grid.coords(cell),
        &shifts,
        &mut lo,
        &mut hi,
        &mut out,
    )
    .then_some(out)
}

/// Builds the symbolic model of the VCZ integrator.
pub fn build_model(
    grid: &GridSpec,
    inputs: &InputGrid,
    h: f64,
) -> Result<SymbolicModel, AbstractionError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(AbstractionError::BadHorizon(h));
    }
    if inputs.dim() != grid.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: grid.dim(),
            got: inputs.dim(),
        }
        .into());
    }
    for axis in 0..grid.dim() {
        let shift = h * inputs.bound[axis];
        let width = grid.domain().width(axis);
        if shift >= width {
            return Err(AbstractionError::DegenerateHorizon { axis, shift, width });
        }
    }
    let started = Instant::now();
    let shifts: Vec<Vec<(i64, i64)>> = inputs
        .values()
        .iter()
        .map(|u| shift_range(grid, u, h))
        .collect();
    let n = grid.dim();
    let pairs = grid.num_cells() * shifts.len();
    if pairs >= u32::MAX as usize {
        return Err(AbstractionError::TooLarge(pairs));
    }
    let (mut lo, mut hi) = (vec![0; n], vec![0; n]);
    let mut offsets = Vec::with_capacity(pairs + 1);
    offsets.push(0u32);
    let mut successors = Vec::with_capacity(pairs);
    let mut buf = Vec::new();
    for cell in 0..grid.num_cells() {
        let coords = grid.coords(cell);
        for sh in &shifts {
            buf.clear();
            if push_successors(grid, &coords, sh, &mut lo, &mut hi, &mut buf) {
                successors.extend(buf.iter().map(|&c| c as u32));
            }
            if successors.len() >= u32::MAX as usize {
                return Err(AbstractionError::TooLarge(successors.len()));
            }
            offsets.push(successors.len() as u32);
        }
    }
    let model = SymbolicModel {
        grid: grid.clone(),
        inputs: inputs.clone(),
        h,
        num_inputs: shifts.len(),
        offsets,
        successors,
    };
    log::debug!(
        "built model: {} cells, {} inputs, {} transitions in {:?}",
        model.num_cells(),
        model.num_inputs(),
        model.num_transitions(),
        started.elapsed()
    );
    Ok(model)
}

/// Abstract goal, unsafe and stay cells of one task, as sorted flat indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractTask {
    pub goal: Vec<usize>,
    pub unsafe_cells: Vec<usize>,
    pub stay: Vec<usize>,
}

/// Maps each tightened task onto grid cells.
///
/// Goal and stay cells must lie entirely inside the tightened set; a cell is
/// unsafe as soon as its closed box touches a tightened obstacle, or when some
/// point of the box grown by the inter-sample slack violates a separation.
pub fn abstract_sets(
    seq: &TightenedSequence,
    grid: &GridSpec,
) -> Result<Vec<AbstractTask>, AbstractionError> {
    if !seq.stay().is_subset_of(&grid.covered()) {
        return Err(AbstractionError::GridDoesNotCover);
    }
    let boxes: Vec<IntervalBox> = (0..grid.num_cells()).map(|c| grid.cell_box(c)).collect();
    let stay: Vec<usize> = (0..boxes.len())
        .filter(|&c| boxes[c].is_subset_of(seq.stay()))
        .collect();
    let mut out = Vec::with_capacity(seq.tasks.len());
    for (i, task) in seq.tasks.iter().enumerate() {
        let unsafe_cells: Vec<usize> = (0..boxes.len())
            .filter(|&c| {
                let b = &boxes[c];
                task.obstacles.iter().any(|o| b.intersects(o))
                    || (!task.separations.is_empty() && {
                        let grown = dilate(b, &seq.sample_slack).expect("grid dimension");
                        task.separations
                            .iter()
                            .any(|s| s.min_distance_over(&grown) < s.min_distance)
                    })
            })
            .collect();
        let goal: Vec<usize> = (0..boxes.len())
            .filter(|&c| task.goals.iter().any(|g| boxes[c].is_subset_of(g)))
            .filter(|c| unsafe_cells.binary_search(c).is_err())
            .collect();
        if goal.is_empty() {
            return Err(AbstractionError::AbstractGoalEmpty { task: i });
        }
        out.push(AbstractTask {
            goal,
            unsafe_cells,
            stay: stay.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrrCounterexample {
    pub point: Vec<f64>,
    pub input: usize,
    pub from: usize,
    pub landed: CellId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrrReport {
    pub trials: usize,
    /// Trials whose abstract pair had a non-empty successor list.
    pub checked: usize,
    pub counterexamples: Vec<FrrCounterexample>,
}

impl FrrReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

const MAX_WITNESSES: usize = 16;

/// Samples concrete states and inputs and checks that the quantized concrete
/// successor is listed in the abstract successor set.
pub fn check_frr(model: &SymbolicModel, h: f64, trials: usize, seed: u64) -> FrrReport {
    let grid = &model.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FrrReport {
        trials,
        checked: 0,
        counterexamples: Vec::new(),
    };
    for _ in 0..trials {
        let cell = rng.random_range(0..model.num_cells());
        let input = rng.random_range(0..model.num_inputs());
        let cb = grid.cell_box(cell);
        let x: Vec<f64> = (0..grid.dim())
            .map(|i| cb.lo()[i] + rng.random::<f64>() * grid.eta()[i])
            .collect();
        let from = match grid.quantize(&x) {
            Ok(CellId::Cell(c)) => c,
            _ => continue,
        };
        let post = model.post(from, input);
        if post.is_empty() {
            continue;
        }
        report.checked += 1;
        let u = model.input_value(input);
        let next: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + h * ui).collect();
        let landed = grid.quantize(&next).unwrap_or(CellId::Overflow);
        let ok = matches!(landed, CellId::Cell(c) if post.binary_search(&(c as u32)).is_ok());
        if !ok && report.counterexamples.len() < MAX_WITNESSES {
            report.counterexamples.push(FrrCounterexample {
                point: x,
                input,
                from,
                landed,
            });
        }
    }
    report
}
