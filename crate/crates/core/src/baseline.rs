//! Full-state symbolic baseline for the pendulum and the cost comparison
//! against the VCZ abstraction.
//!
//! The baseline knows the model (it is the comparator, not a VCZ component):
//! it grids `(angle, velocity)`, integrates each cell center over one sample
//! with RK4 and inflates the result by a growth bound.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    AbstractTask, AbstractionError, FrrCounterexample, FrrReport, InputGrid, SymbolicModel,
};
use crate::geometry::{CellId, GeometryError, GridSpec, IntervalBox};
use crate::plants::{pendulum_accel, Pendulum};
use crate::synthesis::{synthesize_sequence, SynthesisError, TaskKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("the full-state pendulum grid must be 2-D (angle, velocity), got {0}-D")]
    NotPlanar(usize),
    #[error("torque grid must be 1-D, got {0}-D")]
    TorqueDim(usize),
    #[error("sampling time must be positive and substeps nonzero")]
    BadHorizon,
    #[error("repeat count must be at least 1")]
    NoRepeats,
}

/// Componentwise bound on how an interval radius grows over one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub matrix: [[f64; 2]; 2],
}

impl GrowthBound {
    /// `exp(L h)` for the pendulum, with `L = [[0, 1], [k, 0]]` bounding the
    /// Jacobian magnitude and `k = 3g / 2l`.
    pub fn pendulum(p: &Pendulum, h: f64) -> Self {
        let k = 1.5 * p.g.abs() / p.l;
        let matrix = if k == 0.0 {
            [[1.0, h], [0.0, 1.0]]
        } else {
            let w = k.sqrt();
            let (c, s) = ((w * h).cosh(), (w * h).sinh());
            [[c, s / w], [w * s, c]]
        };
        GrowthBound { matrix }
    }

    pub fn apply(&self, r: [f64; 2]) -> [f64; 2] {
        let m = &self.matrix;
        [
            m[0][0] * r[0] + m[0][1] * r[1],
            m[1][0] * r[0] + m[1][1] * r[1],
        ]
    }
}

/// One full-state pendulum abstraction problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub pendulum: Pendulum,
    /// Grid over `(angle, velocity)`.
    pub grid: GridSpec,
    /// Torque samples.
    pub torques: InputGrid,
    pub h: f64,
    /// RK4 steps per sample for center propagation.
    pub substeps: usize,
}

// Absolute pad on the inflated radius covering RK4 truncation error.
const INTEGRATION_PAD: f64 = 1e-9;

/// Exact-model flow of the pendulum over `h` under constant torque.
pub fn pendulum_flow(p: &Pendulum, s: [f64; 2], tau: f64, h: f64, substeps: usize) -> [f64; 2] {
    let dt = h / substeps as f64;
    let f = |s: [f64; 2]| [s[1], pendulum_accel(p, s[0], s[1], tau, 0.0)];
    let mut s = s;
    for _ in 0..substeps {
        let k1 = f(s);
        let k2 = f([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
        let k3 = f([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
        let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1]]);
        for i in 0..2 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

fn fullstate_post(
    cfg: &BaselineConfig,
    gb: &GrowthBound,
    cell: usize,
    u: &[f64],
) -> Option<Vec<usize>> {
    let grid = &cfg.grid;
    let c = grid.cell_center(cell);
    let next = pendulum_flow(&cfg.pendulum, [c[0], c[1]], u[0], cfg.h, cfg.substeps);
    let r = gb.apply([0.5 * grid.eta()[0], 0.5 * grid.eta()[1]]);
    let covered = grid.covered();
    let mut ranges = [(0usize, 0usize); 2];
    for axis in 0..2 {
        let rad = r[axis] * (1.0 + 1e-9) + INTEGRATION_PAD;
        let (lo, hi) = (next[axis] - rad, next[axis] + rad);
        if lo < covered.lo()[axis] || hi >= covered.hi()[axis] {
            return None;
        }
        let eta = grid.eta()[axis];
        let origin = covered.lo()[axis];
        let k_lo = ((lo - origin) / eta).floor() as usize;
        let k_hi = (((hi - origin) / eta).floor() as usize).min(grid.counts()[axis] - 1);
        ranges[axis] = (k_lo, k_hi);
    }
    let mut out = Vec::new();
    for i in ranges[0].0..=ranges[0].1 {
        for j in ranges[1].0..=ranges[1].1 {
            out.push(grid.flat_index(&[i, j]));
        }
    }
    Some(out)
}

/// Full-state symbolic model of the pendulum.
pub fn build_fullstate_model(cfg: &BaselineConfig) -> Result<SymbolicModel, BaselineError> {
    if cfg.grid.dim() != 2 {
        return Err(BaselineError::NotPlanar(cfg.grid.dim()));
    }
    if cfg.torques.dim() != 1 {
        return Err(BaselineError::TorqueDim(cfg.torques.dim()));
    }
    if !(cfg.h > 0.0 && cfg.h.is_finite()) || cfg.substeps == 0 {
        return Err(BaselineError::BadHorizon);
    }
    let gb = GrowthBound::pendulum(&cfg.pendulum, cfg.h);
    Ok(SymbolicModel::from_post_fn(
        cfg.grid.clone(),
        cfg.torques.clone(),
        cfg.h,
        |cell, u| fullstate_post(cfg, &gb, cell, u),
    )?)
}

/// Samples concrete `(state, torque)` pairs, integrates the true dynamics
/// with a finer step and checks the landing cell is listed in `Post`.
pub fn audit_fullstate(
    model: &SymbolicModel,
    cfg: &BaselineConfig,
    trials: usize,
    seed: u64,
) -> FrrReport {
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
        let b = grid.cell_box(cell);
        let s: Vec<f64> = (0..2)
            .map(|i| b.lo()[i] + rng.random::<f64>() * grid.eta()[i])
            .collect();
        let from = match grid.quantize(&s) {
            Ok(CellId::Cell(c)) => c,
            _ => continue,
        };
        let post = model.post(from, input);
        if post.is_empty() {
            continue;
        }
        report.checked += 1;
        let tau = model.input_value(input)[0];
        let next = pendulum_flow(&cfg.pendulum, [s[0], s[1]], tau, cfg.h, 4 * cfg.substeps);
        let landed = grid.quantize(&next).unwrap_or(CellId::Overflow);
        let ok = matches!(landed, CellId::Cell(c) if post.binary_search(&(c as u32)).is_ok());
        if !ok && report.counterexamples.len() < 16 {
            report.counterexamples.push(FrrCounterexample {
                point: s,
                input,
                from,
                landed,
            });
        }
    }
    report
}

/// Invariance of the whole grid domain: the natural full-state counterpart
/// of a VCZ stay task.
pub fn fullstate_invariance_task(grid: &GridSpec) -> AbstractTask {
    AbstractTask {
        goal: vec![],
        unsafe_cells: vec![],
        stay: (0..grid.num_cells()).collect(),
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub abstraction: String,
    pub grid_dim: usize,
    pub cells: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub transition_bytes: usize,
    /// Median wall-clock seconds for model construction plus solving; absent
    /// for rows that were not run.
    pub synthesis_secs: Option<f64>,
    pub domain_cells: Option<usize>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Measured,
    /// Counts extrapolated by grid arithmetic, nothing built.
    Estimated,
    NotRun,
}

impl BenchRow {
    /// Placeholder for a configuration outside desk scale.
    pub fn not_run(name: &str, abstraction: &str, grid_dim: usize) -> Self {
        BenchRow {
            name: name.into(),
            abstraction: abstraction.into(),
            grid_dim,
            cells: 0,
            inputs: 0,
            transitions: 0,
            transition_bytes: 0,
            synthesis_secs: None,
            domain_cells: None,
            status: RowStatus::NotRun,
        }
    }
}

/// Per configuration axis growth of the full-state abstraction over the VCZ
/// one, measured on a 1-D plant where both were built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisFactors {
    pub cells: f64,
    pub inputs: f64,
    pub transitions: f64,
}

pub fn axis_factors(vcz: &BenchRow, full: &BenchRow) -> Option<AxisFactors> {
    if vcz.grid_dim != 1 || vcz.status != RowStatus::Measured || full.status != RowStatus::Measured
    {
        return None;
    }
    Some(AxisFactors {
        cells: full.cells as f64 / vcz.cells as f64,
        inputs: full.inputs as f64 / vcz.inputs as f64,
        transitions: full.transitions as f64 / vcz.transitions as f64,
    })
}

/// Full-state counts for an `n`-D VCZ row, scaling each measured count by
/// the per-axis factor to the power `n`. Bytes follow the CSR layout.
pub fn estimate_fullstate(vcz: &BenchRow, f: &AxisFactors) -> BenchRow {
    let n = vcz.grid_dim as i32;
    let cells = vcz.cells as f64 * f.cells.powi(n);
    let inputs = vcz.inputs as f64 * f.inputs.powi(n);
    let transitions = vcz.transitions as f64 * f.transitions.powi(n);
    let bytes = 4.0 * (transitions + cells * inputs + 1.0);
    BenchRow {
        name: vcz.name.clone(),
        abstraction: "full-state".into(),
        grid_dim: 2 * vcz.grid_dim,
        cells: cells.round() as usize,
        inputs: inputs.round() as usize,
        transitions: transitions.round() as usize,
        transition_bytes: bytes.round() as usize,
        synthesis_secs: None,
        domain_cells: None,
        status: RowStatus::Estimated,
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn timed(
    repeats: usize,
    mut once: impl FnMut() -> Result<(SymbolicModel, usize), BaselineError>,
) -> Result<(SymbolicModel, usize, f64), BaselineError> {
    if repeats == 0 {
        return Err(BaselineError::NoRepeats);
    }
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let started = Instant::now();
        let r = once()?;
        times.push(started.elapsed().as_secs_f64());
        last = Some(r);
    }
    let (model, domain) = last.expect("at least one repeat");
    Ok((model, domain, median(times)))
}

/// Times VCZ synthesis (integrator model plus all tasks) on `grid`.
pub fn bench_vcz(
    name: &str,
    grid: &GridSpec,
    inputs: &InputGrid,
    h: f64,
    tasks: &[AbstractTask],
    kinds: &[TaskKind],
    repeats: usize,
) -> Result<BenchRow, BaselineError> {
    let (model, domain, secs) = timed(repeats, || {
        let model = crate::abstraction::build_model(grid, inputs, h)?;
        let ctrl = synthesize_sequence(&model, tasks, kinds)?;
        let domain = ctrl.tasks[0].winning.len();
        Ok((model, domain))
    })?;
    Ok(row(name, "vcz", &model, secs, domain))
}

/// Times full-state synthesis of the invariance task over the whole grid.
pub fn bench_fullstate(
    name: &str,
    cfg: &BaselineConfig,
    repeats: usize,
) -> Result<BenchRow, BaselineError> {
    let task = fullstate_invariance_task(&cfg.grid);
    let (model, domain, secs) = timed(repeats, || {
        let model = build_fullstate_model(cfg)?;
        let ctrl =
            synthesize_sequence(&model, std::slice::from_ref(&task), &[TaskKind::Invariance])?;
        let domain = ctrl.tasks[0].winning.len();
        Ok((model, domain))
    })?;
    Ok(row(name, "full-state", &model, secs, domain))
}

fn row(name: &str, abstraction: &str, model: &SymbolicModel, secs: f64, domain: usize) -> BenchRow {
    BenchRow {
        name: name.into(),
        abstraction: abstraction.into(),
        grid_dim: model.grid.dim(),
        cells: model.num_cells(),
        inputs: model.num_inputs(),
        transitions: model.num_transitions(),
        transition_bytes: model.transition_bytes(),
        synthesis_secs: Some(secs),
        domain_cells: Some(domain),
        status: RowStatus::Measured,
    }
}

/// Percent reductions of one row against a reference row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub candidate: String,
    pub reference: String,
    pub reference_status: RowStatus,
    pub time_reduction_pct: Option<f64>,
    pub memory_reduction_pct: f64,
    /// Reference transitions per candidate transition.
    pub transition_ratio: f64,
}

pub fn compare(candidate: &BenchRow, reference: &BenchRow) -> Comparison {
    let pct = |a: f64, b: f64| if b > 0.0 { 100.0 * (1.0 - a / b) } else { 0.0 };
    Comparison {
        candidate: format!("{} ({})", candidate.name, candidate.abstraction),
        reference: format!("{} ({})", reference.name, reference.abstraction),
        reference_status: reference.status,
        time_reduction_pct: match (candidate.synthesis_secs, reference.synthesis_secs) {
            (Some(a), Some(b)) => Some(pct(a, b)),
            _ => None,
        },
        memory_reduction_pct: pct(
            candidate.transition_bytes as f64,
            reference.transition_bytes as f64,
        ),
        transition_ratio: if candidate.transitions > 0 {
            reference.transitions as f64 / candidate.transitions as f64
        } else {
            0.0
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
    pub comparisons: Vec<Comparison>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".into(), |v| v.to_string())
}

impl BenchmarkReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| case | abstraction | grid dim | status | cells | inputs | transitions | memory (bytes) | time (s) | domain |\n\
             |---|---|---|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let status = match r.status {
                RowStatus::Measured => "measured",
                RowStatus::Estimated => "estimated",
                RowStatus::NotRun => "not run",
            };
            if r.status == RowStatus::NotRun {
                s += &format!(
                    "| {} | {} | {} | {status} | | | | | | |\n",
                    r.name, r.abstraction, r.grid_dim
                );
                continue;
            }
            s += &format!(
                "| {} | {} | {} | {status} | {} | {} | {} | {} | {} | {} |\n",
                r.name,
                r.abstraction,
                r.grid_dim,
                r.cells,
                r.inputs,
                r.transitions,
                r.transition_bytes,
                opt(r.synthesis_secs.map(|t| format!("{t:.6}"))),
                opt(r.domain_cells)
            );
        }
        if !self.comparisons.is_empty() {
            s += "\n| candidate | reference | time reduction (%) | memory reduction (%) | transition ratio |\n|---|---|---|---|---|\n";
            for c in &self.comparisons {
                let mark = if c.reference_status == RowStatus::Estimated {
                    " (estimated)"
                } else {
                    ""
                };
                s += &format!(
                    "| {} | {}{mark} | {} | {:.2} | {:.1} |\n",
                    c.candidate,
                    c.reference,
                    opt(c.time_reduction_pct.map(|t| format!("{t:.2}"))),
                    c.memory_reduction_pct,
                    c.transition_ratio
                );
            }
        }
        s
    }

    /// Rows only; comparisons are derivable from them.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "case,abstraction,grid_dim,status,cells,inputs,transitions,transition_bytes,synthesis_secs,domain_cells\n",
        );
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.name,
                r.abstraction,
                r.grid_dim,
                serde_json::to_value(r.status)
                    .expect("status")
                    .as_str()
                    .expect("string"),
                r.cells,
                r.inputs,
                r.transitions,
                r.transition_bytes,
                r.synthesis_secs.map_or(String::new(), |t| format!("{t:e}")),
                r.domain_cells.map_or(String::new(), |d| d.to_string()),
            );
        }
        s
    }
}

/// Default desk-scale baseline: the pendulum state box
/// `[-0.2, 0.2] x [-0.1, 0.1]` with square cells of side `eta`.
pub fn pendulum_baseline(pendulum: Pendulum, eta: f64) -> Result<BaselineConfig, BaselineError> {
    let domain = IntervalBox::from_bounds(&[[-0.2, 0.2], [-0.1, 0.1]])?;
    Ok(BaselineConfig {
        pendulum,
        grid: GridSpec::new(domain, vec![eta, eta])?,
        torques: InputGrid::new(vec![0.5], vec![11])?,
        h: 0.05,
        substeps: 5,
    })
}
