//! Scenario files and the commands behind the `vcz` binary.
//!
//! A scenario is a TOML document with a required `schema = 1` key. Every
//! random stream derives from its top-level `seed`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    abstract_sets, build_model, AbstractTask, AbstractionError, InputGrid, SymbolicModel,
};
use crate::baseline::{
    axis_factors, bench_fullstate, bench_vcz, compare, estimate_fullstate, BaselineConfig,
    BaselineError, BenchRow, BenchmarkReport, RowStatus,
};
use crate::confinement::{
    check_feasibility, solve_least_conservative, solve_most_efficient, ConfinementError,
    ConfinementLaw, FeasibilityBounds, FeasibilityReport, FunnelParams, PsiConfig, VczParams,
};
use crate::geometry::{GeometryError, GridSpec, IntervalBox};
use crate::plants::{audit_bounds, BoundAudit, DisturbanceSpec, Pendulum, PlantError, PlantSpec};
use crate::sim::{run, ClosedLoop, InitialState, SimError, SimOutcome, SimReport};
use crate::specification::{tighten, RasSequence, RasTask, Separation, SpecError};
use crate::synthesis::{
    compute_delta, refine, synthesize_sequence, SymbolicController, SynthesisError, TaskKind,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Confinement(#[from] ConfinementError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("feasibility conditions fail: torque slack {torque_slack:?}, velocity slack {velocity_slack:?}")]
    Infeasible {
        torque_slack: Vec<f64>,
        velocity_slack: Vec<f64>,
    },
    #[error("no winning cell of task 0 has its center within lambda of x0")]
    NoInitialCenter,
    #[error("controller was synthesized for a different grid or sampling time")]
    ControllerMismatch,
    #[error("controller file: {0}")]
    ControllerFile(String),
    #[error("monitor breach: {0}")]
    Breach(String),
}

impl CliError {
    /// 0 success, 2 infeasible, 3 monitor breach, 4 parse error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Schema(_) => 4,
            CliError::Infeasible { .. }
            | CliError::NoInitialCenter
            | CliError::Spec(SpecError::SpecificationInfeasible { .. })
            | CliError::Confinement(ConfinementError::Infeasible { .. })
            | CliError::Confinement(ConfinementError::LambdaTooSmall { .. })
            | CliError::Synthesis(SynthesisError::InfeasibleTask { .. })
            | CliError::Synthesis(SynthesisError::CompositionError { .. })
            | CliError::Abstraction(AbstractionError::AbstractGoalEmpty { .. })
            | CliError::Baseline(BaselineError::Synthesis(SynthesisError::InfeasibleTask {
                ..
            })) => 2,
            CliError::Breach(_) => 3,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `lambda = 0.018`, `lambda = "auto:most-efficient"` or
/// `lambda = "auto:least-conservative"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Value(f64),
    Auto(String),
}

pub const AUTO_MOST_EFFICIENT: &str = "auto:most-efficient";
pub const AUTO_LEAST_CONSERVATIVE: &str = "auto:least-conservative";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VczSection {
    pub lambda: LambdaChoice,
    /// Required for a numeric `lambda` and for the least-conservative
    /// strategy (which then picks the smallest radius affording it); must be
    /// absent for the most-efficient strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bar: Option<Vec<f64>>,
    pub h: f64,
    pub eta: Vec<f64>,
    /// Odd input samples per axis, default 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_samples: Option<Vec<usize>>,
    /// Grid domain, default the stay set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    #[serde(default = "default_kind")]
    pub kind: TaskKind,
    pub goals: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separations: Vec<Separation>,
}

fn default_kind() -> TaskKind {
    TaskKind::ReachAvoid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub stay: Vec<[f64; 2]>,
    pub tasks: Vec<TaskSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
}

/// Full-state comparator settings for `benchmark` (pendulum plants only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    /// `(angle, velocity)` cell widths; default the VCZ eta on both axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<[f64; 2]>,
    /// Velocity range of the grid; default `[-v_bar, v_bar]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
    pub torque_bound: f64,
    pub torque_samples: usize,
    pub h: f64,
    pub substeps: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            eta: None,
            velocity: None,
            torque_bound: 0.5,
            torque_samples: 11,
            h: 0.05,
            substeps: 5,
        }
    }
}

fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantSpec,
    pub bounds: FeasibilityBounds,
    pub funnel: FunnelParams,
    #[serde(default)]
    pub psi: PsiConfig,
    pub vcz: VczSection,
    pub specification: SpecSection,
    /// A `seed` written here is replaced by one derived from the top-level
    /// seed.
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    pub sim: SimSection,
    pub initial: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
    /// Timing repetitions in `benchmark`; the median is reported.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

/// Deterministic sub-seed for one component.
pub fn derive_seed(seed: u64, component: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng.next_u64()
}

pub const DISTURBANCE_STREAM: u64 = 1;
pub const AUDIT_STREAM: u64 = 2;

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn dim(&self) -> usize {
        self.plant.dim()
    }

    fn validate(&self) -> Result<(), CliError> {
        let schema = |m: String| Err(CliError::Schema(m));
        if self.schema != SCHEMA_VERSION {
            return schema(format!(
                "schema = {} is not supported, expected {SCHEMA_VERSION}",
                self.schema
            ));
        }
        let n = self.dim();
        let lens = [
            ("bounds.tau_bar", self.bounds.tau_bar.len()),
            ("bounds.v_bar", self.bounds.v_bar.len()),
            ("bounds.v_m_max", self.bounds.v_m_max.len()),
            ("bounds.d_bar", self.bounds.d_bar.len()),
            ("funnel.p", self.funnel.p.len()),
            ("funnel.q", self.funnel.q.len()),
            ("funnel.mu", self.funnel.mu.len()),
            ("vcz.eta", self.vcz.eta.len()),
            ("specification.stay", self.specification.stay.len()),
            ("initial.x0", self.initial.x0.len()),
        ];
        for (what, len) in lens {
            if len != n {
                return schema(format!("{what} has {len} entries, the plant has {n} axes"));
            }
        }
        match &self.vcz.lambda {
            LambdaChoice::Value(_) if self.vcz.u_bar.is_none() => {
                return schema("a numeric vcz.lambda needs vcz.u_bar".into())
            }
            LambdaChoice::Auto(s) if s == AUTO_MOST_EFFICIENT && self.vcz.u_bar.is_some() => {
                return schema("auto:most-efficient sets u_bar = v_bar; drop vcz.u_bar".into())
            }
            LambdaChoice::Auto(s) if s == AUTO_LEAST_CONSERVATIVE && self.vcz.u_bar.is_none() => {
                return schema("auto:least-conservative needs the target vcz.u_bar".into())
            }
            LambdaChoice::Auto(s) if s != AUTO_MOST_EFFICIENT && s != AUTO_LEAST_CONSERVATIVE => {
                return schema(format!(
                    "vcz.lambda = {s:?}: expected a number, {AUTO_MOST_EFFICIENT:?} or {AUTO_LEAST_CONSERVATIVE:?}"
                ))
            }
            _ => {}
        }
        if self.specification.tasks.is_empty() {
            return schema("specification.tasks is empty".into());
        }
        if self.repeats == 0 {
            return schema("repeats must be at least 1".into());
        }
        Ok(())
    }

    pub fn sequence(&self) -> Result<RasSequence, CliError> {
        let stay = IntervalBox::from_bounds(&self.specification.stay)?;
        let boxes = |v: &[Vec<[f64; 2]>]| -> Result<Vec<IntervalBox>, GeometryError> {
            v.iter().map(|b| IntervalBox::from_bounds(b)).collect()
        };
        let tasks = self
            .specification
            .tasks
            .iter()
            .map(|t| {
                Ok(RasTask {
                    goals: boxes(&t.goals)?,
                    obstacles: boxes(&t.obstacles)?,
                    stay: stay.clone(),
                    separations: t.separations.clone(),
                })
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Ok(RasSequence::new(tasks)?)
    }

    pub fn kinds(&self) -> Vec<TaskKind> {
        self.specification.tasks.iter().map(|t| t.kind).collect()
    }

    pub fn disturbance(&self) -> DisturbanceSpec {
        self.disturbance
            .with_seed(derive_seed(self.seed, DISTURBANCE_STREAM))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioFile {
            seed,
            ..self.clone()
        }
    }
}

/// The VCZ radius and input bound actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub lambda: f64,
    pub u_bar: Vec<f64>,
    pub strategy: String,
}

pub fn resolve_vcz(s: &ScenarioFile) -> Result<Resolved, CliError> {
    Ok(match &s.vcz.lambda {
        LambdaChoice::Value(l) => Resolved {
            lambda: *l,
            u_bar: s.vcz.u_bar.clone().expect("validated"),
            strategy: "given".into(),
        },
        LambdaChoice::Auto(a) if a == AUTO_MOST_EFFICIENT => {
            let (lambda, u_bar) = solve_most_efficient(&s.bounds, &s.funnel)?;
            Resolved {
                lambda,
                u_bar,
                strategy: a.clone(),
            }
        }
        LambdaChoice::Auto(a) => {
            let lc = solve_least_conservative(&s.bounds, &s.funnel)?;
            let u_bar = s.vcz.u_bar.clone().expect("validated");
            let v_max = s.bounds.v_bar.iter().cloned().fold(0.0, f64::max);
            let u_max = u_bar.iter().cloned().fold(0.0, f64::max);
            Resolved {
                lambda: (u_max + v_max) / lc.slope(),
                u_bar,
                strategy: a.clone(),
            }
        }
    })
}

/// Everything between the scenario and the fixed-point solver.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub resolved: Resolved,
    pub sequence: RasSequence,
    pub delta: Vec<f64>,
    pub grid: GridSpec,
    pub inputs: InputGrid,
    pub h: f64,
    pub sets: Vec<AbstractTask>,
    pub kinds: Vec<TaskKind>,
}

pub fn prepare(s: &ScenarioFile) -> Result<Prepared, CliError> {
    let resolved = resolve_vcz(s)?;
    let sequence = s.sequence()?;
    let margin = compute_delta(&resolved.u_bar, s.vcz.h, &s.vcz.eta)?;
    let tightened = tighten(&sequence, resolved.lambda, &margin.delta)?;
    let domain = match &s.vcz.domain {
        Some(d) => IntervalBox::from_bounds(d)?,
        None => sequence.stay().clone(),
    };
    let grid = GridSpec::new(domain, s.vcz.eta.clone())?;
    let samples = s
        .vcz
        .input_samples
        .clone()
        .unwrap_or_else(|| vec![3; s.dim()]);
    let inputs = InputGrid::new(resolved.u_bar.clone(), samples)?;
    let sets = abstract_sets(&tightened, &grid)?;
    Ok(Prepared {
        resolved,
        sequence,
        delta: margin.delta,
        grid,
        inputs,
        h: s.vcz.h,
        sets,
        kinds: s.kinds(),
    })
}

/// Builds the integrator model, or reuses a cached one with the same grid,
/// inputs and sampling time.
pub fn model_for(p: &Prepared, cache: Option<&Path>) -> Result<SymbolicModel, CliError> {
    if let Some(path) = cache {
        if path.exists() {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            match serde_json::from_str::<SymbolicModel>(&text) {
                Ok(m) if m.grid == p.grid && m.inputs == p.inputs && m.h == p.h => {
                    log::info!("reusing cached model {}", path.display());
                    return Ok(m);
                }
                _ => log::warn!("cached model {} is stale, rebuilding", path.display()),
            }
        }
    }
    let model = build_model(&p.grid, &p.inputs, p.h)?;
    if let Some(path) = cache {
        let json = serde_json::to_string(&model).expect("model serializes");
        fs::write(path, json).map_err(io_err(path))?;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub scenario: String,
    pub lambda: f64,
    pub u_bar: Vec<f64>,
    pub strategy: String,
    pub delta: Vec<f64>,
    pub cells: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub transition_bytes: usize,
    pub winning_cells: Vec<usize>,
    pub goal_cells: Vec<usize>,
    pub xi0: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub controller: SymbolicController,
    pub stats: SynthesisStats,
}

/// The VCZ center to start from: the given `xi0`, or the nearest task-0
/// winning cell center, which must lie strictly within `lambda` of `x0`.
pub fn initial_center(
    s: &ScenarioFile,
    ctrl: &SymbolicController,
    lambda: f64,
) -> Result<Vec<f64>, CliError> {
    let refined = refine(ctrl);
    let xi0 = match &s.initial.xi0 {
        Some(xi) => xi.clone(),
        None => refined
            .nearest_winning_center(0, &s.initial.x0)
            .ok_or(CliError::NoInitialCenter)?,
    };
    let d = xi0
        .iter()
        .zip(&s.initial.x0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if !refined.in_domain(0, &xi0) || d >= lambda {
        return Err(CliError::NoInitialCenter);
    }
    Ok(xi0)
}

pub fn synthesize(s: &ScenarioFile, cache: Option<&Path>) -> Result<Synthesized, CliError> {
    let started = Instant::now();
    let p = prepare(s)?;
    let model = model_for(&p, cache)?;
    let controller = synthesize_sequence(&model, &p.sets, &p.kinds)?;
    let xi0 = initial_center(s, &controller, p.resolved.lambda)?;
    log::info!("synthesized {} in {:?}", s.name, started.elapsed());
    let stats = SynthesisStats {
        scenario: s.name.clone(),
        lambda: p.resolved.lambda,
        u_bar: p.resolved.u_bar.clone(),
        strategy: p.resolved.strategy.clone(),
        delta: p.delta.clone(),
        cells: model.num_cells(),
        inputs: model.num_inputs(),
        transitions: model.num_transitions(),
        transition_bytes: model.transition_bytes(),
        winning_cells: controller.tasks.iter().map(|t| t.winning.len()).collect(),
        goal_cells: controller.tasks.iter().map(|t| t.goal.len()).collect(),
        xi0,
    };
    Ok(Synthesized { controller, stats })
}

pub fn law(s: &ScenarioFile, lambda: f64) -> ConfinementLaw {
    ConfinementLaw {
        lambda,
        v_bar: s.bounds.v_bar.clone(),
        tau_bar: s.bounds.tau_bar.clone(),
        funnel: s.funnel.clone(),
        psi: s.psi,
    }
}

/// Runs the closed loop of a scenario under a synthesized controller.
pub fn simulate(
    s: &ScenarioFile,
    controller: &SymbolicController,
    dt: Option<f64>,
) -> Result<SimOutcome, CliError> {
    let p = prepare(s)?;
    if controller.grid != p.grid || controller.h != p.h || controller.inputs != p.inputs {
        return Err(CliError::ControllerMismatch);
    }
    let plant = s.plant.build()?;
    let disturbance = s.disturbance();
    disturbance.validate(s.dim())?;
    let law = law(s, p.resolved.lambda);
    let xi0 = initial_center(s, controller, p.resolved.lambda)?;
    let initial = InitialState {
        xi0: Some(xi0),
        ..s.initial.clone()
    };
    Ok(run(&ClosedLoop {
        plant: plant.as_ref(),
        law: &law,
        controller,
        spec: &p.sequence,
        disturbance: &disturbance,
        dt: dt.unwrap_or(s.sim.dt),
        duration: s.sim.duration,
        initial: &initial,
    })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub lambda: f64,
    pub u_bar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutput {
    pub scenario: String,
    pub resolved: Resolved,
    pub check: FeasibilityReport,
    pub most_efficient: Option<StrategyReport>,
    pub least_conservative_lambda_min: Option<f64>,
    /// `u_max(lambda) = min(v_bar, slope * lambda - v_bar)`
    pub least_conservative_slope: Option<f64>,
    pub audit: BoundAudit,
    pub pass: bool,
}

pub fn feasibility(s: &ScenarioFile) -> Result<FeasibilityOutput, CliError> {
    let resolved = resolve_vcz(s)?;
    let check = check_feasibility(
        &s.bounds,
        &s.funnel,
        &VczParams {
            lambda: resolved.lambda,
            u_bar: resolved.u_bar.clone(),
            h: s.vcz.h,
            eta: s.vcz.eta.clone(),
        },
    )?;
    let me = solve_most_efficient(&s.bounds, &s.funnel).ok();
    let lc = solve_least_conservative(&s.bounds, &s.funnel).ok();
    let plant = s.plant.build()?;
    let stay = IntervalBox::from_bounds(&s.specification.stay)?;
    let audit = audit_bounds(
        plant.as_ref(),
        &s.bounds,
        &stay,
        10_000,
        derive_seed(s.seed, AUDIT_STREAM),
    );
    Ok(FeasibilityOutput {
        scenario: s.name.clone(),
        pass: check.pass,
        resolved,
        check,
        most_efficient: me.map(|(lambda, u_bar)| StrategyReport { lambda, u_bar }),
        least_conservative_lambda_min: lc.as_ref().map(|l| l.lambda_min),
        least_conservative_slope: lc.as_ref().map(|l| l.slope()),
        audit,
    })
}

/// Full-state comparator of a pendulum scenario.
pub fn baseline_config(s: &ScenarioFile) -> Result<Option<BaselineConfig>, CliError> {
    let PlantSpec::Pendulum { m, l, g } = s.plant else {
        return Ok(None);
    };
    let b = s.baseline.clone().unwrap_or_default();
    let eta = b.eta.unwrap_or([s.vcz.eta[0], s.vcz.eta[0]]);
    let velocity = b
        .velocity
        .unwrap_or([-s.bounds.v_bar[0], s.bounds.v_bar[0]]);
    let stay = s.specification.stay[0];
    let domain = IntervalBox::from_bounds(&[stay, velocity])?;
    Ok(Some(BaselineConfig {
        pendulum: Pendulum::new(m, l, g)?,
        grid: GridSpec::new(domain, eta.to_vec())?,
        torques: InputGrid::new(vec![b.torque_bound], vec![b.torque_samples])?,
        h: b.h,
        substeps: b.substeps,
    }))
}

/// VCZ rows for every scenario and full-state rows next to them: measured
/// for pendulum scenarios, extrapolated from the first measured pendulum pair
/// for higher dimensions, "not run" when no pair exists. Each VCZ row is
/// compared with its own full-state row.
pub fn benchmark(scenarios: &[ScenarioFile]) -> Result<BenchmarkReport, CliError> {
    let mut pairs: Vec<(BenchRow, Option<BenchRow>)> = Vec::new();
    for s in scenarios {
        let p = prepare(s)?;
        let vcz = bench_vcz(
            &s.name, &p.grid, &p.inputs, p.h, &p.sets, &p.kinds, s.repeats,
        )?;
        let full = match baseline_config(s)? {
            Some(cfg) => Some(bench_fullstate(&s.name, &cfg, s.repeats)?),
            None => None,
        };
        pairs.push((vcz, full));
    }
    let factors = pairs
        .iter()
        .find_map(|(v, f)| f.as_ref().and_then(|f| axis_factors(v, f)));
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for (vcz, full) in pairs {
        let full = full.unwrap_or_else(|| match &factors {
            Some(f) => estimate_fullstate(&vcz, f),
            None => BenchRow::not_run(&vcz.name, "full-state", 2 * vcz.grid_dim),
        });
        if full.status != RowStatus::NotRun {
            comparisons.push(compare(&vcz, &full));
        }
        rows.push(vcz);
        rows.push(full);
    }
    Ok(BenchmarkReport { rows, comparisons })
}

fn series_csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s += &line.join(",");
        s.push('\n');
    }
    s
}

fn axis_header(names: &[&str], n: usize) -> String {
    let mut h = vec!["t".to_string()];
    for name in names {
        for i in 0..n {
            h.push(format!("{name}{i}"));
        }
    }
    h.join(",")
}

/// Plot data files: (angle, center), (velocity, center input), torque.
pub fn plot_files(out: &SimOutcome) -> Vec<(&'static str, String)> {
    let recs = &out.trajectory.records;
    let n = recs.first().map_or(0, |r| r.x.len());
    let cat = |parts: &[&[f64]], t: f64| {
        let mut v = vec![t];
        for p in parts {
            v.extend_from_slice(p);
        }
        v
    };
    vec![
        (
            "plot_position.csv",
            series_csv(
                &axis_header(&["x", "xi"], n),
                recs.iter().map(|r| cat(&[&r.x, &r.xi], r.t)),
            ),
        ),
        (
            "plot_velocity.csv",
            series_csv(
                &axis_header(&["v", "u"], n),
                recs.iter().map(|r| cat(&[&r.v, &r.u], r.t)),
            ),
        ),
        (
            "plot_torque.csv",
            series_csv(
                &axis_header(&["tau"], n),
                recs.iter().map(|r| cat(&[&r.tau], r.t)),
            ),
        ),
    ]
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

pub fn cmd_feasibility(scenario: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let s = ScenarioFile::load(scenario)?;
    let report = feasibility(&s)?;
    let text = json(&report);
    if let Some(path) = out {
        write(path, &text)?;
    }
    if !report.pass {
        print!("{text}");
        return Err(CliError::Infeasible {
            torque_slack: report.check.torque_slack,
            velocity_slack: report.check.velocity_slack,
        });
    }
    Ok(text)
}

/// Writes the controller JSON to `out` and returns the stats JSON.
pub fn cmd_synthesize(
    scenario: &Path,
    out: &Path,
    cache: Option<&Path>,
    seed: Option<u64>,
) -> Result<String, CliError> {
    let mut s = ScenarioFile::load(scenario)?;
    if let Some(seed) = seed {
        s = s.with_seed(seed);
    }
    let r = synthesize(&s, cache)?;
    write(out, &r.controller.to_json())?;
    Ok(json(&r.stats))
}

/// Writes `trajectory.csv`, `report.json` and the plot files into `out_dir`.
/// A breach still writes everything before failing.
pub fn cmd_simulate(
    scenario: &Path,
    controller: Option<&Path>,
    out_dir: &Path,
    cache: Option<&Path>,
    seed: Option<u64>,
    dt: Option<f64>,
) -> Result<SimReport, CliError> {
    let mut s = ScenarioFile::load(scenario)?;
    if let Some(seed) = seed {
        s = s.with_seed(seed);
    }
    let ctrl = match controller {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            SymbolicController::from_json(&text)
                .map_err(|e| CliError::ControllerFile(e.to_string()))?
        }
        None => synthesize(&s, cache)?.controller,
    };
    let out = simulate(&s, &ctrl, dt)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write(&out_dir.join("trajectory.csv"), &out.trajectory.to_csv())?;
    write(&out_dir.join("report.json"), &json(&out.report))?;
    for (name, text) in plot_files(&out) {
        write(&out_dir.join(name), &text)?;
    }
    if let Some(b) = &out.report.breach {
        return Err(CliError::Breach(format!(
            "{:?} at t = {} (step {})",
            b.kind, b.t, b.step
        )));
    }
    if !out.report.spec.satisfied {
        return Err(CliError::Breach(
            "the original specification is violated".into(),
        ));
    }
    Ok(out.report)
}

/// Writes `benchmark.md` and `benchmark.csv` into `out_dir` when given and
/// returns the Markdown table.
pub fn cmd_benchmark(scenarios: &[PathBuf], out_dir: Option<&Path>) -> Result<String, CliError> {
    let files = scenarios
        .iter()
        .map(|p| ScenarioFile::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let report = benchmark(&files)?;
    let md = report.to_markdown();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write(&dir.join("benchmark.md"), &md)?;
        write(&dir.join("benchmark.csv"), &report.to_csv())?;
    }
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"
schema = 1
name = "pendulum"
seed = 7

[plant]
name = "pendulum"
m = 0.1111111111111111
l = 3.0
g = 9.81

[bounds]
m_lower = 3.0
m_i_lower = 3.0
v_m_max = [1.0]
d_bar = [0.5]
v_bar = [0.1]
tau_bar = [2.0]

[funnel]
p = [0.2]
q = [0.01]
mu = [1.0]

[vcz]
lambda = 0.018
u_bar = [0.1]
h = 0.1
eta = [0.005]

[specification]
stay = [[-0.2, 0.2]]

[[specification.tasks]]
kind = "invariance"
goals = [[[-0.2, 0.2]]]

[disturbance]
kind = "uniform-random"
amplitude = [0.5]
period = 0.05

[sim]
dt = 0.002
duration = 2.0

[initial]
x0 = [0.05]
"#;

    fn parse(s: &str) -> ScenarioFile {
        ScenarioFile::parse(s).unwrap()
    }

    #[test]
    fn round_trip_is_idempotent() {
        let a = parse(PENDULUM);
        let text = a.to_toml();
        let b = parse(&text);
        assert_eq!(a, b);
        assert_eq!(text, b.to_toml());
    }

    #[test]
    fn unknown_keys_and_versions_are_parse_errors() {
        let e =
            ScenarioFile::parse(&PENDULUM.replace("seed = 7", "seed = 7\ncolour = 1")).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        let e = ScenarioFile::parse(&PENDULUM.replace("schema = 1", "schema = 2")).unwrap_err();
        assert!(matches!(e, CliError::Schema(_)));
        assert_eq!(e.exit_code(), 4);
        let e = ScenarioFile::parse(&PENDULUM.replace("eta = [0.005]", "eta = [0.005, 0.1]"))
            .unwrap_err();
        assert!(matches!(e, CliError::Schema(_)));
        let e = ScenarioFile::parse(&PENDULUM.replace("lambda = 0.018", "lambda = \"auto:fast\""))
            .unwrap_err();
        assert!(matches!(e, CliError::Schema(_)));
    }

    #[test]
    fn feasibility_reports_both_strategies() {
        let r = feasibility(&parse(PENDULUM)).unwrap();
        assert!(r.pass);
        let me = r.most_efficient.unwrap();
        assert!(r.least_conservative_lambda_min.unwrap() < me.lambda);
        let wide = parse(&PENDULUM.replace("p = [0.2]", "p = [1.0]"));
        let r2 = feasibility(&wide).unwrap();
        assert!((r2.most_efficient.unwrap().lambda - 0.0179).abs() < 1e-3);
        assert!((r2.check.rhs[0] - 1.997).abs() < 1e-3);
        // a narrower funnel leaves more torque for tracking
        assert!(me.lambda < 0.0179);
        assert!(r.audit.passed());
        let low = parse(&PENDULUM.replace("tau_bar = [2.0]", "tau_bar = [1.2]"));
        let r = feasibility(&low).unwrap();
        assert!(!r.pass);
        assert!(r.check.torque_slack[0] < 0.0);
    }

    #[test]
    fn auto_strategies_resolve() {
        let me = parse(&PENDULUM.replace(
            "lambda = 0.018\nu_bar = [0.1]",
            "lambda = \"auto:most-efficient\"",
        ));
        let r = resolve_vcz(&me).unwrap();
        assert_eq!(r.u_bar, vec![0.1]);
        assert_eq!(r.strategy, AUTO_MOST_EFFICIENT);
        let lc = parse(&PENDULUM.replace(
            "lambda = 0.018\nu_bar = [0.1]",
            "lambda = \"auto:least-conservative\"\nu_bar = [0.05]",
        ));
        let r = resolve_vcz(&lc).unwrap();
        let check = feasibility(&lc).unwrap();
        assert!(check.pass);
        assert!(check.check.torque_slack[0].abs() < 1e-9);
        assert!(r.lambda < 0.018);
    }

    #[test]
    fn synthesis_is_deterministic_and_cached() {
        let s = parse(PENDULUM);
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("model.json");
        let a = synthesize(&s, Some(&cache)).unwrap();
        assert!(cache.exists());
        let b = synthesize(&s, Some(&cache)).unwrap();
        let c = synthesize(&s, None).unwrap();
        assert_eq!(a.controller.to_json(), b.controller.to_json());
        assert_eq!(a.controller.to_json(), c.controller.to_json());
        assert_eq!(a.stats.cells, 80);
        assert!(a.stats.winning_cells[0] > 0);
    }

    #[test]
    fn simulation_uses_the_derived_seed() {
        let s = parse(PENDULUM);
        let ctrl = synthesize(&s, None).unwrap().controller;
        let a = simulate(&s, &ctrl, None).unwrap();
        let b = simulate(&s.with_seed(8), &ctrl, None).unwrap();
        assert!(a.report.all_monitors_passed(), "{:?}", a.report.breach);
        assert_ne!(a.trajectory, b.trajectory);
        assert_eq!(a.trajectory, simulate(&s, &ctrl, None).unwrap().trajectory);
        let files = plot_files(&a);
        assert_eq!(files.len(), 3);
        assert!(files[0].1.starts_with("t,x0,xi0\n"));
        assert_eq!(files[2].1.lines().count(), a.trajectory.records.len() + 1);
    }

    #[test]
    fn mismatched_controller_is_rejected() {
        let s = parse(PENDULUM);
        let ctrl = synthesize(&s, None).unwrap().controller;
        let other = parse(&PENDULUM.replace("eta = [0.005]", "eta = [0.004]"));
        assert!(matches!(
            simulate(&other, &ctrl, None),
            Err(CliError::ControllerMismatch)
        ));
    }

    #[test]
    fn obstructed_goal_is_infeasible() {
        let s = parse(&PENDULUM.replace(
            "kind = \"invariance\"\ngoals = [[[-0.2, 0.2]]]",
            "goals = [[[0.19, 0.2]]]",
        ));
        let e = synthesize(&s, None).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }

    #[test]
    fn derived_seeds_differ_per_component() {
        assert_ne!(
            derive_seed(7, DISTURBANCE_STREAM),
            derive_seed(7, AUDIT_STREAM)
        );
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }
}
