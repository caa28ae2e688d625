//! The full pipeline from library primitives, no scenario file: tighten a
//! two-step pendulum task, abstract the zone center, solve, then close the
//! loop around the true plant.
//!
//!     cargo run --release --example custom_pipeline

use vcz::abstraction::{abstract_sets, build_model, InputGrid};
use vcz::confinement::{ConfinementLaw, FunnelParams, PsiConfig};
use vcz::geometry::{GridSpec, IntervalBox};
use vcz::plants::{DisturbanceSpec, Pendulum};
use vcz::sim::{run, ClosedLoop, InitialState};
use vcz::specification::{tighten, RasSequence, RasTask};
use vcz::synthesis::{compute_delta, synthesize_sequence, TaskKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stay = IntervalBox::from_bounds(&[[-0.2, 0.2]])?;
    let task = |lo: f64, hi: f64| -> Result<RasTask, Box<dyn std::error::Error>> {
        Ok(RasTask {
            goals: vec![IntervalBox::from_bounds(&[[lo, hi]])?],
            obstacles: vec![],
            stay: stay.clone(),
            separations: vec![],
        })
    };
    let spec = RasSequence::new(vec![task(0.1, 0.2)?, task(-0.2, -0.1)?])?;

    let (lambda, u_bar, h, eta) = (0.018, vec![0.05], 0.1, vec![0.005]);
    let margin = compute_delta(&u_bar, h, &eta)?;
    let tight = tighten(&spec, lambda, &margin.delta)?;
    println!(
        "delta {:?}; tightened goal 1 {:?}",
        margin.delta, tight.tasks[0].goals[0]
    );

    let grid = GridSpec::new(stay.clone(), eta)?;
    let inputs = InputGrid::new(u_bar, vec![3])?;
    let model = build_model(&grid, &inputs, h)?;
    let sets = abstract_sets(&tight, &grid)?;
    let ctrl = synthesize_sequence(&model, &sets, &[TaskKind::ReachAvoid; 2])?;
    for (i, t) in ctrl.tasks.iter().enumerate() {
        println!(
            "task {i}: {} goal cells, {} winning",
            t.goal.len(),
            t.winning.len()
        );
    }

    let plant = Pendulum::new(1.0 / 9.0, 3.0, 9.81)?;
    let law = ConfinementLaw {
        lambda,
        v_bar: vec![0.1],
        tau_bar: vec![2.0],
        funnel: FunnelParams::new(vec![0.2], vec![0.01], vec![1.0])?,
        psi: PsiConfig::default(),
    };
    let out = run(&ClosedLoop {
        plant: &plant,
        law: &law,
        controller: &ctrl,
        spec: &spec,
        disturbance: &DisturbanceSpec::UniformRandom {
            amplitude: vec![0.5],
            period: 0.05,
            seed: 11,
        },
        dt: 0.002,
        duration: 20.0,
        initial: &InitialState {
            x0: vec![0.0],
            v0: None,
            xi0: Some(vec![0.0025]),
        },
    })?;
    println!(
        "goals reached at {:?} s; monitors {}; specification {}",
        out.report.goal_times,
        if out.report.all_monitors_passed() {
            "pass"
        } else {
            "FAIL"
        },
        if out.report.spec.satisfied {
            "holds"
        } else {
            "VIOLATED"
        }
    );
    Ok(())
}
