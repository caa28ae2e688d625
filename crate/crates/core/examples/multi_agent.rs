//! Two planar double integrators swap sides of a walled corridor while
//! keeping a minimum separation.
//!
//!     cargo run --release --example multi_agent

use std::path::Path;

use vcz::cli::{simulate, synthesize, ScenarioFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/multi_agent.toml");
    let scenario = ScenarioFile::load(&path)?;
    let synth = synthesize(&scenario, None)?;
    println!(
        "4-D grid: {} cells, {} inputs, {} transitions, {} winning",
        synth.stats.cells,
        synth.stats.inputs,
        synth.stats.transitions,
        synth.stats.winning_cells[0]
    );

    let out = simulate(&scenario, &synth.controller, None)?;
    let seq = scenario.sequence()?;
    let task = &seq.tasks()[0];
    let min_sep = out
        .trajectory
        .records
        .iter()
        .flat_map(|r| task.separations.iter().map(move |s| s.distance(&r.x)))
        .fold(f64::INFINITY, f64::min);
    println!(
        "targets at {:?} s, minimum separation {min_sep:.3}, monitors {}",
        out.report.goal_times[0],
        if out.report.all_monitors_passed() {
            "pass"
        } else {
            "FAIL"
        }
    );
    for r in out.trajectory.records.iter().step_by(2500) {
        println!(
            "t = {:5.0}  agent 1 ({:5.2}, {:5.2})  agent 2 ({:5.2}, {:5.2})",
            r.t, r.x[0], r.x[1], r.x[2], r.x[3]
        );
    }
    Ok(())
}
