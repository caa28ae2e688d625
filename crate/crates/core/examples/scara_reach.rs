//! Drives both joints of a planar two-link arm into a target box, checking
//! the arm's bound audit on the way.
//!
//!     cargo run --release --example scara_reach

use std::path::Path;

use vcz::cli::{feasibility, simulate, synthesize, ScenarioFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/scara_reach.toml");
    let scenario = ScenarioFile::load(&path)?;

    let f = feasibility(&scenario)?;
    println!("torque needed {:?} of {:?}", f.check.rhs, f.check.tau_bar);
    if let Some(me) = &f.most_efficient {
        println!(
            "most efficient lambda {:.4} (using {})",
            me.lambda, f.resolved.lambda
        );
    }
    // The arm's cross-coupled inertia makes some declared bounds optimistic;
    // the audit reports what sampling actually finds.
    println!("bound audit passed: {}", f.audit.passed());

    let synth = synthesize(&scenario, None)?;
    println!(
        "{} cells, {} transitions, {} winning",
        synth.stats.cells, synth.stats.transitions, synth.stats.winning_cells[0]
    );
    let out = simulate(&scenario, &synth.controller, None)?;
    let r = &out.report;
    println!(
        "goal reached at {:?} s, monitors {}, worst |x - xi|/lambda {:.3}",
        r.goal_times[0],
        if r.all_monitors_passed() {
            "pass"
        } else {
            "FAIL"
        },
        r.max_confinement_ratio
    );
    let last = out.trajectory.records.last().expect("nonempty");
    println!("final joints {:.4?}", last.x);
    Ok(())
}
