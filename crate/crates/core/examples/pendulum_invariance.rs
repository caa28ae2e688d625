//! Keeps a pendulum inside [-0.2, 0.2] rad under a 0.5 N m sinusoidal
//! disturbance using the shipped scenario, then prints a coarse trace.
//!
//!     cargo run --release --example pendulum_invariance

use std::path::Path;

use vcz::cli::{simulate, synthesize, ScenarioFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/pendulum_invariance.toml");
    let scenario = ScenarioFile::load(&path)?;

    let synth = synthesize(&scenario, None)?;
    let st = &synth.stats;
    println!(
        "grid {} cells x {} inputs, {} transitions, {} winning cells, xi0 = {:?}",
        st.cells, st.inputs, st.transitions, st.winning_cells[0], st.xi0
    );

    let out = simulate(&scenario, &synth.controller, None)?;
    let r = &out.report;
    println!(
        "{} steps: monitors {}, specification {}",
        r.steps,
        if r.all_monitors_passed() {
            "pass"
        } else {
            "FAIL"
        },
        if r.spec.satisfied {
            "holds"
        } else {
            "VIOLATED"
        }
    );
    println!(
        "worst |x - xi|/lambda {:.3}, |e_v|/rho {:.3}, |tau|/tau_bar {:.3}",
        r.max_confinement_ratio, r.max_funnel_ratio, r.max_torque_ratio
    );

    println!("\n    t        x        xi      tau");
    for rec in out.trajectory.records.iter().step_by(2500) {
        println!(
            "{:6.1}  {:+.4}  {:+.4}  {:+.3}",
            rec.t, rec.x[0], rec.xi[0], rec.tau[0]
        );
    }
    Ok(())
}
