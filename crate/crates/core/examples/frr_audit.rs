//! Sampled soundness checks: the integrator abstraction against exact
//! translation, the full-state pendulum abstraction against RK4, and the
//! declared plant bounds against the true dynamics.
//!
//!     cargo run --release --example frr_audit

use vcz::abstraction::{build_model, check_frr, InputGrid};
use vcz::baseline::{audit_fullstate, build_fullstate_model, pendulum_baseline};
use vcz::confinement::FeasibilityBounds;
use vcz::geometry::{GridSpec, IntervalBox};
use vcz::plants::{audit_bounds, Pendulum, Scara2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(
        IntervalBox::from_bounds(&[[-1.0, 1.0], [-1.0, 1.0]])?,
        vec![0.05, 0.05],
    )?;
    let inputs = InputGrid::new(vec![0.2, 0.2], vec![5, 5])?;
    let model = build_model(&grid, &inputs, 0.3)?;
    let r = check_frr(&model, 0.3, 100_000, 1);
    println!(
        "integrator: {} pairs checked, {} counterexamples",
        r.checked,
        r.counterexamples.len()
    );

    let pendulum = Pendulum::new(1.0 / 9.0, 3.0, 9.81)?;
    let cfg = pendulum_baseline(pendulum, 0.01)?;
    let full = build_fullstate_model(&cfg)?;
    let r = audit_fullstate(&full, &cfg, 10_000, 2);
    println!(
        "full-state pendulum: {} pairs checked, {} counterexamples",
        r.checked,
        r.counterexamples.len()
    );

    let stay = IntervalBox::from_bounds(&[[-0.2, 0.2]])?;
    let b = FeasibilityBounds {
        m_lower: 3.0,
        m_i_lower: 3.0,
        v_m_max: vec![1.0],
        d_bar: vec![0.5],
        v_bar: vec![0.1],
        tau_bar: vec![2.0],
    };
    let a = audit_bounds(&pendulum, &b, &stay, 10_000, 3);
    println!(
        "pendulum bounds: passed {}, worst |M^-1(V+G)| {:.4?}",
        a.passed(),
        a.max_v_m
    );

    let arm = Scara2::new(1.0, 1.0, 0.0)?;
    let stay = IntervalBox::from_bounds(&[[-0.2, 1.0], [-1.0, 0.2]])?;
    let b = FeasibilityBounds {
        m_lower: 1.5,
        m_i_lower: 1.6,
        v_m_max: vec![5.0; 2],
        d_bar: vec![0.2; 2],
        v_bar: vec![0.2; 2],
        tau_bar: vec![10.0; 2],
    };
    let a = audit_bounds(&arm, &b, &stay, 10_000, 4);
    println!("SCARA bounds: passed {}\n{a:#?}", a.passed());
    Ok(())
}
