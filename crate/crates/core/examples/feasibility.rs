//! Checks the torque and velocity conditions for a pendulum and prints the
//! two parameter strategies, then sweeps the radius to show how much input
//! bandwidth each radius buys.
//!
//!     cargo run --example feasibility

use vcz::confinement::{
    check_feasibility, solve_least_conservative, solve_most_efficient, FeasibilityBounds,
    FunnelParams, VczParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bounds = FeasibilityBounds {
        m_lower: 3.0,
        m_i_lower: 3.0,
        v_m_max: vec![1.0],
        d_bar: vec![0.5],
        v_bar: vec![0.1],
        tau_bar: vec![2.0],
    };
    let funnel = FunnelParams::new(vec![1.0], vec![0.01], vec![1.0])?;

    let report = check_feasibility(
        &bounds,
        &funnel,
        &VczParams {
            lambda: 0.018,
            u_bar: vec![0.1],
            h: 0.1,
            eta: vec![0.005],
        },
    )?;
    println!("lambda = 0.018, u_bar = 0.1");
    println!("  a_r bound      {:.4}", report.a_r);
    println!(
        "  torque needed  {:.4} of {}",
        report.rhs[0], report.tau_bar[0]
    );
    println!("  slack          {:+.4}", report.torque_slack[0]);
    println!("  feasible       {}", report.pass);

    let (lambda, u_bar) = solve_most_efficient(&bounds, &funnel)?;
    println!("\nmost efficient:     lambda = {lambda:.5}, u_bar = {u_bar:?}");
    let lc = solve_least_conservative(&bounds, &funnel)?;
    println!(
        "least conservative: lambda_min = {:.5}, u_max(lambda) = min(0.1, {:.3} lambda - 0.1)",
        lc.lambda_min,
        lc.slope()
    );

    println!("\n  lambda    u_max");
    for k in 0..=8 {
        let l = lc.lambda_min + k as f64 * 0.00125;
        match lc.u_bar(l) {
            Ok(u) => println!("  {l:.5}  {u:.4}"),
            Err(e) => println!("  {l:.5}  ({e})"),
        }
    }

    let weak = FeasibilityBounds {
        tau_bar: vec![1.5],
        ..bounds
    };
    let r = check_feasibility(
        &weak,
        &funnel,
        &VczParams {
            lambda: 0.018,
            u_bar: vec![0.1],
            h: 0.1,
            eta: vec![0.005],
        },
    )?;
    println!(
        "\nwith tau_bar = 1.5: feasible = {}, slack {:+.4}",
        r.pass, r.torque_slack[0]
    );
    Ok(())
}
