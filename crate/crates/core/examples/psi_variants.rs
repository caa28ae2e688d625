//! Smooth versus exact saturation: the design constants of each and the
//! closed-loop margins they leave on the pendulum scenario.
//!
//!     cargo run --release --example psi_variants

use std::path::Path;

use vcz::cli::{simulate, synthesize, ScenarioFile};
use vcz::confinement::{psi_constants, PsiConfig, PsiVariant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/pendulum_invariance.toml");
    let base = ScenarioFile::load(&path)?;
    let ctrl = synthesize(&base, None)?.controller;

    println!("variant   a    max slope  max psi/e  |x-xi|/lambda  |e_v|/rho  |tau|/tau_bar");
    for (variant, a) in [
        (PsiVariant::Smooth, 1.2),
        (PsiVariant::Smooth, 1.8),
        (PsiVariant::Smooth, 3.0),
        (PsiVariant::Exact, 1.8),
    ] {
        let psi = PsiConfig { a, variant };
        let (slope, ratio) = psi_constants(&psi, 1e-4);
        let mut s = base.clone();
        s.psi = psi;
        s.sim.duration = 20.0;
        let r = simulate(&s, &ctrl, None)?.report;
        println!(
            "{:<8} {a:.1}  {slope:9.4}  {ratio:9.4}  {:13.3}  {:9.3}  {:13.3}{}",
            format!("{variant:?}"),
            r.max_confinement_ratio,
            r.max_funnel_ratio,
            r.max_torque_ratio,
            if r.all_monitors_passed() {
                ""
            } else {
                "  breach"
            }
        );
    }
    Ok(())
}
