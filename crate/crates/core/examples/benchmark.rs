//! VCZ versus full-state abstraction cost for the shipped scenarios. Pass
//! scenario paths to override the default set.
//!
//!     cargo run --release --example benchmark

use std::path::{Path, PathBuf};

use vcz::cli::cmd_benchmark;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut files: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if files.is_empty() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        files = [
            "pendulum_invariance.toml",
            "scara_reach.toml",
            "multi_agent.toml",
        ]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    }
    print!("{}", cmd_benchmark(&files, None)?);
    Ok(())
}
