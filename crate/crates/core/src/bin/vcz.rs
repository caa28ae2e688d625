use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vcz::cli::{cmd_benchmark, cmd_feasibility, cmd_simulate, cmd_synthesize, CliError};

#[derive(Parser)]
#[command(
    name = "vcz",
    version,
    about = "VCZ symbolic control: feasibility, synthesis, simulation, benchmark"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the feasibility inequalities and solve for (lambda, u_bar).
    Feasibility {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize the symbolic controller and write it as JSON.
    Synthesize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model cache file, reused when grid, inputs and h match.
        #[arg(long)]
        cache_model: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run the closed loop and write trajectory, report and plot data.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Controller JSON from `synthesize`; synthesized in-process if absent.
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cache_model: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Compare VCZ synthesis cost with the full-state baseline.
    Benchmark {
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory for benchmark.md and benchmark.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Feasibility { scenario, out } => {
            print!("{}", cmd_feasibility(&scenario, out.as_deref())?);
        }
        Command::Synthesize {
            scenario,
            out,
            cache_model,
            seed_override,
        } => {
            print!(
                "{}",
                cmd_synthesize(&scenario, &out, cache_model.as_deref(), seed_override)?
            );
        }
        Command::Simulate {
            scenario,
            controller,
            out,
            cache_model,
            seed_override,
            dt,
        } => {
            let report = cmd_simulate(
                &scenario,
                controller.as_deref(),
                &out,
                cache_model.as_deref(),
                seed_override,
                dt,
            )?;
            println!(
                "{} steps, max |x - xi| / lambda = {:.4}, goals reached at {:?}",
                report.steps, report.max_confinement_ratio, report.goal_times
            );
        }
        Command::Benchmark { scenarios, out } => {
            print!("{}", cmd_benchmark(&scenarios, out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VCZ_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
