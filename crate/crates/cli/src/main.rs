use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use regsim_core::scenario::{parse_solver_plan, run_scenario, Scenario, StageMode};
use regsim_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Rc,
    Pd,
    Dana,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Single,
    Two,
}

/// Simulates distributed tracking of a regulation signal by a DER fleet.
#[derive(Debug, Parser)]
#[command(name = "regsim", version)]
struct Args {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the solver; `all` runs RC, PD and DANA over thirds of the horizon.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the scenario's `output`, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Communication rounds per instant.
    #[arg(long)]
    budget: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        Error::InfeasibleThroughout => 3,
        _ => 2,
    }
}

fn run(args: Args) -> Result<(), Error> {
    let mut sc = Scenario::load(&args.scenario)?;
    if let Some(s) = args.solver {
        let name = match s {
            SolverArg::Rc => "rc",
            SolverArg::Pd => "pd",
            SolverArg::Dana => "dana",
            SolverArg::All => "all",
        };
        sc.solver_plan = parse_solver_plan(name)?;
    }
    if let Some(s) = args.stage {
        sc.stage = match s {
            StageArg::Single => StageMode::Single,
            StageArg::Two => StageMode::Two,
        };
    }
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(b) = args.budget {
        sc.solver.budget = b;
        sc.solver.validate()?;
    }
    let out = args
        .out
        .or_else(|| sc.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    let start = Instant::now();
    let run = run_scenario(&sc, &out)?;
    print!("{}", run.report());
    eprintln!(
        "wrote {} in {:.1} s",
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
