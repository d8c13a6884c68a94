//! Command-line front end: gain design, stress validation, scenario
//! simulation, and trace reporting.

use affineform::scenario::{self, emit_trace, event_count_table, load_summary};
use affineform::sim::{lyapunov_monitor, run_with_setup, Integrator, ScenarioConfig};
use affineform::stress::{read_matrix_csv, validate_stress, StressTolerances};
use affineform::{NominalFormation, ProtocolMode};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "affineform",
    about = "Affine formation control: stress matrices, Riccati gains, event-triggered simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Riccati designs for a scenario and write the gains file.
    Design(DesignArgs),
    /// Check a stress matrix against a formation's invariants.
    ValidateStress(ValidateArgs),
    /// Run a scenario and write the trace artifacts.
    Simulate(SimulateArgs),
    /// Summarize a finished trace directory.
    Report(ReportArgs),
    /// List the bundled scenario ids.
    Fixtures,
}

#[derive(Args)]
struct DesignArgs {
    /// Bundled scenario id or scenario file path.
    scenario: String,
    /// Output file for the design document (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Formation file path, or a bundled scenario id to borrow its
    /// formation.
    #[arg(long)]
    formation: String,
    /// Dense CSV stress matrix to validate.
    #[arg(long)]
    omega: PathBuf,
    /// Use print-rounding tolerances instead of solver-grade ones.
    #[arg(long)]
    printed: bool,
    /// Override the equilibrium residual tolerance.
    #[arg(long)]
    equilibrium_tol: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Bundled scenario id or scenario file path.
    scenario: String,
    /// Output directory (default: $AFFINEFORM_OUT_DIR/<name> or
    /// ./traces/<name>).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    integrator: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// Keep every k-th grid row in the emitted CSVs.
    #[arg(long)]
    decimation: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `simulate`.
    trace_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(args) => run_design(args),
        Command::ValidateStress(args) => run_validate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Report(args) => run_report(args),
        Command::Fixtures => {
            for id in scenario::fixture_ids() {
                println!("{id}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn load(scenario_ref: &str) -> Result<ScenarioConfig, String> {
    scenario::load_scenario(scenario_ref).map_err(|e| e.to_string())
}

fn run_design(args: DesignArgs) -> Result<(), String> {
    let config = load(&args.scenario)?;
    let setup = config.build().map_err(|e| e.to_string())?;
    match &args.output {
        Some(path) => {
            setup.design.save(path).map_err(|e| e.to_string())?;
            println!("design written to {}", path.display());
        }
        None => {
            let file = affineform::design::DesignFile::from(&setup.design);
            print!("{}", toml::to_string_pretty(&file).expect("design serialization"));
        }
    }
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<(), String> {
    let formation: NominalFormation = match scenario::fixture(&args.formation) {
        Some(config) => config.formation.build().map_err(|e| e.to_string())?,
        None => NominalFormation::load(&args.formation).map_err(|e| e.to_string())?,
    };
    let omega = read_matrix_csv(&args.omega).map_err(|e| e.to_string())?;
    let mut tol = if args.printed {
        StressTolerances::printed_grade()
    } else {
        StressTolerances::solver_grade()
    };
    if let Some(eq) = args.equilibrium_tol {
        tol.equilibrium = eq;
    }
    let report = validate_stress(&omega, &formation, &tol);
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err("stress validation failed".into())
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let mut config = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        config.t_end = t_end;
    }
    if let Some(integrator) = &args.integrator {
        config.integrator = match integrator.as_str() {
            "euler" => Integrator::Euler,
            "rk4" => Integrator::Rk4,
            other => return Err(format!("unknown integrator `{other}` (euler|rk4)")),
        };
    }
    if let Some(mode) = &args.mode {
        config.mode = match mode.as_str() {
            "state" => ProtocolMode::State,
            "output" => ProtocolMode::Output,
            other => return Err(format!("unknown mode `{other}` (state|output)")),
        };
    }
    if let Some(decimation) = args.decimation {
        config.diagnostics.decimation = decimation;
    }
    config.validate().map_err(|e| e.to_string())?;
    let setup = config.build().map_err(|e| e.to_string())?;
    if config.mode == ProtocolMode::Output && !setup.design.output_certified() {
        eprintln!(
            "warning: lambda_min(R1) = {:.4} <= 1/2; the output-feedback convergence \
             certificate does not apply (the run proceeds anyway)",
            setup.design.lambda_min_r1()
        );
    }
    let trace = run_with_setup(&config, &setup).map_err(|e| e.to_string())?;
    let lyapunov = match &config.diagnostics.lyapunov {
        Some(constants) => Some(
            lyapunov_monitor(
                &trace,
                constants,
                &setup.design,
                &setup.stress,
                &config.triggers,
                config.diagnostics.lyapunov_tolerance,
            )
            .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    let out_dir = args.out.unwrap_or_else(|| {
        let base = std::env::var("AFFINEFORM_OUT_DIR").unwrap_or_else(|_| "traces".into());
        PathBuf::from(base).join(&config.name)
    });
    let files = emit_trace(
        &trace,
        &out_dir,
        &config.name,
        config.diagnostics.decimation,
        lyapunov.as_ref(),
    )
    .map_err(|e| e.to_string())?;
    setup
        .stress
        .save_csv(out_dir.join("omega.csv"))
        .map_err(|e| e.to_string())?;
    println!(
        "{}: {} steps, {} events, final formation error {:.3e}",
        config.name,
        trace.steps(),
        trace.events.len(),
        trace.summary.final_formation_error
    );
    println!("trace written to {}", files.summary.parent().unwrap().display());
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), String> {
    let summary = load_summary(&args.trace_dir).map_err(|e| e.to_string())?;
    print!("{}", event_count_table(&summary));
    if let Some(bounded) = summary.lyapunov_bounded {
        println!(
            "bound monitor: {}",
            if bounded { "satisfied" } else { "VIOLATED" }
        );
    }
    if !summary.zeno_suspects.is_empty() {
        println!("density suspects: agents {:?}", summary.zeno_suspects);
    }
    Ok(())
}
