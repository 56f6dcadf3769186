use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use curvflow::config::{ExperimentSpec, InitialMesh, Problem, ProblemKind};
use curvflow::io::{write_curve_csv, write_curve_vtk, write_off, write_vtk_surface};
use curvflow::runner::{run_eoc_study, run_experiment, RunOptions};
use curvflow::Error;
use curvflow_core::mesh::CurveShape;

const EXIT_FAILURE: u8 = 1;
const EXIT_SPEC: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "curvflow", version, about = "Curve shortening and mean curvature flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme of an experiment spec.
    Run {
        spec: PathBuf,
        /// Run the schemes on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Run the shrinking-circle convergence study of a spec.
    Eoc { spec: PathBuf },
    /// Check a spec without running it.
    Validate { spec: PathBuf },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate an initial mesh; the format follows the extension
    /// (.csv or .vtk for curves, .off or .vtk for surfaces).
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    /// circle, example1, example2, example3, sphere, dumbbell_07, dumbbell_06 or undulating_torus
    shape: String,
    out: PathBuf,
    /// Vertices for curves, subdivision levels for surfaces.
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long)]
    radius: Option<f64>,
    /// Grading ratio of the graded circle.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Spec(_) | Error::Parse { .. } => EXIT_SPEC,
        _ => EXIT_FAILURE,
    }
}

fn mesh_gen(args: GenArgs) -> curvflow::Result<()> {
    let kind = if args.shape == "circle" || CurveShape::from_name(&args.shape, args.ratio).is_ok() {
        ProblemKind::Curve
    } else {
        ProblemKind::Surface
    };
    let problem = Problem {
        kind,
        shape: args.shape,
        resolution: args.resolution,
        radius: args.radius,
        ratio: args.ratio,
        r1: args.r1,
        r2: args.r2,
    };
    let ext = args.out.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let path: &Path = &args.out;
    match (problem.build()?, ext.as_str()) {
        (InitialMesh::Curve(c), "csv") => write_curve_csv(path, &c),
        (InitialMesh::Curve(c), "vtk") => write_curve_vtk(path, &c, &problem.shape),
        (InitialMesh::Surface(s), "off") => write_off(path, &s),
        (InitialMesh::Surface(s), "vtk") => write_vtk_surface(path, &s, &problem.shape),
        (_, ext) => Err(Error::Spec(format!("unsupported output extension `{ext}` for a {kind:?}"))),
    }
}

fn run(cli: Cli) -> curvflow::Result<u8> {
    match cli.command {
        Command::Run { spec, parallel } => {
            let spec = ExperimentSpec::load(&spec)?;
            let manifest = run_experiment(&spec, RunOptions { parallel })?;
            for s in &manifest.schemes {
                let reason = serde_json::to_string(&s.termination)?;
                println!(
                    "{}: {} after {} steps at t = {} ({:.1} s)",
                    s.label,
                    reason.trim_matches('"'),
                    s.steps,
                    s.final_time,
                    s.wall_clock_seconds
                );
                if let Some(m) = &s.message {
                    println!("  {m}");
                }
            }
            Ok(if manifest.any_numerical_failure() { EXIT_NUMERICAL } else { 0 })
        }
        Command::Eoc { spec } => {
            let spec = ExperimentSpec::load(&spec)?;
            let study = run_eoc_study(&spec)?;
            println!("{:>6} {:>12} {:>12} {:>7} {:>12} {:>7}", "N", "tau", "H1 error", "EOC", "L2 error", "EOC");
            for (k, r) in study.rows.iter().enumerate() {
                let order = |t: &Option<curvflow_core::diagnostics::EocTable>| {
                    k.checked_sub(1)
                        .and_then(|j| t.as_ref().map(|t| format!("{:.3}", t.orders[j])))
                        .unwrap_or_default()
                };
                println!(
                    "{:>6} {:>12.4e} {:>12.4e} {:>7} {:>12.4e} {:>7}",
                    r.n,
                    r.tau,
                    r.h1_error,
                    order(&study.h1),
                    r.l2_error,
                    order(&study.l2)
                );
            }
            match study.aborted {
                Some(reason) => {
                    eprintln!("study aborted: {reason}");
                    Ok(EXIT_NUMERICAL)
                }
                None => Ok(0),
            }
        }
        Command::Validate { spec } => {
            let spec = ExperimentSpec::load(&spec)?;
            spec.validate()?;
            println!("{}: ok ({} schemes)", spec.name, spec.schemes.len());
            Ok(0)
        }
        Command::Mesh { command: MeshCommand::Gen(args) } => mesh_gen(args).map(|_| 0),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
