//! Command line driver: subcommand dispatch, artifact emission and exit
//! codes.
//!
//! Every failure path prints one JSON object to stderr (see
//! `output::error_json`) and exits with 2 for input problems, 3 for
//! non-convergence and 4 for internal errors. When the output directory is
//! already known the same JSON also lands there as `error.json`, so a
//! batch driver can post-mortem a run from its artifacts alone.

use crate::config::{OutputOptions, RunConfig};
use crate::constitutive::check::model_condition_check;
use crate::error::{Error, Result};
use crate::fem::{build_spaces, Spaces};
use crate::mollify::MollifierKernel;
use crate::output;
use crate::solver::{
    build_system, estimate_inf_sup, run_sweep, solve_coupled, SolverConfig, System,
};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Admissibility sampling effort: the pre-solve gate takes the structured
/// grid plus this many random draws; the dedicated `check` command uses
/// four times as many. Both are seeded, so reruns see the same samples.
const GATE_SAMPLES: usize = 5_000;
const CHECK_SAMPLES: usize = 20_000;
const SAMPLE_SEED: u64 = 7;

#[derive(Parser)]
#[command(
    name = "erheo",
    version,
    about = "Stationary non-isothermal flow of electrorheological fluids on triangle meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coupled flow/temperature solve and write fields, history
    /// and a summary.
    Solve(RunArgs),
    /// Solve once per smoothing radius and tabulate how the solutions
    /// approach the finest one.
    Sweep(RunArgs),
    /// Sample the admissibility inequalities of the configured material.
    Check(RunArgs),
    /// Estimate the discrete pressure stability constant, on refinements
    /// of the configured mesh when it was generated.
    Infsup(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprint!("{}", output::error_json(&err));
            err.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Check(args) => cmd_check(args),
        Command::Infsup(args) => cmd_infsup(args),
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut rc = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        rc.output.dir = out.clone();
    }
    Ok(rc)
}

/// Rejects a model the solvability conditions do not cover before any
/// assembly happens.
fn gate_model(rc: &RunConfig, extra_samples: usize) -> Result<()> {
    let report = model_condition_check(&rc.model, extra_samples, SAMPLE_SEED)?;
    if !report.passed {
        let failed: Vec<String> = report
            .failures()
            .map(|r| format!("{} (worst margin {:.3e} at {})", r.condition, r.worst_margin, r.worst_args))
            .collect();
        return Err(Error::Config(format!(
            "material model fails its admissibility conditions: {}",
            failed.join("; ")
        )));
    }
    Ok(())
}

/// A config realized into the discrete system, with the run settings that
/// outlive the mesh move.
struct Run {
    spaces: Arc<Spaces>,
    sys: System,
    solver: SolverConfig,
    kernels: Vec<MollifierKernel>,
    output: OutputOptions,
}

fn build(rc: RunConfig) -> Result<Run> {
    let RunConfig { mesh, model, problem, solver, kernels, output, .. } = rc;
    let spaces = Arc::new(build_spaces(Arc::new(mesh)));
    let sys = build_system(spaces.clone(), model, problem, solver.pressure_gauge)?;
    Ok(Run { spaces, sys, solver, kernels, output })
}

/// Writes the error JSON next to the other artifacts when the run got far
/// enough to know where they go.
fn record_failure(dir: &Path, err: &Error) {
    let _ = output::write_text(dir.join("error.json"), &output::error_json(err));
}

fn cmd_solve(args: &RunArgs) -> Result<()> {
    let rc = load(args)?;
    gate_model(&rc, GATE_SAMPLES)?;
    let run = build(rc)?;
    let dir = run.output.dir.clone();

    let (sol, report) = match solve_coupled(&run.sys, &run.solver, &run.kernels[0]) {
        Ok(pair) => pair,
        Err(err) => {
            record_failure(&dir, &err);
            return Err(err);
        }
    };

    if run.output.vtk {
        let vtk =
            output::vtk_string(&run.spaces, &sol.velocity, &sol.pressure, &sol.temperature);
        output::check_vtk(&vtk, &run.spaces)?;
        output::write_text(dir.join("fields.vtk"), &vtk)?;
    }
    if run.output.csv {
        output::write_text(dir.join("history.csv"), &output::history_csv(&report.rows))?;
    }
    if run.output.json {
        let summary = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Internal(format!("summary serialization failed: {e}")))?;
        output::write_text(dir.join("summary.json"), &(summary + "\n"))?;
    }

    println!(
        "converged in {} outer iterations (coupled residual {:.3e}, ||v||_X = {:.6e}, ||zeta||_1 = {:.6e})",
        report.outer_iterations, report.coupled_residual, report.norm_x_v, report.norm_1_zeta
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<()> {
    let rc = load(args)?;
    gate_model(&rc, GATE_SAMPLES)?;
    let run = build(rc)?;
    let dir = run.output.dir.clone();

    let (solutions, report) = match run_sweep(&run.sys, &run.solver, &run.kernels) {
        Ok(pair) => pair,
        Err(err) => {
            record_failure(&dir, &err);
            return Err(err);
        }
    };

    if run.output.vtk {
        for (k, sol) in solutions.iter().enumerate() {
            let Some(sol) = sol else { continue };
            let vtk =
                output::vtk_string(&run.spaces, &sol.velocity, &sol.pressure, &sol.temperature);
            output::check_vtk(&vtk, &run.spaces)?;
            output::write_text(dir.join(format!("fields_k{k}.vtk")), &vtk)?;
        }
    }
    if run.output.csv {
        output::write_text(dir.join("sweep.csv"), &output::sweep_csv(&report))?;
    }
    if run.output.json {
        let summary = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Internal(format!("summary serialization failed: {e}")))?;
        output::write_text(dir.join("summary.json"), &(summary + "\n"))?;
    }

    for row in &report.rows {
        match &row.error {
            None => println!(
                "radius {:.5}: {} outer iterations, diff to finest {:.3e}",
                row.radius, row.outer_iterations, row.diff_x_to_finest
            ),
            Some(msg) => println!("radius {:.5}: {msg}", row.radius),
        }
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_check(args: &RunArgs) -> Result<()> {
    let rc = load(args)?;
    let report = model_condition_check(&rc.model, CHECK_SAMPLES, SAMPLE_SEED)?;

    if rc.output.json {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
        output::write_text(rc.output.dir.join("check.json"), &(text + "\n"))?;
    }
    for row in &report.rows {
        println!(
            "{} {} (worst margin {:.3e})",
            if row.passed { "pass" } else { "FAIL" },
            row.condition,
            row.worst_margin
        );
    }
    println!("{} samples", report.samples);

    if !report.passed {
        return Err(Error::Config(
            "material model fails its admissibility conditions; see check.json".into(),
        ));
    }
    Ok(())
}

fn cmd_infsup(args: &RunArgs) -> Result<()> {
    let rc = load(args)?;

    let mut rows = Vec::new();
    match rc.generator {
        Some(spec) => {
            for (level, factor) in [1usize, 2, 4].into_iter().enumerate() {
                let mesh = spec.refined(factor)?;
                let h = mesh.h_max;
                let beta = estimate_inf_sup(&build_spaces(Arc::new(mesh)))?;
                rows.push((level, h, beta));
            }
        }
        None => {
            let h = rc.mesh.h_max;
            let beta = estimate_inf_sup(&build_spaces(Arc::new(rc.mesh)))?;
            rows.push((0, h, beta));
        }
    }

    if rc.output.csv {
        output::write_text(rc.output.dir.join("infsup.csv"), &output::infsup_csv(&rows))?;
    }
    for (level, h, beta) in &rows {
        println!("level {level}: h_max = {h:.5}, beta1 = {beta:.6}");
    }
    Ok(())
}
