//! Smoothing-radius sweep: solves the coupled problem for a shrinking
//! sequence of kernel radii and reports how the solutions approach the
//! smallest-radius one, together with each solution's residual in the
//! unsmoothed temperature operator.

use super::coupled::{solve_coupled, SolutionTriple};
use super::temperature::convection_for;
use super::{SolverConfig, System};
use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_temp_operator, temperature_residual_vec};
use crate::fem::field::{l2_scalar, norm_x};
use crate::mollify::MollifierKernel;

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub radius: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub norm_x_v: f64,
    pub norm_1_zeta: f64,
    /// X-norm distance of this velocity to the smallest-radius solution.
    pub diff_x_to_finest: f64,
    /// L2 distance of this temperature to the smallest-radius solution.
    pub diff_temp_l2_to_finest: f64,
    /// Dual-norm residual of this solution in the temperature equation
    /// with no smoothing (raw invariant, advective convection).
    pub unregularized_residual: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Residual of a solution in the unsmoothed temperature operator,
/// measured in the dual of the interior H1 norm.
fn unregularized_residual(sys: &System, sol: &SolutionTriple) -> Result<f64> {
    let asm = assemble_temp_operator(
        &sys.spaces,
        &sys.model,
        &sys.problem,
        &sol.velocity,
        &sol.temperature,
        convection_for(sys.model.variant),
        None,
        None,
        false,
    )?;
    let r_full = temperature_residual_vec(&asm, &sol.temperature);
    let r_int = sys.spaces.temperature.restrict(&r_full);
    sys.pi_chol.dual_norm(&r_int)
}

/// Runs the coupled solve once per kernel. Non-convergence at one radius
/// becomes an error row (with no solution for that radius); any other
/// failure aborts the sweep. Solutions come back in kernel order.
pub fn run_sweep(
    sys: &System,
    cfg: &SolverConfig,
    kernels: &[MollifierKernel],
) -> Result<(Vec<Option<SolutionTriple>>, SweepReport)> {
    if kernels.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one kernel".into()));
    }
    let mut outcomes: Vec<(f64, std::result::Result<(SolutionTriple, super::CoupledReport), String>)> =
        Vec::new();
    for kernel in kernels {
        match solve_coupled(sys, cfg, kernel) {
            Ok(pair) => outcomes.push((kernel.radius, Ok(pair))),
            Err(err @ Error::NonConvergence(_)) => {
                outcomes.push((kernel.radius, Err(err.to_string())))
            }
            Err(other) => return Err(other),
        }
    }

    // Reference: the converged solution with the smallest radius.
    let finest = outcomes
        .iter()
        .filter_map(|(r, o)| o.as_ref().ok().map(|(sol, _)| (*r, sol)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, sol)| sol.clone());

    let spaces = &sys.spaces;
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut solutions = Vec::with_capacity(outcomes.len());
    for (radius, outcome) in &outcomes {
        match outcome {
            Ok((sol, report)) => {
                solutions.push(Some(sol.clone()));
                let (dx, dt) = match &finest {
                    Some(fine) => {
                        let mut dv = sol.velocity.clone();
                        dv.axpy(-1.0, &fine.velocity);
                        let mut dth = sol.temperature.clone();
                        dth.axpy(-1.0, &fine.temperature);
                        (norm_x(spaces, &dv), l2_scalar(spaces, &dth))
                    }
                    None => (f64::NAN, f64::NAN),
                };
                rows.push(SweepRow {
                    radius: *radius,
                    converged: true,
                    outer_iterations: report.outer_iterations,
                    norm_x_v: report.norm_x_v,
                    norm_1_zeta: report.norm_1_zeta,
                    diff_x_to_finest: dx,
                    diff_temp_l2_to_finest: dt,
                    unregularized_residual: unregularized_residual(sys, sol)?,
                    error: None,
                });
            }
            Err(msg) => {
                solutions.push(None);
                rows.push(SweepRow {
                    radius: *radius,
                    converged: false,
                    outer_iterations: 0,
                    norm_x_v: f64::NAN,
                    norm_1_zeta: f64::NAN,
                    diff_x_to_finest: f64::NAN,
                    diff_temp_l2_to_finest: f64::NAN,
                    unregularized_residual: f64::NAN,
                    error: Some(msg.clone()),
                });
            }
        }
    }
    Ok((solutions, SweepReport { rows }))
}
