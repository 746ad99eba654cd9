//! Damped Picard iteration for the flow subproblem at a frozen
//! temperature.
//!
//! Each step freezes the viscosity at the current iterate, solves the
//! resulting linear Stokes-type saddle system exactly, and moves toward
//! that solution with a step length that is halved until the nonlinear
//! residual strictly decreases. The residual combines the momentum defect
//! in the dual norm of the divergence-free space with the mass defect in
//! the pressure dual norm, and is compared against the load scale.

use super::{total_velocity, SolverConfig, System};
use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_n, NAssembly};
use crate::fem::field::FieldVector;
use crate::linalg::SaddleSystem;

pub struct FlowResult {
    /// Correction on the free velocity dofs.
    pub v_free: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Final combined residual (momentum dual norm and mass defect).
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

struct ResidualParts {
    combined: f64,
    assembly: NAssembly,
}

/// Momentum and mass residual of the nonlinear operator at a state.
fn residual_at(
    sys: &System,
    temp_total: &FieldVector,
    v_free: &[f64],
    pressure: &[f64],
    moll_for_visc: Option<&FieldVector>,
) -> Result<ResidualParts> {
    let total_u = total_velocity(sys, v_free);
    let assembly = assemble_n(
        &sys.spaces,
        &sys.model,
        &sys.problem,
        &total_u,
        temp_total,
        moll_for_visc,
    )?;
    let bt_p = sys.b_full.mul_vec_transposed(pressure);
    let r_full: Vec<f64> = assembly
        .residual
        .iter()
        .zip(&bt_p)
        .zip(&sys.loads)
        .map(|((n, b), f)| n - b - f)
        .collect();
    let r_free = sys.spaces.velocity.restrict(&r_full);
    let momentum = sys.dual_norm_vstar(&r_free)?;
    let mass_defect = sys.b_full.mul_vec(&total_u.coeffs);
    let mass = sys.mass_chol.dual_norm(&mass_defect)?;
    Ok(ResidualParts { combined: momentum.hypot(mass), assembly })
}

/// Combined flow residual at a state, for the outer loop's convergence
/// monitor.
pub fn flow_residual(
    sys: &System,
    temp_total: &FieldVector,
    v_free: &[f64],
    pressure: &[f64],
    moll_for_visc: Option<&FieldVector>,
) -> Result<f64> {
    Ok(residual_at(sys, temp_total, v_free, pressure, moll_for_visc)?.combined)
}

/// Solves the flow subproblem at the given total temperature, starting
/// from `(v_free_init, p_init)`. `moll_for_visc` feeds the smoothed
/// invariant to the viscosity when the scheme asks for it.
pub fn solve_flow(
    sys: &System,
    cfg: &SolverConfig,
    temp_total: &FieldVector,
    v_free_init: &[f64],
    p_init: &[f64],
    moll_for_visc: Option<&FieldVector>,
) -> Result<FlowResult> {
    let mut v_free = v_free_init.to_vec();
    let mut pressure = p_init.to_vec();
    let mut parts = residual_at(sys, temp_total, &v_free, &pressure, moll_for_visc)?;
    let mut history = vec![parts.combined];
    let target = cfg.tol_flow * sys.residual_scale;

    for iter in 0..cfg.max_picard {
        if parts.combined <= target {
            return Ok(FlowResult {
                v_free,
                pressure,
                residual: parts.combined,
                iterations: iter,
                history,
            });
        }

        // Frozen-viscosity step: solve the linear saddle system at the
        // current viscosity field.
        let picard_ff = sys.restrict_velocity(&parts.assembly.picard);
        let saddle = SaddleSystem::new(&picard_ff, &sys.b_free, sys.gauge.as_deref())?;
        let picard_lift = parts.assembly.picard.mul_vec(&sys.lifts.u_tilde.coeffs);
        let f_free: Vec<f64> = {
            let full: Vec<f64> =
                sys.loads.iter().zip(&picard_lift).map(|(f, l)| f - l).collect();
            sys.spaces.velocity.restrict(&full)
        };
        let (v_star, p_star, _) = saddle.solve(&f_free, &sys.g_continuity)?;

        // Backtracking: accept the largest step in {1, 1/2, ...} that
        // strictly decreases the combined residual.
        let mut theta = 1.0;
        let mut accepted = None;
        for _ in 0..=8 {
            let v_trial: Vec<f64> = v_free
                .iter()
                .zip(&v_star)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            let p_trial: Vec<f64> = pressure
                .iter()
                .zip(&p_star)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            let trial = residual_at(sys, temp_total, &v_trial, &p_trial, moll_for_visc)?;
            if trial.combined < parts.combined {
                accepted = Some((v_trial, p_trial, trial));
                break;
            }
            theta *= 0.5;
        }
        match accepted {
            Some((v, p, t)) => {
                v_free = v;
                pressure = p;
                parts = t;
                history.push(parts.combined);
            }
            None => {
                return Err(Error::non_convergence(
                    "flow Picard iteration",
                    iter + 1,
                    history,
                    Some(
                        "the damped step cannot reduce the residual; check the model \
                         admissibility constants or refine the mesh"
                            .into(),
                    ),
                ))
            }
        }
    }

    if parts.combined <= target {
        return Ok(FlowResult {
            v_free,
            pressure,
            residual: parts.combined,
            iterations: cfg.max_picard,
            history,
        });
    }
    Err(Error::non_convergence(
        "flow Picard iteration",
        cfg.max_picard,
        history,
        Some("raise solver.max_picard or loosen solver.tol_flow".into()),
    ))
}
