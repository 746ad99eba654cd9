//! Outer iteration coupling the flow and temperature subproblems, with
//! under-relaxation and the a-posteriori checks of the analysis: the ball
//! estimate for the temperature correction and the a-priori velocity
//! bound.

use super::flow::{flow_residual, solve_flow};
use super::temperature::{solve_temperature, temperature_residual};
use super::{total_temperature, total_velocity, SolverConfig, System};
use crate::constitutive::{MonotoneConstants, Variant};
use crate::error::{Error, Result};
use crate::fem::assemble::{dissipation_density_l2, integrate_deg5};
use crate::fem::field::{eval_scalar, eval_velocity, norm_1, norm_2, norm_x, FieldVector};
use crate::fem::space::SpaceKind;
use crate::mollify::{regularize, MollifierKernel};

/// The converged discrete solution: total fields, plus the correction
/// parts the estimates refer to.
#[derive(Debug, Clone)]
pub struct SolutionTriple {
    /// Total velocity (lift plus correction).
    pub velocity: FieldVector,
    pub pressure: FieldVector,
    /// Total temperature (lift plus correction).
    pub temperature: FieldVector,
    /// Interior temperature correction (zero on the boundary).
    pub zeta: FieldVector,
}

/// One line of the convergence history.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub flow_residual: f64,
    pub temp_residual: f64,
    pub coupled_residual: f64,
    pub norm_x_v: f64,
    pub norm_1_zeta: f64,
    pub norm_2_zeta: f64,
}

/// Summary of a coupled solve: iteration counts, final residuals, norms
/// and the outcomes of the analytical checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoupledReport {
    pub converged: bool,
    pub outer_iterations: usize,
    /// Total inner Picard steps across all outer iterations.
    pub picard_total: usize,
    pub rows: Vec<HistoryRow>,
    pub flow_residual: f64,
    pub temp_residual: f64,
    pub coupled_residual: f64,
    /// X norm of the velocity correction.
    pub norm_x_v: f64,
    pub norm_1_zeta: f64,
    pub norm_2_zeta: f64,
    pub pressure_l2: f64,
    /// A-priori bound (load dual norm plus lift offset over the coercivity
    /// constant) and whether the correction satisfies it.
    pub apriori_bound_x: f64,
    pub apriori_ok: bool,
    /// Ball radius of the temperature estimate at the last iteration, and
    /// whether every linear solve stayed inside its ball.
    pub ball_radius: f64,
    pub ball_ok: bool,
    pub monotone: MonotoneConstants,
    /// Dual norm of the load functional over the divergence-free space.
    pub load_dual: f64,
}

/// Radius of the ball the temperature correction must stay in,
/// evaluated at the data of one linear temperature solve. The two
/// families differ in how the convection term is estimated:
///
/// ```text
/// divergence form: c = ||lift||_1 + (1/chi) ||tau_lift u||_L2
///                      + (2 eps / chi) c_P ||phi I||_L2
/// advective form:  c = ||lift||_1 + (c_P/chi) ||u . grad tau_lift||_L2
///                      + (2 eps / chi) c_P ||phi I||_L2
/// ```
fn ball_radius(
    sys: &System,
    cfg: &SolverConfig,
    total_u: &FieldVector,
    lagged_temp: &FieldVector,
    moll_u: &FieldVector,
) -> Result<f64> {
    let spaces = &sys.spaces;
    let chi = sys.model.chi;
    let diss_l2 = dissipation_density_l2(
        spaces,
        &sys.model,
        &sys.problem,
        total_u,
        lagged_temp,
        Some(moll_u),
        cfg.truncation,
        cfg.moll_in_viscosity,
    )?;
    let lift_term = norm_1(spaces, &sys.lifts.tau_tilde);
    let diss_term = 2.0 * sys.model.eps_heat / chi * sys.poincare * diss_l2;
    let conv_term = match sys.model.variant {
        Variant::Phi2 => {
            // || tau_lift u ||_L2 / chi.
            let sq = integrate_deg5(spaces, |t, _, qp| {
                let (u, _) = eval_velocity(spaces, total_u, t, qp.bary);
                let (tau, _) = eval_scalar(spaces, &sys.lifts.tau_tilde, t, qp.bary);
                Ok(tau * tau * (u[0] * u[0] + u[1] * u[1]))
            })?;
            sq.max(0.0).sqrt() / chi
        }
        Variant::Phi1 => {
            // c_P || u . grad tau_lift ||_L2 / chi.
            let sq = integrate_deg5(spaces, |t, _, qp| {
                let (u, _) = eval_velocity(spaces, total_u, t, qp.bary);
                let (_, g) = eval_scalar(spaces, &sys.lifts.tau_tilde, t, qp.bary);
                let d = u[0] * g[0] + u[1] * g[1];
                Ok(d * d)
            })?;
            sys.poincare * sq.max(0.0).sqrt() / chi
        }
    };
    Ok(lift_term + conv_term + diss_term)
}

/// Solves the coupled problem with the given smoothing kernel. Starts
/// from the rest state, alternates flow and temperature solves with
/// under-relaxation, and stops when the combined residual (both
/// subproblem residuals at the updated state) falls under the tolerance
/// relative to the load scale.
pub fn solve_coupled(
    sys: &System,
    cfg: &SolverConfig,
    kernel: &MollifierKernel,
) -> Result<(SolutionTriple, CoupledReport)> {
    cfg.validate()?;
    // The subproblem solves must undercut the outer target, or the outer
    // residual stalls at the inner tolerance floor.
    let inner = SolverConfig {
        tol_flow: cfg.tol_flow.min(0.1 * cfg.tol_coupled),
        tol_temp: cfg.tol_temp.min(0.1 * cfg.tol_coupled),
        ..cfg.clone()
    };
    let cfg = &inner;
    let spaces = &sys.spaces;
    let mut v_free = vec![0.0; spaces.velocity.n_free()];
    let mut pressure = vec![0.0; spaces.pressure.ndof];
    let mut zeta = FieldVector::zeros(SpaceKind::TemperatureP1, spaces);

    // One smoothing per outer iteration: start from the lift.
    let mut moll_u = regularize(spaces, &sys.lifts.u_tilde, kernel)?;

    let mut rows: Vec<HistoryRow> = Vec::new();
    let mut picard_total = 0;
    let mut converged = false;
    let mut increases = 0usize;
    let mut ball_ok = true;
    let mut ball = 0.0;
    let target = cfg.tol_coupled * sys.residual_scale;

    for iter in 1..=cfg.max_outer {
        let theta_old = total_temperature(sys, &zeta);
        let moll_visc = cfg.moll_in_viscosity.then_some(&moll_u);

        let flow = solve_flow(sys, cfg, &theta_old, &v_free, &pressure, moll_visc)?;
        picard_total += flow.iterations;
        let th = cfg.theta_relax;
        for (a, b) in v_free.iter_mut().zip(&flow.v_free) {
            *a = (1.0 - th) * *a + th * b;
        }
        for (a, b) in pressure.iter_mut().zip(&flow.pressure) {
            *a = (1.0 - th) * *a + th * b;
        }

        let total_u = total_velocity(sys, &v_free);
        moll_u = regularize(spaces, &total_u, kernel)?;

        let zeta_star = solve_temperature(sys, cfg, &total_u, &theta_old, &moll_u)?;

        // Ball estimate: the fresh linear solution must lie in the ball
        // computed from its own data (a small slack absorbs the weakly
        // enforced divergence constraint).
        ball = ball_radius(sys, cfg, &total_u, &theta_old, &moll_u)?;
        let n1_star = norm_1(spaces, &zeta_star);
        if n1_star > ball + 1e-6 * (1.0 + ball) {
            ball_ok = false;
        }

        for (a, b) in zeta.coeffs.iter_mut().zip(&zeta_star.coeffs) {
            *a = (1.0 - th) * *a + th * b;
        }

        // Residuals at the updated state.
        let theta_new = total_temperature(sys, &zeta);
        let moll_visc = cfg.moll_in_viscosity.then_some(&moll_u);
        let f_res = flow_residual(sys, &theta_new, &v_free, &pressure, moll_visc)?;
        let t_res = temperature_residual(sys, cfg, &total_u, &zeta, &moll_u)?;
        let c_res = f_res.hypot(t_res);

        let correction = FieldVector {
            kind: SpaceKind::VelocityP2,
            coeffs: spaces.velocity.extend(&v_free),
        };
        rows.push(HistoryRow {
            iter,
            flow_residual: f_res,
            temp_residual: t_res,
            coupled_residual: c_res,
            norm_x_v: norm_x(spaces, &correction),
            norm_1_zeta: norm_1(spaces, &zeta),
            norm_2_zeta: norm_2(spaces, &zeta),
        });

        if c_res <= target {
            converged = true;
            break;
        }
        if rows.len() >= 2 {
            let prev = rows[rows.len() - 2].coupled_residual;
            if c_res > prev {
                increases += 1;
                if increases >= 5 {
                    let hist = rows.iter().map(|r| r.coupled_residual).collect();
                    return Err(Error::non_convergence(
                        "outer coupling iteration",
                        iter,
                        hist,
                        Some("the residual keeps growing; reduce solver.theta_relax".into()),
                    ));
                }
            } else {
                increases = 0;
            }
        }
    }

    if !converged {
        let hist = rows.iter().map(|r| r.coupled_residual).collect();
        return Err(Error::non_convergence(
            "outer coupling iteration",
            cfg.max_outer,
            hist,
            Some("raise solver.max_outer or reduce solver.theta_relax".into()),
        ));
    }

    let last = rows.last().expect("converged implies at least one row").clone();

    // A-priori bound on the correction: coercivity against the load dual
    // norm and the lift offset. The Galerkin identity holds up to the
    // final residual, which joins the slack.
    let m = &sys.monotone;
    let apriori_bound_x = (sys.load_dual + m.mu4) / m.mu3;
    let apriori_ok =
        last.norm_x_v <= (sys.load_dual + m.mu4 + last.flow_residual) / m.mu3 + 1e-10;

    let mp = sys.mass_p1.mul_vec(&pressure);
    let pressure_l2 = pressure
        .iter()
        .zip(&mp)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt();

    let report = CoupledReport {
        converged,
        outer_iterations: last.iter,
        picard_total,
        flow_residual: last.flow_residual,
        temp_residual: last.temp_residual,
        coupled_residual: last.coupled_residual,
        norm_x_v: last.norm_x_v,
        norm_1_zeta: last.norm_1_zeta,
        norm_2_zeta: last.norm_2_zeta,
        rows,
        pressure_l2,
        apriori_bound_x,
        apriori_ok,
        ball_radius: ball,
        ball_ok,
        monotone: *m,
        load_dual: sys.load_dual,
    };

    let triple = SolutionTriple {
        velocity: total_velocity(sys, &v_free),
        pressure: FieldVector {
            kind: SpaceKind::PressureP1,
            coeffs: pressure,
        },
        temperature: total_temperature(sys, &zeta),
        zeta,
    };
    Ok((triple, report))
}
