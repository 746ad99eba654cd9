//! Solution drivers: the damped Picard flow solve, the linear temperature
//! solve, the relaxed outer coupling, the inf-sup and smallness estimates
//! and the smoothing-radius sweep.
//!
//! The shared precomputed state lives in [`System`]: lifts, loads, the
//! divergence coupling, the Riesz maps of the velocity, pressure and
//! temperature norms, and the constants of the a-priori estimates. It is
//! built once per mesh/model/problem and reused across solves and sweeps.

pub mod coupled;
pub mod flow;
pub mod infsup;
pub mod smallness;
pub mod sweep;
pub mod temperature;

pub use coupled::{solve_coupled, CoupledReport, HistoryRow, SolutionTriple};
pub use infsup::estimate_inf_sup;
pub use smallness::{smallness_report, SmallnessReport};
pub use sweep::{run_sweep, SweepReport, SweepRow};

use crate::constitutive::{monotone_constants, MaterialModel, MonotoneConstants};
use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_divergence, assemble_loads, assemble_mass_p1, assemble_pi, assemble_strain_product};
use crate::fem::field::{integral_strain_invariant, FieldVector};
use crate::fem::lift::{make_lifts, Lifts};
use crate::fem::space::Spaces;
use crate::linalg::{smallest_pencil_eigenvalue, CooMat, SaddleSystem, SparseChol};
use crate::mesh::BoundaryTag;
use crate::problem::ProblemData;
use std::sync::Arc;

/// How the pressure level is fixed. `MeanZero` appends the zero-mean
/// constraint through a bordered multiplier and is required on a closed
/// (all-Dirichlet) boundary; `Natural` leaves the level to the traction
/// boundary part and is required when one exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureGauge {
    MeanZero,
    Natural,
}

/// Iteration controls. Tolerances are relative to the load scale
/// max(1, ||loads||) in the dual norm of the divergence-free velocity
/// space.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Flow residual target of the inner Picard iteration.
    pub tol_flow: f64,
    /// Acceptance threshold on the linear residual of each temperature
    /// solve.
    pub tol_temp: f64,
    /// Combined residual target of the outer coupling iteration.
    pub tol_coupled: f64,
    pub max_picard: usize,
    pub max_outer: usize,
    /// Relaxation factor of the outer update in (0, 1].
    pub theta_relax: f64,
    pub pressure_gauge: PressureGauge,
    /// Optional (b1, b2) caps for the smooth cutoff of the dissipation
    /// coefficient.
    pub truncation: Option<(f64, f64)>,
    /// Feed the smoothed strain invariant to the viscosity of the flow
    /// operator as well (the isotropic law only; the field-aligned law
    /// always smooths its dissipation argument).
    pub moll_in_viscosity: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_flow: 1e-8,
            tol_temp: 1e-8,
            tol_coupled: 1e-8,
            max_picard: 40,
            max_outer: 80,
            theta_relax: 0.7,
            pressure_gauge: PressureGauge::MeanZero,
            truncation: None,
            moll_in_viscosity: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_flow", self.tol_flow),
            ("tol_temp", self.tol_temp),
            ("tol_coupled", self.tol_coupled),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if self.max_picard == 0 || self.max_outer == 0 {
            return Err(Error::Config("iteration budgets must be at least 1".into()));
        }
        if !(self.theta_relax > 0.0 && self.theta_relax <= 1.0) {
            return Err(Error::Config(format!(
                "solver.theta_relax must lie in (0, 1], got {}",
                self.theta_relax
            )));
        }
        if let Some((b1, b2)) = self.truncation {
            if !(0.0 <= b1 && b1 < b2 && b2.is_finite()) {
                return Err(Error::Config(format!(
                    "solver.truncation must satisfy 0 <= b1 < b2, got ({b1}, {b2})"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed discrete state shared by every solve on one
/// mesh/model/problem triple.
pub struct System {
    pub spaces: Arc<Spaces>,
    pub model: MaterialModel,
    pub problem: ProblemData,
    pub lifts: Lifts,
    /// Load vector over the full velocity dofs.
    pub loads: Vec<f64>,
    /// Divergence coupling over full dofs and its free-column restriction.
    pub b_full: CooMat,
    pub b_free: CooMat,
    /// Strain-product Gram matrix: full, its free restriction, and the
    /// factorization of the latter (the Riesz map of the X norm).
    pub mx_full: CooMat,
    pub mx_free: CooMat,
    pub mx_chol: SparseChol,
    /// Pressure (= P1) mass matrix and its factorization.
    pub mass_p1: CooMat,
    pub mass_chol: SparseChol,
    /// Scalar Laplacian: full, and restricted to interior vertices with
    /// its factorization (the Riesz map of the temperature norm).
    pub pi_full: CooMat,
    pub pi_int: CooMat,
    pub pi_chol: SparseChol,
    /// Interior restriction of the P1 mass (Poincare pencil).
    pub mass_int: CooMat,
    /// Mean-value weights when the mean-zero gauge is active.
    pub gauge: Option<Vec<f64>>,
    /// Riesz saddle of the divergence-free velocity space: dual norms of
    /// load-like functionals.
    pub riesz_v: SaddleSystem,
    /// Continuity right-hand side -B u_lift.
    pub g_continuity: Vec<f64>,
    /// ||loads||in the dual of the divergence-free space.
    pub load_dual: f64,
    /// Residual scale: max(1, load_dual).
    pub residual_scale: f64,
    /// Discrete Poincare constant of the interior temperature space.
    pub poincare: f64,
    /// Integral of the strain invariant of the velocity lift.
    pub i_lift: f64,
    /// Monotonicity/coercivity constants at this model and lift.
    pub monotone: MonotoneConstants,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("model", &self.model)
            .field("velocity_dofs", &(2 * self.spaces.n_p2))
            .field("pressure_dofs", &self.mass_p1.nrows)
            .field("load_dual", &self.load_dual)
            .field("poincare", &self.poincare)
            .finish_non_exhaustive()
    }
}

impl System {
    /// Restricts a full velocity-dof matrix to free rows and columns.
    pub fn restrict_velocity(&self, m: &CooMat) -> CooMat {
        let v = &self.spaces.velocity;
        m.restrict(&v.full_to_free, v.n_free(), &v.full_to_free, v.n_free())
    }

    /// Dual norm (over the discretely divergence-free space) of a
    /// functional given by its free-dof coefficient vector.
    pub fn dual_norm_vstar(&self, r_free: &[f64]) -> Result<f64> {
        let zeros = vec![0.0; self.b_free.nrows];
        let (w, _, _) = self.riesz_v.solve(r_free, &zeros)?;
        let sq: f64 = r_free.iter().zip(&w).map(|(a, b)| a * b).sum();
        Ok(sq.max(0.0).sqrt())
    }
}

/// Builds the shared state. Validates the pressure gauge against the
/// boundary tags: a closed boundary needs the mean-zero gauge, an open
/// one the natural gauge.
pub fn build_system(
    spaces: Arc<Spaces>,
    model: MaterialModel,
    problem: ProblemData,
    gauge: PressureGauge,
) -> Result<System> {
    let has_traction_part = spaces
        .mesh
        .boundary_edges
        .iter()
        .any(|e| e.tag == BoundaryTag::S2);
    match (gauge, has_traction_part) {
        (PressureGauge::MeanZero, true) => {
            return Err(Error::Config(
                "the mean-zero pressure gauge conflicts with a traction boundary part, \
                 which already fixes the pressure level; use the natural gauge"
                    .into(),
            ))
        }
        (PressureGauge::Natural, false) => {
            return Err(Error::Config(
                "a closed Dirichlet boundary leaves the pressure level free; \
                 use the mean-zero gauge"
                    .into(),
            ))
        }
        _ => {}
    }

    let lifts = make_lifts(&spaces, problem.boundary_velocity.as_ref(), problem.boundary_temperature.as_ref())?;
    let loads = assemble_loads(&spaces, &problem);

    let b_full = assemble_divergence(&spaces);
    let v = &spaces.velocity;
    let all_pressure: Vec<usize> = (0..b_full.nrows).collect();
    let b_free = b_full.restrict(&all_pressure, b_full.nrows, &v.full_to_free, v.n_free());

    let mx_full = assemble_strain_product(&spaces);
    let mx_free = mx_full.restrict(&v.full_to_free, v.n_free(), &v.full_to_free, v.n_free());
    let mx_chol = SparseChol::new(&mx_free)?;

    let mass_p1 = assemble_mass_p1(&spaces);
    let mass_chol = SparseChol::new(&mass_p1)?;

    let pi_full = assemble_pi(&spaces);
    let tsp = &spaces.temperature;
    let pi_int = pi_full.restrict(&tsp.full_to_free, tsp.n_free(), &tsp.full_to_free, tsp.n_free());
    let pi_chol = SparseChol::new(&pi_int)?;
    let mass_int =
        mass_p1.restrict(&tsp.full_to_free, tsp.n_free(), &tsp.full_to_free, tsp.n_free());

    let gauge_vec = match gauge {
        PressureGauge::MeanZero => {
            Some(mass_p1.mul_vec(&vec![1.0; mass_p1.ncols]))
        }
        PressureGauge::Natural => None,
    };

    let riesz_v = SaddleSystem::new(&mx_free, &b_free, gauge_vec.as_deref())?;

    let g_continuity: Vec<f64> =
        b_full.mul_vec(&lifts.u_tilde.coeffs).iter().map(|x| -x).collect();

    let loads_free = v.restrict(&loads);
    let zeros_p = vec![0.0; b_free.nrows];
    let (w, _, _) = riesz_v.solve(&loads_free, &zeros_p)?;
    let load_dual = loads_free
        .iter()
        .zip(&w)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt();

    // Discrete Poincare constant: ||z||_L2 <= c ||grad z||_L2 on interior
    // vertices, from the smallest eigenvalue of the Laplacian/mass pencil.
    let lam = smallest_pencil_eigenvalue(
        |b| pi_chol.solve(b),
        |x| Ok(pi_int.mul_vec(x)),
        |x| Ok(mass_int.mul_vec(x)),
        &{
            // A deterministic interior-supported start.
            (0..tsp.n_free())
                .map(|k| {
                    let p = spaces.mesh.nodes[tsp.free[k]];
                    1.0 + p[0] + 0.37 * p[1]
                })
                .collect::<Vec<_>>()
        },
        1e-12,
        200,
    )?;
    if !(lam > 0.0) {
        return Err(Error::Singular(format!(
            "Poincare pencil produced a non-positive eigenvalue {lam:.3e}"
        )));
    }
    let poincare = 1.0 / lam.sqrt();

    let i_lift = integral_strain_invariant(&spaces, &lifts.u_tilde);
    let monotone = monotone_constants(&model, i_lift)?;

    Ok(System {
        spaces,
        model,
        problem,
        lifts,
        loads,
        b_full,
        b_free,
        mx_full,
        mx_free,
        mx_chol,
        mass_p1,
        mass_chol,
        pi_full,
        pi_int,
        pi_chol,
        mass_int,
        gauge: gauge_vec,
        riesz_v,
        g_continuity,
        load_dual,
        residual_scale: load_dual.max(1.0),
        poincare,
        i_lift,
        monotone,
    })
}

/// Total velocity field: lift plus the extension of a free-dof correction.
pub fn total_velocity(sys: &System, v_free: &[f64]) -> FieldVector {
    let full = sys.spaces.velocity.extend(v_free);
    let mut u = sys.lifts.u_tilde.clone();
    for (a, b) in u.coeffs.iter_mut().zip(&full) {
        *a += b;
    }
    u
}

/// Total temperature field: lift plus the extension of interior values.
pub fn total_temperature(sys: &System, zeta_full: &FieldVector) -> FieldVector {
    let mut t = sys.lifts.tau_tilde.clone();
    for (a, b) in t.coeffs.iter_mut().zip(&zeta_full.coeffs) {
        *a += b;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{default_model, Variant};
    use crate::fem::build_spaces;
    use crate::mesh::{generate_rectangle, TagRule};
    use approx::assert_relative_eq;

    fn unit_system() -> System {
        let mesh = generate_rectangle(8, 8, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        build_system(
            spaces,
            default_model(Variant::Phi2).unwrap(),
            ProblemData::default(),
            PressureGauge::MeanZero,
        )
        .unwrap()
    }

    #[test]
    fn poincare_constant_of_the_unit_square() {
        // Exact: 1 / (pi sqrt(2)) ~ 0.2251; the discrete constant is
        // slightly smaller and converges from below.
        let sys = unit_system();
        let exact = 1.0 / (std::f64::consts::PI * 2.0_f64.sqrt());
        assert!(sys.poincare > 0.9 * exact && sys.poincare < exact * 1.01, "{}", sys.poincare);
    }

    #[test]
    fn load_dual_norm_vanishes_for_zero_loads() {
        let sys = unit_system();
        assert_eq!(sys.load_dual, 0.0);
        assert_eq!(sys.residual_scale, 1.0);
    }

    #[test]
    fn gauge_must_match_the_boundary_tags() {
        let mesh = generate_rectangle(4, 4, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let err = build_system(
            spaces,
            default_model(Variant::Phi2).unwrap(),
            ProblemData::default(),
            PressureGauge::Natural,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let mesh = generate_rectangle(
            4,
            4,
            1.0,
            1.0,
            &TagRule {
                left: BoundaryTag::S1,
                right: BoundaryTag::S2,
                bottom: BoundaryTag::S1,
                top: BoundaryTag::S1,
            },
        )
        .unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let err = build_system(
            spaces,
            default_model(Variant::Phi2).unwrap(),
            ProblemData::default(),
            PressureGauge::MeanZero,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn dual_norm_of_strain_functional_matches_primal() {
        // For r = Mx w the dual norm over the divergence-free space is
        // the X norm of the divergence-free part of w. Take w already
        // divergence free: a discrete Stokes eigen-like field is overkill,
        // use the zero-correction sanity: r = 0 gives 0.
        let sys = unit_system();
        let n = sys.b_free.ncols;
        assert_relative_eq!(sys.dual_norm_vstar(&vec![0.0; n]).unwrap(), 0.0);
    }

    #[test]
    fn solver_config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.theta_relax = 0.0;
        assert!(c.validate().is_err());
        c.theta_relax = 0.7;
        c.truncation = Some((2.0, 1.0));
        assert!(c.validate().is_err());
        c.truncation = None;
        c.tol_flow = -1.0;
        assert!(c.validate().is_err());
    }
}
