//! Linear temperature solve at a frozen velocity and lagged viscosity
//! temperature.
//!
//! The operator acts on the total temperature (lift plus interior
//! correction); the solve eliminates the boundary vertices through the
//! lift and inverts the interior block directly.

use super::{total_temperature, SolverConfig, System};
use crate::constitutive::Variant;
use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_temp_operator, ConvectionForm, TempAssembly};
use crate::fem::field::FieldVector;
use crate::fem::space::SpaceKind;
use crate::linalg::SparseLu;

/// Convection form the scheme uses for a model family: the smoothed
/// problem is posed in divergence form, the field-aligned one tests the
/// advective derivative.
pub fn convection_for(variant: Variant) -> ConvectionForm {
    match variant {
        Variant::Phi2 => ConvectionForm::Divergence,
        Variant::Phi1 => ConvectionForm::Advective,
    }
}

/// Assembles the temperature operator the scheme solves: smoothed
/// dissipation multiplier, family-specific convection form, optional
/// truncation of the dissipation coefficient.
pub fn scheme_temp_operator(
    sys: &System,
    cfg: &SolverConfig,
    total_u: &FieldVector,
    lagged_temp: &FieldVector,
    moll_u: &FieldVector,
) -> Result<TempAssembly> {
    assemble_temp_operator(
        &sys.spaces,
        &sys.model,
        &sys.problem,
        total_u,
        lagged_temp,
        convection_for(sys.model.variant),
        Some(moll_u),
        cfg.truncation,
        cfg.moll_in_viscosity,
    )
}

/// Solves for the interior temperature correction zeta (full-length
/// vector, zero at boundary vertices) at the given velocity, smoothed
/// velocity and lagged temperature.
pub fn solve_temperature(
    sys: &System,
    cfg: &SolverConfig,
    total_u: &FieldVector,
    lagged_temp: &FieldVector,
    moll_u: &FieldVector,
) -> Result<FieldVector> {
    let asm = scheme_temp_operator(sys, cfg, total_u, lagged_temp, moll_u)?;
    let tsp = &sys.spaces.temperature;
    let k_int = asm.matrix.restrict(&tsp.full_to_free, tsp.n_free(), &tsp.full_to_free, tsp.n_free());

    // Right-hand side on interior vertices: dissipation minus the operator
    // applied to the lift.
    let k_lift = asm.matrix.mul_vec(&sys.lifts.tau_tilde.coeffs);
    let rhs_full: Vec<f64> =
        asm.dissipation.iter().zip(&k_lift).map(|(d, l)| d - l).collect();
    let rhs = tsp.restrict(&rhs_full);

    let lu = SparseLu::new(&k_int)?;
    let zeta_int = lu.solve(&rhs)?;

    // The direct solve should be exact to round-off; a large defect means
    // the convection matrix is badly conditioned at this state.
    let defect: f64 = {
        let kz = k_int.mul_vec(&zeta_int);
        kz.iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let rhs_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    if defect > cfg.tol_temp * rhs_norm.max(1.0) {
        return Err(Error::Singular(format!(
            "temperature solve left a defect {defect:.3e} against scale {:.3e}",
            rhs_norm.max(1.0)
        )));
    }

    Ok(FieldVector {
        kind: SpaceKind::TemperatureP1,
        coeffs: tsp.extend(&zeta_int),
    })
}

/// Residual of the temperature equation at a state, measured in the dual
/// of the interior H1 norm: used by the outer loop.
pub fn temperature_residual(
    sys: &System,
    cfg: &SolverConfig,
    total_u: &FieldVector,
    zeta: &FieldVector,
    moll_u: &FieldVector,
) -> Result<f64> {
    let theta = total_temperature(sys, zeta);
    // Viscosity evaluated at the current temperature: this is the fixed
    // point residual, not the lagged-solve one.
    let asm = scheme_temp_operator(sys, cfg, total_u, &theta, moll_u)?;
    let r_full = crate::fem::assemble::temperature_residual_vec(&asm, &theta);
    let r_int = sys.spaces.temperature.restrict(&r_full);
    sys.pi_chol.dual_norm(&r_int)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{closures, default_model, MaterialModel, ModelConstants, Variant};
    use crate::fem::build_spaces;
    use crate::fem::field::{eval_scalar, FieldVector};
    use crate::mesh::{generate_rectangle, TagRule};
    use crate::problem::{make_scalar_field, make_vector_field, ProblemData};
    use crate::solver::{build_system, PressureGauge, SolverConfig};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn constant_viscosity_model(c: f64, chi: f64, eps_heat: f64) -> MaterialModel {
        let consts = ModelConstants {
            variant: Variant::Phi2,
            chi,
            eps_heat,
            a1: c,
            a2: c,
            a3: c,
            ..ModelConstants::default()
        };
        MaterialModel::new(
            consts,
            closures::make_weight("zero", &consts).unwrap(),
            closures::make_shear(&format!("const:{c}"), &consts).unwrap(),
            closures::make_weight("zero", &consts).unwrap(),
            closures::make_shear(&format!("const:{c}"), &consts).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pure_conduction_recovers_the_affine_boundary_datum() {
        // Zero velocity, zero dissipation: the equation is Laplace with
        // the boundary data. An affine datum is harmonic, so the total
        // temperature must reproduce it exactly; the correction fills in
        // the affine values at the interior vertices (the lift carries
        // only the boundary ring).
        let mesh = generate_rectangle(6, 6, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let problem = ProblemData {
            boundary_temperature: make_scalar_field("affine:0.5,-1.25,2.0").unwrap(),
            ..ProblemData::default()
        };
        let sys = build_system(
            spaces.clone(),
            constant_viscosity_model(1.0, 1.0, 1.0),
            problem,
            PressureGauge::MeanZero,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let u = FieldVector::zeros(SpaceKind::VelocityP2, &spaces);
        let lag = sys.lifts.tau_tilde.clone();
        let zeta = solve_temperature(&sys, &cfg, &u, &lag, &u).unwrap();
        let affine = |p: [f64; 2]| 0.5 * p[0] - 1.25 * p[1] + 2.0;
        for &k in &spaces.temperature.free {
            assert_relative_eq!(zeta.coeffs[k], affine(spaces.mesh.nodes[k]), epsilon = 1e-9);
        }
        let theta = crate::solver::total_temperature(&sys, &zeta);
        let (v, _) = eval_scalar(&spaces, &theta, 7, [0.3, 0.4, 0.3]);
        let geom = crate::fem::ElemGeom::new(&spaces.mesh, 7);
        let x = geom.point([0.3, 0.4, 0.3]);
        assert_relative_eq!(v, affine(x), epsilon = 1e-9);
    }

    #[test]
    fn uniform_shear_heating_respects_the_one_dimensional_cap() {
        // u = (y, 0) with constant viscosity c: the dissipation source is
        // 2 eps c I = eps c, constant. The 1-D profile
        // T(y) = (eps c / (2 chi)) y (1 - y) is a supersolution of the 2-D
        // problem with cold side walls, so the discrete solution stays
        // under its peak; the center value matches the known Poisson
        // constant for a unit source (about 0.0737).
        let c = 2.0;
        let chi = 0.8;
        let eps_heat = 0.5;
        let mesh = generate_rectangle(8, 8, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let sys = build_system(
            spaces.clone(),
            constant_viscosity_model(c, chi, eps_heat),
            ProblemData::default(),
            PressureGauge::MeanZero,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let u = FieldVector::velocity_from_fn(&spaces, |x| [x[1], 0.0]);
        let lag = FieldVector::zeros(SpaceKind::TemperatureP1, &spaces);
        let zeta = solve_temperature(&sys, &cfg, &u, &lag, &u).unwrap();
        let strength = eps_heat * c / chi;
        let cap = strength / 8.0 * 1.02 + 1e-12;
        for v in &zeta.coeffs {
            assert!(*v >= -1e-12 && *v <= cap, "out of range: {v}");
        }
        let center = spaces
            .mesh
            .nodes
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
            .unwrap();
        assert_relative_eq!(zeta.coeffs[center], 0.07367 * strength, max_relative = 0.03);
        // The fixed-point residual vanishes: the viscosity is temperature
        // independent, so lagged and current temperatures agree.
        let r = temperature_residual(&sys, &cfg, &u, &zeta, &u).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn convection_transports_heat_downstream() {
        // A rightward velocity with a hot left wall: the interior warms up
        // more toward the right than pure conduction would. Compare the
        // centroid temperature against the conduction-only solve.
        let mesh = generate_rectangle(8, 8, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let hot_left = ProblemData {
            boundary_temperature: make_scalar_field("affine:-1.0,0.0,1.0").unwrap(),
            ..ProblemData::default()
        };
        let sys = build_system(
            spaces.clone(),
            constant_viscosity_model(1.0, 1.0, 1e-12),
            hot_left,
            PressureGauge::MeanZero,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let lag = sys.lifts.tau_tilde.clone();
        let zero_u = FieldVector::zeros(SpaceKind::VelocityP2, &spaces);
        let moving =
            FieldVector::velocity_from_fn(&spaces, |x| [4.0 * x[1] * (1.0 - x[1]), 0.0]);

        let still = solve_temperature(&sys, &cfg, &zero_u, &lag, &zero_u).unwrap();
        let advected = solve_temperature(&sys, &cfg, &moving, &lag, &moving).unwrap();
        let probe = spaces
            .mesh
            .nodes
            .iter()
            .position(|p| (p[0] - 0.625).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
            .unwrap();
        let t_still = still.coeffs[probe] + sys.lifts.tau_tilde.coeffs[probe];
        let t_adv = advected.coeffs[probe] + sys.lifts.tau_tilde.coeffs[probe];
        assert!(
            t_adv > t_still + 0.01,
            "downstream point should be warmer with flow: {t_adv} vs {t_still}"
        );
    }

    #[test]
    fn truncation_caps_the_dissipation() {
        // With caps below the actual invariant the source disappears and
        // the solution reverts to pure conduction (zero here).
        let mesh = generate_rectangle(6, 6, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        let sys = build_system(
            spaces.clone(),
            constant_viscosity_model(1.0, 1.0, 1.0),
            ProblemData::default(),
            PressureGauge::MeanZero,
        )
        .unwrap();
        let cfg = SolverConfig {
            truncation: Some((0.1, 0.2)),
            ..SolverConfig::default()
        };
        let u = FieldVector::velocity_from_fn(&spaces, |x| [x[1], 0.0]);
        let lag = FieldVector::zeros(SpaceKind::TemperatureP1, &spaces);
        // I(u) = 1/2 > 0.2 everywhere: dissipation truncated to zero.
        let zeta = solve_temperature(&sys, &cfg, &u, &lag, &u).unwrap();
        for v in &zeta.coeffs {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn convection_form_follows_the_family() {
        assert_eq!(convection_for(Variant::Phi2), ConvectionForm::Divergence);
        assert_eq!(convection_for(Variant::Phi1), ConvectionForm::Advective);
        // Both families assemble successfully through the scheme operator.
        let mesh = generate_rectangle(4, 4, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        let spaces = Arc::new(build_spaces(Arc::new(mesh)));
        for variant in [Variant::Phi1, Variant::Phi2] {
            let problem = ProblemData {
                e_field: make_vector_field("uniform:0,1").unwrap(),
                ..ProblemData::default()
            };
            let sys = build_system(
                spaces.clone(),
                default_model(variant).unwrap(),
                problem,
                PressureGauge::MeanZero,
            )
            .unwrap();
            let cfg = SolverConfig::default();
            let u = FieldVector::velocity_from_fn(&spaces, |x| {
                [x[1] * (1.0 - x[1]), 0.0]
            });
            let lag = FieldVector::zeros(SpaceKind::TemperatureP1, &spaces);
            let zeta = solve_temperature(&sys, &cfg, &u, &lag, &u).unwrap();
            assert!(zeta.coeffs.iter().all(|v| v.is_finite()));
        }
    }
}
