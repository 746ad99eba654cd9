//! Boundary lifts: finite element fields that carry the prescribed
//! boundary values and vanish at every unconstrained dof. The solver
//! computes corrections relative to these, so the discrete unknowns
//! always satisfy homogeneous conditions.

use crate::error::{Error, Result};
use crate::fem::field::FieldVector;
use crate::fem::space::{SpaceKind, Spaces};
use crate::mesh::BoundaryTag;
use crate::problem::{ScalarField, VectorField};
use crate::quadrature::edge_gauss3;

/// The pair of lifts a run works against.
#[derive(Debug, Clone)]
pub struct Lifts {
    pub u_tilde: FieldVector,
    pub tau_tilde: FieldVector,
}

/// Interpolates the prescribed velocity at every constrained velocity dof.
///
/// When the whole boundary is of Dirichlet type, the data must carry no
/// net flux or the continuity equation is unsolvable; the check integrates
/// the normal component of the prescribed field over the boundary with a
/// rule that is exact for the polynomial data used in practice.
pub fn lift_velocity(spaces: &Spaces, bc: &dyn VectorField) -> Result<FieldVector> {
    let mut u = FieldVector::zeros(SpaceKind::VelocityP2, spaces);
    let space = &spaces.velocity;
    for n in 0..spaces.n_p2 {
        for c in 0..2 {
            let dof = 2 * n + c;
            if space.constrained[dof] {
                u.coeffs[dof] = bc.eval(spaces.p2_coords[n])[c];
            }
        }
    }

    let mesh = &spaces.mesh;
    let closed = mesh.boundary_edges.iter().all(|e| e.tag == BoundaryTag::S1);
    if closed {
        let mut flux = 0.0;
        let mut scale = 0.0;
        for edge in &mesh.boundary_edges {
            let a = mesh.nodes[edge.nodes[0]];
            let b = mesh.nodes[edge.nodes[1]];
            let normal = edge.outward_normal(mesh);
            let len = edge.length(mesh);
            for (t, w) in edge_gauss3() {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let v = bc.eval(x);
                let un = v[0] * normal[0] + v[1] * normal[1];
                flux += w * len * un;
                scale += w * len * un.abs();
            }
        }
        if flux.abs() > 1e-10 * scale.max(1.0) {
            return Err(Error::Config(format!(
                "prescribed boundary velocity has net flux {flux:.3e} through the closed \
                 boundary; an enclosed incompressible flow requires zero net flux"
            )));
        }
    }
    Ok(u)
}

/// Interpolates the prescribed temperature at every boundary vertex.
pub fn lift_temperature(spaces: &Spaces, bc: &dyn ScalarField) -> Result<FieldVector> {
    let mut tau = FieldVector::zeros(SpaceKind::TemperatureP1, spaces);
    let space = &spaces.temperature;
    for v in 0..spaces.mesh.nodes.len() {
        if space.constrained[v] {
            tau.coeffs[v] = bc.eval(spaces.mesh.nodes[v]);
        }
    }
    Ok(tau)
}

/// Builds both lifts.
pub fn make_lifts(
    spaces: &Spaces,
    velocity_bc: &dyn VectorField,
    temperature_bc: &dyn ScalarField,
) -> Result<Lifts> {
    Ok(Lifts {
        u_tilde: lift_velocity(spaces, velocity_bc)?,
        tau_tilde: lift_temperature(spaces, temperature_bc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_spaces;
    use crate::mesh::{generate_rectangle, TagRule};
    use crate::problem::{AffineScalar, FnVector, Uniform};
    use std::sync::Arc;

    fn unit_square_all_dirichlet() -> Spaces {
        let mesh = generate_rectangle(4, 4, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        build_spaces(Arc::new(mesh))
    }

    #[test]
    fn velocity_lift_sets_constrained_dofs_only() {
        let spaces = unit_square_all_dirichlet();
        let bc = FnVector(|x: [f64; 2]| [x[1], 0.0]);
        let u = lift_velocity(&spaces, &bc).unwrap();
        for n in 0..spaces.n_p2 {
            let p = spaces.p2_coords[n];
            for c in 0..2 {
                let dof = 2 * n + c;
                if spaces.velocity.constrained[dof] {
                    let want = if c == 0 { p[1] } else { 0.0 };
                    assert_eq!(u.coeffs[dof], want, "dof at {p:?}");
                } else {
                    assert_eq!(u.coeffs[dof], 0.0);
                }
            }
        }
    }

    #[test]
    fn net_flux_through_closed_boundary_is_rejected() {
        let spaces = unit_square_all_dirichlet();
        // div(x, y) = 2: net flux 2 * area through the closed boundary.
        let bc = FnVector(|x: [f64; 2]| x);
        let err = lift_velocity(&spaces, &bc).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err:?}");
        assert!(err.to_string().contains("net flux"));
    }

    #[test]
    fn rotational_data_passes_the_flux_check() {
        let spaces = unit_square_all_dirichlet();
        let bc = FnVector(|x: [f64; 2]| [-x[1], x[0]]);
        assert!(lift_velocity(&spaces, &bc).is_ok());
    }

    #[test]
    fn open_boundary_skips_the_flux_check() {
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
        let spaces = build_spaces(Arc::new(mesh));
        // Pure inflow data would be rejected on a closed boundary.
        let bc = Uniform([1.0, 0.0]);
        assert!(lift_velocity(&spaces, &bc).is_ok());
    }

    #[test]
    fn temperature_lift_interpolates_boundary_vertices() {
        let spaces = unit_square_all_dirichlet();
        let bc = AffineScalar(1.0, 2.0, 0.0);
        let tau = lift_temperature(&spaces, &bc).unwrap();
        for v in 0..spaces.mesh.nodes.len() {
            let p = spaces.mesh.nodes[v];
            if spaces.temperature.constrained[v] {
                assert_eq!(tau.coeffs[v], p[0] + 2.0 * p[1]);
            } else {
                assert_eq!(tau.coeffs[v], 0.0);
            }
        }
    }
}
