//! Coefficient vectors over the discrete spaces, their evaluation and the
//! norms used by the analysis.

use super::space::{SpaceKind, Spaces};
use super::{p1_ref_grads, p2_ref_grads, p2_values, ElemGeom};
use crate::error::{Error, Result};
use crate::quadrature;

/// Coefficients of a finite element function. Velocity fields interleave
/// the two components per P2 node (dof 2*node + component); scalar fields
/// have one coefficient per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub coeffs: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(kind: SpaceKind, spaces: &Spaces) -> Self {
        FieldVector { kind, coeffs: vec![0.0; spaces.space(kind).ndof] }
    }

    pub fn from_coeffs(kind: SpaceKind, coeffs: Vec<f64>, spaces: &Spaces) -> Result<Self> {
        if coeffs.len() != spaces.space(kind).ndof {
            return Err(Error::InvalidInput(format!(
                "coefficient count {} does not match the space ({} dofs)",
                coeffs.len(),
                spaces.space(kind).ndof
            )));
        }
        Ok(FieldVector { kind, coeffs })
    }

    /// Interpolates a velocity-valued function at the P2 nodes.
    pub fn velocity_from_fn(spaces: &Spaces, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut coeffs = vec![0.0; 2 * spaces.n_p2];
        for (k, &x) in spaces.p2_coords.iter().enumerate() {
            let v = f(x);
            coeffs[2 * k] = v[0];
            coeffs[2 * k + 1] = v[1];
        }
        FieldVector { kind: SpaceKind::VelocityP2, coeffs }
    }

    /// Interpolates a scalar function at the vertices.
    pub fn scalar_from_fn(kind: SpaceKind, spaces: &Spaces, f: impl Fn([f64; 2]) -> f64) -> Self {
        assert!(matches!(kind, SpaceKind::PressureP1 | SpaceKind::TemperatureP1));
        let coeffs = spaces.mesh.nodes.iter().map(|&x| f(x)).collect();
        FieldVector { kind, coeffs }
    }

    pub fn axpy(&mut self, a: f64, other: &FieldVector) {
        assert_eq!(self.kind, other.kind);
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> FieldVector {
        FieldVector { kind: self.kind, coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn added(&self, other: &FieldVector) -> FieldVector {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }
}

/// Value and gradient of a P2 velocity field at a barycentric point of
/// element `t`. `grad[i][j]` is d u_i / d x_j.
pub fn eval_velocity(
    spaces: &Spaces,
    field: &FieldVector,
    t: usize,
    bary: [f64; 3],
) -> ([f64; 2], [[f64; 2]; 2]) {
    debug_assert_eq!(field.kind, SpaceKind::VelocityP2);
    let geom = ElemGeom::new(&spaces.mesh, t);
    let vals = p2_values(bary);
    let refg = p2_ref_grads(bary);
    let mut u = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for (k, &node) in spaces.elem_p2[t].iter().enumerate() {
        let g = geom.push_grad(refg[k]);
        for c in 0..2 {
            let coeff = field.coeffs[2 * node + c];
            u[c] += coeff * vals[k];
            grad[c][0] += coeff * g[0];
            grad[c][1] += coeff * g[1];
        }
    }
    (u, grad)
}

/// Value and (constant) gradient of a P1 scalar field on element `t`.
pub fn eval_scalar(
    spaces: &Spaces,
    field: &FieldVector,
    t: usize,
    bary: [f64; 3],
) -> (f64, [f64; 2]) {
    debug_assert!(matches!(field.kind, SpaceKind::PressureP1 | SpaceKind::TemperatureP1));
    let geom = ElemGeom::new(&spaces.mesh, t);
    let tri = spaces.mesh.triangles[t];
    let refg = p1_ref_grads();
    let mut val = 0.0;
    let mut grad = [0.0; 2];
    for k in 0..3 {
        let c = field.coeffs[tri[k]];
        val += c * bary[k];
        let g = geom.push_grad(refg[k]);
        grad[0] += c * g[0];
        grad[1] += c * g[1];
    }
    (val, grad)
}

/// The natural velocity norm: ||v||_X = (int I(v) dx)^(1/2), where I is
/// the squared-strain invariant. Exact for P2 fields (the integrand is a
/// quadratic polynomial per element).
pub fn norm_x(spaces: &Spaces, v: &FieldVector) -> f64 {
    integral_strain_invariant(spaces, v).sqrt()
}

/// int I(v) dx, the quantity entering the lift offset mu4.
pub fn integral_strain_invariant(spaces: &Spaces, v: &FieldVector) -> f64 {
    debug_assert_eq!(v.kind, SpaceKind::VelocityP2);
    let rule = quadrature::tri_degree2();
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let geom = ElemGeom::new(&spaces.mesh, t);
        for qp in rule {
            let (_, grad) = eval_velocity(spaces, v, t, qp.bary);
            let s = crate::constitutive::strain_rate(grad);
            total += qp.weight * geom.detj * s.invariant;
        }
    }
    total
}

/// H1 seminorm of a P1 scalar field: (int |grad z|^2)^(1/2). Exact, since
/// the gradient is constant per element.
pub fn norm_1(spaces: &Spaces, z: &FieldVector) -> f64 {
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let (_, g) = eval_scalar(spaces, z, t, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        total += spaces.mesh.triangle_area(t) * (g[0] * g[0] + g[1] * g[1]);
    }
    total.sqrt()
}

/// The weaker temperature norm
/// `||z||_2 = (int (|dz/dx1|^(6/5) + |dz/dx2|^(6/5)) dx)^(5/6)`,
/// again exact for P1 fields.
pub fn norm_2(spaces: &Spaces, z: &FieldVector) -> f64 {
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let (_, g) = eval_scalar(spaces, z, t, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        total += spaces.mesh.triangle_area(t) * (g[0].abs().powf(1.2) + g[1].abs().powf(1.2));
    }
    total.powf(5.0 / 6.0)
}

/// L2 norm of a P1 scalar field (exact: degree-2 rule on a quadratic
/// integrand).
pub fn l2_scalar(spaces: &Spaces, z: &FieldVector) -> f64 {
    let rule = quadrature::tri_degree2();
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let geom = ElemGeom::new(&spaces.mesh, t);
        for qp in rule {
            let (v, _) = eval_scalar(spaces, z, t, qp.bary);
            total += qp.weight * geom.detj * v * v;
        }
    }
    total.sqrt()
}

/// L2 norm of a P2 velocity field (degree-5 rule on a quartic integrand).
pub fn l2_velocity(spaces: &Spaces, v: &FieldVector) -> f64 {
    let rule = quadrature::tri_degree5();
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let geom = ElemGeom::new(&spaces.mesh, t);
        for qp in rule {
            let (u, _) = eval_velocity(spaces, v, t, qp.bary);
            total += qp.weight * geom.detj * (u[0] * u[0] + u[1] * u[1]);
        }
    }
    total.sqrt()
}

/// Full H1 norm of a velocity field: (||v||_L2^2 + int |grad v|^2)^(1/2).
pub fn h1_velocity(spaces: &Spaces, v: &FieldVector) -> f64 {
    let rule5 = quadrature::tri_degree5();
    let rule2 = quadrature::tri_degree2();
    let mut total = 0.0;
    for t in 0..spaces.mesh.triangles.len() {
        let geom = ElemGeom::new(&spaces.mesh, t);
        for qp in rule5 {
            let (u, _) = eval_velocity(spaces, v, t, qp.bary);
            total += qp.weight * geom.detj * (u[0] * u[0] + u[1] * u[1]);
        }
        for qp in rule2 {
            let (_, g) = eval_velocity(spaces, v, t, qp.bary);
            let gsq: f64 = g.iter().flatten().map(|x| x * x).sum();
            total += qp.weight * geom.detj * gsq;
        }
    }
    total.sqrt()
}
