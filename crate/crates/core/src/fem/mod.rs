//! Taylor-Hood discretization: continuous P2 velocities, P1 pressures and
//! P1 temperatures on a shared triangle mesh.
//!
//! Submodules:
//! - [`space`]: degree-of-freedom layout and Dirichlet masks.
//! - [`field`]: coefficient vectors, point evaluation and norms.
//! - [`assemble`]: weak forms (viscous operators, divergence, diffusion,
//!   convection-dissipation residuals, loads).
//! - [`lift`]: discrete boundary lifts for velocity and temperature.

pub mod assemble;
pub mod field;
pub mod lift;
pub mod space;

pub use field::FieldVector;
pub use lift::Lifts;
pub use space::{build_spaces, FunctionSpace, SpaceKind, Spaces};

use crate::mesh::Mesh;

/// Affine geometry of one triangle: the map from the reference triangle
/// with vertices (0,0), (1,0), (0,1) is x = v0 + J (xi, eta).
#[derive(Debug, Clone, Copy)]
pub struct ElemGeom {
    pub verts: [[f64; 2]; 3],
    /// Inverse transpose of J; maps reference gradients to physical ones.
    pub inv_jt: [[f64; 2]; 2],
    /// det J, strictly positive for counter-clockwise triangles.
    pub detj: f64,
}

impl ElemGeom {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let tri = mesh.triangles[t];
        let verts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        let j = [
            [verts[1][0] - verts[0][0], verts[2][0] - verts[0][0]],
            [verts[1][1] - verts[0][1], verts[2][1] - verts[0][1]],
        ];
        let detj = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // inv(J) = adj(J)/det; transpose it.
        let inv_jt = [
            [j[1][1] / detj, -j[1][0] / detj],
            [-j[0][1] / detj, j[0][0] / detj],
        ];
        ElemGeom { verts, inv_jt, detj }
    }

    /// Physical coordinates of a barycentric point.
    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        [
            bary[0] * self.verts[0][0] + bary[1] * self.verts[1][0] + bary[2] * self.verts[2][0],
            bary[0] * self.verts[0][1] + bary[1] * self.verts[1][1] + bary[2] * self.verts[2][1],
        ]
    }

    /// Applies inv(J)^T to a reference gradient.
    pub fn push_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * g[0] + self.inv_jt[0][1] * g[1],
            self.inv_jt[1][0] * g[0] + self.inv_jt[1][1] * g[1],
        ]
    }
}

/// P2 shape function values at a barycentric point, in the local node
/// order vertex0, vertex1, vertex2, mid01, mid12, mid20.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// P2 shape function gradients with respect to (xi, eta) at a barycentric
/// point; multiply by inv(J)^T to get physical gradients.
pub fn p2_ref_grads(l: [f64; 3]) -> [[f64; 2]; 6] {
    let d0 = 4.0 * l[0] - 1.0;
    let d1 = 4.0 * l[1] - 1.0;
    let d2 = 4.0 * l[2] - 1.0;
    [
        [-d0, -d0],
        [d1, 0.0],
        [0.0, d2],
        [4.0 * (l[0] - l[1]), -4.0 * l[1]],
        [4.0 * l[2], 4.0 * l[1]],
        [-4.0 * l[2], 4.0 * (l[0] - l[2])],
    ]
}

/// P1 shape values are the barycentric coordinates themselves; these are
/// their reference gradients.
pub fn p1_ref_grads() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rectangle, TagRule};
    use approx::assert_relative_eq;

    #[test]
    fn p2_shapes_are_nodal() {
        // Barycentric coordinates of the six local nodes.
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (i, &l) in nodes.iter().enumerate() {
            let vals = p2_values(l);
            for (j, &v) in vals.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(v, expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn p2_shapes_sum_to_one_and_grads_to_zero() {
        let l = [0.2, 0.3, 0.5];
        assert_relative_eq!(p2_values(l).iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let g = p2_ref_grads(l);
        let sx: f64 = g.iter().map(|v| v[0]).sum();
        let sy: f64 = g.iter().map(|v| v[1]).sum();
        assert_relative_eq!(sx, 0.0, epsilon = 1e-14);
        assert_relative_eq!(sy, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn geometry_maps_and_gradients_are_consistent() {
        let mesh = generate_rectangle(2, 3, 2.0, 1.5, &TagRule::all_dirichlet()).unwrap();
        for t in 0..mesh.triangles.len() {
            let g = ElemGeom::new(&mesh, t);
            assert!(g.detj > 0.0);
            assert_relative_eq!(0.5 * g.detj, mesh.triangle_area(t), max_relative = 1e-13);
            // The vertex barycentric points map to the vertices.
            assert_eq!(g.point([1.0, 0.0, 0.0]), g.verts[0]);
            // A linear function x -> 3x + 2y has gradient (3, 2); build it
            // from P1 data and push the reference gradient forward.
            let f = |p: [f64; 2]| 3.0 * p[0] + 2.0 * p[1];
            let coeffs = [f(g.verts[0]), f(g.verts[1]), f(g.verts[2])];
            let ref_g = p1_ref_grads();
            let mut grad = [0.0, 0.0];
            for k in 0..3 {
                let pg = g.push_grad(ref_g[k]);
                grad[0] += coeffs[k] * pg[0];
                grad[1] += coeffs[k] * pg[1];
            }
            assert_relative_eq!(grad[0], 3.0, epsilon = 1e-12);
            assert_relative_eq!(grad[1], 2.0, epsilon = 1e-12);
        }
    }
}
