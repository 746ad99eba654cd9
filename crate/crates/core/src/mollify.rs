//! Velocity smoothing. The dissipation term of the temperature equation
//! does not take the raw strain invariant of the discrete velocity but
//! that of a smoothed version: the convolution with a compactly supported
//! bump kernel, extended past the boundary by nearest-boundary values.
//!
//! `regularize` samples that convolution at every P2 node and returns the
//! interpolant, so downstream assembly treats the smoothed velocity like
//! any other field. The quadrature is elementwise inside the domain and
//! polar over the part of the support disc that sticks out of it; the
//! result is divided by the discretely integrated kernel mass, which
//! makes the smoothing reproduce constants exactly and keeps it a convex
//! average of field values.

use crate::error::{Error, Result};
use crate::fem::field::FieldVector;
use crate::fem::space::{SpaceKind, Spaces};
use crate::fem::{p2_values, ElemGeom};
use crate::mesh::PointLocator;
use crate::quadrature::{gauss_legendre_01, tri_degree5};
use crate::with_thread_pool;
use rayon::prelude::*;

/// Bump kernel omega(|x|) = C exp(-1 / (1 - (|x|/a)^2)) inside the disc
/// of radius a, zero outside, with C normalizing the plane integral to 1.
#[derive(Debug, Clone, Copy)]
pub struct MollifierKernel {
    pub radius: f64,
    normalizer: f64,
}

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

impl MollifierKernel {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mollifier radius must be positive and finite, got {radius}"
            )));
        }
        // 1 / C = 2 pi int_0^a bump(r/a) r dr.
        let (nodes, weights) = gauss_legendre_01(64);
        let mass: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| w * radius * bump(t) * (radius * t))
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        Ok(MollifierKernel { radius, normalizer: 1.0 / mass })
    }

    /// Kernel value at distance `dist` from the center.
    pub fn omega(&self, dist: f64) -> f64 {
        self.normalizer * bump(dist / self.radius)
    }
}

/// Geometrically shrinking kernel radii for smoothing-parameter sweeps:
/// radius0 * factor^k for k = 0 .. count-1.
pub fn kernel_sequence(radius0: f64, factor: f64, count: usize) -> Result<Vec<MollifierKernel>> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::InvalidInput(format!(
            "sweep factor must lie in (0, 1), got {factor}"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidInput("sweep needs at least one kernel".into()));
    }
    (0..count)
        .map(|k| MollifierKernel::new(radius0 * factor.powi(k as i32)))
        .collect()
}

/// Velocity values precomputed at the interior quadrature points.
struct QpData {
    pos: [f64; 2],
    weight: f64,
    u: [f64; 2],
}

const EXTERIOR_RADIAL: usize = 24;
const EXTERIOR_ANGULAR: usize = 48;

/// P2 trace of the field along a boundary edge at parameter t.
fn edge_trace(
    spaces: &Spaces,
    field: &FieldVector,
    edge_idx: usize,
    t: f64,
) -> [f64; 2] {
    let edge = &spaces.mesh.boundary_edges[edge_idx];
    let dofs = [
        edge.nodes[0],
        edge.nodes[1],
        spaces.boundary_midpoint_p2[edge_idx],
    ];
    let shapes = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
    let mut v = [0.0; 2];
    for (k, &n) in dofs.iter().enumerate() {
        for c in 0..2 {
            v[c] += shapes[k] * field.coeffs[2 * n + c];
        }
    }
    v
}

/// Smooths a velocity field: returns the P2 interpolant of its mollified
/// values at all P2 nodes.
pub fn regularize(
    spaces: &Spaces,
    field: &FieldVector,
    kernel: &MollifierKernel,
) -> Result<FieldVector> {
    assert_eq!(field.kind, SpaceKind::VelocityP2);
    let mesh = &spaces.mesh;
    let (lo, hi) = mesh.bbox();
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    if kernel.radius > diag {
        return Err(Error::InvalidInput(format!(
            "mollifier radius {} exceeds the mesh diameter {diag:.6}",
            kernel.radius
        )));
    }
    let locator = PointLocator::new(mesh);

    // Element quadrature data, reused for every node.
    let qp_per_tri: Vec<Vec<QpData>> = (0..mesh.triangles.len())
        .map(|t| {
            let geom = ElemGeom::new(mesh, t);
            let nodes = &spaces.elem_p2[t];
            tri_degree5()
                .iter()
                .map(|qp| {
                    let vals = p2_values(qp.bary);
                    let mut u = [0.0; 2];
                    for (k, &n) in nodes.iter().enumerate() {
                        for c in 0..2 {
                            u[c] += field.coeffs[2 * n + c] * vals[k];
                        }
                    }
                    QpData { pos: geom.point(qp.bary), weight: geom.detj * qp.weight, u }
                })
                .collect()
        })
        .collect();

    let (radial_nodes, radial_weights) = gauss_legendre_01(EXTERIOR_RADIAL);
    let d_theta = 2.0 * std::f64::consts::PI / EXTERIOR_ANGULAR as f64;

    let smooth_one = |center: [f64; 2]| -> Result<[f64; 2]> {
        let mut num = [0.0; 2];
        let mut mass = 0.0;
        for t in locator.triangles_near(center, kernel.radius) {
            for qp in &qp_per_tri[t] {
                let d = ((qp.pos[0] - center[0]).powi(2) + (qp.pos[1] - center[1]).powi(2)).sqrt();
                let w = qp.weight * kernel.omega(d);
                if w != 0.0 {
                    mass += w;
                    num[0] += w * qp.u[0];
                    num[1] += w * qp.u[1];
                }
            }
        }
        // The part of the support disc outside the domain, in polar
        // coordinates around the node, with nearest-boundary values.
        // Points inside the domain are skipped: the element sum above
        // already covers them.
        for (&rt, &rw) in radial_nodes.iter().zip(&radial_weights) {
            let r = kernel.radius * rt;
            let ring = kernel.omega(r) * r * (rw * kernel.radius) * d_theta;
            if ring == 0.0 {
                continue;
            }
            for j in 0..EXTERIOR_ANGULAR {
                let theta = (j as f64 + 0.5) * d_theta;
                let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
                if locator.locate(p).is_some() {
                    continue;
                }
                let (edge_idx, et) = locator.nearest_boundary_point(p);
                let v = edge_trace(spaces, field, edge_idx, et);
                mass += ring;
                num[0] += ring * v[0];
                num[1] += ring * v[1];
            }
        }
        if !(mass > 1e-8) {
            return Err(Error::InvalidInput(format!(
                "mollifier saw vanishing kernel mass {mass:.3e} at ({}, {}); the radius is \
                 too small for the mesh resolution",
                center[0], center[1]
            )));
        }
        Ok([num[0] / mass, num[1] / mass])
    };

    let values: Vec<Result<[f64; 2]>> = with_thread_pool(|| {
        spaces
            .p2_coords
            .par_iter()
            .map(|&c| smooth_one(c))
            .collect()
    });
    let mut out = FieldVector::zeros(SpaceKind::VelocityP2, spaces);
    for (n, v) in values.into_iter().enumerate() {
        let v = v?;
        out.coeffs[2 * n] = v[0];
        out.coeffs[2 * n + 1] = v[1];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_spaces;
    use crate::mesh::{generate_rectangle, TagRule};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn square_spaces(n: usize) -> Spaces {
        let mesh = generate_rectangle(n, n, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        build_spaces(Arc::new(mesh))
    }

    #[test]
    fn kernel_normalizes_to_unit_mass() {
        // Independent check of the normalizer by a fine midpoint rule on
        // 2 pi int r omega(r) dr.
        let k = MollifierKernel::new(0.37).unwrap();
        let n = 200_000;
        let h = k.radius / n as f64;
        let mass: f64 = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                k.omega(r) * r * h
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        assert_relative_eq!(mass, 1.0, epsilon = 1e-9);
        assert_eq!(k.omega(k.radius), 0.0);
        assert_eq!(k.omega(2.0 * k.radius), 0.0);
        assert!(k.omega(0.0) > k.omega(0.5 * k.radius));
    }

    #[test]
    fn kernel_rejects_bad_radii() {
        assert!(MollifierKernel::new(0.0).is_err());
        assert!(MollifierKernel::new(-1.0).is_err());
        assert!(MollifierKernel::new(f64::NAN).is_err());
    }

    #[test]
    fn kernel_sequence_shrinks_geometrically() {
        let ks = kernel_sequence(0.2, 0.5, 3).unwrap();
        let radii: Vec<f64> = ks.iter().map(|k| k.radius).collect();
        assert_eq!(radii, vec![0.2, 0.1, 0.05]);
        assert!(kernel_sequence(0.2, 1.0, 3).is_err());
        assert!(kernel_sequence(0.2, 0.5, 0).is_err());
    }

    #[test]
    fn constants_are_reproduced_exactly() {
        let spaces = square_spaces(8);
        let u = FieldVector::velocity_from_fn(&spaces, |_| [3.0, -2.0]);
        let k = MollifierKernel::new(0.15).unwrap();
        let pu = regularize(&spaces, &u, &k).unwrap();
        for n in 0..spaces.n_p2 {
            assert_relative_eq!(pu.coeffs[2 * n], 3.0, epsilon = 1e-12);
            assert_relative_eq!(pu.coeffs[2 * n + 1], -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_fields_survive_away_from_the_boundary() {
        let spaces = square_spaces(16);
        let u = FieldVector::velocity_from_fn(&spaces, |p| [p[1], 0.0]);
        let k = MollifierKernel::new(0.12).unwrap();
        let pu = regularize(&spaces, &u, &k).unwrap();
        for n in 0..spaces.n_p2 {
            let p = spaces.p2_coords[n];
            let d = p[0].min(p[1]).min(1.0 - p[0]).min(1.0 - p[1]);
            if d > k.radius {
                // A symmetric average of a linear field is the field, up
                // to the quadrature wobble of the discrete kernel.
                assert_relative_eq!(pu.coeffs[2 * n], p[1], epsilon = 2e-3);
                assert!(pu.coeffs[2 * n + 1].abs() < 2e-3);
            }
        }
    }

    #[test]
    fn smoothing_is_a_convex_average() {
        let spaces = square_spaces(8);
        let u = FieldVector::velocity_from_fn(&spaces, |p| {
            [(7.0 * p[0]).sin() * (5.0 * p[1]).cos(), p[0] * p[0] - p[1]]
        });
        let k = MollifierKernel::new(0.2).unwrap();
        let pu = regularize(&spaces, &u, &k).unwrap();
        for c in 0..2 {
            let bounds = (0..spaces.n_p2).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, n| {
                let v = u.coeffs[2 * n + c];
                (acc.0.min(v), acc.1.max(v))
            });
            for n in 0..spaces.n_p2 {
                let v = pu.coeffs[2 * n + c];
                // The average runs over field values at quadrature points,
                // whose range can slightly exceed the nodal range for a
                // curved field; allow a small overshoot.
                assert!(
                    v > bounds.0 - 0.05 && v < bounds.1 + 0.05,
                    "component {c} at node {n}: {v} outside [{}, {}]",
                    bounds.0,
                    bounds.1
                );
            }
        }
    }

    #[test]
    fn boundary_extension_uses_wall_values() {
        // A field that vanishes on the whole boundary: smoothing at a
        // wall node averages interior values against zero exterior ones,
        // so the result at the wall is small but the extension never
        // invents values outside the field range.
        let spaces = square_spaces(8);
        let u = FieldVector::velocity_from_fn(&spaces, |p| {
            [16.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]), 0.0]
        });
        let k = MollifierKernel::new(0.2).unwrap();
        let pu = regularize(&spaces, &u, &k).unwrap();
        for n in 0..spaces.n_p2 {
            let p = spaces.p2_coords[n];
            let on_wall = p[0] < 1e-12 || p[1] < 1e-12 || p[0] > 1.0 - 1e-12 || p[1] > 1.0 - 1e-12;
            if on_wall {
                let v = pu.coeffs[2 * n];
                assert!((0.0..0.5).contains(&v), "wall node {p:?} got {v}");
            }
        }
    }

    #[test]
    fn oversized_radius_is_rejected() {
        let spaces = square_spaces(4);
        let u = FieldVector::velocity_from_fn(&spaces, |_| [1.0, 0.0]);
        let k = MollifierKernel::new(5.0).unwrap();
        assert!(regularize(&spaces, &u, &k).is_err());
    }
}
