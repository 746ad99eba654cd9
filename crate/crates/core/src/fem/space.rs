//! Degree-of-freedom layout for the Taylor-Hood pair and the temperature
//! space.
//!
//! Velocity: continuous P2, two components per P2 node (vertices plus edge
//! midpoints), dof index 2*node + component. Pressure: continuous P1 on
//! the vertices, no essential constraints (the gauge is handled by the
//! solver). Temperature: continuous P1 on the vertices, constrained on the
//! whole boundary.

use crate::mesh::{BoundaryTag, Mesh};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    VelocityP2,
    PressureP1,
    TemperatureP1,
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub kind: SpaceKind,
    pub ndof: usize,
    /// Dirichlet mask over all dofs.
    pub constrained: Vec<bool>,
    /// Sorted indices of the unconstrained dofs.
    pub free: Vec<usize>,
    /// Inverse of `free`: position in the free list, or usize::MAX.
    pub full_to_free: Vec<usize>,
}

impl FunctionSpace {
    fn from_mask(kind: SpaceKind, constrained: Vec<bool>) -> Self {
        let ndof = constrained.len();
        let mut free = Vec::new();
        let mut full_to_free = vec![usize::MAX; ndof];
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                full_to_free[i] = free.len();
                free.push(i);
            }
        }
        FunctionSpace { kind, ndof, constrained, free, full_to_free }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Extracts the free entries of a full-length vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.ndof);
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Scatters a free-length vector into a full-length one (constrained
    /// entries zero).
    pub fn extend(&self, free_vals: &[f64]) -> Vec<f64> {
        assert_eq!(free_vals.len(), self.free.len());
        let mut full = vec![0.0; self.ndof];
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = free_vals[k];
        }
        full
    }
}

/// The three spaces over one mesh, plus the P2 node layout shared by all
/// velocity computations.
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    pub velocity: FunctionSpace,
    pub pressure: FunctionSpace,
    pub temperature: FunctionSpace,
    /// Total number of P2 nodes: mesh vertices first, then edge midpoints.
    pub n_p2: usize,
    /// Coordinates of all P2 nodes.
    pub p2_coords: Vec<[f64; 2]>,
    /// Unique mesh edges (sorted vertex pairs); edge k owns P2 node
    /// `n_vertices + k`.
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, its six P2 nodes in the local order vertex0,
    /// vertex1, vertex2, mid01, mid12, mid20.
    pub elem_p2: Vec<[usize; 6]>,
    /// For each mesh boundary edge, the P2 node of its midpoint.
    pub boundary_midpoint_p2: Vec<usize>,
}

impl Spaces {
    pub fn space(&self, kind: SpaceKind) -> &FunctionSpace {
        match kind {
            SpaceKind::VelocityP2 => &self.velocity,
            SpaceKind::PressureP1 => &self.pressure,
            SpaceKind::TemperatureP1 => &self.temperature,
        }
    }
}

/// Builds the velocity/pressure/temperature spaces over a mesh.
pub fn build_spaces(mesh: Arc<Mesh>) -> Spaces {
    let nv = mesh.nodes.len();

    // Enumerate unique edges; assign midpoint P2 nodes in sorted edge
    // order so the layout is reproducible.
    let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = if a < b { [a, b] } else { [b, a] };
            let next = edge_ids.len();
            edge_ids.entry(key).or_insert(next);
        }
    }
    let mut edges = vec![[0usize; 2]; edge_ids.len()];
    for (&key, &id) in &edge_ids {
        edges[id] = key;
    }

    let n_p2 = nv + edges.len();
    let mut p2_coords = Vec::with_capacity(n_p2);
    p2_coords.extend(mesh.nodes.iter().copied());
    for &[a, b] in &edges {
        let pa = mesh.nodes[a];
        let pb = mesh.nodes[b];
        p2_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    }

    let edge_node = |a: usize, b: usize| -> usize {
        let key = if a < b { [a, b] } else { [b, a] };
        nv + edge_ids[&key]
    };

    let elem_p2: Vec<[usize; 6]> = mesh
        .triangles
        .iter()
        .map(|&[a, b, c]| [a, b, c, edge_node(a, b), edge_node(b, c), edge_node(c, a)])
        .collect();

    let boundary_midpoint_p2: Vec<usize> = mesh
        .boundary_edges
        .iter()
        .map(|e| edge_node(e.nodes[0], e.nodes[1]))
        .collect();

    // Velocity constraints: both components at every P2 node on an S1 edge.
    let mut vel_constrained = vec![false; 2 * n_p2];
    // Temperature constraints: every boundary vertex.
    let mut temp_constrained = vec![false; nv];
    for (e, &mid) in mesh.boundary_edges.iter().zip(&boundary_midpoint_p2) {
        for v in e.nodes {
            temp_constrained[v] = true;
        }
        if e.tag == BoundaryTag::S1 {
            for node in [e.nodes[0], e.nodes[1], mid] {
                vel_constrained[2 * node] = true;
                vel_constrained[2 * node + 1] = true;
            }
        }
    }

    Spaces {
        velocity: FunctionSpace::from_mask(SpaceKind::VelocityP2, vel_constrained),
        pressure: FunctionSpace::from_mask(SpaceKind::PressureP1, vec![false; nv]),
        temperature: FunctionSpace::from_mask(SpaceKind::TemperatureP1, temp_constrained),
        mesh,
        n_p2,
        p2_coords,
        edges,
        elem_p2,
        boundary_midpoint_p2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rectangle, TagRule};

    fn unit_square(n: usize) -> Spaces {
        let mesh = generate_rectangle(n, n, 1.0, 1.0, &TagRule::all_dirichlet()).unwrap();
        build_spaces(Arc::new(mesh))
    }

    #[test]
    fn dof_counts_on_crossed_4x4() {
        let s = unit_square(4);
        // 41 vertices, and V - 1 + F = 41 - 1 + 64 = 104 edges by Euler.
        assert_eq!(s.mesh.nodes.len(), 41);
        assert_eq!(s.edges.len(), 104);
        assert_eq!(s.n_p2, 145);
        assert_eq!(s.velocity.ndof, 290);
        assert_eq!(s.pressure.ndof, 41);
        assert_eq!(s.temperature.ndof, 41);
        // 16 boundary vertices + 16 boundary midpoints, two components.
        assert_eq!(s.velocity.ndof - s.velocity.n_free(), 64);
        assert_eq!(s.pressure.n_free(), 41);
        // All 16 boundary vertices are temperature-constrained.
        assert_eq!(s.temperature.ndof - s.temperature.n_free(), 16);
    }

    #[test]
    fn midpoint_coordinates_are_edge_midpoints() {
        let s = unit_square(3);
        for (k, &[a, b]) in s.edges.iter().enumerate() {
            let m = s.p2_coords[s.mesh.nodes.len() + k];
            let pa = s.mesh.nodes[a];
            let pb = s.mesh.nodes[b];
            assert_eq!(m, [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
    }

    #[test]
    fn elem_p2_ordering_matches_vertices() {
        let s = unit_square(2);
        for (t, tri) in s.mesh.triangles.iter().enumerate() {
            let e = s.elem_p2[t];
            assert_eq!(&e[..3], &tri[..]);
            for k in 0..3 {
                // Midpoint node k+3 is between vertices k and (k+1)%3.
                let m = s.p2_coords[e[k + 3]];
                let pa = s.mesh.nodes[tri[k]];
                let pb = s.mesh.nodes[tri[(k + 1) % 3]];
                assert!((m[0] - 0.5 * (pa[0] + pb[0])).abs() < 1e-15);
                assert!((m[1] - 0.5 * (pa[1] + pb[1])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn restrict_extend_roundtrip() {
        let s = unit_square(2);
        let full: Vec<f64> = (0..s.velocity.ndof)
            .map(|i| if s.velocity.constrained[i] { 0.0 } else { i as f64 })
            .collect();
        let free = s.velocity.restrict(&full);
        assert_eq!(s.velocity.extend(&free), full);
    }

    #[test]
    fn mixed_tags_constrain_only_s1_velocity() {
        use crate::mesh::BoundaryTag;
        let tags = TagRule {
            left: BoundaryTag::S1,
            right: BoundaryTag::S2,
            bottom: BoundaryTag::S1,
            top: BoundaryTag::S1,
        };
        let mesh = generate_rectangle(4, 4, 1.0, 1.0, &tags).unwrap();
        let s = build_spaces(Arc::new(mesh));
        // The right side has 4 edges, 3 interior-to-side vertices and 4
        // midpoints free; the two corner vertices stay constrained through
        // the adjacent S1 edges.
        assert_eq!(s.velocity.ndof - s.velocity.n_free(), 64 - 2 * 7);
        // Temperature stays constrained on the whole boundary.
        assert_eq!(s.temperature.ndof - s.temperature.n_free(), 16);
    }
}
