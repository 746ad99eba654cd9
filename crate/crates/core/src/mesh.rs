//! Conforming triangle meshes with tagged boundary parts.
//!
//! The boundary is split into a Dirichlet part `S1` (velocity prescribed;
//! it must be non-empty for the flow problem to be well posed) and a
//! traction part `S2`. Triangles are stored counter-clockwise; boundary
//! edges are stored in the traversal order of their owning triangle, so
//! the outward normal of edge (a, b) is the edge vector rotated by -90
//! degrees.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Velocity Dirichlet part of the boundary.
    S1,
    /// Traction (natural) part of the boundary.
    S2,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::S1 => "S1",
            BoundaryTag::S2 => "S2",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "S1" => Some(BoundaryTag::S1),
            "S2" => Some(BoundaryTag::S2),
            _ => None,
        }
    }
}

/// A tagged boundary edge. `nodes` follows the owning triangle's
/// counter-clockwise traversal, `tri` is the owning triangle index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub tri: usize,
}

impl BoundaryEdge {
    /// Unit outward normal (valid because the owning triangle is CCW).
    pub fn outward_normal(&self, mesh: &Mesh) -> [f64; 2] {
        let a = mesh.nodes[self.nodes[0]];
        let b = mesh.nodes[self.nodes[1]];
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    pub fn length(&self, mesh: &Mesh) -> f64 {
        let a = mesh.nodes[self.nodes[0]];
        let b = mesh.nodes[self.nodes[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Longest triangle edge in the mesh.
    pub h_max: f64,
}

/// Which boundary tag each side of a generated rectangle receives.
#[derive(Debug, Clone, Copy)]
pub struct TagRule {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl TagRule {
    /// Velocity prescribed on the whole boundary.
    pub fn all_dirichlet() -> Self {
        TagRule {
            left: BoundaryTag::S1,
            right: BoundaryTag::S1,
            bottom: BoundaryTag::S1,
            top: BoundaryTag::S1,
        }
    }
}

/// Triangulation pattern for generated rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshPattern {
    /// Four triangles per cell meeting at the cell center (default).
    Crossed,
    /// Two triangles per cell, split along the same diagonal.
    Diagonal,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant: finite
    /// coordinates, index bounds, positive triangle areas (clockwise
    /// triangles are reoriented), edge conformity, complete and
    /// non-overlapping boundary tagging, a non-empty Dirichlet part, and
    /// the absence of duplicate nodes and hanging nodes.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::Mesh("mesh has no nodes or no triangles".into()));
        }
        for (i, p) in nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::Mesh(format!("node {i} has non-finite coordinates")));
            }
        }

        let mut triangles = triangles;
        let mut used = vec![false; nodes.len()];
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nodes.len() {
                    return Err(Error::Mesh(format!(
                        "triangle {t} references node {v}, but the mesh has {} nodes",
                        nodes.len()
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Mesh(format!("triangle {t} has repeated vertices")));
            }
            let area2 = signed_area2(&nodes, tri);
            let edge_scale = longest_edge_sq(&nodes, tri);
            if area2.abs() <= 1e-12 * edge_scale {
                return Err(Error::Mesh(format!(
                    "triangle {t} is degenerate (signed area {:.3e})",
                    0.5 * area2
                )));
            }
            if area2 < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("node {i} is not used by any triangle")));
        }

        // Edge table: sorted node pair -> (use count, owner of the first
        // occurrence in triangle order).
        let mut edges: BTreeMap<[usize; 2], (usize, usize, [usize; 2])> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let entry = edges.entry(key).or_insert((0, t, [a, b]));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(Error::Mesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key[0], key[1]
                    )));
                }
            }
        }

        // Every single-use edge must carry exactly one boundary tag.
        let mut tag_of: BTreeMap<[usize; 2], BoundaryTag> = BTreeMap::new();
        for &(e, tag) in &boundary {
            let key = if e[0] < e[1] { [e[0], e[1]] } else { [e[1], e[0]] };
            if tag_of.insert(key, tag).is_some() {
                return Err(Error::Mesh(format!(
                    "boundary edge ({}, {}) is tagged twice",
                    key[0], key[1]
                )));
            }
        }
        let mut boundary_edges = Vec::new();
        for (key, &(count, tri, order)) in &edges {
            match count {
                1 => match tag_of.remove(key) {
                    Some(tag) => boundary_edges.push(BoundaryEdge { nodes: order, tag, tri }),
                    None => {
                        return Err(Error::Mesh(format!(
                            "boundary edge ({}, {}) carries no tag",
                            key[0], key[1]
                        )))
                    }
                },
                2 => {
                    if tag_of.contains_key(key) {
                        return Err(Error::Mesh(format!(
                            "interior edge ({}, {}) carries a boundary tag",
                            key[0], key[1]
                        )));
                    }
                }
                _ => unreachable!(),
            }
        }
        if let Some((key, _)) = tag_of.iter().next() {
            return Err(Error::Mesh(format!(
                "tagged edge ({}, {}) does not exist in the mesh",
                key[0], key[1]
            )));
        }
        if !boundary_edges.iter().any(|e| e.tag == BoundaryTag::S1) {
            return Err(Error::Mesh(
                "the Dirichlet boundary part S1 is empty; the flow problem needs it".into(),
            ));
        }

        check_no_hanging_nodes(&nodes, &edges)?;

        let h_max = edges
            .keys()
            .map(|&[a, b]| {
                let pa = nodes[a];
                let pb = nodes[b];
                ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
            })
            .fold(0.0_f64, f64::max);

        Ok(Mesh { nodes, triangles, boundary_edges, h_max })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * signed_area2(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Number of distinct edges (useful for Euler characteristic checks).
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::BTreeSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                edges.insert(if a < b { [a, b] } else { [b, a] });
            }
        }
        edges.len()
    }
}

fn signed_area2(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn longest_edge_sq(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let mut m = 0.0_f64;
    for k in 0..3 {
        let a = nodes[tri[k]];
        let b = nodes[tri[(k + 1) % 3]];
        m = m.max((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2));
    }
    m
}

/// Rejects nodes that coincide with another node or sit in the interior of
/// an edge they do not belong to (T-junctions). Uses a background grid so
/// the scan stays near-linear.
fn check_no_hanging_nodes(
    nodes: &[[f64; 2]],
    edges: &BTreeMap<[usize; 2], (usize, usize, [usize; 2])>,
) -> Result<()> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let extent = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt().max(1e-300);
    let ncell = (nodes.len() as f64).sqrt().ceil() as usize + 1;
    let cell = |p: [f64; 2]| -> (usize, usize) {
        let cx = (((p[0] - lo[0]) / (hi[0] - lo[0]).max(1e-300)) * ncell as f64) as usize;
        let cy = (((p[1] - lo[1]) / (hi[1] - lo[1]).max(1e-300)) * ncell as f64) as usize;
        (cx.min(ncell - 1), cy.min(ncell - 1))
    };
    let mut bins: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, &p) in nodes.iter().enumerate() {
        bins.entry(cell(p)).or_default().push(i);
    }
    let tol = 1e-10 * extent;

    // Duplicate nodes: only same-cell and neighbor-cell pairs can collide.
    for (&(cx, cy), members) in &bins {
        for &i in members {
            let pi = nodes[i];
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    let nc = (cx as i64 + dx, cy as i64 + dy);
                    if nc.0 < 0 || nc.1 < 0 {
                        continue;
                    }
                    if let Some(others) = bins.get(&(nc.0 as usize, nc.1 as usize)) {
                        for &j in others {
                            if j <= i {
                                continue;
                            }
                            let pj = nodes[j];
                            let d = ((pj[0] - pi[0]).powi(2) + (pj[1] - pi[1]).powi(2)).sqrt();
                            if d < tol {
                                return Err(Error::Mesh(format!(
                                    "nodes {i} and {j} coincide"
                                )));
                            }
                        }
                    }
                }
            }
        }
    }

    // T-junctions: a node strictly inside an edge it is not an endpoint of.
    for (&[a, b], _) in edges.iter() {
        let pa = nodes[a];
        let pb = nodes[b];
        let ex = pb[0] - pa[0];
        let ey = pb[1] - pa[1];
        let len2 = ex * ex + ey * ey;
        // Walk the grid cells the edge's bounding box covers.
        let (ca, cb) = (cell(pa), cell(pb));
        let (cx0, cx1) = (ca.0.min(cb.0), ca.0.max(cb.0));
        let (cy0, cy1) = (ca.1.min(cb.1), ca.1.max(cb.1));
        for cx in cx0.saturating_sub(1)..=(cx1 + 1).min(ncell - 1) {
            for cy in cy0.saturating_sub(1)..=(cy1 + 1).min(ncell - 1) {
                let Some(members) = bins.get(&(cx, cy)) else { continue };
                for &i in members {
                    if i == a || i == b {
                        continue;
                    }
                    let p = nodes[i];
                    let t = ((p[0] - pa[0]) * ex + (p[1] - pa[1]) * ey) / len2;
                    if t <= 0.0 || t >= 1.0 {
                        continue;
                    }
                    let qx = pa[0] + t * ex;
                    let qy = pa[1] + t * ey;
                    let d = ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt();
                    if d < tol {
                        return Err(Error::Mesh(format!(
                            "node {i} lies in the interior of edge ({a}, {b}); the mesh is not conforming"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Generates an `nx` by `ny` rectangle mesh of size `lx` by `ly` with the
/// crossed pattern (four triangles per cell around the cell center).
pub fn generate_rectangle(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    tags: &TagRule,
) -> Result<Mesh> {
    generate_rectangle_with_pattern(nx, ny, lx, ly, tags, MeshPattern::Crossed)
}

pub fn generate_rectangle_with_pattern(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    tags: &TagRule,
    pattern: MeshPattern,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("cell counts must be positive".into()));
    }
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::InvalidInput("rectangle side lengths must be positive".into()));
    }

    let corner = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }

    let mut triangles = Vec::new();
    match pattern {
        MeshPattern::Crossed => {
            let center_base = nodes.len();
            for j in 0..ny {
                for i in 0..nx {
                    nodes.push([
                        lx * (i as f64 + 0.5) / nx as f64,
                        ly * (j as f64 + 0.5) / ny as f64,
                    ]);
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    let c00 = corner(i, j);
                    let c10 = corner(i + 1, j);
                    let c11 = corner(i + 1, j + 1);
                    let c01 = corner(i, j + 1);
                    let m = center_base + j * nx + i;
                    triangles.push([c00, c10, m]);
                    triangles.push([c10, c11, m]);
                    triangles.push([c11, c01, m]);
                    triangles.push([c01, c00, m]);
                }
            }
        }
        MeshPattern::Diagonal => {
            for j in 0..ny {
                for i in 0..nx {
                    let c00 = corner(i, j);
                    let c10 = corner(i + 1, j);
                    let c11 = corner(i + 1, j + 1);
                    let c01 = corner(i, j + 1);
                    triangles.push([c00, c10, c11]);
                    triangles.push([c00, c11, c01]);
                }
            }
        }
    }

    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(([corner(i, 0), corner(i + 1, 0)], tags.bottom));
        boundary.push(([corner(i, ny), corner(i + 1, ny)], tags.top));
    }
    for j in 0..ny {
        boundary.push(([corner(0, j), corner(0, j + 1)], tags.left));
        boundary.push(([corner(nx, j), corner(nx, j + 1)], tags.right));
    }

    Mesh::new(nodes, triangles, boundary)
}

/// Serializes a mesh in the plain text format:
///
/// ```text
/// ermesh 1
/// nodes <N>
/// <x> <y>            (N lines)
/// triangles <M>
/// <i> <j> <k>        (M lines, zero-based, counter-clockwise)
/// boundary <B>
/// <i> <j> <S1|S2>    (B lines, zero-based)
/// ```
pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("ermesh 1\n");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.as_str());
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

/// Parses the format produced by [`format_mesh`] and validates the result
/// through [`Mesh::new`].
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    struct Lines<'a> {
        iter: std::iter::Enumerate<std::str::Lines<'a>>,
    }
    impl<'a> Lines<'a> {
        /// Next non-empty, non-comment line with its 1-based number.
        fn next(&mut self) -> Option<(usize, &'a str)> {
            for (i, line) in self.iter.by_ref() {
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Some((i + 1, t));
                }
            }
            None
        }
    }
    let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let mut lines = Lines { iter: text.lines().enumerate() };

    let (ln, header) = lines.next().ok_or(err(1, "empty file"))?;
    if header != "ermesh 1" {
        return Err(err(ln, "expected header `ermesh 1`"));
    }

    let expect_count = |lines: &mut Lines, kw: &str| -> Result<usize> {
        let (ln, l) = lines.next().ok_or(err(0, "unexpected end of file"))?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(kw) {
            return Err(err(ln, &format!("expected `{kw} <count>`")));
        }
        let n = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or(err(ln, &format!("expected `{kw} <count>`")))?;
        if parts.next().is_some() {
            return Err(err(ln, "trailing tokens"));
        }
        Ok(n)
    };

    let n_nodes = expect_count(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, l) = lines.next().ok_or(err(0, "unexpected end of file in node list"))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(ln, "expected two floating point coordinates"))?;
        if vals.len() != 2 {
            return Err(err(ln, "expected two floating point coordinates"));
        }
        nodes.push([vals[0], vals[1]]);
    }

    let n_tris = expect_count(&mut lines, "triangles")?;
    let mut triangles = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let (ln, l) = lines.next().ok_or(err(0, "unexpected end of file in triangle list"))?;
        let vals: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(ln, "expected three node indices"))?;
        if vals.len() != 3 {
            return Err(err(ln, "expected three node indices"));
        }
        triangles.push([vals[0], vals[1], vals[2]]);
    }

    let n_bnd = expect_count(&mut lines, "boundary")?;
    let mut boundary = Vec::with_capacity(n_bnd);
    for _ in 0..n_bnd {
        let (ln, l) = lines.next().ok_or(err(0, "unexpected end of file in boundary list"))?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err(ln, "expected `<i> <j> <S1|S2>`"));
        }
        let a = parts[0].parse::<usize>().map_err(|_| err(ln, "bad node index"))?;
        let b = parts[1].parse::<usize>().map_err(|_| err(ln, "bad node index"))?;
        let tag = BoundaryTag::parse(parts[2])
            .ok_or(err(ln, "boundary tag must be S1 or S2"))?;
        boundary.push(([a, b], tag));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected content after boundary list"));
    }

    Mesh::new(nodes, triangles, boundary)
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

/// Point-in-mesh queries and nearest-boundary-point projection, backed by a
/// uniform background grid over the bounding box.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    lo: [f64; 2],
    inv_cell: [f64; 2],
    ncell: [usize; 2],
    bins: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (lo, hi) = mesh.bbox();
        let ntri = mesh.triangles.len() as f64;
        let ncx = (ntri.sqrt().ceil() as usize).clamp(1, 512);
        let ncy = ncx;
        let wx = (hi[0] - lo[0]).max(1e-300);
        let wy = (hi[1] - lo[1]).max(1e-300);
        let mut bins = vec![Vec::new(); ncx * ncy];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(mesh.nodes[v][d]);
                    thi[d] = thi[d].max(mesh.nodes[v][d]);
                }
            }
            let cx0 = (((tlo[0] - lo[0]) / wx) * ncx as f64).floor().max(0.0) as usize;
            let cx1 = ((((thi[0] - lo[0]) / wx) * ncx as f64).floor() as usize).min(ncx - 1);
            let cy0 = (((tlo[1] - lo[1]) / wy) * ncy as f64).floor().max(0.0) as usize;
            let cy1 = ((((thi[1] - lo[1]) / wy) * ncy as f64).floor() as usize).min(ncy - 1);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    bins[cy * ncx + cx].push(t);
                }
            }
        }
        PointLocator {
            mesh,
            lo,
            inv_cell: [ncx as f64 / wx, ncy as f64 / wy],
            ncell: [ncx, ncy],
            bins,
        }
    }

    /// Finds a triangle containing `p` and returns its index with the
    /// barycentric coordinates of `p` in it. Points within a small
    /// tolerance of an element boundary count as inside.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let cx = ((p[0] - self.lo[0]) * self.inv_cell[0]).floor();
        let cy = ((p[1] - self.lo[1]) * self.inv_cell[1]).floor();
        if cx < 0.0 || cy < 0.0 {
            return None;
        }
        let (cx, cy) = (cx as usize, cy as usize);
        if cx >= self.ncell[0] || cy >= self.ncell[1] {
            return None;
        }
        for &t in &self.bins[cy * self.ncell[0] + cx] {
            if let Some(b) = self.barycentric_inside(t, p) {
                return Some((t, b));
            }
        }
        None
    }

    fn barycentric_inside(&self, t: usize, p: [f64; 2]) -> Option<[f64; 3]> {
        let tri = &self.mesh.triangles[t];
        let [a, b, c] = [
            self.mesh.nodes[tri[0]],
            self.mesh.nodes[tri[1]],
            self.mesh.nodes[tri[2]],
        ];
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l2 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l3 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        let l1 = 1.0 - l2 - l3;
        let tol = -1e-12;
        if l1 >= tol && l2 >= tol && l3 >= tol {
            Some([l1, l2, l3])
        } else {
            None
        }
    }

    /// Triangles whose bounding boxes may overlap the disc of the given
    /// center and radius. Over-approximates (by bounding boxes), never
    /// misses. Sorted and deduplicated.
    pub fn triangles_near(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        let clamp_cell = |v: f64, n: usize| -> usize {
            if v < 0.0 {
                0
            } else {
                (v as usize).min(n - 1)
            }
        };
        let cx0 = clamp_cell(((center[0] - radius) - self.lo[0]) * self.inv_cell[0], self.ncell[0]);
        let cx1 = clamp_cell(((center[0] + radius) - self.lo[0]) * self.inv_cell[0], self.ncell[0]);
        let cy0 = clamp_cell(((center[1] - radius) - self.lo[1]) * self.inv_cell[1], self.ncell[1]);
        let cy1 = clamp_cell(((center[1] + radius) - self.lo[1]) * self.inv_cell[1], self.ncell[1]);
        let mut out = Vec::new();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                out.extend_from_slice(&self.bins[cy * self.ncell[0] + cx]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Closest point on the boundary to `p`: returns the boundary edge
    /// index and the parameter t in [0, 1] along that edge.
    pub fn nearest_boundary_point(&self, p: [f64; 2]) -> (usize, f64) {
        let mut best = (0usize, 0.0f64);
        let mut best_d2 = f64::INFINITY;
        for (k, e) in self.mesh.boundary_edges.iter().enumerate() {
            let a = self.mesh.nodes[e.nodes[0]];
            let b = self.mesh.nodes[e.nodes[1]];
            let ex = b[0] - a[0];
            let ey = b[1] - a[1];
            let len2 = ex * ex + ey * ey;
            let t = (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0);
            let qx = a[0] + t * ex;
            let qy = a[1] + t * ey;
            let d2 = (p[0] - qx).powi(2) + (p[1] - qy).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = (k, t);
            }
        }
        best
    }
}
