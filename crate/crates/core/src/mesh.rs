//! P1 meshes: closed polygonal curves and triangulated planar domains.
//!
//! Meshes are immutable snapshots stamped with a time. Reference meshes are
//! built at `t = 0`; [`move_mesh`] pushes every node through the flow map and
//! keeps connectivity (and therefore every sparsity pattern) unchanged.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flowmap::FlowMap;
use crate::geom::{self, Point};

/// Finest disk resolution accepted by [`build_disk_mesh`].
pub const MIN_DISK_H: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    nodes: Vec<Point>,
    segments: Vec<[usize; 2]>,
    t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_node_ids: Vec<usize>,
    t: f64,
}

/// Walks `edges` as one closed cycle starting from `edges[0]`, returning the
/// visited nodes in order. Every node touched by `edges` must have exactly
/// one outgoing and one incoming edge.
fn single_cycle(edges: &[[usize; 2]], n_nodes: usize) -> Result<Vec<usize>> {
    if edges.len() < 3 {
        return Err(Error::InvalidArgument(format!("a closed cycle needs at least 3 edges, got {}", edges.len())));
    }
    let mut next = alloc::vec![usize::MAX; n_nodes];
    let mut indeg = alloc::vec![0usize; n_nodes];
    for &[a, b] in edges {
        if a >= n_nodes || b >= n_nodes || a == b {
            return Err(Error::InvalidArgument(format!("bad edge ({a}, {b})")));
        }
        if next[a] != usize::MAX {
            return Err(Error::InvalidArgument(format!("node {a} starts two edges")));
        }
        next[a] = b;
        indeg[b] += 1;
        if indeg[b] > 1 {
            return Err(Error::InvalidArgument(format!("node {b} ends two edges")));
        }
    }
    let start = edges[0][0];
    let mut order = Vec::with_capacity(edges.len());
    let mut cur = start;
    loop {
        order.push(cur);
        cur = next[cur];
        if cur == usize::MAX {
            return Err(Error::InvalidArgument("edge chain is not closed".into()));
        }
        if cur == start {
            break;
        }
        if order.len() > edges.len() {
            return Err(Error::InvalidArgument("edges do not form a single cycle".into()));
        }
    }
    if order.len() != edges.len() {
        return Err(Error::InvalidArgument(format!(
            "edges form more than one cycle (first cycle has {} of {} edges)",
            order.len(),
            edges.len()
        )));
    }
    Ok(order)
}

impl SurfaceMesh {
    /// Validates that `segments` form one closed cycle through every node and
    /// that no segment is collapsed.
    pub fn new(nodes: Vec<Point>, segments: Vec<[usize; 2]>, t: f64) -> Result<Self> {
        let order = single_cycle(&segments, nodes.len())?;
        if order.len() != nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "cycle visits {} of {} nodes",
                order.len(),
                nodes.len()
            )));
        }
        let mesh = Self { nodes, segments, t };
        mesh.check_lengths()?;
        Ok(mesh)
    }

    fn check_lengths(&self) -> Result<()> {
        for (e, &[a, b]) in self.segments.iter().enumerate() {
            if !(geom::dist(self.nodes[a], self.nodes[b]) > 0.0) {
                return Err(Error::GeometryDegeneracy(format!("segment {e} has zero length at t = {}", self.t)));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn segments(&self) -> &[[usize; 2]] {
        &self.segments
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_length(&self, e: usize) -> f64 {
        let [a, b] = self.segments[e];
        geom::dist(self.nodes[a], self.nodes[b])
    }

    pub fn length(&self) -> f64 {
        (0..self.segments.len()).map(|e| self.segment_length(e)).sum()
    }

    pub fn mesh_size(&self) -> f64 {
        (0..self.segments.len()).map(|e| self.segment_length(e)).fold(0.0, f64::max)
    }

    /// Ratio of shortest to longest segment.
    pub fn quality(&self) -> f64 {
        let (lo, hi) = (0..self.segments.len())
            .map(|e| self.segment_length(e))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));
        lo / hi
    }

    /// Pushes the nodes of a reference snapshot through `map` to time `t`.
    pub fn moved(&self, map: &FlowMap, t: f64) -> Result<Self> {
        if self.t != 0.0 {
            return Err(Error::InvalidArgument(format!("move_mesh needs a reference snapshot, got t = {}", self.t)));
        }
        let nodes = self.nodes.iter().map(|&x| map.evaluate(t, x)).collect::<Result<Vec<_>>>()?;
        let mesh = Self { nodes, segments: self.segments.clone(), t };
        mesh.check_lengths()?;
        Ok(mesh)
    }
}

impl BulkMesh {
    /// Validates orientation of every triangle and that `boundary_edges` form
    /// a single closed cycle; `boundary_node_ids` is derived from that cycle.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<[usize; 2]>, t: f64) -> Result<Self> {
        for tri in &triangles {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidArgument(format!("triangle {tri:?} references a missing node")));
            }
        }
        let boundary_node_ids = single_cycle(&boundary_edges, nodes.len())?;
        let mesh = Self { nodes, triangles, boundary_edges, boundary_node_ids, t };
        mesh.check_orientation()?;
        Ok(mesh)
    }

    fn check_orientation(&self) -> Result<()> {
        for (k, &[a, b, c]) in self.triangles.iter().enumerate() {
            let area2 = geom::cross3(self.nodes[a], self.nodes[b], self.nodes[c]);
            if !(area2 > 0.0) {
                return Err(Error::GeometryDegeneracy(format!(
                    "triangle {k} ({a}, {b}, {c}) is inverted or flat at t = {} (signed area {})",
                    self.t,
                    0.5 * area2
                )));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Boundary nodes in cycle order, starting at the first node of the first boundary edge.
    pub fn boundary_node_ids(&self) -> &[usize] {
        &self.boundary_node_ids
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Indices of the nodes not on the boundary, increasing.
    pub fn interior_node_ids(&self) -> Vec<usize> {
        let mut on_boundary = alloc::vec![false; self.nodes.len()];
        for &i in &self.boundary_node_ids {
            on_boundary[i] = true;
        }
        (0..self.nodes.len()).filter(|&i| !on_boundary[i]).collect()
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k];
        0.5 * geom::cross3(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.triangle_area(k)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|&[a, b]| geom::dist(self.nodes[a], self.nodes[b])).sum()
    }

    pub fn mesh_size(&self) -> f64 {
        let mut h = 0.0f64;
        for &[a, b, c] in &self.triangles {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                h = h.max(geom::dist(self.nodes[p], self.nodes[q]));
            }
        }
        h
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut best = PI;
        for &[a, b, c] in &self.triangles {
            let p = [self.nodes[a], self.nodes[b], self.nodes[c]];
            for i in 0..3 {
                let u = geom::sub(p[(i + 1) % 3], p[i]);
                let v = geom::sub(p[(i + 2) % 3], p[i]);
                let cos = geom::dot(u, v) / (geom::norm(u) * geom::norm(v));
                best = best.min(libm::acos(cos.clamp(-1.0, 1.0)));
            }
        }
        best
    }

    /// The boundary cycle as a curve mesh; node `k` of the curve is bulk node
    /// `boundary_node_ids()[k]`.
    pub fn boundary_curve(&self) -> SurfaceMesh {
        let n = self.boundary_node_ids.len();
        let nodes = self.boundary_node_ids.iter().map(|&i| self.nodes[i]).collect();
        let segments = (0..n).map(|k| [k, (k + 1) % n]).collect();
        SurfaceMesh { nodes, segments, t: self.t }
    }

    pub fn moved(&self, map: &FlowMap, t: f64) -> Result<Self> {
        if self.t != 0.0 {
            return Err(Error::InvalidArgument(format!("move_mesh needs a reference snapshot, got t = {}", self.t)));
        }
        let nodes = self.nodes.iter().map(|&x| map.evaluate(t, x)).collect::<Result<Vec<_>>>()?;
        let mesh = Self {
            nodes,
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            boundary_node_ids: self.boundary_node_ids.clone(),
            t,
        };
        mesh.check_orientation()?;
        Ok(mesh)
    }
}

/// Common surface of both mesh kinds.
pub trait MeshSnapshot: Sized {
    fn time(&self) -> f64;
    fn nodes(&self) -> &[Point];
    fn mesh_size(&self) -> f64;
    fn moved(&self, map: &FlowMap, t: f64) -> Result<Self>;
}

impl MeshSnapshot for SurfaceMesh {
    fn time(&self) -> f64 {
        self.t
    }
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    fn mesh_size(&self) -> f64 {
        SurfaceMesh::mesh_size(self)
    }
    fn moved(&self, map: &FlowMap, t: f64) -> Result<Self> {
        SurfaceMesh::moved(self, map, t)
    }
}

impl MeshSnapshot for BulkMesh {
    fn time(&self) -> f64 {
        self.t
    }
    fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    fn mesh_size(&self) -> f64 {
        BulkMesh::mesh_size(self)
    }
    fn moved(&self, map: &FlowMap, t: f64) -> Result<Self> {
        BulkMesh::moved(self, map, t)
    }
}

pub fn move_mesh<M: MeshSnapshot>(mesh: &M, map: &FlowMap, t: f64) -> Result<M> {
    mesh.moved(map, t)
}

pub fn mesh_size<M: MeshSnapshot>(mesh: &M) -> f64 {
    mesh.mesh_size()
}

/// Regular `n`-gon inscribed in the unit circle, node `k` at angle `2πk/n`.
pub fn build_circle_mesh(n: usize) -> Result<SurfaceMesh> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("a circle mesh needs at least 3 segments, got {n}")));
    }
    let nodes = (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [libm::cos(a), libm::sin(a)]
        })
        .collect();
    let segments = (0..n).map(|k| [k, (k + 1) % n]).collect();
    SurfaceMesh::new(nodes, segments, 0.0)
}

/// Number of concentric rings used for a given target size.
pub fn disk_ring_count(h_target: f64) -> usize {
    libm::ceil(1.0 / h_target - 1e-9) as usize
}

/// Concentric-ring triangulation of the unit disk.
///
/// Ring `j = 1..m` (`m = ⌈1/h⌉`) sits at radius `j/m` with `⌈2πj⌉` equally
/// spaced nodes starting at angle 0; node 0 is the centre. Consecutive rings
/// are zipped by angle. Nodes are numbered ring by ring, so the boundary ring
/// is the last block and matrix bandwidth stays near the boundary node count.
pub fn build_disk_mesh(h_target: f64) -> Result<BulkMesh> {
    if !(h_target.is_finite() && h_target > 0.0 && h_target < 1.0) {
        return Err(Error::InvalidArgument(format!("h_target must lie in (0, 1), got {h_target}")));
    }
    if h_target < MIN_DISK_H {
        return Err(Error::InvalidArgument(format!("h_target {h_target} below the supported minimum {MIN_DISK_H}")));
    }
    let m = disk_ring_count(h_target);
    let counts: Vec<usize> = (1..=m).map(|j| libm::ceil(2.0 * PI * j as f64 - 1e-9) as usize).collect();
    let mut offsets = Vec::with_capacity(m);
    let mut nodes = alloc::vec![[0.0, 0.0]];
    for (j, &count) in counts.iter().enumerate() {
        offsets.push(nodes.len());
        let r = (j + 1) as f64 / m as f64;
        for i in 0..count {
            let a = 2.0 * PI * i as f64 / count as f64;
            nodes.push([r * libm::cos(a), r * libm::sin(a)]);
        }
    }
    let mut triangles = Vec::new();
    let first = counts[0];
    for i in 0..first {
        triangles.push([0, offsets[0] + i, offsets[0] + (i + 1) % first]);
    }
    for j in 0..m - 1 {
        let (na, nb) = (counts[j], counts[j + 1]);
        let (oa, ob) = (offsets[j], offsets[j + 1]);
        let (mut i, mut k) = (0usize, 0usize);
        while i < na || k < nb {
            let next_inner = (i + 1) as f64 / na as f64;
            let next_outer = (k + 1) as f64 / nb as f64;
            if k == nb || (i < na && next_inner < next_outer) {
                triangles.push([oa + i % na, ob + k % nb, oa + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([oa + i % na, ob + k % nb, ob + (k + 1) % nb]);
                k += 1;
            }
        }
    }
    let ob = offsets[m - 1];
    let nb = counts[m - 1];
    let boundary_edges = (0..nb).map(|k| [ob + k, ob + (k + 1) % nb]).collect();
    BulkMesh::new(nodes, triangles, boundary_edges, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmap::FlowFamily;

    #[test]
    fn small_circles() {
        let sq = build_circle_mesh(4).unwrap();
        assert!((sq.length() - 4.0 * libm::sqrt(2.0)).abs() < 1e-12);
        assert!((sq.mesh_size() - libm::sqrt(2.0)).abs() < 1e-15);
        let tri = build_circle_mesh(3).unwrap();
        assert_eq!((tri.n_nodes(), tri.segments().len()), (3, 3));
        assert!(build_circle_mesh(2).is_err());
    }

    #[test]
    fn fine_circle_perimeter() {
        let n = 256;
        let c = build_circle_mesh(n).unwrap();
        let exact = 2.0 * n as f64 * libm::sin(PI / n as f64);
        assert!((c.length() - exact).abs() < 1e-12);
        assert!((c.length() - 2.0 * PI).abs() < 1e-3);
        let big = build_circle_mesh(4096).unwrap();
        assert!((big.mesh_size() - 2.0 * PI / 4096.0).abs() < 1e-8);
    }

    #[test]
    fn broken_cycles_rejected() {
        let nodes = alloc::vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(SurfaceMesh::new(nodes.clone(), alloc::vec![[0, 1], [1, 0], [2, 3], [3, 2]], 0.0).is_err());
        assert!(SurfaceMesh::new(nodes.clone(), alloc::vec![[0, 1], [1, 2], [2, 0]], 0.0).is_err());
        let dup = alloc::vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(
            SurfaceMesh::new(dup, alloc::vec![[0, 1], [1, 2], [2, 0]], 0.0),
            Err(Error::GeometryDegeneracy(_))
        ));
    }

    #[test]
    fn disk_areas() {
        let coarse = build_disk_mesh(0.5).unwrap();
        assert!((coarse.area() - PI).abs() / PI < 0.05);
        let fine = build_disk_mesh(0.1).unwrap();
        assert!((fine.area() - PI).abs() / PI < 0.005);
        for mesh in [&coarse, &fine] {
            let nb = mesh.boundary_node_ids().len();
            let exact = 0.5 * nb as f64 * libm::sin(2.0 * PI / nb as f64);
            assert!((mesh.area() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_edge_bound_and_boundary() {
        for &h in &[0.5, 0.3, 0.2, 0.1, 0.07, 0.05, 0.025] {
            let mesh = build_disk_mesh(h).unwrap();
            assert!(mesh.mesh_size() <= 1.6 * h, "h = {h}: max edge {}", mesh.mesh_size());
            for &i in mesh.boundary_node_ids() {
                assert!((geom::norm(mesh.nodes()[i]) - 1.0).abs() < 1e-14);
            }
            assert!(mesh.min_angle() > 20f64.to_radians(), "h = {h}: {}", mesh.min_angle());
            // Euler characteristic of a disk: V - E + F = 1.
            let v = mesh.n_nodes() as i64;
            let f = mesh.triangles().len() as i64;
            let b = mesh.boundary_edges().len() as i64;
            let e = (3 * f + b) / 2;
            assert_eq!(v - e + f, 1);
        }
        assert!(build_disk_mesh(0.0).is_err());
        assert!(build_disk_mesh(1.0).is_err());
        assert!(build_disk_mesh(1e-4).is_err());
    }

    #[test]
    fn motion_at_time_zero_is_identity() {
        let map = FlowMap::new(FlowFamily::OscillatingEllipse, 1.0).unwrap();
        let c = build_circle_mesh(16).unwrap();
        assert_eq!(move_mesh(&c, &map, 0.0).unwrap().nodes(), c.nodes());
        let d = build_disk_mesh(0.3).unwrap();
        assert_eq!(move_mesh(&d, &map, 0.0).unwrap().nodes(), d.nodes());
    }

    #[test]
    fn dilation_moves_and_scales() {
        let map = FlowMap::new(FlowFamily::ExpandingCircle, 2.0).unwrap();
        let c = build_circle_mesh(64).unwrap();
        let moved = move_mesh(&c, &map, 1.0).unwrap();
        assert_eq!(moved.time(), 1.0);
        for p in moved.nodes() {
            assert!((geom::norm(*p) - 1.5).abs() < 1e-12);
        }
        assert!((mesh_size(&moved) - 1.5 * mesh_size(&c)).abs() < 1e-12);
        assert!(move_mesh(&moved, &map, 0.5).is_err());
    }

    #[test]
    fn ellipse_area_of_moved_disk() {
        let map = FlowMap::new(FlowFamily::OscillatingEllipse, 1.0).unwrap();
        let d = build_disk_mesh(0.2).unwrap();
        let moved = move_mesh(&d, &map, 0.25).unwrap();
        assert!((moved.area() - 1.25 * PI).abs() / (1.25 * PI) < 0.02);
        assert!((moved.area() - 1.25 * d.area()).abs() < 1e-12);
    }

    #[test]
    fn inverted_triangle_is_named() {
        let nodes = alloc::vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = BulkMesh::new(nodes, alloc::vec![[0, 2, 1]], alloc::vec![[0, 1], [1, 2], [2, 0]], 0.0).unwrap_err();
        match err {
            Error::GeometryDegeneracy(msg) => assert!(msg.contains("triangle 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn boundary_curve_matches_ring() {
        let d = build_disk_mesh(0.25).unwrap();
        let curve = d.boundary_curve();
        assert_eq!(curve.n_nodes(), d.boundary_node_ids().len());
        assert!((curve.length() - d.boundary_length()).abs() < 1e-15);
        let reference = build_circle_mesh(curve.n_nodes()).unwrap();
        for (a, b) in curve.nodes().iter().zip(reference.nodes()) {
            assert!(geom::dist(*a, *b) < 1e-12);
        }
    }
}
