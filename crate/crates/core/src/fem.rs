//! P1 assembly on curve and triangle meshes.
//!
//! Element integrals are exact for P1 basis functions with element-wise
//! constant coefficients; nodal coefficient samples are averaged over each
//! element. Mass matrices are consistent (never lumped).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::{BulkMesh, SurfaceMesh};

/// Whether a nodal function lives on a curve or on a planar domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeKind {
    Surface,
    Bulk,
}

/// Nodal coefficients of a P1 function on one mesh snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub values: Vec<f64>,
    pub mesh_time: f64,
    pub kind: FeKind,
}

impl FeFunction {
    pub fn on_surface(mesh: &SurfaceMesh, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.n_nodes(), values.len())?;
        Ok(Self { values, mesh_time: mesh.time(), kind: FeKind::Surface })
    }

    pub fn on_bulk(mesh: &BulkMesh, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.n_nodes(), values.len())?;
        Ok(Self { values, mesh_time: mesh.time(), kind: FeKind::Bulk })
    }
}

/// Velocity field `b` of the bulk problem relative to the mesh velocity `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advection {
    /// `b = 0`.
    Zero,
    /// `b = w`: the material moves with the mesh, so `p = b − w = 0`.
    Material,
    /// Spatially constant `b`.
    Constant([f64; 2]),
}

/// Scalar coefficients of the bilinear forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormCoefficients {
    /// Diffusion constant `D`; 1 for the surface and coupled problems.
    pub diffusion: f64,
    pub advection: Advection,
    /// Robin weights of the bulk-surface coupling.
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FormCoefficients {
    fn default() -> Self {
        Self { diffusion: 1.0, advection: Advection::Material, alpha: 1.0, beta: 1.0 }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Assembly entry points shared by both mesh kinds.
pub trait P1Mesh {
    fn mass(&self) -> SparseMatrix;
    fn stiffness(&self) -> SparseMatrix;
    /// Mass matrix weighted by an element-averaged nodal coefficient.
    fn weighted_mass(&self, coeff: &[f64]) -> Result<SparseMatrix>;
    /// `‖u_h − u‖_{L²}` by Gauss quadrature on each element.
    fn l2_error(&self, values: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<f64>;
    fn measure(&self) -> f64;
}

const SEG_MASS: [[f64; 2]; 2] = [[2.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 6.0]];
const TRI_MASS: [[f64; 3]; 3] = [
    [2.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0],
    [1.0 / 12.0, 2.0 / 12.0, 1.0 / 12.0],
    [1.0 / 12.0, 1.0 / 12.0, 2.0 / 12.0],
];

impl P1Mesh for SurfaceMesh {
    fn mass(&self) -> SparseMatrix {
        self.weighted_mass(&alloc::vec![1.0; self.n_nodes()]).expect("length matches")
    }

    fn stiffness(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.n_nodes(), self.n_nodes(), 4 * self.segments().len());
        for (e, &[i, j]) in self.segments().iter().enumerate() {
            let k = 1.0 / self.segment_length(e);
            b.push(i, i, k);
            b.push(i, j, -k);
            b.push(j, i, -k);
            b.push(j, j, k);
        }
        b.build()
    }

    fn weighted_mass(&self, coeff: &[f64]) -> Result<SparseMatrix> {
        check_len(self.n_nodes(), coeff.len())?;
        let mut b = TripletBuilder::with_capacity(self.n_nodes(), self.n_nodes(), 4 * self.segments().len());
        for (e, &seg) in self.segments().iter().enumerate() {
            let c = 0.5 * (coeff[seg[0]] + coeff[seg[1]]);
            let l = self.segment_length(e);
            for a in 0..2 {
                for bb in 0..2 {
                    b.push(seg[a], seg[bb], c * l * SEG_MASS[a][bb]);
                }
            }
        }
        Ok(b.build())
    }

    fn l2_error(&self, values: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<f64> {
        check_len(self.n_nodes(), values.len())?;
        let g = 0.5 / libm::sqrt(3.0);
        let mut sum = 0.0;
        for (e, &[i, j]) in self.segments().iter().enumerate() {
            let l = self.segment_length(e);
            let (p, q) = (self.nodes()[i], self.nodes()[j]);
            for s in [0.5 - g, 0.5 + g] {
                let x = geom::add(p, geom::scale(s, geom::sub(q, p)));
                let uh = (1.0 - s) * values[i] + s * values[j];
                let d = uh - exact(x);
                sum += 0.5 * l * d * d;
            }
        }
        Ok(libm::sqrt(sum))
    }

    fn measure(&self) -> f64 {
        self.length()
    }
}

/// Gradients of the three barycentric coordinates and the triangle area.
fn barycentric_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let area2 = geom::cross3(p[0], p[1], p[2]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        // Rotate the opposite edge by -90° and scale.
        g[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    (g, 0.5 * area2)
}

impl BulkMesh {
    fn corners(&self, k: usize) -> ([usize; 3], [Point; 3]) {
        let tri = self.triangles()[k];
        let n = self.nodes();
        (tri, [n[tri[0]], n[tri[1]], n[tri[2]]])
    }
}

impl P1Mesh for BulkMesh {
    fn mass(&self) -> SparseMatrix {
        self.weighted_mass(&alloc::vec![1.0; self.n_nodes()]).expect("length matches")
    }

    fn stiffness(&self) -> SparseMatrix {
        let n = self.n_nodes();
        let mut b = TripletBuilder::with_capacity(n, n, 9 * self.triangles().len());
        for k in 0..self.triangles().len() {
            let (tri, p) = self.corners(k);
            let (g, area) = barycentric_gradients(p);
            for a in 0..3 {
                for c in 0..3 {
                    b.push(tri[a], tri[c], area * geom::dot(g[a], g[c]));
                }
            }
        }
        b.build()
    }

    fn weighted_mass(&self, coeff: &[f64]) -> Result<SparseMatrix> {
        check_len(self.n_nodes(), coeff.len())?;
        let n = self.n_nodes();
        let mut b = TripletBuilder::with_capacity(n, n, 9 * self.triangles().len());
        for k in 0..self.triangles().len() {
            let (tri, _) = self.corners(k);
            let area = self.triangle_area(k);
            let c = (coeff[tri[0]] + coeff[tri[1]] + coeff[tri[2]]) / 3.0;
            for a in 0..3 {
                for d in 0..3 {
                    b.push(tri[a], tri[d], c * area * TRI_MASS[a][d]);
                }
            }
        }
        Ok(b.build())
    }

    fn l2_error(&self, values: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<f64> {
        check_len(self.n_nodes(), values.len())?;
        const QP: [[f64; 3]; 3] = [
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        ];
        let mut sum = 0.0;
        for k in 0..self.triangles().len() {
            let (tri, p) = self.corners(k);
            let area = self.triangle_area(k);
            for lam in QP {
                let x = [
                    lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                    lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
                ];
                let uh = lam[0] * values[tri[0]] + lam[1] * values[tri[1]] + lam[2] * values[tri[2]];
                let d = uh - exact(x);
                sum += area / 3.0 * d * d;
            }
        }
        Ok(libm::sqrt(sum))
    }

    fn measure(&self) -> f64 {
        self.area()
    }
}

/// Consistent mass matrix `∫ φ_i φ_j`.
pub fn assemble_mass<M: P1Mesh>(mesh: &M) -> SparseMatrix {
    mesh.mass()
}

/// Stiffness matrix `∫ ∇φ_i·∇φ_j` (tangential gradients on curves).
pub fn assemble_stiffness<M: P1Mesh>(mesh: &M) -> SparseMatrix {
    mesh.stiffness()
}

/// `λ`-form matrix `∫ φ_i φ_j div_w` with `div_w` sampled at the nodes.
pub fn assemble_lambda<M: P1Mesh>(mesh: &M, div_w: &[f64]) -> Result<SparseMatrix> {
    mesh.weighted_mass(div_w)
}

/// `∫ (p·∇φ_j) φ_i + c φ_j φ_i` with `p`, `c` averaged per triangle. Row `i`
/// is the test function, column `j` the trial function.
pub fn assemble_advection(mesh: &BulkMesh, p: &[Point], c: &[f64]) -> Result<SparseMatrix> {
    let n = mesh.n_nodes();
    check_len(n, p.len())?;
    check_len(n, c.len())?;
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.triangles().len());
    for k in 0..mesh.triangles().len() {
        let (tri, pts) = mesh.corners(k);
        let (g, area) = barycentric_gradients(pts);
        let pe = geom::scale(1.0 / 3.0, geom::add(geom::add(p[tri[0]], p[tri[1]]), p[tri[2]]));
        let ce = (c[tri[0]] + c[tri[1]] + c[tri[2]]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                let v = geom::dot(pe, g[j]) * area / 3.0 + ce * area * TRI_MASS[i][j];
                b.push(tri[i], tri[j], v);
            }
        }
    }
    Ok(b.build())
}

/// Boundary mass `∫_Γ φ_i φ_j` over all bulk nodes; interior rows are empty.
pub fn assemble_boundary_mass(mesh: &BulkMesh) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 4 * mesh.boundary_edges().len());
    for &edge in mesh.boundary_edges() {
        let l = geom::dist(mesh.nodes()[edge[0]], mesh.nodes()[edge[1]]);
        for a in 0..2 {
            for c in 0..2 {
                b.push(edge[a], edge[c], l * SEG_MASS[a][c]);
            }
        }
    }
    b.build()
}

/// Checks that curve node `k` coincides with bulk boundary node
/// `boundary_node_ids()[k]`.
pub fn check_alignment(bulk: &BulkMesh, surf: &SurfaceMesh) -> Result<()> {
    let ids = bulk.boundary_node_ids();
    if ids.len() != surf.n_nodes() {
        return Err(Error::Alignment(format!(
            "surface mesh has {} nodes, bulk boundary has {}",
            surf.n_nodes(),
            ids.len()
        )));
    }
    for (k, &i) in ids.iter().enumerate() {
        let d = geom::dist(surf.nodes()[k], bulk.nodes()[i]);
        if !(d <= 1e-12) {
            return Err(Error::Alignment(format!("surface node {k} is {d:e} away from bulk node {i}")));
        }
    }
    Ok(())
}

/// Rectangular `n_surface × n_bulk` matrix `∫_Γ ψ_k φ_i` pairing surface
/// unknowns (rows) with bulk traces (columns).
pub fn assemble_coupling(bulk: &BulkMesh, surf: &SurfaceMesh) -> Result<SparseMatrix> {
    check_alignment(bulk, surf)?;
    let ids = bulk.boundary_node_ids();
    let mut b = TripletBuilder::with_capacity(surf.n_nodes(), bulk.n_nodes(), 4 * surf.segments().len());
    for (e, &seg) in surf.segments().iter().enumerate() {
        let l = surf.segment_length(e);
        for a in 0..2 {
            for c in 0..2 {
                b.push(seg[a], ids[seg[c]], l * SEG_MASS[a][c]);
            }
        }
    }
    Ok(b.build())
}

pub fn l2_error<M: P1Mesh>(mesh: &M, fe: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<f64> {
    mesh.l2_error(fe, exact)
}

/// Nodal interpolant of `f`.
pub fn interpolate(nodes: &[Point], f: impl Fn(Point) -> f64) -> Vec<f64> {
    nodes.iter().map(|&x| f(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_circle_mesh, build_disk_mesh};
    use core::f64::consts::PI;

    fn segment(l: f64) -> SurfaceMesh {
        // A thin triangle whose first segment has length `l`.
        SurfaceMesh::new(alloc::vec![[0.0, 0.0], [l, 0.0], [0.5 * l, 1.0]], alloc::vec![[0, 1], [1, 2], [2, 0]], 0.0)
            .unwrap()
    }

    #[test]
    fn segment_element_blocks() {
        let l = 0.7;
        let mesh = segment(l);
        let m = assemble_mass(&mesh);
        let s = assemble_stiffness(&mesh);
        let (l1, l2) = (mesh.segment_length(1), mesh.segment_length(2));
        let mb = [[m.get(0, 0), m.get(0, 1)], [m.get(1, 0), m.get(1, 1)]];
        assert!((mb[0][1] - l / 6.0).abs() < 1e-15);
        assert!((mb[0][0] - (2.0 * l / 6.0 + 2.0 * l2 / 6.0)).abs() < 1e-15);
        assert!((mb[1][1] - (2.0 * l / 6.0 + 2.0 * l1 / 6.0)).abs() < 1e-15);
        assert!((s.get(0, 1) + 1.0 / l).abs() < 1e-15);
        assert!((s.get(0, 0) - (1.0 / l + 1.0 / l2)).abs() < 1e-14);
    }

    #[test]
    fn partition_of_unity() {
        let c = build_circle_mesh(37).unwrap();
        let m = assemble_mass(&c);
        let total: f64 = m.row_sums().iter().sum();
        assert!((total - c.length()).abs() < 1e-12);
        let d = build_disk_mesh(0.2).unwrap();
        let md = assemble_mass(&d);
        let total: f64 = md.row_sums().iter().sum();
        assert!((total - d.area()).abs() < 1e-12);
        for s in [assemble_stiffness(&c), assemble_stiffness(&d)] {
            assert!(s.row_sums().iter().all(|r| r.abs() < 1e-12));
        }
    }

    #[test]
    fn circle_integrals_of_cosine() {
        // ∫_{S¹} x₁² = ∫_{S¹} |∇_Γ x₁|² = π, reached at second order.
        let err = |n: usize| {
            let c = build_circle_mesh(n).unwrap();
            let u = interpolate(c.nodes(), |x| x[0]);
            let em = (assemble_mass(&c).bilinear(&u, &u).unwrap() - PI).abs();
            let es = (assemble_stiffness(&c).bilinear(&u, &u).unwrap() - PI).abs();
            (em, es)
        };
        let (m1, s1) = err(64);
        let (m2, s2) = err(128);
        assert!(m1 < 1e-2 && s1 < 1e-2, "{m1} {s1}");
        assert!((m1 / m2 - 4.0).abs() < 0.1, "{}", m1 / m2);
        assert!((s1 / s2 - 4.0).abs() < 0.1, "{}", s1 / s2);
    }

    #[test]
    fn lambda_matrix_cases() {
        let c = build_circle_mesh(20).unwrap();
        let zero = assemble_lambda(&c, &alloc::vec![0.0; 20]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let m = assemble_mass(&c);
        let l = assemble_lambda(&c, &alloc::vec![2.5; 20]).unwrap();
        let diff = l.linear_combination(1.0, &m, -2.5).unwrap();
        assert!(diff.max_abs() < 1e-14);
        assert!(assemble_lambda(&c, &[1.0]).is_err());
    }

    #[test]
    fn advection_reduces_to_mass_and_divergence() {
        let d = build_disk_mesh(0.1).unwrap();
        let n = d.n_nodes();
        let zero = assemble_advection(&d, &alloc::vec![[0.0; 2]; n], &alloc::vec![0.0; n]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let mass_like = assemble_advection(&d, &alloc::vec![[0.0; 2]; n], &alloc::vec![1.0; n]).unwrap();
        assert!(mass_like.linear_combination(1.0, &assemble_mass(&d), -1.0).unwrap().max_abs() < 1e-14);
        let a = assemble_advection(&d, &alloc::vec![[1.0, 0.0]; n], &alloc::vec![0.0; n]).unwrap();
        let u = interpolate(d.nodes(), |x| x[0]);
        let ones = alloc::vec![1.0; n];
        let v = a.bilinear(&ones, &u).unwrap();
        assert!((v - PI).abs() / PI < 0.01);
        assert!((v - d.area()).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_and_coupling() {
        let d = build_disk_mesh(0.1).unwrap();
        let b = assemble_boundary_mass(&d);
        let ones = alloc::vec![1.0; d.n_nodes()];
        let len = b.bilinear(&ones, &ones).unwrap();
        assert!((len - d.boundary_length()).abs() < 1e-12);
        assert!((len - 2.0 * PI).abs() / (2.0 * PI) < 0.005);
        for i in d.interior_node_ids() {
            assert_eq!(b.row(i).count(), 0);
        }
        let curve = d.boundary_curve();
        let c = assemble_coupling(&d, &curve).unwrap();
        let ids = d.boundary_node_ids();
        let restricted = b.submatrix(ids, ids);
        let cb = c.submatrix(&(0..curve.n_nodes()).collect::<Vec<_>>(), ids);
        assert!(cb.linear_combination(1.0, &restricted, -1.0).unwrap().max_abs() < 1e-15);
        let u = interpolate(d.nodes(), |x| x[0]);
        let g = interpolate(curve.nodes(), |x| x[0]);
        assert!((c.bilinear(&g, &u).unwrap() - PI).abs() / PI < 0.01);
        let wrong = build_circle_mesh(curve.n_nodes() + 1).unwrap();
        assert!(matches!(assemble_coupling(&d, &wrong), Err(Error::Alignment(_))));
    }

    #[test]
    fn l2_error_basics() {
        let d = build_disk_mesh(0.3).unwrap();
        let lin = |x: Point| 2.0 * x[0] - x[1] + 0.5;
        let u = interpolate(d.nodes(), lin);
        assert!(l2_error(&d, &u, &lin).unwrap() <= 1e-12);
        let c = build_circle_mesh(400).unwrap();
        let e = l2_error(&c, &alloc::vec![0.0; 400], &|_| 1.0).unwrap();
        assert!((e - libm::sqrt(2.0 * PI)).abs() < 1e-4);
    }

    #[test]
    fn symmetric_forms() {
        let d = build_disk_mesh(0.15).unwrap();
        let coeff: Vec<f64> = d.nodes().iter().map(|x| 1.0 + x[0] * x[1]).collect();
        for a in [assemble_mass(&d), assemble_stiffness(&d), assemble_lambda(&d, &coeff).unwrap()] {
            assert!(a.max_asymmetry() <= 1e-14);
        }
    }
}
