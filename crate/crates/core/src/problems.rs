//! Assembly recipes for the four model problems.
//!
//! * surface heat: `u̇ − DΔ_Γu + u∇_Γ·w = f` on a moving closed curve (`b = w`);
//! * bulk: `u̇ + (b − w)·∇u + u∇·b − DΔu = f` in a moving domain, `u = 0` on its boundary;
//! * coupled bulk–surface system with the Robin condition `∇u·ν = βv − αu`;
//! * dynamic boundary problem: `Δv = 0` inside, `u̇ + ∂_ν v + u = f` on the boundary.
//!
//! Each recipe turns one mesh snapshot into a [`LevelSystem`] for the time
//! stepper. The `λ` term of the transport formula is carried by the moving
//! mass matrix, so recipes whose strong form has no `u∇·w` term subtract
//! the `λ` matrix explicitly.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{self, Advection, FormCoefficients, P1Mesh};
use crate::flowmap::{FlowFamily, FlowMap};
use crate::geom::{self, Point};
use crate::linalg::{self, BandLu, DenseMatrix, SparseMatrix, TripletBuilder};
use crate::mesh::{self, BulkMesh, SurfaceMesh};
use crate::timestep::{LevelSystem, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    SurfaceHeat,
    Bulk,
    CoupledBulkSurface,
    DynamicBoundary,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] =
        [ProblemKind::SurfaceHeat, ProblemKind::Bulk, ProblemKind::CoupledBulkSurface, ProblemKind::DynamicBoundary];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::SurfaceHeat => "surface_heat",
            ProblemKind::Bulk => "bulk",
            ProblemKind::CoupledBulkSurface => "coupled_bulk_surface",
            ProblemKind::DynamicBoundary => "dynamic_boundary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown problem kind \"{s}\"; valid kinds: surface_heat, bulk, coupled_bulk_surface, dynamic_boundary"
            ))
        })
    }

    /// Curve problems are meshed by segment count, the rest by a disk mesh size.
    pub fn on_curve(self) -> bool {
        self == ProblemKind::SurfaceHeat
    }
}

/// A space-time scalar field `(t, x) ↦ value`.
pub type ScalarField = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;

pub fn field(f: impl Fn(f64, Point) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

pub fn zero_field() -> ScalarField {
    field(|_, _| 0.0)
}

/// Data of a problem. Surface fields are only read by the coupled problem.
#[derive(Clone)]
pub struct ProblemData {
    /// `f` (bulk or curve forcing).
    pub forcing: ScalarField,
    /// `g` on the boundary curve of the coupled problem.
    pub surface_forcing: Option<ScalarField>,
    /// `u₀`, evaluated at `t = 0`.
    pub initial: ScalarField,
    /// `v₀` of the coupled problem.
    pub surface_initial: Option<ScalarField>,
    pub exact: Option<ScalarField>,
    pub surface_exact: Option<ScalarField>,
}

impl ProblemData {
    pub fn unforced(initial: ScalarField) -> Self {
        Self {
            forcing: zero_field(),
            surface_forcing: None,
            initial,
            surface_initial: None,
            exact: None,
            surface_exact: None,
        }
    }
}

impl core::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemData")
            .field("has_surface_forcing", &self.surface_forcing.is_some())
            .field("has_surface_initial", &self.surface_initial.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    /// Segment count of the reference circle.
    Segments(usize),
    /// Target mesh size of the reference disk.
    MeshSize(f64),
}

impl Resolution {
    /// Resolution after `levels` uniform halvings of the mesh size.
    pub fn refined(self, levels: u32) -> Self {
        match self {
            Resolution::Segments(n) => Resolution::Segments(n << levels),
            Resolution::MeshSize(h) => Resolution::MeshSize(h / (1u64 << levels) as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub flow: FlowMap,
    pub coefficients: FormCoefficients,
    pub data: ProblemData,
    pub resolution: Resolution,
    pub t_end: f64,
}

impl ProblemSpec {
    pub fn has_exact(&self) -> bool {
        match self.kind {
            ProblemKind::CoupledBulkSurface => self.data.exact.is_some() && self.data.surface_exact.is_some(),
            _ => self.data.exact.is_some(),
        }
    }

    pub fn with_resolution(&self, resolution: Resolution) -> Self {
        Self { resolution, ..self.clone() }
    }

    /// Shape checks needed to assemble at all: mesh kind, horizon, data presence.
    pub fn check_structure(&self) -> Result<()> {
        match (self.kind.on_curve(), self.resolution) {
            (true, Resolution::Segments(n)) if n >= 3 => {}
            (false, Resolution::MeshSize(h)) if h > 0.0 && h < 1.0 => {}
            (_, r) => {
                return Err(Error::InvalidArgument(format!(
                    "resolution {r:?} does not fit problem {}",
                    self.kind.name()
                )))
            }
        }
        if !(self.t_end > 0.0 && self.t_end <= self.flow.t_end() * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "T_end = {} must lie in (0, {}] (flow horizon)",
                self.t_end,
                self.flow.t_end()
            )));
        }
        if self.kind == ProblemKind::CoupledBulkSurface && self.data.surface_initial.is_none() {
            return Err(Error::InvalidArgument("coupled problem needs a surface initial condition".into()));
        }
        Ok(())
    }

    /// Full validation including coefficient signs and geometry restrictions.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        let c = &self.coefficients;
        match self.kind {
            ProblemKind::SurfaceHeat => {
                if !(c.diffusion >= 0.0) {
                    return Err(Error::InvalidArgument(format!("diffusion must be >= 0, got {}", c.diffusion)));
                }
            }
            ProblemKind::Bulk => {
                if !(c.diffusion > 0.0) {
                    return Err(Error::InvalidArgument(format!("diffusion must be > 0, got {}", c.diffusion)));
                }
            }
            ProblemKind::CoupledBulkSurface => {
                if !(c.alpha > 0.0 && c.beta > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "alpha and beta must be > 0, got alpha = {}, beta = {}",
                        c.alpha, c.beta
                    )));
                }
            }
            ProblemKind::DynamicBoundary => {
                if !self.flow.is_normal_motion() {
                    return Err(Error::InvalidArgument(format!(
                        "the dynamic boundary problem needs a purely normal boundary velocity; {} with parameter {} moves tangentially",
                        self.flow.family().name(),
                        self.flow.param()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form manufactured solution and matching forcing for `kind`.
///
/// Every case lives on the expanding family `R(t) = 1 + γt` (`γ = 0` gives
/// the static circle or disk):
/// * surface heat: `u = e^{−t} x₁x₂/R²`;
/// * bulk: `u = (1 − |x|²/R²) e^{−t}` for any advection choice;
/// * coupled: `u = e^{−t} x₁/R`, `v = s(t) x₁/R` with `s` fixed by the Robin condition;
/// * dynamic boundary: `v = e^{−t}(x₁² − x₂²)/R²`.
pub fn manufactured(kind: ProblemKind, flow: &FlowMap, coeffs: &FormCoefficients) -> Result<ProblemData> {
    if flow.family() != FlowFamily::ExpandingCircle {
        return Err(Error::InvalidArgument(format!(
            "manufactured solutions are built on the expanding family, not {}",
            flow.family().name()
        )));
    }
    let fl = *flow;
    let r = move |t: f64| fl.scale_factor(t);
    let dr = move |t: f64| fl.scale_rate(t);
    let d = coeffs.diffusion;
    let data = match kind {
        ProblemKind::SurfaceHeat => {
            let exact = field(move |t, x| libm::exp(-t) * x[0] * x[1] / (r(t) * r(t)));
            let ex = exact.clone();
            ProblemData {
                forcing: field(move |t, x| {
                    let (rr, u) = (r(t), ex(t, x));
                    -u + 4.0 * d * u / (rr * rr) + u * dr(t) / rr
                }),
                surface_forcing: None,
                initial: exact.clone(),
                surface_initial: None,
                exact: Some(exact),
                surface_exact: None,
            }
        }
        ProblemKind::Bulk => {
            let (b, div_b_material) = (coeffs.advection, true);
            let exact = field(move |t, x| (1.0 - geom::dot(x, x) / (r(t) * r(t))) * libm::exp(-t));
            let ex = exact.clone();
            ProblemData {
                forcing: field(move |t, x| {
                    let (rr, e) = (r(t), libm::exp(-t));
                    let u = ex(t, x);
                    let du_dt = -u + 2.0 * e * geom::dot(x, x) * dr(t) / (rr * rr * rr);
                    let grad = geom::scale(-2.0 * e / (rr * rr), x);
                    let (bx, div_b) = match b {
                        Advection::Zero => ([0.0, 0.0], 0.0),
                        Advection::Material if div_b_material => (geom::scale(dr(t) / rr, x), 2.0 * dr(t) / rr),
                        Advection::Material => unreachable!(),
                        Advection::Constant(v) => (v, 0.0),
                    };
                    let lap = -4.0 * e / (rr * rr);
                    du_dt + geom::dot(bx, grad) + u * div_b - d * lap
                }),
                surface_forcing: None,
                initial: exact.clone(),
                surface_initial: None,
                exact: Some(exact),
                surface_exact: None,
            }
        }
        ProblemKind::CoupledBulkSurface => {
            let (alpha, beta) = (coeffs.alpha, coeffs.beta);
            let s = move |t: f64| libm::exp(-t) * (1.0 / r(t) + alpha) / beta;
            let u = field(move |t, x| libm::exp(-t) * x[0] / r(t));
            let v = field(move |t, x| s(t) * x[0] / r(t));
            let uu = u.clone();
            ProblemData {
                forcing: field(move |t, x| {
                    let val = uu(t, x);
                    -val + 2.0 * val * dr(t) / r(t)
                }),
                surface_forcing: Some(field(move |t, x| {
                    let (rr, e) = (r(t), libm::exp(-t));
                    let c = x[0] / rr;
                    let st = s(t);
                    let ds = -st - e * dr(t) / (beta * rr * rr);
                    ds * c + st * c / (rr * rr) + st * c * dr(t) / rr + e * c / rr
                })),
                initial: u.clone(),
                surface_initial: Some(v.clone()),
                exact: Some(u),
                surface_exact: Some(v),
            }
        }
        ProblemKind::DynamicBoundary => {
            let exact = field(move |t, x| libm::exp(-t) * (x[0] * x[0] - x[1] * x[1]) / (r(t) * r(t)));
            let ex = exact.clone();
            ProblemData {
                forcing: field(move |t, x| 2.0 / r(t) * ex(t, x)),
                surface_forcing: None,
                initial: exact.clone(),
                surface_initial: None,
                exact: Some(exact),
                surface_exact: None,
            }
        }
    };
    Ok(data)
}

/// Discrete Dirichlet-to-Neumann (Poincaré–Steklov) operator of a bulk
/// snapshot: the Schur complement `S_ΓΓ − S_ΓI S_II⁻¹ S_IΓ` of the stiffness
/// matrix with respect to the interior nodes. The interior factorization is
/// kept, so the operator can be applied, extended and densified.
#[derive(Debug, Clone)]
pub struct SteklovOperator {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    n_nodes: usize,
    interior_lu: BandLu,
    s_ib: SparseMatrix,
    s_bi: SparseMatrix,
    s_bb: SparseMatrix,
    s_ii: SparseMatrix,
}

impl SteklovOperator {
    pub fn new(bulk: &BulkMesh) -> Result<Self> {
        let s = bulk.stiffness();
        let boundary = bulk.boundary_node_ids().to_vec();
        let interior = bulk.interior_node_ids();
        let s_ii = s.submatrix(&interior, &interior);
        Ok(Self {
            interior_lu: BandLu::factor(&s_ii)?,
            s_ib: s.submatrix(&interior, &boundary),
            s_bi: s.submatrix(&boundary, &interior),
            s_bb: s.submatrix(&boundary, &boundary),
            s_ii,
            n_nodes: bulk.n_nodes(),
            boundary,
            interior,
        })
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    fn interior_values(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.s_ib.spmv(g)?;
        rhs.iter_mut().for_each(|v| *v = -*v);
        self.interior_lu.solve(&rhs)
    }

    /// `Σ g` for boundary data `g` in boundary-cycle order.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let vi = self.interior_values(g)?;
        let mut y = self.s_bb.spmv(g)?;
        linalg::axpy(1.0, &self.s_bi.spmv(&vi)?, &mut y);
        Ok(y)
    }

    /// Discrete harmonic extension of `g` to all bulk nodes.
    pub fn extend(&self, g: &[f64]) -> Result<Vec<f64>> {
        let vi = self.interior_values(g)?;
        let mut v = alloc::vec![0.0; self.n_nodes];
        for (k, &i) in self.interior.iter().enumerate() {
            v[i] = vi[k];
        }
        for (k, &i) in self.boundary.iter().enumerate() {
            v[i] = g[k];
        }
        Ok(v)
    }

    /// `‖S_II v_I + S_IΓ v_Γ‖` for a full nodal vector `v`.
    pub fn interior_residual(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.n_nodes {
            return Err(Error::DimensionMismatch { expected: self.n_nodes, found: v.len() });
        }
        let vi: Vec<f64> = self.interior.iter().map(|&i| v[i]).collect();
        let vb: Vec<f64> = self.boundary.iter().map(|&i| v[i]).collect();
        let mut r = self.s_ii.spmv(&vi)?;
        linalg::axpy(1.0, &self.s_ib.spmv(&vb)?, &mut r);
        Ok(linalg::norm(&r))
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let n = self.boundary.len();
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}

/// Dense Steklov matrix on the boundary nodes of `bulk`.
pub fn steklov_operator(bulk: &BulkMesh) -> Result<DenseMatrix> {
    SteklovOperator::new(bulk)?.to_dense()
}

fn nodal(f: &ScalarField, t: f64, nodes: &[Point]) -> Vec<f64> {
    nodes.iter().map(|&x| f(t, x)).collect()
}

fn push_block(b: &mut TripletBuilder, m: &SparseMatrix, r0: usize, c0: usize, s: f64) {
    for i in 0..m.n_rows() {
        for (j, v) in m.row(i) {
            b.push(r0 + i, c0 + j, s * v);
        }
    }
}

/// Load vector `M f` and `‖f‖² = fᵀ M f`.
fn load(mass: &SparseMatrix, f: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mf = mass.spmv(f)?;
    let norm_sq = linalg::dot(f, &mf);
    Ok((mf, norm_sq))
}

/// Surface heat system on a curve snapshot: `M`, `A = D S`, `F = M f`.
pub fn surface_heat_system(mesh: &SurfaceMesh, problem: &ProblemSpec) -> Result<LevelSystem> {
    let t = mesh.time();
    let mass = mesh.mass();
    let s = mesh.stiffness();
    let (load, forcing_sq) = load(&mass, &nodal(&problem.data.forcing, t, mesh.nodes()))?;
    Ok(LevelSystem {
        integral_weights: mass.row_sums(),
        stiffness: s.scaled(problem.coefficients.diffusion),
        seminorm: s,
        mass,
        load,
        forcing_sq,
        symmetric: true,
    })
}

/// Advection field `p = b − w` and reaction `c = ∇·b − ∇·w` at the nodes.
fn advection_fields(mesh: &BulkMesh, flow: &FlowMap, advection: Advection) -> Result<(Vec<Point>, Vec<f64>)> {
    let t = mesh.time();
    let div_w = flow.div_bulk(t)?;
    let mut p = Vec::with_capacity(mesh.n_nodes());
    for &x in mesh.nodes() {
        let w = flow.velocity(t, x)?;
        let b = match advection {
            Advection::Zero => [0.0, 0.0],
            Advection::Material => w,
            Advection::Constant(v) => v,
        };
        p.push(geom::sub(b, w));
    }
    let div_b = match advection {
        Advection::Material => div_w,
        Advection::Zero | Advection::Constant(_) => 0.0,
    };
    Ok((p, alloc::vec![div_b - div_w; mesh.n_nodes()]))
}

/// Bulk system on the interior unknowns (homogeneous Dirichlet data
/// eliminated): `M_II`, `A_II = D S_II + N_II`, `F_I = (M f)_I`, where `N`
/// holds `∫ (p·∇u) v + (∇·b − ∇·w) u v`.
pub fn bulk_system(mesh: &BulkMesh, problem: &ProblemSpec) -> Result<LevelSystem> {
    let t = mesh.time();
    let interior = mesh.interior_node_ids();
    let mass = mesh.mass();
    let s = mesh.stiffness();
    let (p, c) = advection_fields(mesh, &problem.flow, problem.coefficients.advection)?;
    let symmetric = p.iter().all(|v| v[0] == 0.0 && v[1] == 0.0);
    let a = s.linear_combination(problem.coefficients.diffusion, &fem::assemble_advection(mesh, &p, &c)?, 1.0)?;
    let (full_load, forcing_sq) = load(&mass, &nodal(&problem.data.forcing, t, mesh.nodes()))?;
    let all: Vec<usize> = (0..mesh.n_nodes()).collect();
    let weights = mass.submatrix(&all, &interior).transpose().row_sums();
    Ok(LevelSystem {
        mass: mass.submatrix(&interior, &interior),
        stiffness: a.submatrix(&interior, &interior),
        seminorm: s.submatrix(&interior, &interior),
        load: interior.iter().map(|&i| full_load[i]).collect(),
        integral_weights: weights,
        forcing_sq,
        symmetric,
    })
}

/// Block system of the coupled problem, unknowns ordered `[bulk nodes, curve nodes]`:
/// mass `diag(αM_Ω, βM_Γ)`, stiffness
/// `[[αS_Ω + α²B, −αβCᵀ], [−αβC, βS_Γ + β²M_Γ]]`, load `(αM_Ω f, βM_Γ g)`.
pub fn coupled_system(bulk: &BulkMesh, surf: &SurfaceMesh, problem: &ProblemSpec) -> Result<LevelSystem> {
    let t = bulk.time();
    let FormCoefficients { alpha, beta, .. } = problem.coefficients;
    let c = fem::assemble_coupling(bulk, surf)?;
    let (nb, ns) = (bulk.n_nodes(), surf.n_nodes());
    let n = nb + ns;
    let (m_o, s_o, b_o) = (bulk.mass(), bulk.stiffness(), fem::assemble_boundary_mass(bulk));
    let (m_g, s_g) = (surf.mass(), surf.stiffness());

    let mut mass = TripletBuilder::new(n, n);
    push_block(&mut mass, &m_o, 0, 0, alpha);
    push_block(&mut mass, &m_g, nb, nb, beta);
    let mass = mass.build();

    let mut a = TripletBuilder::new(n, n);
    push_block(&mut a, &s_o, 0, 0, alpha);
    push_block(&mut a, &b_o, 0, 0, alpha * alpha);
    push_block(&mut a, &c.transpose(), 0, nb, -alpha * beta);
    push_block(&mut a, &c, nb, 0, -alpha * beta);
    push_block(&mut a, &s_g, nb, nb, beta);
    push_block(&mut a, &m_g, nb, nb, beta * beta);
    let a = a.build();

    let g_field = problem.data.surface_forcing.clone().unwrap_or_else(zero_field);
    let (lf, f_sq) = load(&m_o, &nodal(&problem.data.forcing, t, bulk.nodes()))?;
    let (lg, g_sq) = load(&m_g, &nodal(&g_field, t, surf.nodes()))?;
    let load_vec: Vec<f64> = lf.iter().map(|v| alpha * v).chain(lg.iter().map(|v| beta * v)).collect();
    Ok(LevelSystem {
        integral_weights: mass.row_sums(),
        mass,
        seminorm: a.clone(),
        stiffness: a,
        load: load_vec,
        forcing_sq: f_sq + g_sq,
        symmetric: true,
    })
}

/// Dynamic boundary system on the boundary unknowns (cycle order):
/// `M_Γ`, `A = Σ + M_Γ − Λ_Γ`, `F = M_Γ f`. `Λ_Γ` removes the `λ` term the
/// moving mass adds, since `u̇ + ∂_ν v + u = f` carries no `u∇_Γ·w` term;
/// it vanishes on static geometry.
pub fn dynamic_boundary_system(bulk: &BulkMesh, problem: &ProblemSpec) -> Result<LevelSystem> {
    let sigma = SteklovOperator::new(bulk)?.to_dense()?.to_sparse();
    dynamic_boundary_system_with(bulk, sigma, problem)
}

fn dynamic_boundary_system_with(bulk: &BulkMesh, sigma: SparseMatrix, problem: &ProblemSpec) -> Result<LevelSystem> {
    let t = bulk.time();
    let curve = bulk.boundary_curve();
    let mass = curve.mass();
    let div: Vec<f64> = curve.nodes().iter().map(|&x| problem.flow.div_surface_at(t, x)).collect::<Result<_>>()?;
    let lambda = curve.weighted_mass(&div)?;
    let a = sigma.linear_combination(1.0, &mass, 1.0)?.linear_combination(1.0, &lambda, -1.0)?;
    let (load, forcing_sq) = load(&mass, &nodal(&problem.data.forcing, t, curve.nodes()))?;
    Ok(LevelSystem { integral_weights: mass.row_sums(), mass, stiffness: a, seminorm: sigma, load, forcing_sq, symmetric: true })
}

/// Scalar outputs of one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals {
    pub mass: f64,
    pub energy: f64,
    pub dirichlet: f64,
    pub forcing_sq: f64,
    pub error_l2: Option<f64>,
    pub error_h1: Option<f64>,
}

#[allow(clippy::large_enum_variant)]
enum Reference {
    Curve(SurfaceMesh),
    Disk { mesh: BulkMesh, interior: Vec<usize>, steklov: Option<(SteklovOperator, SparseMatrix)> },
}

/// A problem bound to its reference mesh; produces per-time systems.
pub struct Discretization<'a> {
    problem: &'a ProblemSpec,
    reference: Reference,
}

impl<'a> Discretization<'a> {
    pub fn new(problem: &'a ProblemSpec) -> Result<Self> {
        problem.check_structure()?;
        let reference = match problem.resolution {
            Resolution::Segments(n) => Reference::Curve(mesh::build_circle_mesh(n)?),
            Resolution::MeshSize(h) => {
                let mesh = mesh::build_disk_mesh(h)?;
                let steklov = if problem.kind == ProblemKind::DynamicBoundary && problem.flow.is_static() {
                    let op = SteklovOperator::new(&mesh)?;
                    let sigma = op.to_dense()?.to_sparse();
                    Some((op, sigma))
                } else {
                    None
                };
                Reference::Disk { interior: mesh.interior_node_ids(), mesh, steklov }
            }
        };
        Ok(Self { problem, reference })
    }

    pub fn mesh_size(&self) -> f64 {
        match &self.reference {
            Reference::Curve(m) => m.mesh_size(),
            Reference::Disk { mesh, .. } => mesh.mesh_size(),
        }
    }

    fn curve_at(&self, t: f64) -> Result<SurfaceMesh> {
        match &self.reference {
            Reference::Curve(m) => m.moved(&self.problem.flow, t),
            Reference::Disk { .. } => Err(Error::InvalidArgument("problem is not posed on a curve".into())),
        }
    }

    fn disk_at(&self, t: f64) -> Result<BulkMesh> {
        match &self.reference {
            Reference::Disk { mesh, .. } => mesh.moved(&self.problem.flow, t),
            Reference::Curve(_) => Err(Error::InvalidArgument("problem is not posed on a disk".into())),
        }
    }

    pub fn system(&self, t: f64) -> Result<LevelSystem> {
        match self.problem.kind {
            ProblemKind::SurfaceHeat => surface_heat_system(&self.curve_at(t)?, self.problem),
            ProblemKind::Bulk => bulk_system(&self.disk_at(t)?, self.problem),
            ProblemKind::CoupledBulkSurface => {
                let bulk = self.disk_at(t)?;
                coupled_system(&bulk, &bulk.boundary_curve(), self.problem)
            }
            ProblemKind::DynamicBoundary => {
                let bulk = self.disk_at(t)?;
                match &self.reference {
                    Reference::Disk { steklov: Some((_, sigma)), .. } => {
                        dynamic_boundary_system_with(&bulk, sigma.clone(), self.problem)
                    }
                    _ => dynamic_boundary_system(&bulk, self.problem),
                }
            }
        }
    }

    pub fn initial(&self) -> Result<Vec<f64>> {
        let data = &self.problem.data;
        Ok(match (&self.reference, self.problem.kind) {
            (Reference::Curve(m), _) => nodal(&data.initial, 0.0, m.nodes()),
            (Reference::Disk { interior, mesh, .. }, ProblemKind::Bulk) => {
                interior.iter().map(|&i| (data.initial)(0.0, mesh.nodes()[i])).collect()
            }
            (Reference::Disk { mesh, .. }, ProblemKind::CoupledBulkSurface) => {
                let v0 = data.surface_initial.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("coupled problem needs a surface initial condition".into())
                })?;
                let curve = mesh.boundary_curve();
                let mut u = nodal(&data.initial, 0.0, mesh.nodes());
                u.extend(nodal(v0, 0.0, curve.nodes()));
                u
            }
            (Reference::Disk { mesh, .. }, _) => nodal(&data.initial, 0.0, mesh.boundary_curve().nodes()),
        })
    }

    /// Full bulk nodal vector from interior unknowns.
    fn bulk_full(&self, u: &[f64]) -> Vec<f64> {
        match &self.reference {
            Reference::Disk { interior, mesh, .. } => {
                let mut full = alloc::vec![0.0; mesh.n_nodes()];
                for (k, &i) in interior.iter().enumerate() {
                    full[i] = u[k];
                }
                full
            }
            Reference::Curve(_) => u.to_vec(),
        }
    }

    pub fn functionals(&self, t: f64, sys: &LevelSystem, u: &[f64]) -> Result<Functionals> {
        let mass = linalg::dot(&sys.integral_weights, u);
        let energy = sys.mass.bilinear(u, u)?;
        let dirichlet = sys.seminorm.bilinear(u, u)?;
        let data = &self.problem.data;
        let (error_l2, error_h1) = if self.problem.has_exact() {
            let (l2, semi_sq) = self.errors(t, sys, u, data)?;
            (Some(l2), Some(libm::sqrt(semi_sq.max(0.0))))
        } else {
            (None, None)
        };
        Ok(Functionals { mass, energy, dirichlet, forcing_sq: sys.forcing_sq, error_l2, error_h1 })
    }

    fn errors(&self, t: f64, sys: &LevelSystem, u: &[f64], data: &ProblemData) -> Result<(f64, f64)> {
        let exact = data.exact.as_ref().expect("checked by has_exact");
        let at = |f: &ScalarField| {
            let f = f.clone();
            move |x: Point| f(t, x)
        };
        match self.problem.kind {
            ProblemKind::SurfaceHeat => {
                let mesh = self.curve_at(t)?;
                let diff = diff_to_interpolant(u, &nodal(exact, t, mesh.nodes()));
                Ok((mesh.l2_error(u, &at(exact))?, sys.seminorm.bilinear(&diff, &diff)?))
            }
            ProblemKind::Bulk => {
                let mesh = self.disk_at(t)?;
                let full = self.bulk_full(u);
                let interior = mesh.interior_node_ids();
                let iu: Vec<f64> = interior.iter().map(|&i| exact(t, mesh.nodes()[i])).collect();
                let diff = diff_to_interpolant(u, &iu);
                Ok((mesh.l2_error(&full, &at(exact))?, sys.seminorm.bilinear(&diff, &diff)?))
            }
            ProblemKind::CoupledBulkSurface => {
                let bulk = self.disk_at(t)?;
                let curve = bulk.boundary_curve();
                let v_exact = data.surface_exact.as_ref().expect("checked by has_exact");
                let nb = bulk.n_nodes();
                let eo = bulk.l2_error(&u[..nb], &at(exact))?;
                let eg = curve.l2_error(&u[nb..], &at(v_exact))?;
                let mut iu = nodal(exact, t, bulk.nodes());
                iu.extend(nodal(v_exact, t, curve.nodes()));
                let diff = diff_to_interpolant(u, &iu);
                Ok((libm::sqrt(eo * eo + eg * eg), sys.seminorm.bilinear(&diff, &diff)?))
            }
            ProblemKind::DynamicBoundary => {
                let curve = self.disk_at(t)?.boundary_curve();
                let diff = diff_to_interpolant(u, &nodal(exact, t, curve.nodes()));
                Ok((curve.l2_error(u, &at(exact))?, curve.stiffness().bilinear(&diff, &diff)?))
            }
        }
    }

    /// Nodal picture of the state at time `t` for visualization. The
    /// dynamic boundary problem is shown through its harmonic extension.
    pub fn snapshot(&self, t: f64, u: &[f64]) -> Result<Snapshot> {
        match self.problem.kind {
            ProblemKind::SurfaceHeat => {
                let m = self.curve_at(t)?;
                Ok(Snapshot { time: t, points: m.nodes().to_vec(), triangles: Vec::new(), lines: m.segments().to_vec(), values: u.to_vec() })
            }
            ProblemKind::Bulk => {
                let m = self.disk_at(t)?;
                Ok(Snapshot {
                    time: t,
                    points: m.nodes().to_vec(),
                    triangles: m.triangles().to_vec(),
                    lines: m.boundary_edges().to_vec(),
                    values: self.bulk_full(u),
                })
            }
            ProblemKind::CoupledBulkSurface => {
                let m = self.disk_at(t)?;
                let curve = m.boundary_curve();
                let nb = m.n_nodes();
                let mut points = m.nodes().to_vec();
                points.extend_from_slice(curve.nodes());
                let lines = curve.segments().iter().map(|&[a, b]| [a + nb, b + nb]).collect();
                Ok(Snapshot { time: t, points, triangles: m.triangles().to_vec(), lines, values: u.to_vec() })
            }
            ProblemKind::DynamicBoundary => {
                let m = self.disk_at(t)?;
                let values = match &self.reference {
                    Reference::Disk { steklov: Some((op, _)), .. } => op.extend(u)?,
                    _ => SteklovOperator::new(&m)?.extend(u)?,
                };
                Ok(Snapshot {
                    time: t,
                    points: m.nodes().to_vec(),
                    triangles: m.triangles().to_vec(),
                    lines: m.boundary_edges().to_vec(),
                    values,
                })
            }
        }
    }
}

fn diff_to_interpolant(u: &[f64], interp: &[f64]) -> Vec<f64> {
    u.iter().zip(interp).map(|(a, b)| a - b).collect()
}

/// Short label used in reports.
pub fn describe(problem: &ProblemSpec) -> String {
    format!("{} on {} ({:?})", problem.kind.name(), problem.flow.family().name(), problem.resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use core::f64::consts::PI;

    #[test]
    fn kind_names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(ProblemKind::parse(k.name()).unwrap(), k);
        }
        assert!(ProblemKind::parse("wave").is_err());
    }

    #[test]
    fn steklov_constants_and_symmetry() {
        let d = build_disk_mesh(0.2).unwrap();
        let op = SteklovOperator::new(&d).unwrap();
        let ones = alloc::vec![1.0; op.n_boundary()];
        assert!(linalg::norm(&op.apply(&ones).unwrap()) < 1e-12);
        let dense = op.to_dense().unwrap();
        assert!(dense.max_asymmetry() <= 1e-10);
        let ext = op.extend(&ones).unwrap();
        assert!(ext.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn steklov_first_modes_coarse() {
        let d = build_disk_mesh(0.1).unwrap();
        let op = SteklovOperator::new(&d).unwrap();
        let curve = d.boundary_curve();
        let m = curve.mass();
        for k in 1..=3 {
            let g: Vec<f64> = curve.nodes().iter().map(|x| libm::cos(k as f64 * libm::atan2(x[1], x[0]))).collect();
            let rq = linalg::dot(&g, &op.apply(&g).unwrap()) / m.bilinear(&g, &g).unwrap();
            assert!((rq - k as f64).abs() / (k as f64) < 0.05, "k = {k}: {rq}");
        }
        let _ = PI;
    }

    #[test]
    fn coupled_block_is_symmetric_and_annihilates_ones() {
        let flow = FlowMap::expanding(0.5, 1.0).unwrap();
        let coefficients = FormCoefficients::default();
        let data = manufactured(ProblemKind::CoupledBulkSurface, &flow, &coefficients).unwrap();
        let problem = ProblemSpec {
            kind: ProblemKind::CoupledBulkSurface,
            flow,
            coefficients,
            data,
            resolution: Resolution::MeshSize(0.2),
            t_end: 1.0,
        };
        let bulk = build_disk_mesh(0.2).unwrap().moved(&flow, 0.3).unwrap();
        let sys = coupled_system(&bulk, &bulk.boundary_curve(), &problem).unwrap();
        assert!(sys.stiffness.max_asymmetry() < 1e-14);
        let ones = alloc::vec![1.0; sys.stiffness.n_rows()];
        assert!(linalg::norm(&sys.stiffness.spmv(&ones).unwrap()) < 1e-12);
    }

    #[test]
    fn validation_rules() {
        let flow = FlowMap::oscillating(0.25, 1.0).unwrap();
        let mut p = ProblemSpec {
            kind: ProblemKind::DynamicBoundary,
            flow,
            coefficients: FormCoefficients::default(),
            data: ProblemData::unforced(zero_field()),
            resolution: Resolution::MeshSize(0.2),
            t_end: 1.0,
        };
        assert!(p.validate().is_err());
        p.flow = FlowMap::expanding(0.5, 1.0).unwrap();
        assert!(p.validate().is_ok());
        p.resolution = Resolution::Segments(10);
        assert!(p.validate().is_err());
        p.resolution = Resolution::MeshSize(0.2);
        p.t_end = 2.0;
        assert!(p.validate().is_err());
        p.t_end = 1.0;
        p.kind = ProblemKind::CoupledBulkSurface;
        assert!(p.validate().is_err());
        p.data.surface_initial = Some(zero_field());
        p.coefficients.beta = 0.0;
        assert!(p.validate().is_err());
        assert!(manufactured(ProblemKind::Bulk, &flow, &FormCoefficients::default()).is_err());
    }
}
