//! Moving-mesh time stepping for `d/dt (M U) + A U = F`.
//!
//! Nodes ride the flow, so basis functions have zero discrete material
//! derivative and `d/dt (M U)_i` realizes `⟨u̇, φ_i⟩ + λ(t; u, φ_i)` at once.
//! Backward Euler (`theta = 1`) is the certified scheme; other `theta`
//! values run the same loop and are experimental.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, BandLu, CgOptions, SparseMatrix};
use crate::problems::{self, ProblemKind, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Cg,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub theta: f64,
    /// Used for symmetric systems; nonsymmetric systems always go direct.
    pub solver: SolverKind,
    pub tol: f64,
    pub jacobi: bool,
    /// Keep per-step nodal snapshots in the [`RunResult`].
    pub keep_snapshots: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { dt: 1e-2, theta: 1.0, solver: SolverKind::Cg, tol: 1e-12, jacobi: true, keep_snapshots: false }
    }
}

impl SchemeConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Matrices and load of one time level, all indexed by the same unknowns.
#[derive(Debug, Clone)]
pub struct LevelSystem {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub load: Vec<f64>,
    /// Whether `stiffness` is symmetric (mass always is).
    pub symmetric: bool,
    /// Gradient (or Steklov) energy matrix reported as the Dirichlet functional.
    pub seminorm: SparseMatrix,
    /// `∫ φ_j` for each unknown, so that `∫ u_h = weights · U`.
    pub integral_weights: Vec<f64>,
    /// `‖f‖²` of the forcing at this time.
    pub forcing_sq: f64,
}

/// Backward Euler step `(M_new/dt + A_new) U_new = M_old U_old/dt + F_new`.
pub fn esfem_step(
    m_old: &SparseMatrix,
    u_old: &[f64],
    m_new: &SparseMatrix,
    a_new: &SparseMatrix,
    f_new: &[f64],
    cfg: &SchemeConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let lhs = m_new.linear_combination(1.0 / cfg.dt, a_new, 1.0)?;
    let mut rhs = m_old.spmv(u_old)?;
    rhs.iter_mut().for_each(|r| *r /= cfg.dt);
    if f_new.len() != rhs.len() {
        return Err(Error::DimensionMismatch { expected: rhs.len(), found: f_new.len() });
    }
    linalg::axpy(1.0, f_new, &mut rhs);
    let symmetric = a_new.max_asymmetry() <= 1e-12 * a_new.max_abs().max(f64::MIN_POSITIVE);
    match cfg.solver {
        SolverKind::Cg if symmetric => linalg::cg_solve(&lhs, &rhs, CgOptions { tol: cfg.tol, jacobi: cfg.jacobi }),
        _ => linalg::direct_solve(&lhs, &rhs),
    }
}

/// Theta-scheme stepper that reuses a band factorization while the system
/// matrix stays bitwise identical (static geometry).
pub struct Stepper {
    cfg: SchemeConfig,
    cached: Option<(SparseMatrix, BandLu)>,
}

impl Stepper {
    pub fn new(cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, cached: None })
    }

    pub fn step(&mut self, old: &LevelSystem, u_old: &[f64], new: &LevelSystem) -> Result<Vec<f64>> {
        let (dt, theta) = (self.cfg.dt, self.cfg.theta);
        let lhs = new.mass.linear_combination(1.0 / dt, &new.stiffness, theta)?;
        let mut rhs = old.mass.spmv(u_old)?;
        rhs.iter_mut().for_each(|r| *r /= dt);
        if theta < 1.0 {
            let au = old.stiffness.spmv(u_old)?;
            linalg::axpy(-(1.0 - theta), &au, &mut rhs);
            linalg::axpy(1.0 - theta, &old.load, &mut rhs);
        }
        linalg::axpy(theta, &new.load, &mut rhs);
        if self.cfg.solver == SolverKind::Cg && new.symmetric {
            return linalg::cg_solve(&lhs, &rhs, CgOptions { tol: self.cfg.tol, jacobi: self.cfg.jacobi });
        }
        if let Some((m, lu)) = &self.cached {
            if *m == lhs {
                return lu.solve(&rhs);
            }
        }
        let lu = BandLu::factor(&lhs)?;
        let x = lu.solve(&rhs)?;
        self.cached = Some((lhs, lu));
        Ok(x)
    }
}

/// Cells of a snapshot for visualization.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub points: Vec<crate::geom::Point>,
    pub triangles: Vec<[usize; 3]>,
    pub lines: Vec<[usize; 2]>,
    /// One value per point.
    pub values: Vec<f64>,
}

/// Time series produced by [`run_transient`]. Entry `k` of every series
/// belongs to `times[k]`; entry 0 is the initial state.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub kind: ProblemKind,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `1ᵀ M U`, the (weighted) integral of the solution.
    pub mass: Vec<f64>,
    /// `Uᵀ M U`, the squared (weighted) L² norm.
    pub energy: Vec<f64>,
    /// `Uᵀ S U`, the squared gradient seminorm (Steklov energy for the
    /// dynamic boundary problem).
    pub dirichlet: Vec<f64>,
    /// Squared L² norm of the forcing.
    pub forcing_sq: Vec<f64>,
    /// L² error against the exact solution, when the problem has one.
    pub error_l2: Option<Vec<f64>>,
    /// Gradient seminorm of `U − I_h u`, when the problem has an exact solution.
    pub error_h1: Option<Vec<f64>>,
    pub mesh_size: f64,
    pub n_dofs: usize,
    pub final_values: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl RunResult {
    /// `max_t ‖u − u_h‖_{L²}`.
    pub fn max_error_l2(&self) -> Option<f64> {
        self.error_l2.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }

    pub fn max_error_h1(&self) -> Option<f64> {
        self.error_h1.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max))
    }
}

/// Number of steps of size `dt` that reach `t_end`; `dt` must divide it.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    let steps = libm::round(t_end / dt);
    if steps < 1.0 || (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide T_end = {t_end} into whole steps")));
    }
    Ok(steps as usize)
}

/// Runs the problem from `t = 0` to its `t_end`.
pub fn run_transient(problem: &ProblemSpec, cfg: &SchemeConfig) -> Result<RunResult> {
    cfg.validate()?;
    let steps = step_count(problem.t_end, cfg.dt)?;
    let disc = problems::Discretization::new(problem)?;
    let mut stepper = Stepper::new(*cfg)?;

    let mut sys = disc.system(0.0)?;
    let mut u = disc.initial()?;
    let mut out = RunResult {
        kind: problem.kind,
        dt: cfg.dt,
        times: Vec::with_capacity(steps + 1),
        mass: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        dirichlet: Vec::with_capacity(steps + 1),
        forcing_sq: Vec::with_capacity(steps + 1),
        error_l2: problem.has_exact().then(Vec::new),
        error_h1: problem.has_exact().then(Vec::new),
        mesh_size: disc.mesh_size(),
        n_dofs: u.len(),
        final_values: Vec::new(),
        snapshots: Vec::new(),
    };
    record(&disc, &mut out, 0.0, &sys, &u, cfg.keep_snapshots)?;
    for n in 1..=steps {
        let t = n as f64 * cfg.dt;
        let wrap = |e: Error| Error::Step { time: t, source: Box::new(e) };
        let new_sys = disc.system(t).map_err(wrap)?;
        u = stepper.step(&sys, &u, &new_sys).map_err(wrap)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(wrap(Error::InvalidArgument("solution is not finite".into())));
        }
        sys = new_sys;
        record(&disc, &mut out, t, &sys, &u, cfg.keep_snapshots).map_err(wrap)?;
    }
    out.final_values = u;
    Ok(out)
}

fn record(
    disc: &problems::Discretization<'_>,
    out: &mut RunResult,
    t: f64,
    sys: &LevelSystem,
    u: &[f64],
    keep: bool,
) -> Result<()> {
    let f = disc.functionals(t, sys, u)?;
    out.times.push(t);
    out.mass.push(f.mass);
    out.energy.push(f.energy);
    out.dirichlet.push(f.dirichlet);
    out.forcing_sq.push(f.forcing_sq);
    if let (Some(e), Some(v)) = (out.error_l2.as_mut(), f.error_l2) {
        e.push(v);
    }
    if let (Some(e), Some(v)) = (out.error_h1.as_mut(), f.error_h1) {
        e.push(v);
    }
    if keep {
        out.snapshots.push(disc.snapshot(t, u)?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_identity_evolution() {
        let m = SparseMatrix::diagonal_matrix(&[0.5, 1.0, 2.0]);
        let a = SparseMatrix::zeros(3, 3);
        let u = [1.0, -2.0, 3.0];
        for solver in [SolverKind::Cg, SolverKind::Direct] {
            let cfg = SchemeConfig { solver, ..SchemeConfig::with_dt(0.1) };
            let next = esfem_step(&m, &u, &m, &a, &[0.0; 3], &cfg).unwrap();
            for (x, y) in next.iter().zip(&u) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_backward_euler() {
        let (a, dt, u0) = (3.0, 0.05, 2.0);
        let one = SparseMatrix::identity(1);
        let cfg = SchemeConfig { solver: SolverKind::Direct, ..SchemeConfig::with_dt(dt) };
        let next = esfem_step(&one, &[u0], &one, &SparseMatrix::diagonal_matrix(&[a]), &[0.0], &cfg).unwrap();
        assert!((next[0] - u0 / (1.0 + a * dt)).abs() < 1e-15);
    }

    #[test]
    fn crank_nicolson_scalar() {
        let (a, dt) = (1.0, 0.1);
        let sys = LevelSystem {
            mass: SparseMatrix::identity(1),
            stiffness: SparseMatrix::diagonal_matrix(&[a]),
            load: alloc::vec![0.0],
            symmetric: true,
            seminorm: SparseMatrix::identity(1),
            integral_weights: alloc::vec![1.0],
            forcing_sq: 0.0,
        };
        let mut st = Stepper::new(SchemeConfig { theta: 0.5, ..SchemeConfig::with_dt(dt) }).unwrap();
        let u = st.step(&sys, &[1.0], &sys).unwrap();
        assert!((u[0] - (1.0 - 0.5 * a * dt) / (1.0 + 0.5 * a * dt)).abs() < 1e-13);
    }

    #[test]
    fn invalid_scheme_rejected() {
        assert!(SchemeConfig { theta: 1.5, ..SchemeConfig::default() }.validate().is_err());
        assert!(SchemeConfig::with_dt(0.0).validate().is_err());
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(1.0, 0.01).unwrap(), 100);
    }
}
