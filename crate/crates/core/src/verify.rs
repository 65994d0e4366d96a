//! Residual checks of the transport identities, refinement studies and
//! diagnostics over completed runs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{self, P1Mesh};
use crate::flowmap::FlowMap;
use crate::mesh::SurfaceMesh;
use crate::problems::ProblemSpec;
use crate::timestep::{self, RunResult, SchemeConfig};

/// `(u, v)_{L²(Γ_h(t))}` and `λ(t; u, v)` for pushed-forward nodal data.
fn pairing_and_lambda(map: &FlowMap, reference: &SurfaceMesh, u0: &[f64], v0: &[f64], t: f64) -> Result<(f64, f64)> {
    let mesh = reference.moved(map, t)?;
    let div: Vec<f64> = mesh.nodes().iter().map(|&x| map.div_surface_at(t, x)).collect::<Result<_>>()?;
    let pairing = mesh.mass().bilinear(u0, v0)?;
    let lambda = fem::assemble_lambda(&mesh, &div)?.bilinear(u0, v0)?;
    Ok((pairing, lambda))
}

fn pairing(map: &FlowMap, reference: &SurfaceMesh, u0: &[f64], v0: &[f64], t: f64) -> Result<f64> {
    reference.moved(map, t)?.mass().bilinear(u0, v0)
}

fn check_data(reference: &SurfaceMesh, u0: &[f64], v0: &[f64]) -> Result<()> {
    for v in [u0, v0] {
        if v.len() != reference.n_nodes() {
            return Err(Error::DimensionMismatch { expected: reference.n_nodes(), found: v.len() });
        }
    }
    Ok(())
}

/// `|d/dt (u, v) − λ(t; u, v)|` with the derivative taken as a central
/// difference of step `dt_fd`. Nodal values are fixed, so `u` and `v` are
/// the pushforwards of the reference data and have zero material derivative.
pub fn transport_residual(map: &FlowMap, reference: &SurfaceMesh, u0: &[f64], v0: &[f64], t: f64, dt_fd: f64) -> Result<f64> {
    transport_defect(map, reference, u0, v0, t, dt_fd).map(f64::abs)
}

/// Signed version of [`transport_residual`], used for Richardson ratios.
pub fn transport_defect(map: &FlowMap, reference: &SurfaceMesh, u0: &[f64], v0: &[f64], t: f64, dt_fd: f64) -> Result<f64> {
    check_data(reference, u0, v0)?;
    if !(dt_fd > 0.0) || t - dt_fd < 0.0 || t + dt_fd > map.t_end() {
        return Err(Error::Domain(alloc::format!(
            "central difference at t = {t} with step {dt_fd} leaves [0, {}]",
            map.t_end()
        )));
    }
    let plus = pairing(map, reference, u0, v0, t + dt_fd)?;
    let minus = pairing(map, reference, u0, v0, t - dt_fd)?;
    let (_, lambda) = pairing_and_lambda(map, reference, u0, v0, t)?;
    Ok((plus - minus) / (2.0 * dt_fd) - lambda)
}

/// `|(u, v)(T) − (u, v)(0) − ∫₀ᵀ λ(t; u, v) dt|`, the time integral by
/// composite Simpson on `intervals` (even) panels.
pub fn integration_by_parts_check(
    map: &FlowMap,
    reference: &SurfaceMesh,
    u0: &[f64],
    v0: &[f64],
    t_end: f64,
    intervals: usize,
) -> Result<f64> {
    check_data(reference, u0, v0)?;
    if intervals == 0 || !intervals.is_multiple_of(2) {
        return Err(Error::InvalidArgument(alloc::format!("Simpson needs an even interval count, got {intervals}")));
    }
    let k = t_end / intervals as f64;
    let mut integral = 0.0;
    let (mut first, mut last) = (0.0, 0.0);
    for i in 0..=intervals {
        let t = if i == intervals { t_end } else { i as f64 * k };
        let (p, lambda) = pairing_and_lambda(map, reference, u0, v0, t)?;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += w * lambda;
        if i == 0 {
            first = p;
        }
        if i == intervals {
            last = p;
        }
    }
    Ok((last - first - integral * k / 3.0).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRow {
    pub h: f64,
    pub dt: f64,
    pub error_l2: f64,
    pub error_h1: f64,
    /// Rate against the previous row in `h`; `None` on the first row.
    pub eoc_h: Option<f64>,
    /// Rate against the previous row in `dt`; `None` on the first row.
    pub eoc_dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub const CSV_HEADER: &'static str = "h,dt,error_l2,error_h1,eoc_h,eoc_dt";

    fn push(&mut self, h: f64, dt: f64, error_l2: f64, error_h1: f64) {
        let rate = |a: f64, b: f64, ea: f64, eb: f64| {
            if a == b {
                None
            } else {
                Some(libm::log(ea / eb) / libm::log(a / b))
            }
        };
        let (eoc_h, eoc_dt) = match self.rows.last() {
            Some(p) => (rate(p.h, h, p.error_l2, error_l2), rate(p.dt, dt, p.error_l2, error_l2)),
            None => (None, None),
        };
        self.rows.push(EocRow { h, dt, error_l2, error_h1, eoc_h, eoc_dt });
    }

    pub fn eoc_h(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_h).collect()
    }

    pub fn eoc_dt(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_dt).collect()
    }
}

fn level_error(problem: &ProblemSpec, cfg: &SchemeConfig, level: usize) -> Result<(f64, f64, f64)> {
    let wrap = |e| Error::Level { level, source: alloc::boxed::Box::new(e) };
    let run = timestep::run_transient(problem, cfg).map_err(wrap)?;
    let (Some(l2), Some(h1)) = (run.max_error_l2(), run.max_error_h1()) else {
        return Err(Error::InvalidArgument("convergence studies need an exact solution".into()));
    };
    Ok((run.mesh_size, l2, h1))
}

/// Nested refinements `h → h/2`, `dt → dt/4`; errors are `L∞(L²)` and
/// `L∞(H¹-seminorm)` maxima over the time levels. `cfg.dt` is the coarsest step.
pub fn convergence_study(problem: &ProblemSpec, cfg: &SchemeConfig, levels: usize) -> Result<EocTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(alloc::format!("need at least 3 levels, got {levels}")));
    }
    if !problem.has_exact() {
        return Err(Error::InvalidArgument("convergence studies need an exact solution".into()));
    }
    let mut table = EocTable::default();
    for level in 0..levels {
        let p = problem.with_resolution(problem.resolution.refined(level as u32));
        let dt = cfg.dt / libm::pow(4.0, level as f64);
        let (h, l2, h1) = level_error(&p, &SchemeConfig { dt, keep_snapshots: false, ..*cfg }, level)?;
        table.push(h, dt, l2, h1);
    }
    Ok(table)
}

/// Fixed mesh, `dt → dt/2` per level.
pub fn temporal_study(problem: &ProblemSpec, cfg: &SchemeConfig, levels: usize) -> Result<EocTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(alloc::format!("need at least 3 levels, got {levels}")));
    }
    let mut table = EocTable::default();
    for level in 0..levels {
        let dt = cfg.dt / libm::pow(2.0, level as f64);
        let (h, l2, h1) = level_error(problem, &SchemeConfig { dt, keep_snapshots: false, ..*cfg }, level)?;
        table.push(h, dt, l2, h1);
    }
    Ok(table)
}

/// Midpoint-rule Gagliardo double sum
/// `Σ_{e≠e'} |u(m_e) − u(m_e')|² / |m_e − m_e'|² · |e||e'|`.
///
/// This is the square of the `H^{1/2}` seminorm up to quadrature, with the
/// singular diagonal dropped. It is an O(h) diagnostic, not a certified norm.
pub fn h12_seminorm(surf: &SurfaceMesh, u: &[f64]) -> Result<f64> {
    if u.len() != surf.n_nodes() {
        return Err(Error::DimensionMismatch { expected: surf.n_nodes(), found: u.len() });
    }
    let mids: Vec<([f64; 2], f64, f64)> = surf
        .segments()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let m = crate::geom::midpoint(surf.nodes()[a], surf.nodes()[b]);
            (m, 0.5 * (u[a] + u[b]), surf.segment_length(e))
        })
        .collect();
    let mut sum = 0.0;
    for (i, &(mi, ui, li)) in mids.iter().enumerate() {
        for &(mj, uj, lj) in &mids[i + 1..] {
            let d = crate::geom::sub(mi, mj);
            let du = ui - uj;
            sum += du * du / crate::geom::dot(d, d) * li * lj;
        }
    }
    Ok(2.0 * sum)
}

/// Discrete energy bound of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// `max_n ‖U^n‖²` in the problem's mass norm.
    pub max_l2_sq: f64,
    /// `Σ_{n≥1} dt ‖∇U^n‖²` (Steklov energy for the dynamic problem).
    pub dirichlet_sum: f64,
    /// `‖U⁰‖² + Σ_{n≥1} dt ‖f^n‖²`.
    pub data_norm: f64,
    /// `(max_l2_sq + dirichlet_sum) / data_norm`, zero for zero data.
    pub ratio: f64,
}

pub fn energy_report(result: &RunResult) -> EnergyReport {
    let max_l2_sq = result.energy.iter().copied().fold(0.0, f64::max);
    let dirichlet_sum: f64 = result.dirichlet.iter().skip(1).map(|d| result.dt * d).sum();
    let forcing: f64 = result.forcing_sq.iter().skip(1).map(|f| result.dt * f).sum();
    let data_norm = result.energy.first().copied().unwrap_or(0.0) + forcing;
    let ratio = if data_norm > 0.0 { (max_l2_sq + dirichlet_sum) / data_norm } else { 0.0 };
    EnergyReport { max_l2_sq, dirichlet_sum, data_norm, ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_circle_mesh;
    use core::f64::consts::PI;

    #[test]
    fn static_geometry_has_no_transport() {
        let map = FlowMap::expanding(0.0, 1.0).unwrap();
        let c = build_circle_mesh(32).unwrap();
        let u: Vec<f64> = c.nodes().iter().map(|x| x[0]).collect();
        assert!(transport_residual(&map, &c, &u, &u, 0.5, 1e-3).unwrap() <= 1e-12);
        assert!(integration_by_parts_check(&map, &c, &u, &u, 1.0, 10).unwrap() <= 1e-12);
        assert!(transport_residual(&map, &c, &u, &u, 0.0, 1e-3).is_err());
        assert!(integration_by_parts_check(&map, &c, &u, &u, 1.0, 3).is_err());
    }

    #[test]
    fn expanding_perimeter() {
        let map = FlowMap::expanding(0.5, 1.0).unwrap();
        let c = build_circle_mesh(256).unwrap();
        let one = alloc::vec![1.0; 256];
        assert!(transport_residual(&map, &c, &one, &one, 0.5, 1e-4).unwrap() <= 1e-6);
        assert!(integration_by_parts_check(&map, &c, &one, &one, 1.0, 20).unwrap() <= 1e-6);
    }

    #[test]
    fn seminorm_properties() {
        let c = build_circle_mesh(64).unwrap();
        let u: Vec<f64> = c.nodes().iter().map(|x| x[0] + x[1] * x[1]).collect();
        let shifted: Vec<f64> = u.iter().map(|v| v + 3.0).collect();
        let doubled: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let s = h12_seminorm(&c, &u).unwrap();
        assert!(s > 0.0);
        assert!((h12_seminorm(&c, &shifted).unwrap() - s).abs() <= 1e-12 * s);
        assert!((h12_seminorm(&c, &doubled).unwrap() - 4.0 * s).abs() <= 1e-12 * s);
        assert_eq!(h12_seminorm(&c, &[2.5; 64]).unwrap(), 0.0);
        let _ = PI;
    }

    #[test]
    fn eoc_rates_of_synthetic_errors() {
        let mut t = EocTable::default();
        for l in 0..4 {
            let h = 0.5 / (1 << l) as f64;
            t.push(h, h * h, 3.0 * h * h, h);
        }
        for r in t.eoc_h() {
            assert!((r - 2.0).abs() < 1e-12);
        }
        for r in t.eoc_dt() {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
