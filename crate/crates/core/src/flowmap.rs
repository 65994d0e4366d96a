//! Analytic evolving geometries.
//!
//! A [`FlowMap`] carries a closed-form position map `Φ(t, x0)` from the unit
//! circle (or unit disk) at `t = 0` to the geometry at time `t`, together with
//! its Eulerian velocity `w(t, x)`, deformation gradient, Jacobians and the
//! bulk and tangential divergences of `w`. Divergences are always analytic;
//! nothing in here differentiates numerically.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{self, Mat2, Point};

/// Built-in evolving geometry families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowFamily {
    /// Rigid motion `Φ = x0 + c t e₁`. Parameter `speed` (default 1).
    TranslatingCircle,
    /// Uniform dilation `Φ = R(t) x0` with `R = 1 + γ t`. Parameter `growth` (default 0.5).
    ExpandingCircle,
    /// `Φ = (a(t) x0₁, x0₂)` with `a = 1 + A sin(2πt)`. Parameter `amplitude` (default 0.25).
    OscillatingEllipse,
}

/// Whether a family is used to move a closed curve or the filled disk it bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Curve,
    Disk,
}

/// Which measure a Jacobian refers to: arclength on the curve or area in the bulk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureKind {
    Surface,
    Bulk,
}

/// Geometry ids accepted by [`parse_geometry_id`], in listing order.
pub const GEOMETRY_IDS: [&str; 6] = [
    "translating_circle",
    "expanding_circle",
    "oscillating_ellipse",
    "translating_disk",
    "expanding_disk",
    "oscillating_ellipse_disk",
];

pub fn parse_geometry_id(id: &str) -> Result<(FlowFamily, GeometryKind)> {
    let parsed = match id {
        "translating_circle" => (FlowFamily::TranslatingCircle, GeometryKind::Curve),
        "expanding_circle" => (FlowFamily::ExpandingCircle, GeometryKind::Curve),
        "oscillating_ellipse" => (FlowFamily::OscillatingEllipse, GeometryKind::Curve),
        "translating_disk" => (FlowFamily::TranslatingCircle, GeometryKind::Disk),
        "expanding_disk" => (FlowFamily::ExpandingCircle, GeometryKind::Disk),
        "oscillating_ellipse_disk" => (FlowFamily::OscillatingEllipse, GeometryKind::Disk),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown geometry id \"{other}\"; valid ids: {}",
                GEOMETRY_IDS.join(", ")
            )))
        }
    };
    Ok(parsed)
}

impl FlowFamily {
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            FlowFamily::TranslatingCircle => &["speed"],
            FlowFamily::ExpandingCircle => &["growth"],
            FlowFamily::OscillatingEllipse => &["amplitude"],
        }
    }

    pub fn default_parameter(self) -> f64 {
        match self {
            FlowFamily::TranslatingCircle => 1.0,
            FlowFamily::ExpandingCircle => 0.5,
            FlowFamily::OscillatingEllipse => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowFamily::TranslatingCircle => "translating_circle",
            FlowFamily::ExpandingCircle => "expanding_circle",
            FlowFamily::OscillatingEllipse => "oscillating_ellipse",
        }
    }
}

/// Pointwise geometric data of a flow at a material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySample {
    pub position: Point,
    pub velocity: Point,
    /// `grad_velocity[i][j] = ∂w_i/∂x_j`.
    pub grad_velocity: Mat2,
    pub jdet: f64,
    pub div_w_bulk: f64,
    pub div_w_surface: f64,
}

/// An analytic flow map on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMap {
    family: FlowFamily,
    /// The single family parameter (speed, growth rate or amplitude).
    param: f64,
    t_end: f64,
}

const T_SLACK: f64 = 1e-12;

impl FlowMap {
    /// Family with its default parameter.
    pub fn new(family: FlowFamily, t_end: f64) -> Result<Self> {
        Self::with_param(family, family.default_parameter(), t_end)
    }

    pub fn translating(speed: f64, t_end: f64) -> Result<Self> {
        Self::with_param(FlowFamily::TranslatingCircle, speed, t_end)
    }

    pub fn expanding(growth: f64, t_end: f64) -> Result<Self> {
        Self::with_param(FlowFamily::ExpandingCircle, growth, t_end)
    }

    pub fn oscillating(amplitude: f64, t_end: f64) -> Result<Self> {
        Self::with_param(FlowFamily::OscillatingEllipse, amplitude, t_end)
    }

    /// Builds a family from a list of named parameters; names not listed by
    /// [`FlowFamily::parameter_names`] are rejected.
    pub fn from_params(family: FlowFamily, params: &[(&str, f64)], t_end: f64) -> Result<Self> {
        let mut value = family.default_parameter();
        for &(name, v) in params {
            if family.parameter_names().contains(&name) {
                value = v;
            } else {
                return Err(Error::InvalidArgument(format!(
                    "family {} has no parameter \"{name}\" (expected one of: {})",
                    family.name(),
                    family.parameter_names().join(", ")
                )));
            }
        }
        Self::with_param(family, value, t_end)
    }

    fn with_param(family: FlowFamily, param: f64, t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
        }
        if !param.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite parameter {param}")));
        }
        match family {
            FlowFamily::TranslatingCircle => {}
            FlowFamily::ExpandingCircle => {
                if 1.0 + param * t_end <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "growth {param} collapses the circle before t_end = {t_end}"
                    )));
                }
            }
            FlowFamily::OscillatingEllipse => {
                if param.abs() >= 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "amplitude must satisfy |A| < 1, got {param}"
                    )));
                }
            }
        }
        Ok(Self { family, param, t_end })
    }

    pub fn family(&self) -> FlowFamily {
        self.family
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        alloc::vec![(self.family.parameter_names()[0], self.param)]
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// True when the velocity field vanishes identically.
    pub fn is_static(&self) -> bool {
        self.param == 0.0
    }

    /// True when the velocity is normal to the moving circle, i.e. no
    /// tangential component along the curve.
    pub fn is_normal_motion(&self) -> bool {
        match self.family {
            FlowFamily::ExpandingCircle => true,
            FlowFamily::TranslatingCircle | FlowFamily::OscillatingEllipse => self.is_static(),
        }
    }

    /// Uniform bound `C_J` with `1/C_J ≤ J ≤ C_J` on `[0, t_end]` for the given measure.
    pub fn jacobian_bound(&self, kind: MeasureKind) -> f64 {
        let one_dim = match self.family {
            FlowFamily::TranslatingCircle => 1.0,
            FlowFamily::ExpandingCircle => {
                let r = 1.0 + self.param * self.t_end;
                if r >= 1.0 { r } else { 1.0 / r }
            }
            FlowFamily::OscillatingEllipse => {
                let a = self.param.abs();
                (1.0 + a).max(1.0 / (1.0 - a))
            }
        };
        match (self.family, kind) {
            (FlowFamily::ExpandingCircle, MeasureKind::Bulk) => one_dim * one_dim,
            _ => one_dim,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= -T_SLACK && t <= self.t_end * (1.0 + T_SLACK) + T_SLACK {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} outside [0, {}]", self.t_end)))
        }
    }

    /// Scale factor `R(t)` (expanding) or `a(t)` (ellipse) and its time derivative.
    fn stretch(&self, t: f64) -> (f64, f64) {
        match self.family {
            FlowFamily::TranslatingCircle => (1.0, 0.0),
            FlowFamily::ExpandingCircle => (1.0 + self.param * t, self.param),
            FlowFamily::OscillatingEllipse => {
                let w = 2.0 * PI;
                (1.0 + self.param * libm::sin(w * t), self.param * w * libm::cos(w * t))
            }
        }
    }

    /// `R(t)` for the expanding family, `a(t)` for the ellipse, 1 for translation.
    pub fn scale_factor(&self, t: f64) -> f64 {
        self.stretch(t).0
    }

    /// Time derivative of [`FlowMap::scale_factor`].
    pub fn scale_rate(&self, t: f64) -> f64 {
        self.stretch(t).1
    }

    /// `Φ(t, x0)`. Returns `x0` unchanged at `t = 0`.
    pub fn evaluate(&self, t: f64, x0: Point) -> Result<Point> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(x0);
        }
        Ok(self.position_unchecked(t, x0))
    }

    fn position_unchecked(&self, t: f64, x0: Point) -> Point {
        match self.family {
            FlowFamily::TranslatingCircle => [x0[0] + self.param * t, x0[1]],
            FlowFamily::ExpandingCircle => {
                let r = self.stretch(t).0;
                [r * x0[0], r * x0[1]]
            }
            FlowFamily::OscillatingEllipse => [self.stretch(t).0 * x0[0], x0[1]],
        }
    }

    /// `Φ(t, ·)⁻¹(x)`.
    pub fn inverse(&self, t: f64, x: Point) -> Result<Point> {
        self.check_time(t)?;
        let s = self.stretch(t).0;
        Ok(match self.family {
            FlowFamily::TranslatingCircle => [x[0] - self.param * t, x[1]],
            FlowFamily::ExpandingCircle => [x[0] / s, x[1] / s],
            FlowFamily::OscillatingEllipse => [x[0] / s, x[1]],
        })
    }

    /// [`FlowMap::div_surface`] at a point `x` of the moved unit circle.
    pub fn div_surface_at(&self, t: f64, x: Point) -> Result<f64> {
        let x0 = self.inverse(t, x)?;
        self.div_surface(t, x0)
    }

    /// Eulerian velocity `w(t, x)` at a point `x` of the current geometry.
    pub fn velocity(&self, t: f64, x: Point) -> Result<Point> {
        self.check_time(t)?;
        let (s, ds) = self.stretch(t);
        Ok(match self.family {
            FlowFamily::TranslatingCircle => [self.param, 0.0],
            FlowFamily::ExpandingCircle => geom::scale(ds / s, x),
            FlowFamily::OscillatingEllipse => [ds / s * x[0], 0.0],
        })
    }

    /// `∇w(t)`; constant in space for every built-in family.
    pub fn grad_velocity(&self, t: f64) -> Result<Mat2> {
        self.check_time(t)?;
        let (s, ds) = self.stretch(t);
        let rate = ds / s;
        Ok(match self.family {
            FlowFamily::TranslatingCircle => [[0.0, 0.0], [0.0, 0.0]],
            FlowFamily::ExpandingCircle => [[rate, 0.0], [0.0, rate]],
            FlowFamily::OscillatingEllipse => [[rate, 0.0], [0.0, 0.0]],
        })
    }

    /// `DΦ(t, x0)`.
    pub fn deformation_gradient(&self, t: f64) -> Result<Mat2> {
        self.check_time(t)?;
        let s = self.stretch(t).0;
        Ok(match self.family {
            FlowFamily::TranslatingCircle => [[1.0, 0.0], [0.0, 1.0]],
            FlowFamily::ExpandingCircle => [[s, 0.0], [0.0, s]],
            FlowFamily::OscillatingEllipse => [[s, 0.0], [0.0, 1.0]],
        })
    }

    /// `∇·w`.
    pub fn div_bulk(&self, t: f64) -> Result<f64> {
        Ok(geom::trace(&self.grad_velocity(t)?))
    }

    /// Unit tangent of the moved curve at the image of the reference point
    /// `x0` on the unit circle (counter-clockwise orientation).
    pub fn tangent(&self, t: f64, x0: Point) -> Result<Point> {
        let f = self.deformation_gradient(t)?;
        let tau = geom::mat_vec(&f, [-x0[1], x0[0]]);
        let len = geom::norm(tau);
        if len <= 0.0 {
            return Err(Error::GeometryDegeneracy(format!("zero tangent at t = {t}")));
        }
        Ok(geom::scale(1.0 / len, tau))
    }

    /// Tangential divergence `∇_Γ·w = τ·(∇w)τ` on the moved curve, at the
    /// image of the reference point `x0` on the unit circle.
    pub fn div_surface(&self, t: f64, x0: Point) -> Result<f64> {
        let tau = self.tangent(t, x0)?;
        let g = self.grad_velocity(t)?;
        Ok(geom::dot(tau, geom::mat_vec(&g, tau)))
    }

    /// Length-element ratio `|DΦ τ0|` (surface) or `det DΦ` (bulk).
    pub fn jacobian_det(&self, t: f64, x0: Point, kind: MeasureKind) -> Result<f64> {
        let f = self.deformation_gradient(t)?;
        let j = match kind {
            MeasureKind::Bulk => geom::det(&f),
            MeasureKind::Surface => {
                let r0 = geom::norm(x0);
                if r0 == 0.0 {
                    return Err(Error::Domain("surface Jacobian at the origin".into()));
                }
                let tau0 = [-x0[1] / r0, x0[0] / r0];
                geom::norm(geom::mat_vec(&f, tau0))
            }
        };
        if !(j > 0.0) {
            return Err(Error::GeometryDegeneracy(format!(
                "non-positive Jacobian {j} at t = {t}, x0 = ({}, {})",
                x0[0], x0[1]
            )));
        }
        Ok(j)
    }

    pub fn sample(&self, t: f64, x0: Point, kind: MeasureKind) -> Result<GeometrySample> {
        let position = self.evaluate(t, x0)?;
        let div_w_surface = if geom::norm(x0) > 0.0 { self.div_surface(t, x0)? } else { 0.0 };
        Ok(GeometrySample {
            position,
            velocity: self.velocity(t, position)?,
            grad_velocity: self.grad_velocity(t)?,
            jdet: self.jacobian_det(t, x0, kind)?,
            div_w_bulk: self.div_bulk(t)?,
            div_w_surface,
        })
    }

    /// Integrates `dJ/dt = div(t) J`, `J(0) = 1` with classical RK4 on the
    /// given grid; `div` is `∇_Γ·w` along the trajectory of `x0` for the
    /// surface measure and `∇·w` for the bulk measure.
    pub fn integrate_jacobian_ode(&self, x0: Point, t_grid: &[f64], kind: MeasureKind) -> Result<Vec<f64>> {
        match t_grid.first() {
            Some(&0.0) => {}
            _ => return Err(Error::InvalidArgument("time grid must start at 0".into())),
        }
        let rate = |t: f64| -> Result<f64> {
            match kind {
                MeasureKind::Surface => self.div_surface(t, x0),
                MeasureKind::Bulk => self.div_bulk(t),
            }
        };
        let mut out = Vec::with_capacity(t_grid.len());
        let mut j = 1.0;
        out.push(j);
        for w in t_grid.windows(2) {
            let (t, h) = (w[0], w[1] - w[0]);
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
            }
            let k1 = rate(t)? * j;
            let k2 = rate(t + 0.5 * h)? * (j + 0.5 * h * k1);
            let k3 = rate(t + 0.5 * h)? * (j + 0.5 * h * k2);
            let k4 = rate(t + h)? * (j + h * k3);
            j += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(j);
        }
        Ok(out)
    }
}

/// Normal velocity `-ψ_t/|∇ψ| · ∇ψ/|∇ψ|` of the zero level set of `ψ`.
pub fn normal_velocity_from_levelset(psi_t: f64, grad_psi: Point) -> Result<Point> {
    let n2 = geom::dot(grad_psi, grad_psi);
    if !(n2 > 0.0) {
        return Err(Error::SingularLevelSet);
    }
    Ok(geom::scale(-psi_t / n2, grad_psi))
}

/// Human-readable one-line description of a geometry id, for listings.
pub fn describe_geometry(id: &str) -> Result<String> {
    let (family, kind) = parse_geometry_id(id)?;
    let shape = match kind {
        GeometryKind::Curve => "closed curve",
        GeometryKind::Disk => "filled disk",
    };
    let motion = match family {
        FlowFamily::TranslatingCircle => "x0 + speed*t*e1",
        FlowFamily::ExpandingCircle => "(1 + growth*t) x0",
        FlowFamily::OscillatingEllipse => "((1 + amplitude*sin(2 pi t)) x0_1, x0_2)",
    };
    Ok(format!(
        "{shape}, Phi(t, x0) = {motion}; parameter {} (default {})",
        family.parameter_names()[0],
        family.default_parameter()
    ))
}
