//! JSON run configuration.
//!
//! ```json
//! {
//!   "problem": "surface_heat",
//!   "geometry": "expanding_circle",
//!   "geometry_params": { "growth": 0.5 },
//!   "n": 128,
//!   "dt": 0.01,
//!   "t_end": 1.0,
//!   "emit_vtk": false
//! }
//! ```
//!
//! Only `problem` and `geometry` are required, except that the coupled
//! problem also needs `alpha` and `beta`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use evpde_core::fem::{Advection, FormCoefficients};
use evpde_core::flowmap::{parse_geometry_id, FlowFamily, FlowMap, GeometryKind};
use evpde_core::problems::{self, field, manufactured, ProblemData, ProblemKind, ProblemSpec, Resolution};
use evpde_core::timestep::{SchemeConfig, SolverKind};
use serde::Deserialize;

pub const DEFAULT_DT: f64 = 1e-2;
pub const DEFAULT_T_END: f64 = 1.0;
pub const DEFAULT_SEGMENTS: usize = 64;
pub const DEFAULT_MESH_SIZE: f64 = 0.1;
pub const DEFAULT_OUTPUT_DIR: &str = "evpde_out";
/// Environment variable that overrides `output_dir`.
pub const OUTPUT_ENV: &str = "EVPDE_OUT";

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    /// Malformed JSON, unknown key, missing or ill-typed value.
    Parse(String),
    /// Unknown geometry id; the message lists the valid ones.
    Geometry(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(m) | ConfigError::Geometry(m) | ConfigError::Invalid(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Cg,
    Direct,
}

/// `"zero"`, `"material"` or a constant vector `[b1, b2]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AdvectionChoice {
    Named(String),
    Constant([f64; 2]),
}

/// Initial and forcing data. `manufactured` needs the expanding family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataChoice {
    Manufactured,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub geometry: String,
    #[serde(default)]
    pub geometry_params: BTreeMap<String, f64>,
    /// Segment count of the reference circle (surface heat only).
    pub n: Option<usize>,
    /// Target mesh size of the reference disk (bulk problems only).
    pub h: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_one")]
    pub diffusion: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub advection: Option<AdvectionChoice>,
    /// Defaults to `manufactured` on the expanding family, `smooth` elsewhere.
    pub data: Option<DataChoice>,
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_vtk: bool,
    /// Write mass and stiffness at `t = 0` in Matrix Market format.
    #[serde(default)]
    pub export_matrices: bool,
    /// Run a convergence study with this many levels and write `eoc.csv`.
    pub eoc_levels: Option<usize>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_t_end() -> f64 {
    DEFAULT_T_END
}
fn default_one() -> f64 {
    1.0
}
fn default_solver() -> SolverChoice {
    SolverChoice::Cg
}
fn default_output_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            ConfigError::Parse(e.inner().to_string())
        } else {
            ConfigError::Parse(format!("{path}: {}", e.inner()))
        }
    })?;
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    fn check(&self) -> Result<(), ConfigError> {
        let kind = self.kind()?;
        let (family, geometry) = parse_geometry_id(&self.geometry).map_err(|e| ConfigError::Geometry(e.to_string()))?;
        let wanted = if kind.on_curve() { GeometryKind::Curve } else { GeometryKind::Disk };
        if geometry != wanted {
            return Err(ConfigError::Invalid(format!(
                "problem {} needs a {} geometry, \"{}\" is a {}",
                kind.name(),
                shape(wanted),
                self.geometry,
                shape(geometry)
            )));
        }
        match (kind.on_curve(), self.n, self.h) {
            (true, _, Some(_)) => return Err(ConfigError::Invalid(format!("key \"h\" does not apply to {}; use \"n\"", kind.name()))),
            (false, Some(_), _) => return Err(ConfigError::Invalid(format!("key \"n\" does not apply to {}; use \"h\"", kind.name()))),
            _ => {}
        }
        if kind == ProblemKind::CoupledBulkSurface {
            for (key, value) in [("alpha", self.alpha), ("beta", self.beta)] {
                if value.is_none() {
                    return Err(ConfigError::Invalid(format!("coupled_bulk_surface requires key \"{key}\"")));
                }
            }
        } else {
            for (key, value) in [("alpha", self.alpha), ("beta", self.beta)] {
                if value.is_some() {
                    return Err(ConfigError::Invalid(format!("key \"{key}\" only applies to coupled_bulk_surface")));
                }
            }
        }
        if !(self.dt > 0.0 && self.dt < self.t_end) {
            return Err(ConfigError::Invalid(format!("dt must lie in (0, t_end), got dt = {}, t_end = {}", self.dt, self.t_end)));
        }
        if let Some(levels) = self.eoc_levels {
            if levels < 3 {
                return Err(ConfigError::Invalid(format!("eoc_levels must be at least 3, got {levels}")));
            }
        }
        self.advection()?;
        if self.data_choice(family) == DataChoice::Manufactured && family != FlowFamily::ExpandingCircle {
            return Err(ConfigError::Invalid(format!(
                "manufactured data needs an expanding geometry, not \"{}\"",
                self.geometry
            )));
        }
        if self.eoc_levels.is_some() && self.data_choice(family) != DataChoice::Manufactured {
            return Err(ConfigError::Invalid("eoc_levels needs manufactured data".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<ProblemKind, ConfigError> {
        ProblemKind::parse(&self.problem).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    fn advection(&self) -> Result<Advection, ConfigError> {
        match &self.advection {
            None => Ok(Advection::Material),
            Some(AdvectionChoice::Constant(b)) => Ok(Advection::Constant(*b)),
            Some(AdvectionChoice::Named(s)) => match s.as_str() {
                "zero" => Ok(Advection::Zero),
                "material" => Ok(Advection::Material),
                other => Err(ConfigError::Invalid(format!(
                    "advection: unknown value \"{other}\"; expected \"zero\", \"material\" or [b1, b2]"
                ))),
            },
        }
    }

    fn data_choice(&self, family: FlowFamily) -> DataChoice {
        self.data.unwrap_or(if family == FlowFamily::ExpandingCircle { DataChoice::Manufactured } else { DataChoice::Smooth })
    }

    pub fn scheme(&self) -> SchemeConfig {
        let solver = match self.solver {
            SolverChoice::Cg => SolverKind::Cg,
            SolverChoice::Direct => SolverKind::Direct,
        };
        SchemeConfig { solver, keep_snapshots: self.emit_vtk, ..SchemeConfig::with_dt(self.dt) }
    }

    /// Output directory after applying the [`OUTPUT_ENV`] override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn to_problem(&self) -> Result<ProblemSpec, ConfigError> {
        let kind = self.kind()?;
        let (family, _) = parse_geometry_id(&self.geometry).map_err(|e| ConfigError::Geometry(e.to_string()))?;
        let params: Vec<(&str, f64)> = self.geometry_params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let flow = FlowMap::from_params(family, &params, self.t_end).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let coefficients = FormCoefficients {
            diffusion: self.diffusion,
            advection: self.advection()?,
            alpha: self.alpha.unwrap_or(1.0),
            beta: self.beta.unwrap_or(1.0),
        };
        let data = match self.data_choice(family) {
            DataChoice::Manufactured => {
                manufactured(kind, &flow, &coefficients).map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            DataChoice::Smooth => smooth_data(kind),
        };
        let resolution = if kind.on_curve() {
            Resolution::Segments(self.n.unwrap_or(DEFAULT_SEGMENTS))
        } else {
            Resolution::MeshSize(self.h.unwrap_or(DEFAULT_MESH_SIZE))
        };
        let problem = ProblemSpec { kind, flow, coefficients, data, resolution, t_end: self.t_end };
        problem.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(problem)
    }
}

fn shape(kind: GeometryKind) -> &'static str {
    match kind {
        GeometryKind::Curve => "curve",
        GeometryKind::Disk => "disk",
    }
}

/// Unforced smooth initial data, usable on every geometry.
fn smooth_data(kind: ProblemKind) -> ProblemData {
    let mut data = match kind {
        ProblemKind::SurfaceHeat => ProblemData::unforced(field(|_, x| 1.0 + x[0] * x[1] + 0.5 * x[0])),
        ProblemKind::DynamicBoundary => ProblemData::unforced(field(|_, x| 1.0 + x[0] * x[0] - x[1] * x[1])),
        _ => ProblemData::unforced(field(|_, x| 1.0 + x[0] - 0.5 * x[1] * x[1])),
    };
    if kind == ProblemKind::CoupledBulkSurface {
        data.surface_initial = Some(field(|_, x| 0.5 + x[1]));
        data.surface_forcing = Some(problems::zero_field());
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_filled() {
        let c = parse_config_str(r#"{"problem": "surface_heat", "geometry": "expanding_circle"}"#).unwrap();
        assert_eq!((c.dt, c.t_end, c.emit_vtk), (1e-2, 1.0, false));
        assert_eq!(c.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
        let p = c.to_problem().unwrap();
        assert_eq!(p.resolution, Resolution::Segments(DEFAULT_SEGMENTS));
        assert!(p.has_exact());
    }

    #[test]
    fn ill_typed_value_names_key() {
        let e = parse_config_str(r#"{"problem": "bulk", "geometry": "expanding_disk", "dt": "small"}"#).unwrap_err();
        assert!(e.to_string().starts_with("dt:"), "{e}");
    }

    #[test]
    fn advection_values() {
        let base = r#"{"problem": "bulk", "geometry": "translating_disk", "advection": "#;
        for (text, expect) in [(r#""zero"}"#, Advection::Zero), (r#"[1.0, 2.0]}"#, Advection::Constant([1.0, 2.0]))] {
            let c = parse_config_str(&format!("{base}{text}")).unwrap();
            assert_eq!(c.to_problem().unwrap().coefficients.advection, expect);
        }
        assert!(parse_config_str(&format!("{base}\"swirl\"}}")).unwrap_err().to_string().contains("swirl"));
    }

    #[test]
    fn mismatched_geometry_and_resolution() {
        assert!(parse_config_str(r#"{"problem": "bulk", "geometry": "expanding_circle"}"#).is_err());
        assert!(parse_config_str(r#"{"problem": "surface_heat", "geometry": "expanding_circle", "h": 0.1}"#).is_err());
        let e = parse_config_str(r#"{"problem": "surface_heat", "geometry": "oscillating_ellipse", "data": "manufactured"}"#)
            .unwrap_err();
        assert!(e.to_string().contains("manufactured"));
    }

    #[test]
    fn dynamic_rejects_tangential_motion() {
        let c = parse_config_str(r#"{"problem": "dynamic_boundary", "geometry": "oscillating_ellipse_disk", "h": 0.3}"#).unwrap();
        assert!(c.to_problem().unwrap_err().to_string().contains("normal"));
    }
}
