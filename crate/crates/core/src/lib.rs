//! Piecewise-linear finite elements for linear parabolic equations posed on
//! evolving closed curves and on moving planar domains.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs: analytic flow maps, mesh construction and motion,
//! CSR storage and solvers, P1 assembly, the moving-mesh time stepper, the
//! four model problem drivers and the numerical verification harness.
//! File formats and the command line live in the `evpde` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fem;
pub mod flowmap;
pub mod geom;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod suite;
pub mod timestep;
pub mod verify;

pub use error::{Error, Result};
pub use flowmap::{FlowFamily, FlowMap, GeometryKind, GeometrySample, MeasureKind};
pub use geom::Point;
pub use linalg::SparseMatrix;
pub use mesh::{BulkMesh, SurfaceMesh};
