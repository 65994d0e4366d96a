//! Command line front end for `evpde-core`: JSON run configs, CSV, VTK and
//! Matrix Market output, and the verification suite runner.

pub mod config;
pub mod output;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use evpde_core::flowmap::{describe_geometry, GEOMETRY_IDS};
use evpde_core::problems::{self, Discretization};
use evpde_core::suite::{self, CheckResult, SuiteOptions};
use evpde_core::timestep::run_transient;
use evpde_core::verify;

use config::{ConfigError, RunConfig};

/// A failed command and the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const RUN: u8 = 1;
    /// Unusable configuration or arguments.
    pub const USAGE: u8 = 2;

    fn run(message: impl Into<String>) -> Self {
        Self { code: Self::RUN, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self { code: Self::USAGE, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::run(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
}

/// What `run` produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub steps: usize,
    pub files: Vec<PathBuf>,
    pub max_error_l2: Option<f64>,
}

/// Runs one configured problem and writes its artifacts.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, Failure> {
    let problem = cfg.to_problem()?;
    let scheme = cfg.scheme();
    let out_dir = cfg.resolved_output_dir();
    fs::create_dir_all(&out_dir).map_err(|e| Failure::run(format!("cannot create {}: {e}", out_dir.display())))?;
    let result = run_transient(&problem, &scheme).map_err(|e| Failure::run(format!("{}: {e}", problems::describe(&problem))))?;

    let mut files = Vec::new();
    let csv = out_dir.join("functionals.csv");
    write_file(&csv, |w| output::write_functionals_csv(w, &result))?;
    files.push(csv);

    for (k, snap) in result.snapshots.iter().enumerate() {
        let path = out_dir.join(format!("step_{k:05}.vtk"));
        let title = format!("evpde {} t={}", problem.kind.name(), output::fmt_f64(snap.time));
        write_file(&path, |w| output::write_vtk(w, &title, snap))?;
        files.push(path);
    }

    if cfg.export_matrices {
        let sys = Discretization::new(&problem)
            .and_then(|d| d.system(0.0))
            .map_err(|e| Failure::run(format!("assembly at t = 0: {e}")))?;
        for (name, matrix) in [("mass.mtx", &sys.mass), ("stiffness.mtx", &sys.stiffness)] {
            let path = out_dir.join(name);
            write_file(&path, |w| output::write_matrix_market(w, matrix))?;
            files.push(path);
        }
    }

    if let Some(levels) = cfg.eoc_levels {
        let table = verify::convergence_study(&problem, &scheme, levels).map_err(|e| Failure::run(format!("convergence study: {e}")))?;
        let path = out_dir.join("eoc.csv");
        write_file(&path, |w| output::write_eoc_csv(w, &table))?;
        files.push(path);
    }

    Ok(RunSummary { output_dir: out_dir, steps: result.times.len() - 1, files, max_error_l2: result.max_error_l2() })
}

/// One row of the verification table.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub result: CheckResult,
    pub seconds: f64,
}

/// Runs the selected checks on scoped threads; rows come back in table order.
pub fn run_suite(opts: &SuiteOptions, only: Option<&str>, parallel: bool) -> Result<Vec<VerifyRow>, Failure> {
    let checks = suite::select(only).map_err(|e| Failure { code: Failure::USAGE, message: e.to_string() })?;
    let timed = |c: &suite::Check| {
        let start = Instant::now();
        let result = c.run(opts);
        VerifyRow { result, seconds: start.elapsed().as_secs_f64() }
    };
    if !parallel {
        return Ok(checks.iter().map(timed).collect());
    }
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = checks.iter().map(|c| s.spawn(move || timed(c))).collect();
        handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
    }))
}

/// Prints the table; fails naming the first red check.
pub fn report_suite<W: Write>(mut w: W, rows: &[VerifyRow]) -> Result<(), Failure> {
    let width = rows.iter().map(|r| r.result.group.len() + r.result.name.len() + 1).max().unwrap_or(0);
    for r in rows {
        let id = format!("{}/{}", r.result.group, r.result.name);
        let mark = if r.result.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(w, "{mark}  {id:<width$}  {:>6.2}s  {}", r.seconds, r.result.detail);
    }
    let failed = rows.iter().filter(|r| !r.result.passed).count();
    let _ = writeln!(w, "{} checks, {} passed, {failed} failed", rows.len(), rows.len() - failed);
    match rows.iter().find(|r| !r.result.passed) {
        Some(r) => Err(Failure::run(format!("check {}/{} failed: {}", r.result.group, r.result.name, r.result.detail))),
        None => Ok(()),
    }
}

pub fn list_geometries<W: Write>(mut w: W) -> io::Result<()> {
    for id in GEOMETRY_IDS {
        let about = describe_geometry(id).unwrap_or_default();
        writeln!(w, "{id:<26} {about}")?;
    }
    Ok(())
}
