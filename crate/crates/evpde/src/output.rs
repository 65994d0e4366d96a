//! File formats: CSV time series and EOC tables, legacy ASCII VTK
//! snapshots, Matrix Market coordinate files.

use std::io::{self, Write};

use evpde_core::timestep::{RunResult, Snapshot};
use evpde_core::verify::EocTable;
use evpde_core::SparseMatrix;

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `time,mass,energy[,error_l2]`, one row per time level.
pub fn write_functionals_csv<W: Write>(mut w: W, run: &RunResult) -> io::Result<()> {
    let errors = run.error_l2.as_deref();
    writeln!(w, "time,mass,energy{}", if errors.is_some() { ",error_l2" } else { "" })?;
    for k in 0..run.times.len() {
        write!(w, "{},{},{}", fmt_f64(run.times[k]), fmt_f64(run.mass[k]), fmt_f64(run.energy[k]))?;
        if let Some(e) = errors {
            write!(w, ",{}", fmt_f64(e[k]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `h,dt,error_l2,error_h1,eoc_h,eoc_dt`; rates are empty on the first row.
pub fn write_eoc_csv<W: Write>(mut w: W, table: &EocTable) -> io::Result<()> {
    writeln!(w, "{}", EocTable::CSV_HEADER)?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.dt),
            fmt_f64(r.error_l2),
            fmt_f64(r.error_h1),
            fmt_opt(r.eoc_h),
            fmt_opt(r.eoc_dt)
        )?;
    }
    Ok(())
}

const VTK_TRIANGLE: u8 = 5;
const VTK_LINE: u8 = 3;

/// Legacy ASCII VTK unstructured grid:
///
/// ```text
/// # vtk DataFile Version 3.0
/// <title line>
/// ASCII
/// DATASET UNSTRUCTURED_GRID
/// POINTS <n> double        (one "x y 0" line per point)
/// CELLS <cells> <size>     (triangles "3 a b c", then lines "2 a b")
/// CELL_TYPES <cells>       (5 per triangle, 3 per line)
/// POINT_DATA <n>
/// SCALARS u double 1
/// LOOKUP_TABLE default     (one value per line)
/// ```
pub fn write_vtk<W: Write>(mut w: W, title: &str, snap: &Snapshot) -> io::Result<()> {
    let n = snap.points.len();
    let cells = snap.triangles.len() + snap.lines.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for p in &snap.points {
        writeln!(w, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]))?;
    }
    writeln!(w, "CELLS {cells} {}", 4 * snap.triangles.len() + 3 * snap.lines.len())?;
    for t in &snap.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    for l in &snap.lines {
        writeln!(w, "2 {} {}", l[0], l[1])?;
    }
    writeln!(w, "CELL_TYPES {cells}")?;
    for _ in &snap.triangles {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    for _ in &snap.lines {
        writeln!(w, "{VTK_LINE}")?;
    }
    writeln!(w, "POINT_DATA {n}")?;
    writeln!(w, "SCALARS u double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &snap.values {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// Matrix Market `coordinate real general`, one-based indices.
pub fn write_matrix_market<W: Write>(mut w: W, a: &SparseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        for (j, v) in a.row(i) {
            writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn matrix_market_layout() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -1.0)]);
        let mut out = Vec::new();
        write_matrix_market(&mut out, &a).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 3 2");
        assert!(lines[2].starts_with("1 3 1.5"));
        assert!(lines[3].starts_with("2 1 -1"));
    }

    #[test]
    fn vtk_counts() {
        let snap = Snapshot {
            time: 0.0,
            points: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            lines: vec![[0, 1], [1, 2], [2, 0]],
            values: vec![1.0, 2.0, 3.0],
        };
        let mut out = Vec::new();
        write_vtk(&mut out, "t", &snap).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("CELLS 4 13\n"));
        assert!(text.contains("CELL_TYPES 4\n5\n3\n3\n3\n"));
        assert!(text.ends_with("3.0000000000000000e0\n"));
    }
}
