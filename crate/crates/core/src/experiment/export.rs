//! Surface CSV and gnuplot matrix export.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::grid::{SurfaceRow, SurfaceTable};
use crate::metrics::DME_NOTE;
use crate::model::FrameworkKind;
use crate::scalar::Scalar;

pub const SURFACE_HEADER: &str = "framework,learning_rate,reg_magnitude,mae,dme,status";

fn opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Renders the surface CSV. Rows come out in (framework, lr, magnitude)
/// order whatever order the table holds them in.
pub fn surface_csv<T: Scalar>(table: &SurfaceTable<T>) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::contract("cannot export an empty surface table"));
    }
    let mut sorted = table.clone();
    sorted.sort();
    let mut out = String::new();
    out.push_str(SURFACE_HEADER);
    out.push('\n');
    for r in &sorted.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.framework,
            r.learning_rate,
            r.reg_magnitude,
            opt(r.mae),
            opt(r.dme),
            r.status
        ));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Mae,
    Dme,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Dme => "dme",
        }
    }

    fn of<T: Scalar>(self, row: &SurfaceRow<T>) -> Option<T> {
        match self {
            Metric::Mae => row.mae,
            Metric::Dme => row.dme,
        }
    }
}

/// One framework's metric as a gnuplot `nonuniform matrix`: the first row
/// holds the column count and the magnitudes, each further row a learning
/// rate followed by its values. Missing cells are `NaN`.
pub fn surface_matrix<T: Scalar>(table: &SurfaceTable<T>, kind: FrameworkKind, metric: Metric) -> String {
    let rows: Vec<&SurfaceRow<T>> = table.rows.iter().filter(|r| r.framework == kind).collect();
    let mut lrs: Vec<T> = rows.iter().map(|r| r.learning_rate).collect();
    let mut mags: Vec<T> = rows.iter().map(|r| r.reg_magnitude).collect();
    for axis in [&mut lrs, &mut mags] {
        axis.sort_by(|a, b| a.partial_cmp(b).expect("finite axis"));
        axis.dedup();
    }
    let mut out = format!("# framework={kind} metric={} rows=learning_rate cols=reg_magnitude\n", metric.name());
    if metric == Metric::Dme {
        out.push_str(&format!("# {DME_NOTE}\n"));
    }
    out.push_str(&mags.len().to_string());
    for m in &mags {
        out.push_str(&format!(" {m}"));
    }
    out.push('\n');
    for lr in &lrs {
        out.push_str(&lr.to_string());
        for m in &mags {
            let v = rows
                .iter()
                .find(|r| r.learning_rate == *lr && r.reg_magnitude == *m)
                .and_then(|r| metric.of(r));
            out.push(' ');
            out.push_str(&v.map_or_else(|| "NaN".to_owned(), |x| x.to_string()));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(content.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Writes the surface CSV to `path` and, next to it, one
/// `<stem>_<framework>_<metric>.dat` matrix per framework and metric.
/// Returns every path written, CSV first.
pub fn export_surface<T: Scalar>(table: &SurfaceTable<T>, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let csv = surface_csv(table)?;
    write_file(path, &csv)?;
    let mut written = vec![path.to_path_buf()];
    let stem = path
        .file_stem()
        .map_or_else(|| "surface".to_owned(), |s| s.to_string_lossy().into_owned());
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let mut sorted = table.clone();
    sorted.sort();
    for kind in sorted.frameworks() {
        for metric in [Metric::Mae, Metric::Dme] {
            let p = dir.join(format!("{stem}_{kind}_{}.dat", metric.name()));
            write_file(&p, &surface_matrix(&sorted, kind, metric))?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::grid::CellStatus;

    fn row(kind: FrameworkKind, lr: f64, mag: f64, mae: Option<f64>) -> SurfaceRow<f64> {
        SurfaceRow {
            framework: kind,
            learning_rate: lr,
            reg_magnitude: mag,
            mae,
            dme: mae.map(|m| -m),
            status: if mae.is_some() { CellStatus::Ok } else { CellStatus::Diverged },
            epochs_run: 1,
        }
    }

    fn table(rows: Vec<SurfaceRow<f64>>) -> SurfaceTable<f64> {
        SurfaceTable { rows, split_ratio: 0.8, split_seed: 1 }
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(surface_csv(&table(vec![])).is_err());
    }

    #[test]
    fn single_row_csv() {
        let t = table(vec![row(FrameworkKind::VectorDot, 0.01, 0.1, Some(0.7))]);
        assert_eq!(surface_csv(&t).unwrap(), format!("{SURFACE_HEADER}\nvector_dot,0.01,0.1,0.7,-0.7,ok\n"));
    }

    #[test]
    fn rows_are_sorted_and_diverged_cells_blank() {
        let t = table(vec![
            row(FrameworkKind::VectorDot, 0.1, 0.0, None),
            row(FrameworkKind::GlobalScalar, 0.1, 1.0, Some(0.9)),
            row(FrameworkKind::GlobalScalar, 0.01, 1.0, Some(0.8)),
        ]);
        let csv = surface_csv(&t).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[1], "global_scalar,0.01,1,0.8,-0.8,ok");
        assert_eq!(lines[2], "global_scalar,0.1,1,0.9,-0.9,ok");
        assert_eq!(lines[3], "vector_dot,0.1,0,,,diverged");
    }

    #[test]
    fn matrix_layout() {
        let t = table(vec![
            row(FrameworkKind::GlobalScalar, 0.01, 0.0, Some(0.5)),
            row(FrameworkKind::GlobalScalar, 0.01, 1.0, Some(0.6)),
            row(FrameworkKind::GlobalScalar, 0.1, 0.0, None),
            row(FrameworkKind::GlobalScalar, 0.1, 1.0, Some(0.7)),
        ]);
        let m = surface_matrix(&t, FrameworkKind::GlobalScalar, Metric::Mae);
        let data: Vec<_> = m.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["2 0 1", "0.01 0.5 0.6", "0.1 NaN 0.7"]);
    }

    #[test]
    fn export_writes_companions_and_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(vec![
            row(FrameworkKind::GlobalScalar, 0.01, 0.0, Some(0.5)),
            row(FrameworkKind::VectorDot, 0.01, 0.0, Some(0.4)),
        ]);
        let p = dir.path().join("surface.csv");
        let files = export_surface(&t, &p).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.path().join("surface_vector_dot_dme.dat").exists());
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        export_surface(&t, &p).unwrap();
        let second: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        assert_eq!(first, second);
        assert!(export_surface(&t, dir.path().join("no/such/dir/s.csv")).is_err());
    }
}
