//! Result files: legacy VTK snapshots, CSV logs and run metadata.
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::driver::{IterationRecord, StepState};
use crate::mesh::Mesh;

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

impl IoError {
    fn at(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
        move |source| IoError { path: path.to_path_buf(), source }
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    write_atomic(path, text.as_bytes()).map_err(IoError::at(path))
}

/// Legacy ASCII VTK unstructured grid with point data `displacement`
/// (z = 0) and `phase`.
pub fn vtk_string(mesh: &Mesh, u: &[f64], v: &[f64], title: &str) -> String {
    let mut s = String::new();
    let n = mesh.num_nodes();
    let ne = mesh.num_elements();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for x in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", x[0], x[1]);
    }
    let _ = writeln!(s, "CELLS {ne} {}", 5 * ne);
    for c in mesh.elements() {
        let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "9");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    let _ = writeln!(s, "VECTORS displacement double");
    for i in 0..n {
        let _ = writeln!(s, "{} {} 0", u[2 * i], u[2 * i + 1]);
    }
    let _ = writeln!(s, "SCALARS phase double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for &vi in v {
        let _ = writeln!(s, "{}", vi.clamp(0.0, 1.0));
    }
    s
}

/// Writes `step_<k>.vtk` into `dir` and returns its path.
pub fn write_vtk(mesh: &Mesh, u: &[f64], v: &[f64], step: usize, dir: &Path) -> Result<PathBuf, IoError> {
    let path = dir.join(format!("step_{step:05}.vtk"));
    write_file(&path, &vtk_string(mesh, u, v, &format!("pfrac step {step}")))?;
    Ok(path)
}

pub const ITERATION_COLUMNS: &[&str] = &[
    "step",
    "iteration",
    "load",
    "ed_before",
    "ed",
    "phase_before",
    "phase_after",
    "ef",
    "ef_elastic",
    "ef_strength",
    "ef_surface",
    "eg",
    "dv_inf",
    "v_min",
    "v_iterations",
    "v_stationarity",
];

pub const STEP_COLUMNS: &[&str] = &[
    "step",
    "load",
    "iterations",
    "converged",
    "ed",
    "ef",
    "eg",
    "v_min",
    "damaged_fraction",
    "mean_stress_xx",
    "mean_stress_yy",
    "mean_stress_xy",
];

/// Floats use Rust's shortest round-trip representation.
fn f(x: f64) -> String {
    format!("{x:e}")
}

pub fn iterations_csv<'a>(records: impl IntoIterator<Item = &'a IterationRecord>) -> String {
    let mut s = ITERATION_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let row = [
            r.step.to_string(),
            r.iteration.to_string(),
            f(r.load),
            f(r.ed_before),
            f(r.ed),
            f(r.phase_before),
            f(r.phase_after),
            f(r.ef.total()),
            f(r.ef.elastic),
            f(r.ef.strength),
            f(r.ef.surface),
            f(r.eg),
            f(r.dv_inf),
            f(r.v_min),
            r.v_report.iterations.to_string(),
            f(r.v_report.residual),
        ];
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Header plus one row per step; reaction columns `reaction_<tag>_x/_y`
/// follow the fixed columns in tag order.
pub fn steps_csv(states: &[StepState]) -> String {
    let tags: Vec<String> = states.first().map(|s| s.reactions.keys().cloned().collect()).unwrap_or_default();
    let mut header: Vec<String> = STEP_COLUMNS.iter().map(|c| c.to_string()).collect();
    for t in &tags {
        header.push(format!("reaction_{t}_x"));
        header.push(format!("reaction_{t}_y"));
    }
    let mut s = header.join(",");
    s.push('\n');
    for st in states {
        let mut row = vec![
            st.step.to_string(),
            f(st.load),
            st.iterations.to_string(),
            st.converged.to_string(),
            f(st.energies.ed),
            f(st.energies.ef.total()),
            f(st.energies.eg),
            f(st.v_min),
            f(st.damaged_fraction),
            f(st.stress.xx),
            f(st.stress.yy),
            f(st.stress.xy),
        ];
        for t in &tags {
            let r = st.reactions.get(t).copied().unwrap_or([f64::NAN; 2]);
            row.push(f(r[0]));
            row.push(f(r[1]));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv_log<'a>(
    records: impl IntoIterator<Item = &'a IterationRecord>,
    dir: &Path,
) -> Result<PathBuf, IoError> {
    let path = dir.join("iterations.csv");
    write_file(&path, &iterations_csv(records))?;
    Ok(path)
}

pub fn write_steps_csv(states: &[StepState], dir: &Path) -> Result<PathBuf, IoError> {
    let path = dir.join("steps.csv");
    write_file(&path, &steps_csv(states))?;
    Ok(path)
}

/// Metadata file: the resolved configuration (re-parsable as a config)
/// preceded by comment lines.
pub fn write_metadata(dir: &Path, comments: &[String], config_text: &str) -> Result<PathBuf, IoError> {
    let path = dir.join("metadata.cfg");
    let mut s = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    s.push_str(config_text);
    write_file(&path, &s)?;
    Ok(path)
}

pub fn create_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(IoError::at(dir))
}

/// Parses a CSV produced by this module into its header and numeric rows.
/// Booleans read as 1/0.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty file")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| match c {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => c.parse::<f64>().map_err(|e| format!("row {}: {c:?}: {e}", i + 2)),
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if row.len() != header.len() {
            return Err(format!("row {} has {} fields, header {}", i + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect;

    const GOLDEN_ONE_ELEMENT: &str = "# vtk DataFile Version 3.0
pfrac step 0
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0 0 0
1 0 0
0 1 0
1 1 0
CELLS 1 5
4 0 1 3 2
CELL_TYPES 1
9
POINT_DATA 4
VECTORS displacement double
0 0 0
0 0 0
0 0 0
0 0 0
SCALARS phase double 1
LOOKUP_TABLE default
0
0
0
0
";

    #[test]
    fn vtk_golden_one_element() {
        let mesh = generate_rect(1.0, 1.0, 1, 1).unwrap();
        let s = vtk_string(&mesh, &[0.0; 8], &[0.0; 4], "pfrac step 0");
        assert_eq!(s, GOLDEN_ONE_ELEMENT);
    }

    #[test]
    fn vtk_point_count_and_clamp() {
        let mesh = generate_rect(2.0, 1.0, 3, 2).unwrap();
        let n = mesh.num_nodes();
        let v: Vec<f64> = (0..n).map(|i| i as f64 / 4.0 - 0.5).collect();
        let s = vtk_string(&mesh, &vec![0.1; 2 * n], &v, "t");
        assert!(s.contains(&format!("POINTS {n} double")));
        assert!(s.contains(&format!("POINT_DATA {n}")));
        let phase: Vec<f64> = s
            .split("LOOKUP_TABLE default\n")
            .nth(1)
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(phase.len(), n);
        assert!(phase.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn empty_log_is_header_only() {
        let s = iterations_csv(std::iter::empty());
        assert_eq!(s, format!("{}\n", ITERATION_COLUMNS.join(",")));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
