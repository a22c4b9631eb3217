use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::snapshot::Snapshot;

/// Writes `contents` to `path` via a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::numerical(format!("JSON encoding: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Shortest round-trip formatting, switching to exponent form for very small
/// or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// `snapshots.csv`: a `# config_hash` comment line, the header
/// `t,bin_center,density`, then one row per cell and snapshot. `density` is
/// cell mass over cell width. Times are multiplied by `time_scale`.
pub fn snapshots_csv(snaps: &[Snapshot], time_scale: f64, hash: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# config_hash: {hash}").unwrap();
    s.push_str("t,bin_center,density\n");
    for snap in snaps {
        let g = snap.density.grid();
        let t = fmt_f64(snap.t * time_scale);
        for (i, &v) in snap.density.density_values().iter().enumerate() {
            writeln!(s, "{t},{},{}", fmt_f64(g.center(i)), fmt_f64(v)).unwrap();
        }
    }
    s
}

/// Boundary atoms of each snapshot; they have no place in the per-cell CSV.
#[derive(Serialize)]
pub struct AtomRecord {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Serialize)]
pub struct AtomFile<'a> {
    pub config_hash: &'a str,
    pub atoms: Vec<AtomRecord>,
}

pub fn atoms<'a>(snaps: &[Snapshot], time_scale: f64, hash: &'a str) -> AtomFile<'a> {
    AtomFile {
        config_hash: hash,
        atoms: snaps
            .iter()
            .map(|s| AtomRecord {
                t: s.t * time_scale,
                left: s.density.left_atom(),
                right: s.density.right_atom(),
            })
            .collect(),
    }
}

/// Writes `snapshots.csv` and `atoms.json` into `dir`.
pub fn write_snapshots(dir: &Path, snaps: &[Snapshot], time_scale: f64, hash: &str) -> Result<()> {
    write_atomic(&dir.join("snapshots.csv"), snapshots_csv(snaps, time_scale, hash).as_bytes())?;
    write_json(&dir.join("atoms.json"), &atoms(snaps, time_scale, hash))
}

/// One row of `compare.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub t: f64,
    pub w1_abm_fpe: f64,
    pub w1_fpe_meanfield: f64,
    pub mean_abm: f64,
    pub mean_fpe: f64,
    pub var_abm: f64,
    pub var_fpe: f64,
}

pub fn compare_csv(rows: &[CompareRow], hash: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# config_hash: {hash}").unwrap();
    s.push_str("t,w1_abm_fpe,w1_fpe_meanfield,mean_abm,mean_fpe,var_abm,var_fpe\n");
    for r in rows {
        let cols = [r.t, r.w1_abm_fpe, r.w1_fpe_meanfield, r.mean_abm, r.mean_fpe, r.var_abm, r.var_fpe];
        let cols: Vec<String> = cols.iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}
