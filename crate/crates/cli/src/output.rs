use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use slowtail::distributions::diagnostics::write_diag_csv;

use crate::run::Outcome;
use crate::svg;

pub const CURVE_FILE: &str = "tail_curve.csv";
pub const FACTOR_FILE: &str = "factor_curve.csv";
pub const DIAG_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const PLOT_FILE: &str = "plot.svg";

/// Writes `bytes` to `dir/name` through a temp file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .with_context(|| format!("writing {name}"))?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// In-memory artifacts, keyed by file name. Everything here is a pure
/// function of the scenario; timestamps go to [`Metadata`] only.
pub fn render(outcome: &Outcome, with_svg: bool) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = Vec::new();
    if let Some(c) = &outcome.curve {
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        files.push((CURVE_FILE, buf));
        if with_svg {
            files.push((
                PLOT_FILE,
                svg::tail_plot(c, &outcome.summary.scenario).into_bytes(),
            ));
        }
    }
    if let Some(f) = &outcome.factors {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &f.points {
            w.serialize(p)?;
        }
        files.push((FACTOR_FILE, w.into_inner().map_err(|e| e.into_error())?));
        if with_svg {
            files.push((
                PLOT_FILE,
                svg::factor_plot(f, &outcome.summary.scenario).into_bytes(),
            ));
        }
    }
    if !outcome.diagnostics.is_empty() {
        let mut buf = Vec::new();
        write_diag_csv(&outcome.diagnostics, &mut buf)?;
        files.push((DIAG_FILE, buf));
    }
    files.push((SUMMARY_FILE, json(&outcome.summary)?));
    Ok(files)
}

#[derive(Serialize)]
pub struct Metadata {
    pub timestamp: String,
    pub version: &'static str,
    pub elapsed_seconds: f64,
    pub args: Vec<String>,
}

pub fn write_all(dir: &Path, outcome: &Outcome, with_svg: bool, meta: &Metadata) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in render(outcome, with_svg)? {
        write_atomic(dir, name, &bytes)?;
    }
    write_atomic(dir, METADATA_FILE, &json(meta)?)
}
