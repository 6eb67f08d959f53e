//! On-disk formats: the CSV time series, snapshot profiles, plot data, and
//! the fit summary. All floats are written with 17 significant digits so
//! every file re-parses to the exact in-memory values.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostics::TimeSeriesRecord;
use crate::fit::BlowupFit;
use crate::grid::Field;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{op} {path}: {source}")]
    Io {
        op: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        op: "write",
        path: path.to_path_buf(),
        source,
    }
}

fn read_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        op: "read",
        path: path.to_path_buf(),
        source,
    }
}

fn full(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SERIES_HEADER: &str = "t,mass,linf,min,grad_linf,lambda_linf,h_half,l2,dt";

/// The per-run time series: one record per sampled time, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesFile {
    pub records: Vec<TimeSeriesRecord>,
}

impl SeriesFile {
    pub fn push(&mut self, r: TimeSeriesRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                r.t > last.t,
                "series times must increase: {} !> {}",
                r.t,
                last.t
            );
        }
        self.records.push(r);
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(SERIES_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                full(r.t),
                full(r.mass),
                full(r.linf),
                full(r.min_val),
                full(r.grad_linf),
                full(r.lambda_linf),
                full(r.h_half),
                full(r.l2),
                full(r.dt),
            ));
        }
        std::fs::write(path, out).map_err(write_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(read_err(path))?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 {
                if line.trim() != SERIES_HEADER {
                    return Err(IoError::Parse {
                        path: path.to_path_buf(),
                        line: 1,
                        reason: format!("unexpected header `{line}`"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(IoError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: format!("{} columns, expected 9", cols.len()),
                });
            }
            let mut vals = [0.0f64; 9];
            for (v, c) in vals.iter_mut().zip(&cols) {
                *v = c.trim().parse().map_err(|e| IoError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: format!("bad float `{c}`: {e}"),
                })?;
            }
            records.push(TimeSeriesRecord {
                t: vals[0],
                mass: vals[1],
                linf: vals[2],
                min_val: vals[3],
                grad_linf: vals[4],
                lambda_linf: vals[5],
                h_half: vals[6],
                l2: vals[7],
                dt: vals[8],
            });
        }
        Ok(Self { records })
    }

    /// `(t, grad_linf)` pairs for the blow-up fit.
    pub fn gradient_samples(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.grad_linf)).collect()
    }
}

/// A density profile at a fixed time, with self-describing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub t: f64,
    pub n: usize,
    pub beta: String,
    pub backend: String,
    pub xs: Vec<f64>,
    pub rho: Vec<f64>,
}

impl SnapshotFile {
    pub fn from_field(t: f64, field: &Field, beta: &str, backend: &str) -> Self {
        Self {
            t,
            n: field.grid().n(),
            beta: beta.to_string(),
            backend: backend.to_string(),
            xs: field.grid().nodes(),
            rho: field.values().to_vec(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::with_capacity(48 * (self.xs.len() + 5));
        out.push_str(&format!("# t: {}\n", full(self.t)));
        out.push_str(&format!("# n: {}\n", self.n));
        out.push_str(&format!("# beta: {}\n", self.beta));
        out.push_str(&format!("# backend: {}\n", self.backend));
        out.push_str("x,rho\n");
        for (x, r) in self.xs.iter().zip(&self.rho) {
            out.push_str(&format!("{},{}\n", full(*x), full(*r)));
        }
        std::fs::write(path, out).map_err(write_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(read_err(path))?;
        let mut t = None;
        let mut n = None;
        let mut beta = String::new();
        let mut backend = String::new();
        let mut xs = Vec::new();
        let mut rho = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let parse_fail = |reason: String| IoError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.split_once(':') else {
                    continue;
                };
                match key.trim() {
                    "t" => {
                        t = Some(
                            value
                                .trim()
                                .parse()
                                .map_err(|e| parse_fail(format!("bad t: {e}")))?,
                        )
                    }
                    "n" => {
                        n = Some(
                            value
                                .trim()
                                .parse()
                                .map_err(|e| parse_fail(format!("bad n: {e}")))?,
                        )
                    }
                    "beta" => beta = value.trim().to_string(),
                    "backend" => backend = value.trim().to_string(),
                    _ => {}
                }
                continue;
            }
            if line == "x,rho" {
                continue;
            }
            let Some((xa, ra)) = line.split_once(',') else {
                return Err(parse_fail(format!("expected `x,rho` row, got `{line}`")));
            };
            xs.push(
                xa.trim()
                    .parse()
                    .map_err(|e| parse_fail(format!("bad x: {e}")))?,
            );
            rho.push(
                ra.trim()
                    .parse()
                    .map_err(|e| parse_fail(format!("bad rho: {e}")))?,
            );
        }
        Ok(Self {
            t: t.ok_or_else(|| IoError::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: "missing `# t:` metadata".into(),
            })?,
            n: n.unwrap_or(xs.len()),
            beta,
            backend,
            xs,
            rho,
        })
    }
}

/// Columnar plot data: `t` vs `grad_linf`, `t` vs `linf`, and one profile
/// file per snapshot. Returns the written paths.
pub fn emit_plot_data(
    series: &SeriesFile,
    snapshots: &[SnapshotFile],
    dir: &Path,
) -> Result<Vec<PathBuf>, IoError> {
    let mut written = Vec::new();
    let grad_path = dir.join("plot_t_grad_linf.csv");
    let mut out = String::from("t,grad_linf\n");
    for r in &series.records {
        out.push_str(&format!("{},{}\n", full(r.t), full(r.grad_linf)));
    }
    std::fs::write(&grad_path, out).map_err(write_err(&grad_path))?;
    written.push(grad_path);

    let linf_path = dir.join("plot_t_linf.csv");
    let mut out = String::from("t,linf\n");
    for r in &series.records {
        out.push_str(&format!("{},{}\n", full(r.t), full(r.linf)));
    }
    std::fs::write(&linf_path, out).map_err(write_err(&linf_path))?;
    written.push(linf_path);

    for (i, snap) in snapshots.iter().enumerate() {
        let p = dir.join(format!("plot_profile_{i:02}.csv"));
        let mut out = format!("# t: {}\nx,rho\n", full(snap.t));
        for (x, r) in snap.xs.iter().zip(&snap.rho) {
            out.push_str(&format!("{},{}\n", full(*x), full(*r)));
        }
        std::fs::write(&p, out).map_err(write_err(&p))?;
        written.push(p);
    }
    Ok(written)
}

/// Fit summary in the same flat key = value shape as the config.
pub fn write_fit(fit: &BlowupFit, window_len: usize, path: &Path) -> Result<(), IoError> {
    let text = format!(
        "C = {}\nT = {}\na = {}\nresidual = {}\nwindow_samples = {}\n",
        full(fit.c),
        full(fit.t_star),
        full(fit.a),
        full(fit.residual),
        window_len,
    );
    let mut f = std::fs::File::create(path).map_err(write_err(path))?;
    f.write_all(text.as_bytes()).map_err(write_err(path))
}
