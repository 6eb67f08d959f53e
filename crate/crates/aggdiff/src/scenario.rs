//! Run orchestration: wires the bump datum, flux evaluator, integrator,
//! diagnostics, blow-up fit, and persistence together.

use std::path::PathBuf;

use thiserror::Error;

pub use crate::config::{load_config, ConfigError, ConfigPatch, Preset, RunConfig};
use crate::diagnostics::record;
use crate::fit::{blowup_fit, default_fit_window, BlowupFit};
use crate::flux::{HilbertBackend, PoissonBackend, RhsEvaluator};
use crate::grid::{Field, PeriodicGrid};
use crate::initial::build_initial_bump;
use crate::output::{emit_plot_data, write_fit, IoError, SeriesFile, SnapshotFile};
use crate::rkf45::{integrate, Event, IntegrateOptions, StopReason};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("cannot create output directory {path}: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct ScenarioOutput {
    pub reason: StopReason,
    pub final_t: f64,
    pub series: SeriesFile,
    pub snapshots: Vec<SnapshotFile>,
    pub fit: Option<BlowupFit>,
    pub events: Vec<Event>,
    pub min_density: f64,
    pub accepted_steps: u64,
    pub output_dir: PathBuf,
}

/// Exit code contract: 0 completed, 2 blow-up stop (the expected-singularity
/// outcome), 1 anything else.
pub fn exit_code(reason: StopReason) -> i32 {
    match reason {
        StopReason::Completed => 0,
        StopReason::BlowupThreshold | StopReason::DtUnderflow => 2,
        StopReason::NonFinite | StopReason::MaxSteps => 1,
    }
}

fn backend_label(cfg: &RunConfig) -> String {
    let h = match cfg.hilbert_backend {
        HilbertBackend::Spectral => "spectral",
        HilbertBackend::Quadrature => "quadrature",
    };
    let p = match cfg.poisson_backend {
        PoissonBackend::Spectral => "spectral",
        PoissonBackend::FiniteDifference => "fd",
    };
    format!("hilbert={h} poisson={p}")
}

/// Sorted, deduplicated times the integrator must land on exactly.
fn alignment_times(cfg: &RunConfig) -> Vec<f64> {
    let mut times: Vec<f64> = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * cfg.sample_every;
        if t >= cfg.t_end - 1e-14 {
            break;
        }
        times.push(t);
        k += 1;
        if k > 100_000_000 {
            break;
        }
    }
    times.extend(cfg.snapshot_times.iter().copied().filter(|&t| t > 0.0));
    times.push(cfg.t_end);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
    times
}

/// Run a fully validated configuration and persist every artifact into
/// `cfg.output_dir`. Identical configurations produce bit-identical series.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioOutput, ScenarioError> {
    cfg.validate()?;
    let grid = PeriodicGrid::new(cfg.n).expect("validated n");
    let rho0 = build_initial_bump(grid);
    let evaluator = RhsEvaluator::new(
        grid,
        cfg.beta,
        cfg.hilbert_backend,
        cfg.poisson_backend,
        cfg.dealias,
    );

    let opts = IntegrateOptions {
        blowup_grad_threshold: cfg.blowup_grad_threshold,
        align_times: alignment_times(cfg),
    };

    let mut series = SeriesFile::default();
    series.push(record(&rho0, 0.0, 0.0));

    // retained states for snapshots: either the exact requested times or
    // every sample point (for the post-hoc equispaced default)
    let explicit_snaps = !cfg.snapshot_times.is_empty();
    let mut kept: Vec<(f64, Field)> = vec![(0.0, rho0.clone())];

    let sample_every = cfg.sample_every;
    let snapshot_times = cfg.snapshot_times.clone();
    let mut next_sample = sample_every;
    let mut result = {
        let series_ref = &mut series;
        let kept_ref = &mut kept;
        integrate(&evaluator, &rho0, cfg.t_end, &cfg.rkf, &opts, move |info| {
            let t = info.outcome.t_new;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
            let mut sampled = false;
            if t >= next_sample - 1e-12 * next_sample.max(1.0) {
                series_ref.push(record(info.rho, t, info.outcome.dt_used));
                sampled = true;
                while next_sample <= t + 1e-12 * next_sample.max(1.0) {
                    next_sample += sample_every;
                }
            }
            if explicit_snaps {
                if snapshot_times.iter().any(|&s| close(t, s)) {
                    kept_ref.push((t, info.rho.clone()));
                }
            } else if sampled {
                kept_ref.push((t, info.rho.clone()));
            }
        })
    };

    // make sure the stop state itself is in the series (blow-up stops land
    // between sample points)
    let last_t = series.records.last().map(|r| r.t).unwrap_or(0.0);
    if result.t > last_t {
        series.push(record(&result.rho, result.t, 0.0));
        if !explicit_snaps {
            kept.push((result.t, result.rho.clone()));
        }
    }

    // blow-up fit on the gradient series
    let fit = match result.reason {
        StopReason::BlowupThreshold | StopReason::DtUnderflow => {
            let samples = series.gradient_samples();
            let w = default_fit_window(&samples);
            blowup_fit(w.samples, w.trailing_fraction).ok()
        }
        _ => None,
    };

    // snapshot selection
    let beta_label = cfg.beta.to_string();
    let backends = backend_label(cfg);
    let snapshots: Vec<SnapshotFile> = if explicit_snaps {
        let mut want: Vec<f64> = cfg.snapshot_times.clone();
        want.sort_by(f64::total_cmp);
        want.iter()
            .filter_map(|&s| {
                kept.iter()
                    .find(|(t, _)| (t - s).abs() <= 1e-12 * s.abs().max(1.0))
                    .map(|(t, f)| SnapshotFile::from_field(*t, f, &beta_label, &backends))
            })
            .collect()
    } else {
        // 8 equispaced times over the realized span, nearest retained state
        let span = result.t;
        let mut chosen: Vec<usize> = Vec::new();
        for i in 0..8 {
            let target = span * (i as f64 + 1.0) / 8.0;
            let idx = kept
                .iter()
                .enumerate()
                .min_by(|(_, (ta, _)), (_, (tb, _))| {
                    (ta - target).abs().total_cmp(&(tb - target).abs())
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            if !chosen.contains(&idx) {
                chosen.push(idx);
            }
        }
        chosen.sort_unstable();
        chosen
            .into_iter()
            .map(|i| SnapshotFile::from_field(kept[i].0, &kept[i].1, &beta_label, &backends))
            .collect()
    };

    // persistence
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| ScenarioError::OutputDir {
        path: dir.clone(),
        source,
    })?;
    series.write(&dir.join("series.csv"))?;
    for (i, snap) in snapshots.iter().enumerate() {
        snap.write(&dir.join(format!("snapshot_{i:02}.csv")))?;
    }
    std::fs::write(dir.join("manifest.cfg"), cfg.to_config_string()).map_err(|source| {
        ScenarioError::Io(IoError::Io {
            op: "write",
            path: dir.join("manifest.cfg"),
            source,
        })
    })?;
    let mut event_text = String::new();
    for e in &result.events {
        event_text.push_str(&format!("t = {:.16e}  {}\n", e.t, e.kind));
    }
    event_text.push_str(&format!(
        "stop = {}  t = {:.16e}  accepted = {}  rejected = {}  min_density = {:.16e}\n",
        result.reason, result.t, result.accepted_steps, result.rejected_steps, result.min_density
    ));
    std::fs::write(dir.join("events.txt"), event_text).map_err(|source| {
        ScenarioError::Io(IoError::Io {
            op: "write",
            path: dir.join("events.txt"),
            source,
        })
    })?;
    if let Some(f) = &fit {
        let samples = series.gradient_samples();
        let window_len = default_fit_window(&samples).samples.len();
        write_fit(f, window_len, &dir.join("fit.txt"))?;
    }
    emit_plot_data(&series, &snapshots, &dir)?;

    let events = std::mem::take(&mut result.events);
    Ok(ScenarioOutput {
        reason: result.reason,
        final_t: result.t,
        series,
        snapshots,
        fit,
        events,
        min_density: result.min_density,
        accepted_steps: result.accepted_steps,
        output_dir: dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(dir: &std::path::Path) -> RunConfig {
        let mut cfg = RunConfig::preset(Preset::Case2, 64);
        cfg.t_end = 0.01;
        cfg.sample_every = 2e-3;
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn zero_t_end_yields_single_row_series() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.t_end = 0.0;
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.reason, StopReason::Completed);
        assert_eq!(out.series.records.len(), 1);
        assert_eq!(out.series.records[0].t, 0.0);
        assert!(dir.path().join("series.csv").exists());
        assert!(dir.path().join("manifest.cfg").exists());
    }

    #[test]
    fn series_is_deterministic_across_runs() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let mut c1 = tiny_cfg(d1.path());
        let mut c2 = tiny_cfg(d2.path());
        c1.seed_label = "same".into();
        c2.seed_label = "same".into();
        run_scenario(&c1).unwrap();
        run_scenario(&c2).unwrap();
        let a = std::fs::read_to_string(d1.path().join("series.csv")).unwrap();
        let b = std::fs::read_to_string(d2.path().join("series.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn explicit_snapshot_times_are_honored() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.snapshot_times = vec![0.0, 0.004, 0.01];
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.snapshots.len(), 3);
        assert_eq!(out.snapshots[0].t, 0.0);
        assert_eq!(out.snapshots[1].t, 0.004);
        assert_eq!(out.snapshots[2].t, 0.01);
        assert!(dir.path().join("snapshot_02.csv").exists());
    }

    #[test]
    fn default_snapshots_cover_the_realized_span() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let out = run_scenario(&cfg).unwrap();
        assert!(!out.snapshots.is_empty() && out.snapshots.len() <= 8);
        let last = out.snapshots.last().unwrap().t;
        assert!((last - 0.01).abs() <= 2e-3 + 1e-12);
    }

    #[test]
    fn manifest_reloads_to_the_same_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        run_scenario(&cfg).unwrap();
        let reloaded = load_config(&dir.path().join("manifest.cfg")).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(StopReason::Completed), 0);
        assert_eq!(exit_code(StopReason::BlowupThreshold), 2);
        assert_eq!(exit_code(StopReason::DtUnderflow), 2);
        assert_eq!(exit_code(StopReason::NonFinite), 1);
        assert_eq!(exit_code(StopReason::MaxSteps), 1);
    }
}
