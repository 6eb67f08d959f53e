use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aggdiff::config::{load_config, ConfigPatch, Preset, RunConfig};
use aggdiff::fit::{blowup_fit, default_fit_window};
use aggdiff::output::SeriesFile;
use aggdiff::scenario::{exit_code, run_scenario};
use aggdiff::verify;

#[derive(Parser)]
#[command(
    name = "aggdiff",
    about = "1D periodic nonlocal aggregation-diffusion solver",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and persist series/snapshots/fit into the output directory.
    Run(RunArgs),
    /// Fit the singularity model C/(T-t)^a to an existing series file.
    Fit {
        /// Path to a series.csv produced by `run`.
        #[arg(long)]
        series: PathBuf,
        /// Trailing fraction of the windowed samples to fit
        /// (default: the production window policy).
        #[arg(long)]
        window: Option<f64>,
    },
    /// Run the operator identity and backend cross-validation suite.
    CheckInvariants,
    /// Run one preset over several grid sizes concurrently.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset scenario: case1 (beta = rho^2) or case2 (beta = log(1+rho)).
    #[arg(long)]
    preset: Option<Preset>,
    /// Grid size override.
    #[arg(long)]
    n: Option<usize>,
    /// Final time override.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Output directory override.
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    preset: Preset,
    /// Comma-separated grid sizes.
    #[arg(long, default_value = "300,600,1000", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Base output directory; each run writes into <base>/n<N>.
    #[arg(long = "output-dir", default_value = "out/sweep")]
    output_dir: PathBuf,
}

fn preset_label(p: Preset) -> &'static str {
    match p {
        Preset::Case1 => "case1",
        Preset::Case2 => "case2",
    }
}

/// Layering: preset (if any) -> config file (if any) -> CLI flags.
fn resolve_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match (args.preset, &args.config) {
        (Some(p), _) => RunConfig::preset(p, args.n.unwrap_or(300)),
        (None, Some(_)) => RunConfig::preset(Preset::Case2, 256), // placeholder, file must override
        (None, None) => return Err("either --config or --preset is required".into()),
    };
    if let Some(p) = args.preset {
        // default output dir names the preset and resolution
        let label = preset_label(p);
        cfg.output_dir = PathBuf::from(format!("out/{label}-n{}", cfg.n));
        cfg.seed_label = format!("{label}-n{}", cfg.n);
    }
    match (&args.config, args.preset) {
        (Some(path), Some(_)) => {
            let patch = ConfigPatch::load(path).map_err(|e| e.to_string())?;
            patch.apply(&mut cfg).map_err(|e| e.to_string())?;
        }
        (Some(path), None) => {
            cfg = load_config(path).map_err(|e| e.to_string())?;
        }
        _ => {}
    }
    if let Some(n) = args.n {
        cfg.n = n;
        if let (Some(p), None) = (args.preset, &args.output_dir) {
            let label = preset_label(p);
            cfg.output_dir = PathBuf::from(format!("out/{label}-n{n}"));
            cfg.seed_label = format!("{label}-n{n}");
        }
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let cfg = match resolve_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "run: n={} beta={} t_end={} dealias={} -> {}",
        cfg.n,
        cfg.beta,
        cfg.t_end,
        cfg.dealias,
        cfg.output_dir.display()
    );
    match run_scenario(&cfg) {
        Ok(out) => {
            println!(
                "stop: {} at t = {:.6} after {} accepted steps (min density {:.3e})",
                out.reason, out.final_t, out.accepted_steps, out.min_density
            );
            if let Some(f) = &out.fit {
                println!(
                    "blow-up fit: C = {:.6}, T = {:.6}, a = {:.6}, log-residual = {:.3e}",
                    f.c, f.t_star, f.a, f.residual
                );
            }
            println!("artifacts in {}", out.output_dir.display());
            ExitCode::from(exit_code(out.reason) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_fit(series: &Path, window: Option<f64>) -> ExitCode {
    let series = match SeriesFile::read(series) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let samples = series.gradient_samples();
    let w = default_fit_window(&samples);
    let fraction = window.unwrap_or(w.trailing_fraction);
    match blowup_fit(w.samples, fraction) {
        Ok(f) => {
            println!(
                "C = {:.6}\nT = {:.6}\na = {:.6}\nresidual = {:.3e}\nwindow_samples = {}",
                f.c,
                f.t_star,
                f.a,
                f.residual,
                w.samples.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fit failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_check_invariants() -> ExitCode {
    let results = verify::run_all();
    let mut all_ok = true;
    for r in &results {
        println!(
            "{:<34} {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        all_ok &= r.passed;
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    let label = preset_label(args.preset);
    let mut failed = false;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &n in &args.n {
            let out_dir = args.output_dir.join(format!("n{n}"));
            let t_end = args.t_end;
            let preset = args.preset;
            handles.push((
                n,
                scope.spawn(move || {
                    let mut cfg = RunConfig::preset(preset, n);
                    cfg.output_dir = out_dir;
                    cfg.seed_label = format!("{label}-n{n}");
                    if let Some(t) = t_end {
                        cfg.t_end = t;
                    }
                    run_scenario(&cfg).map(|out| {
                        let fit = out
                            .fit
                            .map(|f| format!("C={:.6} T={:.6} a={:.6}", f.c, f.t_star, f.a))
                            .unwrap_or_else(|| "none".into());
                        (out.reason, out.final_t, fit)
                    })
                }),
            ));
        }
        for (n, h) in handles {
            match h.join() {
                Ok(Ok((reason, t, fit))) => {
                    println!("{label} n={n}: stop={reason} t={t:.6} fit: {fit}");
                }
                Ok(Err(e)) => {
                    eprintln!("{label} n={n}: error {e}");
                    failed = true;
                }
                Err(_) => {
                    eprintln!("{label} n={n}: worker panicked");
                    failed = true;
                }
            }
        }
    });
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Fit { series, window } => cmd_fit(series, *window),
        Command::CheckInvariants => cmd_check_invariants(),
        Command::Sweep(args) => cmd_sweep(args),
    }
}
