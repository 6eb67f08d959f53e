//! Solver library for the 1D periodic nonlocal aggregation-diffusion equation
//!
//! ```text
//! rho_t = d/dx ( -beta(rho) H rho + rho v_x ),    v_xx = rho - <rho>,
//! ```
//!
//! on the torus [-pi, pi), where `H` is the periodic Hilbert transform and
//! `v` the self-attraction potential. The diffusion strength law `beta`
//! decides between finite-time gradient blow-up (convex laws such as
//! `beta(rho) = rho^2`) and global boundedness (concave laws such as
//! `beta(rho) = log(1 + rho)`).
//!
//! The crate provides:
//! - spectral grid machinery with two interchangeable Hilbert-transform
//!   backends (Fourier multiplier, periodic-spline quadrature),
//! - spectral and finite-difference Poisson solvers,
//! - the semi-discrete right-hand side with optional 2/3-rule dealiasing,
//! - an adaptive Runge-Kutta-Fehlberg 4(5) driver with blow-up detection,
//! - per-step diagnostics, analytic L-infinity bounds, and least-squares
//!   fitting of the singularity model `C / (T - t)^a`,
//! - scenario configuration, presets, and file formats used by the CLI.

pub mod beta;
pub mod config;
pub mod diagnostics;
pub mod fit;
pub mod flux;
pub mod grid;
pub mod initial;
pub mod output;
pub mod poisson;
pub mod quadrature;
pub mod rkf45;
pub mod scenario;
pub mod spectral;
pub mod spline;
pub mod verify;

pub use beta::BetaModel;
pub use diagnostics::{record, TimeSeriesRecord};
pub use fit::{blowup_fit, BlowupFit};
pub use flux::{HilbertBackend, PoissonBackend, RhsEvaluator};
pub use grid::{Field, PeriodicGrid};
pub use rkf45::{integrate, IntegrateOptions, RkfConfig, StopReason};
pub use scenario::{run_scenario, RunConfig};
