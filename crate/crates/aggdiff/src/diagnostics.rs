//! Per-step monitors (norms, mass, energy) and the analytic L-infinity
//! bounds tracked as runtime invariants.

use thiserror::Error;

use crate::beta::BetaModel;
use crate::grid::{lp_norm, Field};
use crate::spectral::{derivative, fractional_laplacian, hs_seminorm};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("lambda = {lambda} must exceed ||rho||_inf = {linf}")]
    LambdaTooSmall { lambda: f64, linf: f64 },
    #[error("the diffusion law never reaches the required level; no finite bound")]
    Unbounded,
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    /// `2 pi * mean(rho)`, i.e. the L1 norm for nonnegative densities.
    pub mass: f64,
    pub linf: f64,
    pub min_val: f64,
    /// `||rho_x||_inf` (spectral derivative).
    pub grad_linf: f64,
    /// `||Lambda rho||_inf`.
    pub lambda_linf: f64,
    /// `||Lambda^{1/2} rho||_{L^2}`.
    pub h_half: f64,
    pub l2: f64,
    pub dt: f64,
}

/// Sample every monitored quantity at time `t`.
pub fn record(rho: &Field, t: f64, dt: f64) -> TimeSeriesRecord {
    let two_pi = 2.0 * std::f64::consts::PI;
    TimeSeriesRecord {
        t,
        mass: two_pi * rho.mean(),
        linf: lp_norm(rho, f64::INFINITY),
        min_val: rho.min(),
        grad_linf: lp_norm(&derivative(rho), f64::INFINITY),
        lambda_linf: lp_norm(
            &fractional_laplacian(rho, 1.0).expect("alpha = 1 is valid"),
            f64::INFINITY,
        ),
        h_half: hs_seminorm(rho, 0.5),
        l2: lp_norm(rho, 2.0),
        dt,
    }
}

/// Maximum-principle bound: the least `alpha >= max(||rho0||_inf, 4 <rho0>)`
/// with `beta(alpha) >= 4 pi^2 <rho0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinfBound {
    Bounded(f64),
    /// The law never reaches the required level (e.g. small constant beta).
    Unbounded,
}

pub fn theoretical_linf_bound(rho0: &Field, m: &BetaModel) -> LinfBound {
    let mean = rho0.mean();
    let linf = lp_norm(rho0, f64::INFINITY);
    let lo = linf.max(4.0 * mean);
    let target = 4.0 * std::f64::consts::PI * std::f64::consts::PI * mean;
    match m.least_arg_reaching(target, lo) {
        Some(alpha) => LinfBound::Bounded(alpha),
        None => LinfBound::Unbounded,
    }
}

/// Small-mass bound: returns `R` when `||rho0||_L1 < nu / 2pi` and
/// `beta(x) >= nu` for all `x >= R` (checked in closed form per law).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Max2Bound {
    Applicable(f64),
    NotApplicable,
}

pub fn prop_max2_bound(rho0: &Field, m: &BetaModel, nu: f64, r: f64) -> Max2Bound {
    let l1 = lp_norm(rho0, 1.0);
    if !nu.is_finite() || l1 >= nu / (2.0 * std::f64::consts::PI) || r < 0.0 {
        return Max2Bound::NotApplicable;
    }
    // beta is nondecreasing for every law, so the tail condition reduces to
    // beta(R) >= nu
    let at_r = m.eval(r, 0).expect("r >= 0");
    if at_r >= nu {
        Max2Bound::Applicable(r)
    } else {
        Max2Bound::NotApplicable
    }
}

/// Value of the decay polynomial controlling `||rho_xx||_{L^2}` growth;
/// negative at `t = 0` means the small-data decay condition holds.
///
/// `margin(X) = C_b3 Cs^3 X^3 + (24 + pi^2/2) Cs^2 C_b2 X^2
///             + (25 Cs/2 + 33 Cs C_b1) X + <rho0> - nu`
/// evaluated at `X = ||rho0_xx||_{L^2}`, with the beta suprema taken over
/// `[0, theoretical_linf_bound]`.
pub fn global_existence_margin(
    rho0: &Field,
    m: &BetaModel,
    nu: f64,
    c_s: f64,
) -> Result<f64, DiagnosticsError> {
    assert!(c_s > 0.0, "Sobolev constant must be positive");
    let bound = match theoretical_linf_bound(rho0, m) {
        LinfBound::Bounded(b) => b,
        LinfBound::Unbounded => return Err(DiagnosticsError::Unbounded),
    };
    let [_, c1, c2, c3] = m.sup_constants(bound);
    let x = hs_seminorm(rho0, 2.0); // equals ||rho0_xx||_{L^2}
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    Ok(c3 * c_s.powi(3) * x.powi(3)
        + (24.0 + pi2 / 2.0) * c_s * c_s * c2 * x * x
        + (25.0 * c_s / 2.0 + 33.0 * c_s * c1) * x
        + rho0.mean()
        - nu)
}

/// Energy of the well-posedness argument: `||rho||_{H^2} + ||1/(lambda - rho)||_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub lambda: f64,
    pub h2_norm: f64,
    pub d_linf: f64,
    pub energy: f64,
}

/// Default level for [`energy`]: twice the larger of the initial and the
/// current maximum, comfortably above the admissibility line.
pub fn default_energy_lambda(rho0: &Field, rho: &Field) -> f64 {
    2.0 * lp_norm(rho0, f64::INFINITY).max(lp_norm(rho, f64::INFINITY))
}

pub fn energy(rho: &Field, lambda: f64) -> Result<EnergyReport, DiagnosticsError> {
    let linf = lp_norm(rho, f64::INFINITY);
    if lambda <= linf {
        return Err(DiagnosticsError::LambdaTooSmall { lambda, linf });
    }
    let l2 = lp_norm(rho, 2.0);
    let h2_norm = (l2 * l2 + hs_seminorm(rho, 2.0).powi(2)).sqrt();
    let d_linf = rho
        .values()
        .iter()
        .map(|&r| 1.0 / (lambda - r))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyReport {
        lambda,
        h2_norm,
        d_linf,
        energy: h2_norm + d_linf,
    })
}
