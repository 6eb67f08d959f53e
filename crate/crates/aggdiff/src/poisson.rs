//! Periodic Poisson problem `v_xx = rho - <rho>` and the attraction
//! velocity `v_x`, with spectral and second-order finite-difference backends.
//!
//! Only `v_x` enters the evolution, so the gauge is free; both backends fix
//! `<v> = 0`.

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::grid::Field;
use crate::spectral::{derivative_multiplier, from_spectrum, to_spectrum, Spectrum};

#[derive(Debug, Error, PartialEq)]
pub enum PoissonError {
    #[error("compatibility defect |mean(rho - <rho>)| = {defect:e} exceeds 1e-12")]
    SingularSystem { defect: f64 },
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    /// Potential with gauge `<v> = 0`.
    pub v: Field,
    /// Attraction velocity `v_x`; mean-free by periodicity.
    pub grad_v: Field,
}

/// Spectral solve: `v_hat_k = -rho_hat_k / k^2` for `k != 0`, `v_hat_0 = 0`.
pub fn solve_poisson_spectral(rho: &Field) -> PoissonSolution {
    let s = to_spectrum(rho);
    solve_poisson_spectral_from(&s)
}

pub(crate) fn solve_poisson_spectral_from(s: &Spectrum) -> PoissonSolution {
    let mut vs = s.clone();
    vs.apply_multiplier(|k| {
        if k == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-1.0 / (k as f64 * k as f64), 0.0)
        }
    });
    let v = from_spectrum(&vs);
    let mut gs = vs;
    derivative_multiplier(&mut gs);
    let grad_v = from_spectrum(&gs);
    PoissonSolution { v, grad_v }
}

pub(crate) fn poisson_grad_multiplier(s: &mut Spectrum) {
    let n = s.grid().n() as i64;
    s.apply_multiplier(|k| {
        if k == 0 || k == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / k as f64)
        }
    });
}

/// Finite-difference solve: central second differences with periodic wrap.
///
/// The circulant system is rank-deficient (constants); it is closed by
/// pinning `v_0 = 0`, dropping the redundant row, Thomas-solving the
/// remaining strictly tridiagonal system, and shifting to the `<v> = 0`
/// gauge afterwards. `v_x` uses second-order central differences.
pub fn solve_poisson_fd(rho: &Field) -> Result<PoissonSolution, PoissonError> {
    let grid = rho.grid();
    let n = grid.n();
    let h = grid.spacing();

    let mean = rho.mean();
    let mut b: Vec<f64> = rho.values().iter().map(|&v| v - mean).collect();
    // second sweep pushes the compatibility defect to double-rounding level
    let resid = b.iter().sum::<f64>() / n as f64;
    for v in &mut b {
        *v -= resid;
    }
    let defect = (b.iter().sum::<f64>() / n as f64).abs();
    let scale = rho.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if defect > 1e-12 * scale {
        return Err(PoissonError::SingularSystem { defect });
    }

    // Unknowns v_1..v_{n-1} with v_0 = 0; rows j = 1..n-1 of
    // (v_{j-1} - 2 v_j + v_{j+1}) / h^2 = b_j; the corner couplings hit v_0.
    let h2 = h * h;
    let m = n - 1;
    let diag = -2.0 / h2;
    let off = 1.0 / h2;
    let rhs: Vec<f64> = (1..n).map(|j| b[j]).collect();
    // Thomas
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    cp[0] = off / diag;
    dp[0] = rhs[0] / diag;
    for i in 1..m {
        let denom = diag - off * cp[i - 1];
        cp[i] = off / denom;
        dp[i] = (rhs[i] - off * dp[i - 1]) / denom;
    }
    let mut v = vec![0.0; n];
    v[n - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        v[i + 1] = dp[i] - cp[i] * v[i + 2];
    }

    // gauge: <v> = 0
    let vm = v.iter().sum::<f64>() / n as f64;
    for vi in &mut v {
        *vi -= vm;
    }

    let grad: Vec<f64> = (0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            (v[jp] - v[jm]) / (2.0 * h)
        })
        .collect();

    let v = Field::new(grid, v).expect("fd potential finite");
    let grad_v = Field::new(grid, grad).expect("fd gradient finite");
    Ok(PoissonSolution { v, grad_v })
}
