//! Assembly of the semi-discrete right-hand side
//! `F(rho) = d/dx ( -beta(rho) H rho + rho v_x )`.
//!
//! The flux is formed nodewise and differentiated once spectrally, which
//! kills the zero mode exactly: semi-discrete mass conservation is built in.

use thiserror::Error;

use crate::beta::BetaModel;
use crate::grid::{Field, PeriodicGrid};
use crate::poisson::{poisson_grad_multiplier, solve_poisson_fd};
use crate::quadrature::{hilbert_quadrature, QuadratureError};
use crate::spectral::{derivative_multiplier, from_spectrum, hilbert_multiplier, to_spectrum};

#[derive(Debug, Error, PartialEq)]
pub enum FluxError {
    #[error("non-finite value in rhs evaluation (blow-up under-resolution)")]
    NonFinite,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("rhs called on a field from a different grid")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HilbertBackend {
    Spectral,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonBackend {
    Spectral,
    FiniteDifference,
}

/// Immutable evaluator for the right-hand side; pure and reentrant.
#[derive(Debug, Clone)]
pub struct RhsEvaluator {
    grid: PeriodicGrid,
    beta: BetaModel,
    hilbert: HilbertBackend,
    poisson: PoissonBackend,
    dealias: bool,
}

/// Result of one rhs evaluation.
#[derive(Debug, Clone)]
pub struct RhsOutcome {
    pub deriv: Field,
    /// Some node went negative and was clamped for the beta evaluation.
    pub clamped_negative: bool,
}

impl RhsEvaluator {
    pub fn new(
        grid: PeriodicGrid,
        beta: BetaModel,
        hilbert: HilbertBackend,
        poisson: PoissonBackend,
        dealias: bool,
    ) -> Self {
        beta.validate().expect("invalid beta model");
        Self {
            grid,
            beta,
            hilbert,
            poisson,
            dealias,
        }
    }

    /// Spectral backends with the default dealias policy for `beta`.
    pub fn spectral(grid: PeriodicGrid, beta: BetaModel) -> Self {
        Self::new(
            grid,
            beta,
            HilbertBackend::Spectral,
            PoissonBackend::Spectral,
            default_dealias(&beta),
        )
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn beta(&self) -> BetaModel {
        self.beta
    }

    pub fn rhs(&self, rho: &Field) -> Result<RhsOutcome, FluxError> {
        if rho.grid() != self.grid {
            return Err(FluxError::GridMismatch);
        }
        let n = self.grid.n();

        let mut spec = to_spectrum(rho);
        if self.dealias {
            spec.truncate_two_thirds();
        }
        // density used in every product (truncated when dealiasing)
        let rho_p = if self.dealias {
            from_spectrum(&spec)
        } else {
            rho.clone()
        };

        let h_rho = match self.hilbert {
            HilbertBackend::Spectral => {
                let mut hs = spec.clone();
                hilbert_multiplier(&mut hs);
                from_spectrum(&hs)
            }
            HilbertBackend::Quadrature => hilbert_quadrature(&rho_p)?,
        };

        let grad_v = match self.poisson {
            PoissonBackend::Spectral => {
                let mut gs = spec.clone();
                poisson_grad_multiplier(&mut gs);
                from_spectrum(&gs)
            }
            PoissonBackend::FiniteDifference => {
                solve_poisson_fd(&rho_p)
                    .map_err(|_| FluxError::NonFinite)?
                    .grad_v
            }
        };

        let mut clamped = false;
        let mut q = Vec::with_capacity(n);
        for ((&r, &hr), &gv) in rho_p
            .values()
            .iter()
            .zip(h_rho.values())
            .zip(grad_v.values())
        {
            if r < 0.0 {
                clamped = true;
            }
            let b = self.beta.value_clamped(r);
            q.push(-b * hr + r * gv);
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(FluxError::NonFinite);
        }
        let q = Field::new(self.grid, q).map_err(|_| FluxError::NonFinite)?;

        let mut qs = to_spectrum(&q);
        if self.dealias {
            qs.truncate_two_thirds();
        }
        derivative_multiplier(&mut qs);
        let deriv = from_spectrum(&qs);
        if deriv.values().iter().any(|v| !v.is_finite()) {
            return Err(FluxError::NonFinite);
        }
        Ok(RhsOutcome {
            deriv,
            clamped_negative: clamped,
        })
    }
}

/// Dealiasing default: on for every density-dependent law (their fluxes are
/// at least quadratic in the retained modes), off for constant diffusion.
pub fn default_dealias(beta: &BetaModel) -> bool {
    !matches!(beta, BetaModel::Constant(_))
}
