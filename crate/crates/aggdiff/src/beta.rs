//! Density-dependent diffusion strength laws `beta` and their derivatives.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BetaError {
    #[error("beta evaluated at negative density {0}")]
    NegativeDensity(f64),
    #[error("invalid beta parameter: {0}")]
    InvalidParameter(String),
}

/// The diffusion law multiplying `H rho` in the flux. Growth at large
/// density decides boundedness versus blow-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaModel {
    /// `beta(x) = nu`, `nu > 0` (linear nonlocal diffusion).
    Constant(f64),
    /// `beta(x) = x + nu`, `nu >= 0`.
    Linear(f64),
    /// `beta(x) = x^p`, `p >= 1`; `Power(2.0)` is the blow-up case.
    Power(f64),
    /// `beta(x) = log(1 + x)`; the globally bounded case.
    LogSmooth,
}

impl BetaModel {
    pub fn validate(&self) -> Result<(), BetaError> {
        match *self {
            BetaModel::Constant(nu) if !(nu > 0.0 && nu.is_finite()) => Err(
                BetaError::InvalidParameter(format!("Constant requires nu > 0, got {nu}")),
            ),
            BetaModel::Linear(nu) if !(nu >= 0.0 && nu.is_finite()) => Err(
                BetaError::InvalidParameter(format!("Linear requires nu >= 0, got {nu}")),
            ),
            BetaModel::Power(p) if !(p >= 1.0 && p.is_finite()) => Err(
                BetaError::InvalidParameter(format!("Power requires p >= 1, got {p}")),
            ),
            _ => Ok(()),
        }
    }

    /// `d^order beta / dx^order` at `x >= 0`, `order` in `0..=3`.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64, BetaError> {
        if x < 0.0 {
            return Err(BetaError::NegativeDensity(x));
        }
        assert!(order <= 3, "derivative order {order} out of range 0..=3");
        Ok(match *self {
            BetaModel::Constant(nu) => {
                if order == 0 {
                    nu
                } else {
                    0.0
                }
            }
            BetaModel::Linear(nu) => match order {
                0 => x + nu,
                1 => 1.0,
                _ => 0.0,
            },
            BetaModel::Power(p) => {
                let mut coeff = 1.0;
                for i in 0..order {
                    coeff *= p - i as f64;
                }
                if coeff == 0.0 {
                    0.0
                } else {
                    let e = p - order as f64;
                    if e == 0.0 {
                        coeff
                    } else {
                        coeff * x.powf(e)
                    }
                }
            }
            BetaModel::LogSmooth => match order {
                0 => x.ln_1p(),
                1 => 1.0 / (1.0 + x),
                2 => -1.0 / ((1.0 + x) * (1.0 + x)),
                _ => 2.0 / ((1.0 + x) * (1.0 + x) * (1.0 + x)),
            },
        })
    }

    /// Plain value `beta(x)`; density is clamped to zero first. Used by the
    /// flux assembly where negative undershoots are a resolution diagnostic,
    /// not a hard error.
    pub fn value_clamped(&self, x: f64) -> f64 {
        self.eval(x.max(0.0), 0)
            .expect("clamped argument is nonnegative")
    }

    /// Suprema `(C_beta, C_beta', C_beta'', C_beta''')` of `|d^i beta/dx^i|`
    /// over `[0, m]`, in closed form per law.
    pub fn sup_constants(&self, m: f64) -> [f64; 4] {
        assert!(m >= 0.0, "sup interval end must be nonnegative, got {m}");
        match *self {
            BetaModel::Constant(nu) => [nu, 0.0, 0.0, 0.0],
            BetaModel::Linear(nu) => [m + nu, 1.0, 0.0, 0.0],
            BetaModel::Power(p) => {
                let mut out = [0.0; 4];
                for (order, o) in out.iter_mut().enumerate() {
                    let mut coeff = 1.0;
                    for i in 0..order {
                        coeff *= p - i as f64;
                    }
                    let e = p - order as f64;
                    *o = if coeff == 0.0 {
                        0.0
                    } else if e > 0.0 {
                        // |c| x^e increasing: supremum at m
                        coeff.abs() * m.powf(e)
                    } else if e == 0.0 {
                        coeff.abs()
                    } else {
                        // negative exponent with nonzero coefficient: the
                        // derivative is unbounded near 0 (non-integer p < order)
                        f64::INFINITY
                    };
                }
                out
            }
            BetaModel::LogSmooth => [m.ln_1p(), 1.0, 1.0, 2.0],
        }
    }

    /// True when `beta(x) -> infinity` as `x -> infinity` (the hypothesis of
    /// the maximum-principle bound).
    pub fn grows_unbounded(&self) -> bool {
        !matches!(self, BetaModel::Constant(_))
    }

    /// Least `x >= lo` with `beta(x) >= target`, or `None` when the law never
    /// reaches `target` (closed form per law; every law is monotone).
    pub fn least_arg_reaching(&self, target: f64, lo: f64) -> Option<f64> {
        match *self {
            BetaModel::Constant(nu) => (nu >= target).then_some(lo),
            BetaModel::Linear(nu) => Some(lo.max(target - nu)),
            BetaModel::Power(p) => Some(lo.max(target.max(0.0).powf(1.0 / p))),
            BetaModel::LogSmooth => Some(lo.max(target.exp_m1())),
        }
    }
}

impl fmt::Display for BetaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BetaModel::Constant(nu) => write!(f, "constant(nu={nu})"),
            BetaModel::Linear(nu) => write!(f, "linear(nu={nu})"),
            BetaModel::Power(p) => write!(f, "power(p={p})"),
            BetaModel::LogSmooth => write!(f, "log_smooth"),
        }
    }
}
