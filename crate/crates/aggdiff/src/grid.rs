//! Uniform periodic grid on [-pi, pi) and real-valued fields over it.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid size must be even and >= 16, got {0}")]
    InvalidSize(usize),
    #[error("field has {got} values for a grid of {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("field value at node {index} is not finite")]
    NonFiniteValue { index: usize },
}

/// Uniform grid of `n` nodes `x_j = -pi + 2*pi*j/n`, `j = 0..n-1`.
///
/// `n` is even and at least 16 so that the Fourier bins split cleanly into
/// `k = -n/2 .. n/2-1` with a single Nyquist bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(GridError::InvalidSize(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing `h = 2*pi/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Node coordinate `x_j`.
    pub fn node(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        -PI + 2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
}

/// Real sample values of a function on a [`PeriodicGrid`]; the discrete
/// state `rho` of the evolution.
///
/// Every constructor checks that all values are finite; a `Field` in hand
/// is always a valid state.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.n(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteValue { index });
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every node. Panics if `f` produces a non-finite value.
    pub fn from_fn(grid: PeriodicGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.node(j))).collect();
        Self::new(grid, values).expect("sampled function produced a non-finite value")
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self::new(grid, vec![c; grid.n()]).expect("constant must be finite")
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The discrete mean `(1/n) sum_j f_j`, the rectangle-rule value of
    /// `(1/2pi) integral f dx` (exact for band-limited fields).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.n() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(h sum_j |f_j|^p)^(1/p)`; for `p = infinity` the nodal maximum of `|f|`.
///
/// The rectangle rule is spectrally accurate for trigonometric polynomials
/// below the Nyquist limit. Requires `p >= 1`.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
    if p.is_infinite() {
        return f.values().iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let h = f.grid().spacing();
    if p == 1.0 {
        return h * f.values().iter().map(|v| v.abs()).sum::<f64>();
    }
    if p == 2.0 {
        return (h * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    (h * f.values().iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}
