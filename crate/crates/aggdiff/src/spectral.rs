//! Fourier transforms and the nonlocal multiplier operators `H`, `Lambda^alpha`,
//! `d/dx` on periodic fields.
//!
//! Coefficient convention: `rho(x_j) = sum_k rho_hat_k e^{i k x_j}` with
//! `k = -n/2 .. n/2-1`. Coefficients are stored in FFT bin order
//! (`k = 0..n/2-1` then `-n/2..-1`); [`Spectrum::coeff`] indexes by the
//! signed wavenumber.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::grid::{Field, PeriodicGrid};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("fractional Laplacian order must lie in (0, 2], got {0}")]
    InvalidAlpha(f64),
}

/// Complex Fourier coefficients of a [`Field`]; the carrier for every
/// multiplier operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: PeriodicGrid,
    /// FFT bin order: index `i` holds wavenumber `i` for `i < n/2`, else `i - n`.
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Signed wavenumber of bin `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.grid.n();
        debug_assert!(i < n);
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Coefficient for wavenumber `k` in `-n/2 ..= n/2-1`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.grid.n() as i64;
        assert!(-n / 2 <= k && k < n / 2, "wavenumber {k} out of range");
        let i = if k >= 0 { k } else { k + n } as usize;
        self.coeffs[i]
    }

    /// Apply a diagonal multiplier `m(k)` in place.
    pub fn apply_multiplier(&mut self, m: impl Fn(i64) -> Complex64) {
        let n = self.grid.n();
        for i in 0..n {
            let k = if i < n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            };
            self.coeffs[i] *= m(k);
        }
    }

    /// Zero every coefficient with `|k| > n/3` (the 2/3 dealiasing rule).
    pub fn truncate_two_thirds(&mut self) {
        let n = self.grid.n();
        let k_max = (n / 3) as i64;
        for i in 0..n {
            let k = if i < n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            };
            if k.abs() > k_max {
                self.coeffs[i] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward transform. The zero mode equals the nodal mean of `f`.
pub fn to_spectrum(f: &Field) -> Spectrum {
    let n = f.grid().n();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        fft.process(&mut buf);
    });
    // The FFT sees samples indexed from x=0; our grid starts at x=-pi, so
    // bin i carries an extra phase (-1)^k with k = i (mod 2).
    let scale = 1.0 / n as f64;
    for (i, c) in buf.iter_mut().enumerate() {
        let sign = if i % 2 == 0 { scale } else { -scale };
        *c *= sign;
    }
    Spectrum {
        grid: f.grid(),
        coeffs: buf,
    }
}

/// Inverse transform (real part of the synthesized series).
pub fn from_spectrum(s: &Spectrum) -> Field {
    let n = s.grid.n();
    let mut buf: Vec<Complex64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c } else { -c })
        .collect();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(&mut buf);
    });
    let values = buf.iter().map(|c| c.re).collect();
    Field::new(s.grid, values).expect("inverse transform produced non-finite values")
}

/// Periodic Hilbert transform via its Fourier multiplier `-i sgn(k)`
/// (`sgn(0) = 0`, Nyquist zeroed). The output has zero mean.
pub fn hilbert_spectral(f: &Field) -> Field {
    let mut s = to_spectrum(f);
    hilbert_multiplier(&mut s);
    from_spectrum(&s)
}

pub(crate) fn hilbert_multiplier(s: &mut Spectrum) {
    let n = s.grid.n() as i64;
    s.apply_multiplier(|k| {
        if k == 0 || k == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -(k.signum() as f64))
        }
    });
}

/// Spectral derivative: multiplier `ik`, Nyquist zeroed, exact zero mean.
pub fn derivative(f: &Field) -> Field {
    let mut s = to_spectrum(f);
    derivative_multiplier(&mut s);
    from_spectrum(&s)
}

pub(crate) fn derivative_multiplier(s: &mut Spectrum) {
    let n = s.grid.n() as i64;
    s.apply_multiplier(|k| {
        if k == -n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64)
        }
    });
}

/// Fractional Laplacian `Lambda^alpha` with multiplier `|k|^alpha`,
/// `alpha` in `(0, 2]`.
pub fn fractional_laplacian(f: &Field, alpha: f64) -> Result<Field, SpectralError> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(SpectralError::InvalidAlpha(alpha));
    }
    let mut s = to_spectrum(f);
    s.apply_multiplier(|k| Complex64::new((k.abs() as f64).powf(alpha), 0.0));
    Ok(from_spectrum(&s))
}

/// Homogeneous Sobolev seminorm `|| Lambda^s f ||_{L^2}` computed spectrally
/// as `(2 pi sum_k |k|^{2s} |f_hat_k|^2)^{1/2}`.
pub fn hs_seminorm(f: &Field, s: f64) -> f64 {
    assert!(s >= 0.0, "hs_seminorm requires s >= 0, got {s}");
    let spec = to_spectrum(f);
    let n = spec.grid.n();
    let mut sum = 0.0;
    for i in 0..n {
        let k = spec.wavenumber(i).abs() as f64;
        if k > 0.0 {
            sum += k.powf(2.0 * s) * spec.coeffs[i].norm_sqr();
        } else if s == 0.0 {
            sum += spec.coeffs[i].norm_sqr();
        }
    }
    (2.0 * std::f64::consts::PI * sum).sqrt()
}

/// Project onto the 2/3-rule band `|k| <= n/3`.
pub fn dealias(f: &Field) -> Field {
    let mut s = to_spectrum(f);
    s.truncate_two_thirds();
    from_spectrum(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn g(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn max_abs_diff(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn constant_field_transforms_to_pure_zero_mode() {
        let f = Field::constant(g(64), 1.0);
        let s = to_spectrum(&f);
        assert_relative_eq!(s.coeff(0).re, 1.0, epsilon = 1e-14);
        assert!(s.coeff(0).im.abs() <= 1e-15);
        for k in 1..32i64 {
            assert!(s.coeff(k).norm() <= 1e-14);
            assert!(s.coeff(-k).norm() <= 1e-14);
        }
    }

    #[test]
    fn cosine_splits_into_half_coefficients() {
        let f = Field::from_fn(g(64), |x| x.cos());
        let s = to_spectrum(&f);
        assert_relative_eq!(s.coeff(1).re, 0.5, epsilon = 1e-13);
        assert!(s.coeff(1).im.abs() <= 1e-13);
        assert_relative_eq!(s.coeff(-1).re, 0.5, epsilon = 1e-13);
        for k in 2..32i64 {
            assert!(s.coeff(k).norm() <= 1e-13);
        }
    }

    #[test]
    fn zero_mode_equals_mean() {
        let f = Field::from_fn(g(128), |x| 2.0 + x.sin() + (5.0 * x).cos());
        let s = to_spectrum(&f);
        assert_relative_eq!(s.coeff(0).re, f.mean(), epsilon = 1e-13);
    }

    #[test]
    fn conjugate_symmetry_for_real_fields() {
        let f = Field::from_fn(g(64), |x| (2.0 * x).sin() - 0.3 * (7.0 * x).cos());
        let s = to_spectrum(&f);
        for k in 1..32i64 {
            let d = (s.coeff(-k) - s.coeff(k).conj()).norm();
            assert!(d <= 1e-13, "symmetry broken at k={k}: {d}");
        }
    }

    #[test]
    fn round_trip_reproduces_band_limited_field() {
        // deterministic pseudo-random band-limited field
        let grid = g(256);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let coeffs: Vec<(f64, f64)> = (0..40).map(|_| (rnd(), rnd())).collect();
        let f = Field::from_fn(grid, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| a * ((k + 1) as f64 * x).cos() + b * ((k + 1) as f64 * x).sin())
                .sum()
        });
        let back = from_spectrum(&to_spectrum(&f));
        let scale = lp_norm(&f, f64::INFINITY);
        assert!(max_abs_diff(&f, &back) <= 1e-12 * scale);
    }

    #[test]
    fn hilbert_maps_cos_to_sin() {
        let grid = g(256);
        for k in 1..=64usize {
            let f = Field::from_fn(grid, |x| (k as f64 * x).cos());
            let hf = hilbert_spectral(&f);
            let want = Field::from_fn(grid, |x| (k as f64 * x).sin());
            assert!(max_abs_diff(&hf, &want) <= 1e-10, "H(cos {k}x) != sin {k}x");
        }
    }

    #[test]
    fn hilbert_of_constant_vanishes_and_output_is_mean_free() {
        let f = Field::constant(g(64), 4.0);
        let hf = hilbert_spectral(&f);
        assert!(lp_norm(&hf, f64::INFINITY) <= 1e-13);
        let f2 = Field::from_fn(g(64), |x| 1.0 + x.cos());
        assert!(hilbert_spectral(&f2).mean().abs() <= 1e-14);
    }

    #[test]
    fn hilbert_of_sin_is_minus_cos() {
        let grid = g(64);
        let f = Field::from_fn(grid, |x| x.sin());
        let want = Field::from_fn(grid, |x| -x.cos());
        assert!(max_abs_diff(&hilbert_spectral(&f), &want) <= 1e-12);
    }

    #[test]
    fn derivative_of_sin_and_constant() {
        let grid = g(64);
        let f = Field::from_fn(grid, |x| x.sin());
        let want = Field::from_fn(grid, |x| x.cos());
        assert!(max_abs_diff(&derivative(&f), &want) <= 1e-10);
        let c = Field::constant(grid, 7.0);
        assert!(lp_norm(&derivative(&c), f64::INFINITY) <= 1e-13);
        assert!(derivative(&f).mean().abs() <= 1e-15);
    }

    #[test]
    fn lambda_equals_hilbert_derivative_compositions() {
        let grid = g(256);
        let f = Field::from_fn(grid, |x| {
            (3.0 * x).cos() + 0.5 * (11.0 * x).sin() + 0.25 * (40.0 * x).cos()
        });
        let lam = fractional_laplacian(&f, 1.0).unwrap();
        let hd = hilbert_spectral(&derivative(&f));
        let dh = derivative(&hilbert_spectral(&f));
        assert!(max_abs_diff(&lam, &hd) <= 1e-10);
        assert!(max_abs_diff(&lam, &dh) <= 1e-10);
        // Lambda^2 = -d^2/dx^2
        let lam2 = fractional_laplacian(&f, 2.0).unwrap();
        let mut minus_dxx = derivative(&derivative(&f));
        for v in minus_dxx.values_mut() {
            *v = -*v;
        }
        assert!(max_abs_diff(&lam2, &minus_dxx) <= 1e-9);
    }

    #[test]
    fn fractional_laplacian_multipliers() {
        let grid = g(64);
        let f = Field::from_fn(grid, |x| x.cos());
        assert!(max_abs_diff(&fractional_laplacian(&f, 1.0).unwrap(), &f) <= 1e-12);
        let f4 = Field::from_fn(grid, |x| (4.0 * x).cos());
        let want = Field::from_fn(grid, |x| 2.0 * (4.0 * x).cos());
        assert!(max_abs_diff(&fractional_laplacian(&f4, 0.5).unwrap(), &want) <= 1e-12);
        let c = Field::constant(grid, 3.0);
        assert!(lp_norm(&fractional_laplacian(&c, 1.3).unwrap(), f64::INFINITY) <= 1e-13);
        assert_eq!(
            fractional_laplacian(&f, 0.0),
            Err(SpectralError::InvalidAlpha(0.0))
        );
        assert_eq!(
            fractional_laplacian(&f, 2.5),
            Err(SpectralError::InvalidAlpha(2.5))
        );
    }

    #[test]
    fn hs_seminorm_of_single_mode() {
        let grid = g(128);
        let f = Field::from_fn(grid, |x| x.cos());
        assert_relative_eq!(hs_seminorm(&f, 0.5), PI.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(hs_seminorm(&f, 2.0), PI.sqrt(), epsilon = 1e-10);
        let f3 = Field::from_fn(grid, |x| (3.0 * x).cos());
        assert_relative_eq!(hs_seminorm(&f3, 1.0), 3.0 * PI.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn dealias_removes_high_band_only() {
        let grid = g(96); // k_max = 32
        let f = Field::from_fn(grid, |x| (10.0 * x).cos() + (40.0 * x).cos());
        let d = dealias(&f);
        let want = Field::from_fn(grid, |x| (10.0 * x).cos());
        assert!(max_abs_diff(&d, &want) <= 1e-12);
    }
}
