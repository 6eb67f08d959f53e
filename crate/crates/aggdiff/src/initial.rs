//! The compactly supported initial datum used by both preset cases:
//!
//! ```text
//! rho(x, 0) = Z^{-1} e^{-1/(1 - (x/2)^2)},   Z = (1/2pi) int_{-2}^{2} e^{-1/(1-(s/2)^2)} ds,
//! ```
//!
//! zero outside |x| < 2, normalized so the discrete mean is 1.

use crate::grid::{Field, PeriodicGrid};
use crate::quadrature::adaptive_integrate;

/// Unnormalized bump profile; exactly zero for |x| >= 2.
pub fn bump_profile(x: f64) -> f64 {
    let u = x / 2.0;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (-1.0 / (1.0 - u * u)).exp()
}

/// Normalization constant `Z` computed by adaptive quadrature to 1e-12.
pub fn bump_normalization() -> f64 {
    let integral = adaptive_integrate(bump_profile, -2.0, 2.0, 1e-13, 1 << 16)
        .expect("bump normalization quadrature converges");
    integral / (2.0 * std::f64::consts::PI)
}

/// The normalized initial datum sampled on `grid`; `mean = 1` to spectral
/// accuracy for n >= 256.
pub fn build_initial_bump(grid: PeriodicGrid) -> Field {
    let z = bump_normalization();
    Field::from_fn(grid, |x| bump_profile(x) / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use approx::assert_relative_eq;

    // Frozen oracle (30-digit quadrature of the profile):
    //   int_{-2}^{2} e^{-1/(1-(s/2)^2)} ds = 0.887987632336158875646097842341
    //   Z = 0.14132762109076824432454621534
    //   ||rho0||_inf = e^{-1} / Z = 2.60302578032619852550820775062
    const Z_ORACLE: f64 = 0.141_327_621_090_768_24;
    const LINF_ORACLE: f64 = 2.603_025_780_326_198_5;

    #[test]
    fn normalization_matches_frozen_oracle() {
        assert_relative_eq!(bump_normalization(), Z_ORACLE, max_relative = 1e-12);
    }

    #[test]
    fn mean_is_one_after_normalization() {
        let g512 = PeriodicGrid::new(512).unwrap();
        assert!((build_initial_bump(g512).mean() - 1.0).abs() <= 1e-8);
        let g256 = PeriodicGrid::new(256).unwrap();
        assert!((build_initial_bump(g256).mean() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn compact_support_is_exact() {
        let g = PeriodicGrid::new(512).unwrap();
        let rho = build_initial_bump(g);
        for (j, &v) in rho.values().iter().enumerate() {
            if g.node(j).abs() >= 2.0 {
                assert_eq!(v, 0.0, "node {} inside the support", j);
            } else {
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn peak_value_matches_oracle_at_the_origin() {
        let g = PeriodicGrid::new(512).unwrap();
        let rho = build_initial_bump(g);
        assert_relative_eq!(
            lp_norm(&rho, f64::INFINITY),
            LINF_ORACLE,
            max_relative = 1e-12
        );
        // x = 0 sits on the grid (j = n/2) and carries the maximum
        assert_relative_eq!(rho.values()[256], LINF_ORACLE, max_relative = 1e-12);
    }
}
