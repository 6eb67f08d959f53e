//! Periodic cubic spline interpolation on the uniform grid.
//!
//! Moments (second derivatives) `M_j` solve the cyclic tridiagonal system
//! `M_{j-1} + 4 M_j + M_{j+1} = 6 (f_{j-1} - 2 f_j + f_{j+1}) / h^2`,
//! closed by periodicity and solved with the Sherman-Morrison correction of
//! a Thomas sweep.

use crate::grid::{Field, PeriodicGrid};

#[derive(Debug, Clone)]
pub struct PeriodicCubicSpline {
    grid: PeriodicGrid,
    values: Vec<f64>,
    moments: Vec<f64>,
}

impl PeriodicCubicSpline {
    pub fn new(f: &Field) -> Self {
        let grid = f.grid();
        let n = grid.n();
        let h = grid.spacing();
        let vals = f.values();
        let rhs: Vec<f64> = (0..n)
            .map(|j| {
                let jm = (j + n - 1) % n;
                let jp = (j + 1) % n;
                6.0 * (vals[jm] - 2.0 * vals[j] + vals[jp]) / (h * h)
            })
            .collect();
        let moments = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
        Self {
            grid,
            values: vals.to_vec(),
            moments,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Evaluate on segment `m` (between nodes `m` and `m+1`); `y` must lie in
    /// `[x_m, x_m + h]`. Keeping the segment explicit avoids a wrap search in
    /// quadrature loops.
    pub fn eval_on_segment(&self, m: usize, y: f64) -> f64 {
        let n = self.grid.n();
        debug_assert!(m < n);
        let h = self.grid.spacing();
        let xl = self.grid.node(m);
        let mp = (m + 1) % n;
        let dl = y - xl; // distance from left node, in [0, h]
        let dr = h - dl; // distance to right node
        let (ml, mr) = (self.moments[m], self.moments[mp]);
        let (fl, fr) = (self.values[m], self.values[mp]);
        ml * dr * dr * dr / (6.0 * h)
            + mr * dl * dl * dl / (6.0 * h)
            + (fl - ml * h * h / 6.0) * dr / h
            + (fr - mr * h * h / 6.0) * dl / h
    }

    /// Evaluate at arbitrary `y`, wrapping into the period.
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut u = (y + std::f64::consts::PI).rem_euclid(two_pi);
        if u >= two_pi {
            // rem_euclid can land on the modulus at rounding edges
            u = 0.0;
        }
        let m = ((u / h) as usize).min(n - 1);
        self.eval_on_segment(m, -std::f64::consts::PI + u)
    }
}

/// Solve the cyclic constant-coefficient tridiagonal system with sub/super
/// diagonal `a`/`c`, diagonal `b`, and periodic corner entries `a`, `c`.
fn solve_cyclic_tridiagonal(a: f64, b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3);
    // Sherman-Morrison: A = A' + u v^T with u = (gamma, 0, .., 0, a)^T,
    // v = (1, 0, .., 0, c/gamma)^T and modified diagonal ends.
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let y = thomas(a, &diag, c, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let z = thomas(a, &diag, c, &u);
    let vy = y[0] + c / gamma * y[n - 1];
    let vz = z[0] + c / gamma * z[n - 1];
    let factor = vy / (1.0 + vz);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

/// Thomas sweep for a strictly tridiagonal system with constant off-diagonals.
fn thomas(a: f64, diag: &[f64], c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cyclic_solver_matches_direct_residual() {
        let n = 24;
        let rhs: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let x = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            let r = x[im] + 4.0 * x[i] + x[ip] - rhs[i];
            assert!(r.abs() <= 1e-12, "residual {r} at row {i}");
        }
    }

    #[test]
    fn spline_interpolates_nodes_exactly() {
        let g = PeriodicGrid::new(32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos());
        let s = PeriodicCubicSpline::new(&f);
        for j in 0..g.n() {
            assert_relative_eq!(
                s.eval_on_segment(j, g.node(j)),
                f.values()[j],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn spline_of_constant_is_constant() {
        let g = PeriodicGrid::new(16).unwrap();
        let f = Field::constant(g, 2.5);
        let s = PeriodicCubicSpline::new(&f);
        for j in 0..g.n() {
            let y = g.node(j) + 0.37 * g.spacing();
            assert_relative_eq!(s.eval_on_segment(j, y), 2.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn spline_midpoint_error_is_fourth_order() {
        let err_at = |n: usize| {
            let g = PeriodicGrid::new(n).unwrap();
            let f = Field::from_fn(g, |x| x.sin());
            let s = PeriodicCubicSpline::new(&f);
            (0..n).fold(0.0f64, |m, j| {
                let y = g.node(j) + 0.5 * g.spacing();
                m.max((s.eval_on_segment(j, y) - y.sin()).abs())
            })
        };
        let e64 = err_at(64);
        let e128 = err_at(128);
        assert!(e64 <= 1e-5);
        let rate = (e64 / e128).log2();
        assert!((3.5..=4.5).contains(&rate), "spline rate {rate}");
    }

    #[test]
    fn wrapped_eval_agrees_across_period() {
        let g = PeriodicGrid::new(32).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x).cos());
        let s = PeriodicCubicSpline::new(&f);
        let y = 1.234;
        assert_relative_eq!(
            s.eval(y),
            s.eval(y + 2.0 * std::f64::consts::PI),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            s.eval(y),
            s.eval(y - 2.0 * std::f64::consts::PI),
            epsilon = 1e-12
        );
    }
}
