//! Least-squares fit of the singularity model `g(t) = C / (T - t)^a` to a
//! gradient time series.
//!
//! The log model `log g = log C - a log(T - t)` is linear in `(log C, a)`
//! for fixed `T`, so the fit is an outer one-dimensional search over `T`
//! (coarse scan clustered at the data's end, then golden-section refinement)
//! followed by a Gauss-Newton polish of `(C, T, a)` in the original scale.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("blow-up fit needs at least 8 samples with increasing t and positive g: {0}")]
    InvalidSamples(String),
    #[error("residual has no interior minimum in T: data shows no singularity")]
    FitDegenerate,
}

/// Fitted singularity parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    pub c: f64,
    /// Estimated blow-up time; strictly greater than every fitted sample time.
    pub t_star: f64,
    pub a: f64,
    /// RMS misfit of `log C - a log(T - t) - log g`.
    pub residual: f64,
}

/// Linear least squares of `log g` against `log(T - t)`; returns
/// `(rms_residual, log_c, a)`.
fn log_ls(t_star: f64, ts: &[f64], logg: &[f64]) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(logg) {
        let x = (t_star - t).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut ss = 0.0;
    for (&t, &y) in ts.iter().zip(logg) {
        let r = y - (intercept + slope * (t_star - t).ln());
        ss += r * r;
    }
    ((ss / n).sqrt(), intercept, -slope)
}

fn sse_original(c: f64, t_star: f64, a: f64, ts: &[f64], gs: &[f64]) -> f64 {
    if !(c > 0.0 && a > 0.0) || t_star <= *ts.last().unwrap() {
        return f64::INFINITY;
    }
    let mut s = 0.0;
    for (&t, &g) in ts.iter().zip(gs) {
        let r = c * (t_star - t).powf(-a) - g;
        s += r * r;
    }
    s
}

/// Gauss-Newton refinement of `(C, T, a)` on the original-scale residuals,
/// with step halving. Returns the refined triple, or `None` when the first
/// system is already singular.
fn gauss_newton(
    mut c: f64,
    mut t_star: f64,
    mut a: f64,
    ts: &[f64],
    gs: &[f64],
) -> Option<(f64, f64, f64)> {
    let mut sse = sse_original(c, t_star, a, ts, gs);
    for _ in 0..60 {
        // normal equations J^T J d = -J^T r
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&t, &g) in ts.iter().zip(gs) {
            let w = (t_star - t).powf(-a);
            let r = c * w - g;
            let row = [
                w,
                -a * c * (t_star - t).powf(-a - 1.0),
                -c * w * (t_star - t).ln(),
            ];
            for i in 0..3 {
                jtr[i] += row[i] * r;
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let d = solve3(&jtj, &[-jtr[0], -jtr[1], -jtr[2]])?;
        let mut lam = 1.0;
        let mut improved = false;
        while lam > 1e-12 {
            let cand = (c + lam * d[0], t_star + lam * d[1], a + lam * d[2]);
            let s = sse_original(cand.0, cand.1, cand.2, ts, gs);
            if s < sse {
                c = cand.0;
                t_star = cand.1;
                a = cand.2;
                let gain = sse - s;
                sse = s;
                improved = true;
                if gain <= 1e-14 * sse.max(1e-300) {
                    return Some((c, t_star, a));
                }
                break;
            }
            lam *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Some((c, t_star, a))
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut r = *b;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        let pivot_row = m[col];
        for row in col + 1..3 {
            let f = m[row][col] / pivot_row[col];
            for (mk, pk) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *mk -= f * pk;
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = r[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Fit the trailing `window` fraction of `samples` (at least 8 points).
///
/// `samples` are `(t, grad_linf)` pairs with strictly increasing `t` and
/// positive values. The search bracket for `T` is
/// `(t_last, t_last + 2 (t_last - t_first)]`; a residual minimized at the
/// far bracket end means the data carries no singularity (`FitDegenerate`).
pub fn blowup_fit(samples: &[(f64, f64)], window: f64) -> Result<BlowupFit, FitError> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(FitError::InvalidSamples(format!(
            "window fraction {window} outside (0, 1]"
        )));
    }
    if samples.len() < 8 {
        return Err(FitError::InvalidSamples(format!(
            "{} samples",
            samples.len()
        )));
    }
    let take = ((samples.len() as f64 * window).ceil() as usize)
        .max(8)
        .min(samples.len());
    let tail = &samples[samples.len() - take..];
    for w in tail.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(FitError::InvalidSamples("t not strictly increasing".into()));
        }
    }
    if let Some(&(t, g)) = tail.iter().find(|&&(_, g)| g <= 0.0 || g.is_nan()) {
        return Err(FitError::InvalidSamples(format!(
            "nonpositive gradient {g} at t = {t}"
        )));
    }

    let ts: Vec<f64> = tail.iter().map(|s| s.0).collect();
    let gs: Vec<f64> = tail.iter().map(|s| s.1).collect();
    let logg: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let t_first = ts[0];
    let t_last = *ts.last().unwrap();
    let span = 2.0 * (t_last - t_first);

    // coarse scan, quadratically clustered toward t_last where the residual
    // varies fastest for singular data
    const SCAN: usize = 512;
    let t_of = |i: usize| t_last + span * ((i as f64) / SCAN as f64).powi(2);
    let mut best_i = 1;
    let mut best_r = f64::INFINITY;
    for i in 1..=SCAN {
        let (r, _, _) = log_ls(t_of(i), &ts, &logg);
        if r < best_r {
            best_r = r;
            best_i = i;
        }
    }
    let r_end = log_ls(t_of(SCAN), &ts, &logg).0;
    if best_i == SCAN || best_r >= r_end * (1.0 - 1e-6) - 1e-300 {
        // residual monotone toward the bracket end, or flat (constant data):
        // no interior minimum, the series carries no singularity
        return Err(FitError::FitDegenerate);
    }

    // golden-section refinement on the bracketing interval
    let mut lo = t_of(best_i.saturating_sub(1)).max(t_last + 1e-300);
    let mut hi = t_of(best_i + 1);
    if best_i == 1 {
        lo = t_last + (t_of(1) - t_last) * 1e-6;
    }
    let gr = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c_pt = hi - gr * (hi - lo);
    let mut d_pt = lo + gr * (hi - lo);
    let mut fc = log_ls(c_pt, &ts, &logg).0;
    let mut fd = log_ls(d_pt, &ts, &logg).0;
    for _ in 0..300 {
        if fc < fd {
            hi = d_pt;
            d_pt = c_pt;
            fd = fc;
            c_pt = hi - gr * (hi - lo);
            fc = log_ls(c_pt, &ts, &logg).0;
        } else {
            lo = c_pt;
            c_pt = d_pt;
            fc = fd;
            d_pt = lo + gr * (hi - lo);
            fd = log_ls(d_pt, &ts, &logg).0;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let t_ls = 0.5 * (lo + hi);
    let (_, log_c, a_ls) = log_ls(t_ls, &ts, &logg);
    let c_ls = log_c.exp();
    if !(a_ls > 0.0 && c_ls > 0.0 && c_ls.is_finite()) {
        return Err(FitError::FitDegenerate);
    }

    // original-scale polish; fall back to the log-scale minimizer when the
    // polished point is invalid
    let (c, t_star, a) = match gauss_newton(c_ls, t_ls, a_ls, &ts, &gs) {
        Some((c, t, a)) if c > 0.0 && a > 0.0 && t > t_last && c.is_finite() => (c, t, a),
        _ => (c_ls, t_ls, a_ls),
    };

    let mut ss = 0.0;
    for (&t, &lg) in ts.iter().zip(&logg) {
        let r = c.ln() - a * (t_star - t).ln() - lg;
        ss += r * r;
    }
    Ok(BlowupFit {
        c,
        t_star,
        a,
        residual: (ss / ts.len() as f64).sqrt(),
    })
}

/// Sample window plus the trailing fraction [`blowup_fit`] should cut.
pub struct FitWindow<'a> {
    pub samples: &'a [(f64, f64)],
    pub trailing_fraction: f64,
}

/// Default production window: the trailing half of the samples after the
/// gradient first exceeds 10x its initial value. When that filtered set is
/// thin (< 16 samples, e.g. a run stopped right at the growth threshold),
/// fall back to the trailing quarter of the whole series, which sits
/// closest to the asymptotic regime.
pub fn default_fit_window(samples: &[(f64, f64)]) -> FitWindow<'_> {
    if samples.is_empty() {
        return FitWindow {
            samples,
            trailing_fraction: 1.0,
        };
    }
    let g0 = samples[0].1;
    let start = samples.iter().position(|&(_, g)| g >= 10.0 * g0);
    match start {
        Some(i) if samples.len() - i >= 16 => FitWindow {
            samples: &samples[i..],
            trailing_fraction: 0.5,
        },
        _ => FitWindow {
            samples,
            trailing_fraction: 0.25,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(c: f64, t_star: f64, a: f64, n: usize, t_max: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = t_max * i as f64 / (n - 1) as f64;
                (t, c * (t_star - t).powf(-a))
            })
            .collect()
    }

    #[test]
    fn recovers_exact_synthetic_parameters() {
        let samples = synthetic(2.0, 0.5, 1.5, 50, 0.45);
        let fit = blowup_fit(&samples, 1.0).unwrap();
        assert_relative_eq!(fit.c, 2.0, max_relative = 1e-6);
        assert_relative_eq!(fit.t_star, 0.5, max_relative = 1e-6);
        assert_relative_eq!(fit.a, 1.5, max_relative = 1e-6);
        assert!(fit.residual <= 1e-8, "residual {}", fit.residual);
        assert!(fit.t_star > 0.45);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let samples: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.01, 3.0)).collect();
        assert_eq!(blowup_fit(&samples, 1.0), Err(FitError::FitDegenerate));
    }

    #[test]
    fn decaying_series_is_degenerate() {
        let samples: Vec<(f64, f64)> = (0..30)
            .map(|i| (i as f64 * 0.01, (-(i as f64) * 0.05).exp()))
            .collect();
        assert!(matches!(
            blowup_fit(&samples, 1.0),
            Err(FitError::FitDegenerate)
        ));
    }

    #[test]
    fn rejects_bad_samples() {
        let short = synthetic(2.0, 0.5, 1.5, 5, 0.4);
        assert!(matches!(
            blowup_fit(&short, 1.0),
            Err(FitError::InvalidSamples(_))
        ));
        let mut nonmono = synthetic(2.0, 0.5, 1.5, 20, 0.4);
        nonmono[10].0 = nonmono[9].0;
        assert!(matches!(
            blowup_fit(&nonmono, 1.0),
            Err(FitError::InvalidSamples(_))
        ));
        let mut nonpos = synthetic(2.0, 0.5, 1.5, 20, 0.4);
        nonpos[3].1 = 0.0;
        assert!(matches!(
            blowup_fit(&nonpos, 1.0),
            Err(FitError::InvalidSamples(_))
        ));
    }

    #[test]
    fn translation_equivariance() {
        let base = synthetic(2.0, 0.5, 1.5, 40, 0.45);
        let shift = 0.25;
        let moved: Vec<(f64, f64)> = base.iter().map(|&(t, g)| (t + shift, g)).collect();
        let f0 = blowup_fit(&base, 1.0).unwrap();
        let f1 = blowup_fit(&moved, 1.0).unwrap();
        assert_relative_eq!(f1.t_star - f0.t_star, shift, epsilon = 1e-9);
        assert_relative_eq!(f0.c, f1.c, max_relative = 1e-9);
        assert_relative_eq!(f0.a, f1.a, max_relative = 1e-9);
    }

    #[test]
    fn window_keeps_trailing_fraction() {
        // only the trailing half follows the power law; the head is flat
        let mut samples: Vec<(f64, f64)> = (0..25).map(|i| (i as f64 * 0.001, 1.0)).collect();
        let tail = synthetic(2.0, 0.5, 1.5, 25, 0.45);
        for (i, &(t, g)) in tail.iter().enumerate() {
            samples.push((0.03 + t, g * (1.0 + i as f64 * 0.0)));
        }
        let fit = blowup_fit(&samples, 0.5).unwrap();
        assert_relative_eq!(fit.t_star, 0.53, max_relative = 1e-3);
    }

    #[test]
    fn default_window_policy() {
        // growth crosses 10x at index 30 of 60
        let samples: Vec<(f64, f64)> = (0..60)
            .map(|i| (i as f64 * 0.01, (i as f64 * 0.08).exp()))
            .collect();
        let w = default_fit_window(&samples);
        assert!(w.samples.len() < samples.len());
        assert!(w.samples[0].1 >= 10.0 * samples[0].1);
        assert_eq!(w.trailing_fraction, 0.5);
        // thin filtered set falls back to the trailing quarter of everything
        let short: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 * 0.01, if i < 15 { 1.0 } else { 20.0 }))
            .collect();
        let w = default_fit_window(&short);
        assert_eq!(w.samples.len(), short.len());
        assert_eq!(w.trailing_fraction, 0.25);
    }
}
