//! Adaptive Runge-Kutta-Fehlberg 4(5) driver with blow-up detection.
//!
//! Classical Fehlberg pair (nodes 0, 1/4, 3/8, 12/13, 1, 1/2); the 5th-order
//! solution propagates (local extrapolation). The error norm is a weighted
//! RMS mixing absolute and relative tolerance, so runs spanning many
//! magnitudes near blow-up neither stall at the zero plateau nor lose
//! control at the peak.

use crate::flux::{FluxError, RhsEvaluator};
use crate::grid::{lp_norm, Field};
use crate::spectral::derivative;

/// Tolerances and step-size limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RkfConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub max_steps: u64,
}

impl Default for RkfConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            safety: 0.9,
            max_steps: 10_000_000,
        }
    }
}

impl RkfConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(format!("safety must lie in (0,1), got {}", self.safety));
        }
        Ok(())
    }
}

/// Bookkeeping for one attempted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub t_new: f64,
    pub dt_used: f64,
    /// Weighted RMS error; a step is accepted exactly when it is <= 1.
    pub err_est: f64,
    pub dt_next: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    DtUnderflow,
    NonFinite,
    BlowupThreshold,
    MaxSteps,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::Completed => "completed",
            StopReason::DtUnderflow => "dt_underflow",
            StopReason::NonFinite => "non_finite",
            StopReason::BlowupThreshold => "blowup_threshold",
            StopReason::MaxSteps => "max_steps",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// First accepted state with a negative node (clamped in beta).
    NegativeDensity {
        min_value: f64,
    },
    BlowupThresholdCrossed {
        grad_linf: f64,
    },
    DtUnderflow {
        dt: f64,
    },
    NonFinite {
        detail: String,
    },
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventKind::NegativeDensity { min_value } => {
                write!(f, "negative_density min={min_value:e}")
            }
            EventKind::BlowupThresholdCrossed { grad_linf } => {
                write!(f, "blowup_threshold grad_linf={grad_linf:e}")
            }
            EventKind::DtUnderflow { dt } => write!(f, "dt_underflow dt={dt:e}"),
            EventKind::NonFinite { detail } => write!(f, "non_finite {detail}"),
        }
    }
}

/// Everything the driver needs beyond the step controller.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Stop with `BlowupThreshold` once `||rho_x||_inf` exceeds this.
    pub blowup_grad_threshold: f64,
    /// Sorted times in `(0, t_end]` the driver must land on exactly
    /// (series sampling and snapshot times).
    pub align_times: Vec<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            blowup_grad_threshold: 1e6,
            align_times: Vec::new(),
        }
    }
}

/// State handed to observers after every accepted step.
pub struct StepInfo<'a> {
    pub rho: &'a Field,
    pub outcome: StepOutcome,
    pub grad_linf: f64,
}

#[derive(Debug)]
pub struct IntegrationResult {
    pub rho: Field,
    pub t: f64,
    pub reason: StopReason,
    pub events: Vec<Event>,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// Smallest nodal value seen over all accepted states.
    pub min_density: f64,
}

// Classical Fehlberg 4(5) tableau.
const A: [[f64; 5]; 5] = [
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [
        -8.0 / 27.0,
        2.0,
        -3544.0 / 2565.0,
        1859.0 / 4104.0,
        -11.0 / 40.0,
    ],
];
const B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -1.0 / 5.0,
    0.0,
];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

pub struct RkfStep {
    pub rho4: Field,
    pub rho5: Field,
    pub err_est: f64,
}

/// One embedded 4(5) step of `rho' = f(rho, t)`.
pub fn rkf45_step<F>(
    f: &mut F,
    rho: &Field,
    t: f64,
    dt: f64,
    cfg: &RkfConfig,
) -> Result<RkfStep, FluxError>
where
    F: FnMut(&Field, f64) -> Result<Field, FluxError>,
{
    assert!(dt > 0.0, "rkf45_step requires dt > 0");
    let grid = rho.grid();
    let n = grid.n();
    const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];

    let mut stages: Vec<Field> = Vec::with_capacity(6);
    stages.push(f(rho, t)?);
    for s in 1..6 {
        let mut y = rho.values().to_vec();
        for (i, k) in stages.iter().enumerate() {
            let a = A[s - 1][i];
            if a != 0.0 {
                for (yj, kj) in y.iter_mut().zip(k.values()) {
                    *yj += dt * a * kj;
                }
            }
        }
        let y = Field::new(grid, y).map_err(|_| FluxError::NonFinite)?;
        stages.push(f(&y, t + C[s] * dt)?);
    }

    let mut v4 = rho.values().to_vec();
    let mut v5 = rho.values().to_vec();
    for (i, k) in stages.iter().enumerate() {
        let (b4, b5) = (B4[i], B5[i]);
        for j in 0..n {
            let kj = k.values()[j];
            if b4 != 0.0 {
                v4[j] += dt * b4 * kj;
            }
            if b5 != 0.0 {
                v5[j] += dt * b5 * kj;
            }
        }
    }

    let mut err_sq = 0.0;
    for j in 0..n {
        let w = cfg.abs_tol + cfg.rel_tol * rho.values()[j].abs().max(v5[j].abs());
        let e = (v5[j] - v4[j]) / w;
        err_sq += e * e;
    }
    let err_est = (err_sq / n as f64).sqrt();
    if !err_est.is_finite() {
        return Err(FluxError::NonFinite);
    }

    let rho4 = Field::new(grid, v4).map_err(|_| FluxError::NonFinite)?;
    let rho5 = Field::new(grid, v5).map_err(|_| FluxError::NonFinite)?;
    Ok(RkfStep {
        rho4,
        rho5,
        err_est,
    })
}

/// Step-size controller: `safety * dt * err^(-1/5)` clamped to a factor of
/// 4 per step and to `[dt_min, dt_max]`.
pub fn adapt_dt(err_est: f64, dt: f64, cfg: &RkfConfig) -> f64 {
    assert!(err_est >= 0.0);
    let proposal = if err_est == 0.0 {
        4.0 * dt
    } else {
        (cfg.safety * dt * err_est.powf(-0.2)).clamp(dt / 4.0, 4.0 * dt)
    };
    proposal.clamp(cfg.dt_min, cfg.dt_max)
}

/// Drive `rho' = f(rho, t)` from 0 to `t_end`, accepting steps with
/// weighted error <= 1 and invoking `on_step` on every accepted step.
/// Failures surface as a [`StopReason`], never silently.
pub fn integrate_with<F>(
    mut f: F,
    rho0: &Field,
    t_end: f64,
    cfg: &RkfConfig,
    opts: &IntegrateOptions,
    mut on_step: impl FnMut(&StepInfo<'_>),
) -> IntegrationResult
where
    F: FnMut(&Field, f64) -> Result<Field, FluxError>,
{
    cfg.validate().expect("invalid RkfConfig");
    let mut events = Vec::new();
    let mut rho = rho0.clone();
    let mut t = 0.0_f64;
    let mut dt_natural = cfg.dt_init;
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut min_density = rho.min();
    let mut negativity_reported = false;
    let mut align_idx = 0usize;

    loop {
        if t >= t_end {
            return IntegrationResult {
                rho,
                t,
                reason: StopReason::Completed,
                events,
                accepted_steps: accepted,
                rejected_steps: rejected,
                min_density,
            };
        }
        if accepted + rejected >= cfg.max_steps {
            return IntegrationResult {
                rho,
                t,
                reason: StopReason::MaxSteps,
                events,
                accepted_steps: accepted,
                rejected_steps: rejected,
                min_density,
            };
        }

        // land exactly on the next alignment time or t_end
        while align_idx < opts.align_times.len() && opts.align_times[align_idx] <= t + 1e-14 {
            align_idx += 1;
        }
        let next_target = opts
            .align_times
            .get(align_idx)
            .copied()
            .unwrap_or(t_end)
            .min(t_end);
        let remaining = next_target - t;
        if remaining <= 0.0 {
            // fully consumed by rounding; snap forward
            t = next_target;
            continue;
        }
        let hits_target = dt_natural >= remaining;
        let dt_eff = if hits_target { remaining } else { dt_natural };

        match rkf45_step(&mut f, &rho, t, dt_eff, cfg) {
            Ok(step) => {
                if step.err_est <= 1.0 {
                    t = if hits_target { next_target } else { t + dt_eff };
                    rho = step.rho5;
                    accepted += 1;
                    let m = rho.min();
                    min_density = min_density.min(m);
                    if m < 0.0 && !negativity_reported {
                        negativity_reported = true;
                        events.push(Event {
                            t,
                            kind: EventKind::NegativeDensity { min_value: m },
                        });
                    }
                    let grad_linf = lp_norm(&derivative(&rho), f64::INFINITY);
                    // a step shortened to land on a target keeps the
                    // controller's natural step for the next attempt
                    let dt_next = if hits_target {
                        dt_natural
                    } else {
                        adapt_dt(step.err_est, dt_eff, cfg)
                    };
                    let outcome = StepOutcome {
                        accepted: true,
                        t_new: t,
                        dt_used: dt_eff,
                        err_est: step.err_est,
                        dt_next,
                    };
                    on_step(&StepInfo {
                        rho: &rho,
                        outcome,
                        grad_linf,
                    });
                    if grad_linf > opts.blowup_grad_threshold {
                        events.push(Event {
                            t,
                            kind: EventKind::BlowupThresholdCrossed { grad_linf },
                        });
                        return IntegrationResult {
                            rho,
                            t,
                            reason: StopReason::BlowupThreshold,
                            events,
                            accepted_steps: accepted,
                            rejected_steps: rejected,
                            min_density,
                        };
                    }
                    dt_natural = dt_next;
                } else {
                    rejected += 1;
                    if dt_eff <= cfg.dt_min * (1.0 + 1e-12) {
                        events.push(Event {
                            t,
                            kind: EventKind::DtUnderflow { dt: dt_eff },
                        });
                        return IntegrationResult {
                            rho,
                            t,
                            reason: StopReason::DtUnderflow,
                            events,
                            accepted_steps: accepted,
                            rejected_steps: rejected,
                            min_density,
                        };
                    }
                    dt_natural = adapt_dt(step.err_est, dt_eff, cfg);
                }
            }
            Err(e) => {
                // a failed stage is retried with a smaller step until dt_min
                rejected += 1;
                if dt_eff <= cfg.dt_min * (1.0 + 1e-12) {
                    events.push(Event {
                        t,
                        kind: EventKind::NonFinite {
                            detail: e.to_string(),
                        },
                    });
                    return IntegrationResult {
                        rho,
                        t,
                        reason: StopReason::NonFinite,
                        events,
                        accepted_steps: accepted,
                        rejected_steps: rejected,
                        min_density,
                    };
                }
                dt_natural = (dt_eff / 4.0).max(cfg.dt_min);
            }
        }
    }
}

/// [`integrate_with`] wired to a [`RhsEvaluator`].
pub fn integrate(
    eval: &RhsEvaluator,
    rho0: &Field,
    t_end: f64,
    cfg: &RkfConfig,
    opts: &IntegrateOptions,
    on_step: impl FnMut(&StepInfo<'_>),
) -> IntegrationResult {
    integrate_with(
        |rho, _t| eval.rhs(rho).map(|o| o.deriv),
        rho0,
        t_end,
        cfg,
        opts,
        on_step,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use approx::assert_relative_eq;

    fn g(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn decay_rhs(rho: &Field, _t: f64) -> Result<Field, FluxError> {
        Field::new(rho.grid(), rho.values().iter().map(|v| -v).collect())
            .map_err(|_| FluxError::NonFinite)
    }

    #[test]
    fn single_step_matches_exponential() {
        let cfg = RkfConfig::default();
        let rho = Field::constant(g(16), 1.0);
        let step = rkf45_step(&mut decay_rhs, &rho, 0.0, 0.1, &cfg).unwrap();
        let want = (-0.1f64).exp();
        for v in step.rho5.values() {
            assert!((v - want).abs() <= 1e-8, "rho5 {} vs {}", v, want);
        }
    }

    #[test]
    fn zero_rhs_returns_identity_with_zero_error() {
        let cfg = RkfConfig::default();
        let rho = Field::from_fn(g(16), |x| 1.0 + x.sin());
        let mut f = |r: &Field, _t: f64| {
            Field::new(r.grid(), vec![0.0; 16]).map_err(|_| FluxError::NonFinite)
        };
        let step = rkf45_step(&mut f, &rho, 0.0, 0.5, &cfg).unwrap();
        assert_eq!(step.rho4.values(), rho.values());
        assert_eq!(step.rho5.values(), rho.values());
        assert_eq!(step.err_est, 0.0);
    }

    #[test]
    fn exponential_error_decreases_with_tolerance() {
        let mut errs = Vec::new();
        for tol in [1e-6, 1e-8, 1e-10] {
            let cfg = RkfConfig {
                abs_tol: tol,
                rel_tol: tol,
                dt_init: 1e-3,
                dt_max: 0.5,
                ..RkfConfig::default()
            };
            let rho0 = Field::constant(g(16), 1.0);
            let res = integrate_with(
                decay_rhs,
                &rho0,
                1.0,
                &cfg,
                &IntegrateOptions::default(),
                |_| {},
            );
            assert_eq!(res.reason, StopReason::Completed);
            let want = (-1.0f64).exp();
            errs.push((res.rho.values()[0] - want).abs());
        }
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "errs {errs:?}");
    }

    #[test]
    fn adapt_dt_clamps() {
        let cfg = RkfConfig {
            dt_min: 1e-12,
            dt_max: 1.0,
            ..RkfConfig::default()
        };
        assert_relative_eq!(adapt_dt(1.0, 0.1, &cfg), 0.09);
        assert_relative_eq!(adapt_dt(1e5, 0.1, &cfg), 0.025); // growth clamp dt/4
        let cfg2 = RkfConfig {
            dt_max: 0.01,
            ..cfg
        };
        assert_relative_eq!(adapt_dt(1e-10, 0.01, &cfg2), 0.01); // pinned at dt_max
    }

    #[test]
    fn steady_state_preserved_bitwise_with_zero_rhs() {
        let rho0 = Field::from_fn(g(32), |x| 2.0 + (3.0 * x).cos());
        let cfg = RkfConfig::default();
        let res = integrate_with(
            |r: &Field, _t| {
                Field::new(r.grid(), vec![0.0; r.grid().n()]).map_err(|_| FluxError::NonFinite)
            },
            &rho0,
            0.05,
            &cfg,
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::Completed);
        assert_eq!(res.rho.values(), rho0.values());
    }

    #[test]
    fn accepted_steps_always_satisfy_error_contract() {
        let rho0 = Field::constant(g(16), 1.0);
        let cfg = RkfConfig::default();
        let mut ok = true;
        integrate_with(
            decay_rhs,
            &rho0,
            0.5,
            &cfg,
            &IntegrateOptions::default(),
            |info| {
                ok &= info.outcome.accepted && info.outcome.err_est <= 1.0;
            },
        );
        assert!(ok);
    }

    #[test]
    fn alignment_times_are_hit_exactly() {
        let rho0 = Field::constant(g(16), 1.0);
        let cfg = RkfConfig {
            dt_max: 0.5,
            ..RkfConfig::default()
        };
        let aligns = vec![0.013, 0.05, 0.20];
        let mut seen = Vec::new();
        let res = integrate_with(
            decay_rhs,
            &rho0,
            0.25,
            &cfg,
            &IntegrateOptions {
                blowup_grad_threshold: 1e6,
                align_times: aligns.clone(),
            },
            |info| seen.push(info.outcome.t_new),
        );
        assert_eq!(res.reason, StopReason::Completed);
        for a in aligns {
            assert!(seen.contains(&a), "alignment time {a} missed: {seen:?}");
        }
        assert_relative_eq!(res.t, 0.25, epsilon = 0.0);
    }

    #[test]
    fn blowup_threshold_stops_growth() {
        // rho' = rho^2 nodewise on 1 + 0.5 cos x blows up; gradient grows
        let rho0 = Field::from_fn(g(64), |x| 1.0 + 0.5 * x.cos());
        let cfg = RkfConfig {
            dt_max: 1e-2,
            ..RkfConfig::default()
        };
        let res = integrate_with(
            |r: &Field, _t| {
                Field::new(r.grid(), r.values().iter().map(|v| v * v).collect())
                    .map_err(|_| FluxError::NonFinite)
            },
            &rho0,
            5.0,
            &cfg,
            &IntegrateOptions {
                blowup_grad_threshold: 50.0,
                align_times: vec![],
            },
            |_| {},
        );
        assert_eq!(res.reason, StopReason::BlowupThreshold);
        assert!(res
            .events
            .iter()
            .any(|e| matches!(e.kind, EventKind::BlowupThresholdCrossed { .. })));
    }

    #[test]
    fn strong_constant_diffusion_damps_perturbations() {
        use crate::beta::BetaModel;
        use crate::flux::RhsEvaluator;
        let grid = g(128);
        let e = RhsEvaluator::spectral(grid, BetaModel::Constant(10.0));
        let rho0 = Field::from_fn(grid, |x| 1.0 + 0.01 * x.cos());
        let res = integrate(
            &e,
            &rho0,
            0.1,
            &RkfConfig::default(),
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::Completed);
        let dev = |f: &Field| {
            f.values()
                .iter()
                .fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
        };
        assert!(
            dev(&res.rho) < dev(&rho0),
            "dissipation should shrink the bump"
        );
    }

    #[test]
    fn unresolvable_error_ends_in_dt_underflow() {
        // rhs so large the embedded error never passes at any legal step
        let rho0 = Field::constant(g(16), 1.0);
        let cfg = RkfConfig {
            dt_min: 1e-6,
            ..RkfConfig::default()
        };
        let res = integrate_with(
            |r: &Field, _t| {
                Field::new(r.grid(), r.values().iter().map(|v| 1e30 * v).collect())
                    .map_err(|_| FluxError::NonFinite)
            },
            &rho0,
            1.0,
            &cfg,
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::DtUnderflow);
        assert!(res
            .events
            .iter()
            .any(|e| matches!(e.kind, EventKind::DtUnderflow { .. })));
    }

    #[test]
    fn non_finite_rhs_is_reported_after_retries() {
        let rho0 = Field::constant(g(16), 1.0);
        let cfg = RkfConfig {
            dt_min: 1e-6,
            ..RkfConfig::default()
        };
        let res = integrate_with(
            |_r: &Field, _t| Err(FluxError::NonFinite),
            &rho0,
            1.0,
            &cfg,
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::NonFinite);
        assert!(res
            .events
            .iter()
            .any(|e| matches!(e.kind, EventKind::NonFinite { .. })));
    }

    #[test]
    fn step_budget_is_enforced() {
        let rho0 = Field::constant(g(16), 1.0);
        let cfg = RkfConfig {
            max_steps: 5,
            dt_max: 1e-3,
            ..RkfConfig::default()
        };
        let res = integrate_with(
            decay_rhs,
            &rho0,
            1.0,
            &cfg,
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::MaxSteps);
    }

    #[test]
    fn first_negative_state_raises_one_event() {
        // constant negative drift pushes the state through zero
        let rho0 = Field::constant(g(16), 0.05);
        let cfg = RkfConfig {
            dt_max: 1e-2,
            ..RkfConfig::default()
        };
        let res = integrate_with(
            |r: &Field, _t| {
                Field::new(r.grid(), vec![-1.0; r.grid().n()]).map_err(|_| FluxError::NonFinite)
            },
            &rho0,
            0.2,
            &cfg,
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::Completed);
        let negatives: Vec<_> = res
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::NegativeDensity { .. }))
            .collect();
        assert_eq!(negatives.len(), 1, "exactly one negativity event");
        assert!(res.min_density < 0.0);
    }

    #[test]
    fn t_end_zero_completes_immediately() {
        let rho0 = Field::constant(g(16), 1.0);
        let res = integrate_with(
            decay_rhs,
            &rho0,
            0.0,
            &RkfConfig::default(),
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::Completed);
        assert_eq!(res.accepted_steps, 0);
        assert_eq!(res.rho.values(), rho0.values());
    }

    #[test]
    fn mass_is_conserved_along_a_pde_trajectory() {
        use crate::beta::BetaModel;
        use crate::flux::RhsEvaluator;
        let grid = g(128);
        let e = RhsEvaluator::spectral(grid, BetaModel::LogSmooth);
        let rho0 = Field::from_fn(grid, |x| 1.0 + 0.5 * x.cos());
        let m0 = rho0.mean();
        let res = integrate(
            &e,
            &rho0,
            0.05,
            &RkfConfig::default(),
            &IntegrateOptions::default(),
            |_| {},
        );
        assert_eq!(res.reason, StopReason::Completed);
        assert!((res.rho.mean() - m0).abs() <= 1e-10);
    }
}
