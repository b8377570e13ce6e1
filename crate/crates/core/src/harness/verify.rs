//! Pathwise checks on a recorded trace.
//!
//! Every margin here is recomputed from the trace, `x0`, and the ground
//! truth (`theta*`, `wbar`); nothing is taken from simulator internals.

use serde::{Deserialize, Serialize};

use super::{GroundTruth, Trace};
use crate::error::{MracError, Result};
use crate::estimator::{dot, norm};

/// the estimator inequalities must hold with margin at least `-ESTIMATOR_TOL`.
pub const ESTIMATOR_TOL: f64 = 1e-9;
/// Per-step residual allowed on the error identities.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Closure `phi(t)' theta_hat(t) = ybar*(t+d)`, relative to the size of the
/// terms in the dot product.
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest `bound - observed` over the checked steps, or the largest
    /// residual for identities.
    pub worst: f64,
    /// Time of the worst value, when any step was checked.
    pub worst_t: Option<i64>,
    pub steps_checked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn margin(name: &str, margins: impl IntoIterator<Item = (i64, f64)>, tol: f64) -> Self {
        let mut worst = f64::INFINITY;
        let mut worst_t = None;
        let mut count = 0;
        let mut nan = false;
        for (t, m) in margins {
            count += 1;
            if m.is_nan() {
                nan = true;
                worst_t = Some(t);
            } else if m < worst {
                worst = m;
                worst_t = Some(t);
            }
        }
        Self {
            name: name.into(),
            passed: !nan && worst >= -tol,
            worst,
            worst_t,
            steps_checked: count,
            note: None,
        }
    }

    fn residual(name: &str, residuals: impl IntoIterator<Item = (i64, f64)>, tol: f64) -> Self {
        let mut worst = 0.0f64;
        let mut worst_t = None;
        let mut count = 0;
        let mut nan = false;
        for (t, r) in residuals {
            count += 1;
            let r = r.abs();
            if r.is_nan() {
                nan = true;
                worst_t = Some(t);
            } else if r > worst || worst_t.is_none() {
                worst = r;
                worst_t = Some(t);
            }
        }
        Self {
            name: name.into(),
            passed: !nan && worst <= tol,
            worst,
            worst_t,
            steps_checked: count,
            note: None,
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            passed: true,
            worst: 0.0,
            worst_t: None,
            steps_checked: 0,
            note: Some(format!("skipped: {why}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingEnergy {
    pub total: f64,
    /// Energy after `t = 1500`, or after the midpoint for shorter traces.
    pub tail: f64,
    pub tail_from: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<TrackingEnergy>,
    pub sup_norm_phi: f64,
    pub sup_abs_eps: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            let at = c.worst_t.map_or(String::new(), |t| format!(" at t = {t}"));
            let note = c.note.as_deref().map_or(String::new(), |n| format!(" ({n})"));
            out.push_str(&format!(
                "{status} {:<28} worst {:>12.4e}{at}, {} steps{note}\n",
                c.name, c.worst, c.steps_checked
            ));
        }
        if let (Some(l), Some(c)) = (self.lambda, self.decay_c) {
            out.push_str(&format!("decay fit: c({l}) = {c:.6e}\n"));
        }
        if let Some(e) = &self.energy {
            out.push_str(&format!(
                "tracking energy: total {:.6e}, tail after t = {} {:.3e}\n",
                e.total, e.tail_from, e.tail
            ));
        }
        out.push_str(&format!(
            "sup ||phi|| = {:.6e}, sup |eps| = {:.6e}\n",
            self.sup_norm_phi, self.sup_abs_eps
        ));
        out
    }
}

fn theta_tilde_sq(theta_hat: &[f64], theta_star: &[f64]) -> f64 {
    theta_hat.iter().zip(theta_star).map(|(a, b)| (a - b).powi(2)).sum()
}

fn truth_matches(trace: &Trace, truth: &GroundTruth) -> Result<()> {
    let d = trace.meta.dims.d as i64;
    if truth.t_start != trace.t0() - d + 1 || truth.wbar.len() as i64 != trace.t_end() - truth.t_start + 1 {
        return Err(MracError::Trace("ground truth does not cover the trace horizon".into()));
    }
    Ok(())
}

/// The step bound and energy inequality of the estimator.
///
/// First: `||theta_hat(t+1) - theta_hat(t)|| <= rho(t) |e(t+1)| / ||phi(t-d+1)||`.
/// Second, per step and from `t0`:
/// `||theta~(t)||^2 <= ||theta~(tau)||^2 + sum_j rho(j) (-e(j+1)^2/2 + 2 wbar(j-d+1)^2) / ||phi(j-d+1)||^2`.
/// The second needs a constant `theta*` and is skipped otherwise.
pub fn check_estimator_bounds(trace: &Trace, truth: &GroundTruth) -> Result<VerificationReport> {
    truth_matches(trace, truth)?;
    let d = trace.meta.dims.d as i64;
    let (t0, t_end) = (trace.t0(), trace.t_end());

    let first = CheckResult::margin(
        "step_bound",
        (t0..t_end).map(|t| {
            let row = trace.row(t);
            let step = norm(
                &trace
                    .row(t + 1)
                    .theta_hat
                    .iter()
                    .zip(&row.theta_hat)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            let bound = if row.rho == 0 {
                0.0
            } else {
                row.e.abs() / norm(&trace.phi(t - d + 1))
            };
            (t, bound - step)
        }),
        ESTIMATOR_TOL,
    );

    let mut report = VerificationReport {
        checks: vec![first],
        ..Default::default()
    };

    if !truth.constant {
        for name in ["energy_step", "energy_cumulative", "theta_tilde_monotone"] {
            report.checks.push(CheckResult::skipped(name, "time-varying plant"));
        }
        return Ok(report);
    }

    let star = truth.theta_star_at(t0);
    let mut step_margins = Vec::new();
    let mut cum_margins = Vec::new();
    let mut mono_margins = Vec::new();
    let v0 = theta_tilde_sq(&trace.row(t0).theta_hat, star);
    let mut budget = 0.0;
    for t in t0..t_end {
        let row = trace.row(t);
        let wbar = truth.wbar_at(t - d + 1);
        let increment = if row.rho == 1 {
            let np = norm(&trace.phi(t - d + 1));
            let (e_s, w_s) = (row.e / np, wbar / np);
            -0.5 * e_s * e_s + 2.0 * w_s * w_s
        } else {
            0.0
        };
        let v_prev = theta_tilde_sq(&row.theta_hat, star);
        let v_next = theta_tilde_sq(&trace.row(t + 1).theta_hat, star);
        step_margins.push((t + 1, v_prev + increment - v_next));
        budget += increment;
        cum_margins.push((t + 1, v0 + budget - v_next));
        if wbar == 0.0 {
            mono_margins.push((t + 1, v_prev.sqrt() - v_next.sqrt()));
        }
    }
    report.checks.push(CheckResult::margin("energy_step", step_margins, ESTIMATOR_TOL));
    report.checks.push(CheckResult::margin("energy_cumulative", cum_margins, ESTIMATOR_TOL));
    let mut mono = CheckResult::margin("theta_tilde_monotone", mono_margins, ESTIMATOR_TOL);
    mono.note = Some("steps with wbar(t-d+1) = 0".into());
    report.checks.push(mono);
    Ok(report)
}

/// Error identities:
///
/// ```text
/// pred_error:  e(t)      = -phi(t-d)' theta~(t-1) + wbar(t-d),         t >= t0 + 1
/// aux_error:   eps_bar(t) = -phi(t-d)' theta~(t-d) + wbar(t-d),        t >= t0 + d
/// error_link:  eps_bar(t) = e(t) + phi(t-d)' [theta_hat(t-1) - theta_hat(t-d)], t >= t0 + d
/// ```
///
/// together with the recorded `ybar - ybar*` and the loop closure. Identities
/// involving `theta*` are skipped for time-varying plants.
pub fn check_identities(trace: &Trace, truth: &GroundTruth) -> Result<VerificationReport> {
    truth_matches(trace, truth)?;
    let d = trace.meta.dims.d as i64;
    let (t0, t_end) = (trace.t0(), trace.t_end());
    let e_at = |t: i64| trace.row(t - 1).e;
    let theta_at = |t: i64| &trace.row(t).theta_hat;

    let mut report = VerificationReport::default();
    report.checks.push(CheckResult::residual(
        "error_link",
        (t0 + d..=t_end).map(|t| {
            let phi = trace.phi(t - d);
            let diff: Vec<f64> = theta_at(t - 1).iter().zip(theta_at(t - d)).map(|(a, b)| a - b).collect();
            (t, trace.row(t).eps_bar - e_at(t) - dot(&phi, &diff))
        }),
        IDENTITY_TOL,
    ));

    // eps_bar as recorded against ybar(t) - ybar*(t) rebuilt from y and r
    report.checks.push(CheckResult::residual(
        "eps_bar_consistency",
        (t0..=t_end).map(|t| (t, trace.row(t).eps_bar - (trace.ybar(t) - trace.ybar_star_ahead(t - d)))),
        IDENTITY_TOL,
    ));

    let mut closure = CheckResult::margin(
        "control_closure",
        (t0..=t_end).map(|t| {
            let phi = trace.phi(t);
            let theta = theta_at(t);
            let scale = 1.0 + phi.iter().zip(theta).map(|(p, q)| (p * q).abs()).sum::<f64>();
            let r = (dot(&phi, theta) - trace.ybar_star_ahead(t)).abs();
            (t, CLOSURE_TOL * scale - r)
        }),
        0.0,
    );
    closure.note = Some("relative to sum |phi_i theta_i|".into());
    report.checks.push(closure);

    if !truth.constant {
        for name in ["pred_error", "aux_error"] {
            report.checks.push(CheckResult::skipped(name, "time-varying plant"));
        }
        return Ok(report);
    }

    let star = truth.theta_star_at(t0);
    let tilde = |t: i64| -> Vec<f64> { theta_at(t).iter().zip(star).map(|(a, b)| a - b).collect() };
    report.checks.push(CheckResult::residual(
        "pred_error",
        (t0 + 1..=t_end).map(|t| {
            let phi = trace.phi(t - d);
            (t, e_at(t) - (-dot(&phi, &tilde(t - 1)) + truth.wbar_at(t - d)))
        }),
        IDENTITY_TOL,
    ));
    report.checks.push(CheckResult::residual(
        "aux_error",
        (t0 + d..=t_end).map(|t| {
            let phi = trace.phi(t - d);
            (t, trace.row(t).eps_bar - (-dot(&phi, &tilde(t - d)) + truth.wbar_at(t - d)))
        }),
        IDENTITY_TOL,
    ));
    Ok(report)
}

/// Residual of the predictor form `ybar(t+d) = phi(t)' theta*(t) + wbar(t)`
/// over `t0 <= t <= t_end - d`, for constant or time-varying plants alike
/// when `theta*` is constant over each `[t, t+d]` window.
pub fn predictor_residuals(trace: &Trace, truth: &GroundTruth) -> Result<Vec<(i64, f64)>> {
    truth_matches(trace, truth)?;
    let d = trace.meta.dims.d as i64;
    Ok((trace.t0()..=trace.t_end() - d)
        .map(|t| {
            let r = trace.ybar(t + d) - dot(&trace.phi(t), truth.theta_star_at(t)) - truth.wbar_at(t);
            (t, r)
        })
        .collect())
}

/// Smallest `c` with `||phi(t)|| <= c D(t)` on the trace, where
/// `D(t) = lambda^(t-t0) ||x0|| + sum_{j<=t} lambda^(t-j) (|r(j)| + |w(j)|)`.
pub fn fit_decay_bound(trace: &Trace, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(MracError::config("lambda", format!("must lie in (0, 1), got {lambda}")));
    }
    let mut envelope = norm(&trace.meta.x0);
    let mut c = 0.0f64;
    for (k, row) in trace.rows.iter().enumerate() {
        if k > 0 {
            envelope *= lambda;
        }
        envelope += row.r.abs() + row.w.abs();
        let np = norm(&trace.phi(row.t));
        if np > 0.0 {
            if envelope == 0.0 {
                return Err(MracError::Trace(format!(
                    "decay envelope vanishes at t = {} while ||phi|| > 0",
                    row.t
                )));
            }
            c = c.max(np / envelope);
        }
    }
    Ok(c)
}

/// `sum_{t >= t0+d} eps(t)^2` and its running partial sums.
pub fn tracking_energy(trace: &Trace) -> (f64, Vec<f64>) {
    let start = trace.t0() + trace.meta.dims.d as i64;
    let mut acc = 0.0;
    let partial: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.t >= start)
        .map(|r| {
            acc += r.eps * r.eps;
            acc
        })
        .collect();
    (acc, partial)
}

/// Energy with its tail after `t = 1500` (or after the trace midpoint when
/// the trace is shorter).
pub fn energy_summary(trace: &Trace) -> TrackingEnergy {
    let (total, partial) = tracking_energy(trace);
    let start = trace.t0() + trace.meta.dims.d as i64;
    let tail_from = if trace.t_end() > 1500 {
        1500
    } else {
        (start + trace.t_end()) / 2
    };
    let idx = (tail_from - start).max(0) as usize;
    let head = partial.get(idx).copied().unwrap_or(total);
    TrackingEnergy {
        total,
        tail: total - head,
        tail_from,
    }
}

/// Runs every check; adds the decay fit when `lambda` is given.
pub fn verify_trace(trace: &Trace, truth: &GroundTruth, lambda: Option<f64>) -> Result<VerificationReport> {
    let mut report = check_estimator_bounds(trace, truth)?;
    report.extend(check_identities(trace, truth)?);
    let mut finite = CheckResult::skipped("finite", "");
    finite.note = None;
    finite.passed = trace.all_finite();
    finite.steps_checked = trace.rows.len();
    report.checks.push(finite);
    if let Some(l) = lambda {
        report.lambda = Some(l);
        report.decay_c = Some(fit_decay_bound(trace, l)?);
    }
    report.energy = Some(energy_summary(trace));
    report.sup_norm_phi = trace.rows.iter().map(|r| r.norm_phi).fold(0.0, f64::max);
    report.sup_abs_eps = trace.rows.iter().map(|r| r.eps.abs()).fold(0.0, f64::max);
    Ok(report)
}
