//! Projection-algorithm parameter estimator with a deadzone and projection
//! onto the admissible box `S`.
//!
//! One update, given the lagged regressor `phi = phi(t-d+1)` and `ybar(t+1)`:
//!
//! ```text
//! e(t+1)      = ybar(t+1) - phi' theta_hat(t)
//! rho(t)      = 1 if |e| < (2 ||S|| + delta) ||phi||, else 0
//! theta_check = theta_hat(t) + rho * phi * e / ||phi||^2
//! theta_hat(t+1) = Proj_S(theta_check)
//! ```
//!
//! The denominator is the bare `||phi||^2`; a zero regressor turns the
//! update off through `rho`.

use crate::error::{MracError, Result};
use crate::system::{box_norm, ParamBox};

/// Euclidean norm, scaled so that tiny regressors neither underflow to zero
/// nor lose precision.
pub fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MracError::DimensionMismatch { context, expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    theta_hat: Vec<f64>,
    param_box: ParamBox,
    delta: f64,
    box_norm: f64,
}

/// Everything one update produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `e(t+1)`
    pub e_next: f64,
    pub rho: u8,
    /// `nu(t) = rho * phi * e / ||phi||^2`
    pub nu: Vec<f64>,
    pub theta_check: Vec<f64>,
    /// `||phi(t-d+1)||`
    pub norm_phi_lag: f64,
}

impl EstimatorState {
    /// `delta` may be `f64::INFINITY`.
    pub fn new(theta0: Vec<f64>, param_box: ParamBox, delta: f64) -> Result<Self> {
        check_dims("initial estimate", param_box.dim(), theta0.len())?;
        if !(delta > 0.0) {
            return Err(MracError::config("estimator.delta", format!("must be positive, got {delta}")));
        }
        if !param_box.contains(&theta0, 0.0) {
            return Err(MracError::config("sim.theta0", "initial estimate lies outside the box S"));
        }
        let box_norm = box_norm(&param_box);
        Ok(Self {
            theta_hat: theta0,
            param_box,
            delta,
            box_norm,
        })
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn param_box(&self) -> &ParamBox {
        &self.param_box
    }

    pub fn box_norm(&self) -> f64 {
        self.box_norm
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `e(t+1) = ybar(t+1) - phi(t-d+1)' theta_hat(t)`
pub fn prediction_error(ybar_next: f64, phi_lag: &[f64], theta_hat: &[f64]) -> Result<f64> {
    check_dims("prediction error", theta_hat.len(), phi_lag.len())?;
    Ok(ybar_next - dot(phi_lag, theta_hat))
}

/// `rho(t)`; with `delta = inf` it is 1 exactly when the regressor is nonzero.
pub fn deadzone_flag(e_next: f64, phi_lag: &[f64], box_norm: f64, delta: f64) -> u8 {
    let np = norm(phi_lag);
    if np == 0.0 {
        return 0;
    }
    if delta.is_infinite() {
        return 1;
    }
    u8::from(e_next.abs() < (2.0 * box_norm + delta) * np)
}

pub fn project_box(x: &[f64], b: &ParamBox) -> Result<Vec<f64>> {
    check_dims("projection", b.dim(), x.len())?;
    Ok(x
        .iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(&v, (&l, &h))| v.clamp(l, h))
        .collect())
}

pub fn estimator_update(state: &mut EstimatorState, phi_lag: &[f64], ybar_next: f64) -> Result<StepRecord> {
    let e_next = prediction_error(ybar_next, phi_lag, &state.theta_hat)?;
    let rho = deadzone_flag(e_next, phi_lag, state.box_norm, state.delta);
    let np = norm(phi_lag);

    let nu: Vec<f64> = if rho == 1 {
        // (phi / |phi|) * (e / |phi|) keeps |phi|^2 from underflowing
        let gain = e_next / np;
        phi_lag.iter().map(|p| (p / np) * gain).collect()
    } else {
        vec![0.0; phi_lag.len()]
    };
    let theta_check: Vec<f64> = if rho == 1 {
        state.theta_hat.iter().zip(&nu).map(|(t, v)| t + v).collect()
    } else {
        state.theta_hat.clone()
    };
    state.theta_hat = project_box(&theta_check, &state.param_box)?;

    Ok(StepRecord {
        e_next,
        rho,
        nu,
        theta_check,
        norm_phi_lag: np,
    })
}
