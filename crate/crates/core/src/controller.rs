//! Certainty-equivalence control law and the signal bookkeeping it needs.
//!
//! At each `t` the controller picks `u(t)` so that
//! `phi(t)' theta_hat(t) = ybar*(t+d) = sum_i h_i r(t-i)`.

use std::collections::VecDeque;

use crate::error::{MracError, Result};
use crate::plant_sim::{signal_eval, PlantState, SignalSpec};
use crate::poly::PolyZ;
use crate::system::{Dims, ReferenceModel};

fn push_front_fixed(buf: &mut VecDeque<f64>, v: f64, depth: usize) {
    buf.push_front(v);
    buf.truncate(depth);
}

/// Output and input histories deep enough to materialize
/// `phi(t), phi(t-1), ..., phi(t-d+1)`.
///
/// `phi(t) = (y(t), ..., y(t-n+1), u(t), ..., u(t-m-d+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    dims: Dims,
    y: VecDeque<f64>,
    u: VecDeque<f64>,
    y_depth: usize,
    u_depth: usize,
}

impl Regressor {
    fn new(dims: Dims, reference_order: usize, y_init: &[f64], u_init: &[f64]) -> Self {
        let y_depth = (dims.n + dims.d - 1).max(reference_order + 1).max(1);
        let u_depth = dims.m + 2 * dims.d - 1;
        let mut y: VecDeque<f64> = y_init.iter().copied().collect();
        y.resize(y_depth, 0.0);
        let mut u: VecDeque<f64> = u_init.iter().copied().collect();
        u.resize(u_depth - 1, 0.0);
        Self {
            dims,
            y,
            u,
            y_depth,
            u_depth,
        }
    }

    /// `y(t), y(t-1), ...`
    pub fn outputs(&self) -> &VecDeque<f64> {
        &self.y
    }

    /// Most recent input first.
    pub fn inputs(&self) -> &VecDeque<f64> {
        &self.u
    }

    /// `phi(t - lag)`; valid once `u(t)` has been pushed and `lag < d`.
    pub fn phi(&self, lag: usize) -> Vec<f64> {
        let Dims { n, m, d } = self.dims;
        self.y
            .range(lag..lag + n)
            .chain(self.u.range(lag..lag + m + d))
            .copied()
            .collect()
    }

    pub fn push_input(&mut self, u: f64) {
        push_front_fixed(&mut self.u, u, self.u_depth);
    }

    pub fn push_output(&mut self, y: f64) {
        push_front_fixed(&mut self.y, y, self.y_depth);
    }
}

/// `ybar(t) = y(t) + sum_{j=1}^{n'} l_j y(t-j)` over a most-recent-first
/// history.
pub fn ybar<'a>(y_history: impl IntoIterator<Item = &'a f64>, l: &PolyZ) -> Result<f64> {
    let mut acc = 0.0;
    let mut have = 0;
    for (&c, &y) in l.coeffs().iter().zip(y_history) {
        acc += c * y;
        have += 1;
    }
    if have < l.coeffs().len() {
        return Err(MracError::InsufficientHistory {
            need: l.coeffs().len(),
            have,
        });
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    dims: Dims,
    reference: ReferenceModel,
    regressor: Regressor,
    /// `r(t), r(t-1), ...` back to `r(t - d - deg H)`
    r_hist: VecDeque<f64>,
    /// `y*(t), y*(t-1), ...` back to `y*(t - n')`
    y_star_hist: VecDeque<f64>,
    beta0_sign: f64,
    /// `(t, ybar*(t+d))` from the latest call to `reference_outputs`
    target: Option<(i64, f64)>,
}

/// Builds the controller and plant histories from
/// `x0 = (y(t0), ..., y(t0-n-d+2), u(t0-1), ..., u(t0-m-2d+2))`.
///
/// `u(t0)` is not part of `x0`; the control law produces it.
/// Earlier outputs, references and model outputs start at zero.
pub fn init_from_x0(
    x0: &[f64],
    dims: Dims,
    reference: &ReferenceModel,
    beta0_sign: f64,
) -> Result<(ControllerState, PlantState)> {
    if x0.len() != dims.x0_len() {
        return Err(MracError::DimensionMismatch {
            context: "initial condition x0",
            expected: dims.x0_len(),
            got: x0.len(),
        });
    }
    if reference.d != dims.d {
        return Err(MracError::InvalidReference(format!(
            "reference delay {} differs from plant delay {}",
            reference.d, dims.d
        )));
    }
    let (y_part, u_part) = x0.split_at(dims.n + dims.d - 1);
    let plant = PlantState::new(dims, y_part, u_part)?;

    let n_ref = reference.order();
    let r_depth = dims.d + reference.h.degree() + 1;
    let controller = ControllerState {
        dims,
        reference: reference.clone(),
        regressor: Regressor::new(dims, n_ref, y_part, u_part),
        r_hist: VecDeque::from(vec![0.0; r_depth]),
        y_star_hist: VecDeque::from(vec![0.0; n_ref + 1]),
        beta0_sign: beta0_sign.signum(),
        target: None,
    };
    Ok((controller, plant))
}

impl ControllerState {
    pub fn regressor(&self) -> &Regressor {
        &self.regressor
    }

    pub fn reference(&self) -> &ReferenceModel {
        &self.reference
    }

    /// `y*(t)`, valid after `reference_outputs(t)`.
    pub fn y_star(&self) -> f64 {
        self.y_star_hist[0]
    }

    /// `ybar(t)`
    pub fn ybar_now(&self) -> f64 {
        ybar(&self.regressor.y, &self.reference.l).expect("history covers n'")
    }

    /// `ybar(t+1)` for a candidate `y(t+1)`, before it is pushed.
    pub fn ybar_next(&self, y_next: f64) -> f64 {
        let l = self.reference.l.coeffs();
        y_next + l[1..].iter().zip(&self.regressor.y).map(|(c, y)| c * y).sum::<f64>()
    }

    /// `ybar*(t) = sum_i h_i r(t-d-i)`, valid after `reference_outputs(t)`.
    pub fn ybar_star_now(&self) -> f64 {
        let d = self.dims.d;
        self.reference
            .h
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, h)| h * self.r_hist[d + i])
            .sum()
    }

    pub fn push_output(&mut self, y: f64) {
        self.regressor.push_output(y);
    }

    /// Advances the reference model to `t`; returns `(y*(t), ybar*(t+d))`.
    pub fn reference_outputs(&mut self, t: i64, r: &SignalSpec) -> (f64, f64) {
        let depth = self.r_hist.len();
        push_front_fixed(&mut self.r_hist, signal_eval(r, t), depth);

        let h = self.reference.h.coeffs();
        let target: f64 = h.iter().zip(&self.r_hist).map(|(h, r)| h * r).sum();

        let l = self.reference.l.coeffs();
        let feedback: f64 = l[1..].iter().zip(&self.y_star_hist).map(|(c, y)| c * y).sum();
        let y_star = -feedback + self.ybar_star_now();
        let depth = self.y_star_hist.len();
        push_front_fixed(&mut self.y_star_hist, y_star, depth);

        self.target = Some((t, target));
        (y_star, target)
    }

    /// Solves `phi(t)' theta_hat = ybar*(t+d)` for `u(t)` and records it.
    pub fn control_input(&mut self, theta_hat: &[f64], t: i64) -> Result<f64> {
        let Dims { n, m, d } = self.dims;
        if theta_hat.len() != n + m + d {
            return Err(MracError::DimensionMismatch {
                context: "control law estimate",
                expected: n + m + d,
                got: theta_hat.len(),
            });
        }
        let target = match self.target {
            Some((tt, v)) if tt == t => v,
            _ => {
                return Err(MracError::CorruptedState(format!(
                    "reference not advanced to t = {t} before the control law"
                )))
            }
        };
        let (alpha, beta) = theta_hat.split_at(n);
        let beta0 = beta[0];
        if beta0 == 0.0 || beta0.signum() != self.beta0_sign {
            return Err(MracError::CorruptedState(format!(
                "estimate of beta_0 = {beta0} has the wrong sign"
            )));
        }
        let y_part: f64 = alpha.iter().zip(&self.regressor.y).map(|(a, y)| a * y).sum();
        let u_part: f64 = beta[1..].iter().zip(&self.regressor.u).map(|(b, u)| b * u).sum();
        let u = (target - y_part - u_part) / beta0;
        self.regressor.push_input(u);
        Ok(u)
    }
}
