//! Closed-loop orchestration and ground truth for verification.

mod example;
mod output;
pub mod scenario;
mod trace;
mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::init_from_x0;
use crate::error::{MracError, Result};
use crate::estimator::{norm, estimator_update, EstimatorState};
use crate::plant_sim::{plant_step, signal_eval, CoefficientSchedule, SignalSpec};
use crate::poly::{max_root_modulus, predictor_split, schur_stable};
use crate::system::{spectral_floor, to_predictor_params, Dims, ParamBox, ReferenceModel};

pub use example::{worked_example_config, reproduce_example, summarize_example, ExampleSummary, RegimeRms};
pub use output::{
    default_lambda, plot_script, read_run, read_trace, read_truth, write_run, RunSummary, PLOT_FILE, SUMMARY_FILE,
    TRACE_FILE, TRUTH_FILE,
};
pub use trace::{Trace, TraceMeta, TraceRow};
pub use verify::{
    check_identities, check_estimator_bounds, energy_summary, fit_decay_bound, predictor_residuals, tracking_energy, verify_trace,
    CheckResult, TrackingEnergy, VerificationReport, CLOSURE_TOL, IDENTITY_TOL, ESTIMATOR_TOL,
};

/// Grid points per b-coordinate when sweeping the plant box for the
/// spectral floor.
pub const SPECTRAL_GRID: usize = 7;

/// Tolerance for `theta*(t)` lying in `S`.
const MEMBERSHIP_TOL: f64 = 1e-9;

pub const CONVENTIONS: &[&str] = &[
    "coefficients a_i(t), b_i(t) sampled at emission time t for y(t+1)",
    "disturbance w(t+1) enters y(t+1)",
    "square wave is +A on [kP, kP+P/2), -A on [kP+P/2, (k+1)P); t < 0 takes the t = 0 value",
    "r(t) = 0 and y*(t) = 0 before t0",
    "u(t0) is produced by the control law; x0 = (y(t0..t0-n-d+2), u(t0-1..t0-m-2d+2))",
    "row t holds theta_hat(t), rho(t) and e(t+1)",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schedule: CoefficientSchedule,
    pub reference: ReferenceModel,
    /// The convex set `S` the estimates are projected onto.
    pub param_box: ParamBox,
    /// Plant box `S_ab`, when known.
    pub s_ab: Option<ParamBox>,
    /// Deadzone margin, possibly infinite.
    pub delta: f64,
    pub t0: i64,
    /// Horizon `T`; the trace covers `t0..=t0+T`.
    pub steps: usize,
    pub x0: Vec<f64>,
    pub theta0: Vec<f64>,
    pub r: SignalSpec,
    pub w: SignalSpec,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn dims(&self) -> Dims {
        self.schedule.dims()
    }

    pub fn t_end(&self) -> i64 {
        self.t0 + self.steps as i64
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_config_file()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn beta0_sign(&self) -> f64 {
        self.param_box.lo[self.dims().beta0_index()].signum()
    }

    /// Predictor parameters `theta*(t)` of the plant in effect at `t`.
    pub fn theta_star(&self, t: i64) -> Result<Vec<f64>> {
        Ok(to_predictor_params(&self.schedule.at(t), &self.reference)?.to_vector())
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        let cfg_err = |path: &str, e: MracError| MracError::config(path, e.to_string());

        if dims.d == 0 {
            return Err(MracError::config("plant.d", "delay must be positive"));
        }
        if self.schedule.b.is_empty() {
            return Err(MracError::config("plant.b", "must hold at least b_0"));
        }
        self.reference
            .check_plant_order(dims.n)
            .map_err(|e| cfg_err("reference.L", e))?;
        let plant_path = if self.schedule.is_constant() { "plant.b" } else { "plant.schedule" };
        self.schedule
            .validate(self.t0 - dims.d as i64, self.t_end())
            .map_err(|e| cfg_err(plant_path, e))?;

        if self.param_box.dim() != dims.predictor_dim() {
            return Err(MracError::config(
                "estimator.box",
                format!(
                    "has dimension {} but n + m + d = {}",
                    self.param_box.dim(),
                    dims.predictor_dim()
                ),
            ));
        }
        self.param_box
            .check_sign_definite(dims.beta0_index())
            .map_err(|_| {
                MracError::config(
                    "estimator.box",
                    format!(
                        "beta_0 interval [{}, {}] contains 0",
                        self.param_box.lo[dims.beta0_index()],
                        self.param_box.hi[dims.beta0_index()]
                    ),
                )
            })?;

        if let Some(s_ab) = &self.s_ab {
            if s_ab.dim() != dims.plant_dim() {
                return Err(MracError::config(
                    "estimator.s_ab_box",
                    format!("has dimension {} but the plant has {}", s_ab.dim(), dims.plant_dim()),
                ));
            }
            s_ab.check_sign_definite(dims.n)
                .map_err(|_| MracError::config("estimator.s_ab_box", "b_0 interval contains 0"))?;
        }

        let times: Vec<i64> = if self.schedule.is_constant() {
            vec![self.t0]
        } else {
            (self.t0 - dims.d as i64..=self.t_end()).collect()
        };
        for &t in &times {
            let plant = self.schedule.at(t);
            if let Some(s_ab) = &self.s_ab {
                if !s_ab.contains(&plant.to_vector(), MEMBERSHIP_TOL) {
                    return Err(MracError::config(
                        "estimator.s_ab_box",
                        format!("plant parameters at t = {t} lie outside the plant box"),
                    ));
                }
            }
            let star = self.theta_star(t).map_err(|e| cfg_err("reference", e))?;
            if !self.param_box.contains(&star, MEMBERSHIP_TOL) {
                return Err(MracError::config(
                    "estimator.box",
                    format!("predictor parameters {star:?} at t = {t} lie outside S"),
                ));
            }
        }

        if !(self.delta > 0.0) {
            return Err(MracError::config("estimator.delta", "must be positive"));
        }
        if self.x0.len() != dims.x0_len() {
            return Err(MracError::config(
                "sim.x0",
                format!(
                    "expected (n + d - 1) + (m + 2d - 2) = {} values, got {}",
                    dims.x0_len(),
                    self.x0.len()
                ),
            ));
        }
        if !self.x0.iter().all(|v| v.is_finite()) {
            return Err(MracError::config("sim.x0", "values must be finite"));
        }
        if self.theta0.len() != dims.predictor_dim() || !self.param_box.contains(&self.theta0, 0.0) {
            return Err(MracError::config("sim.theta0", "initial estimate must lie in S"));
        }
        let min_steps = self.reference.order() + 2 * dims.d;
        if self.steps < min_steps {
            return Err(MracError::config(
                "sim.steps",
                format!("horizon must be at least n' + 2d = {min_steps}"),
            ));
        }
        self.r.validate().map_err(|m| MracError::config("signals.r", m))?;
        self.w.validate().map_err(|m| MracError::config("signals.w", m))?;
        Ok(())
    }

    /// Largest root modulus of `L` and `B`: over a sweep of the plant box
    /// when one is known, otherwise over the plant's own trajectory.
    pub fn spectral_floor(&self) -> Result<f64> {
        let dims = self.dims();
        if let Some(s_ab) = &self.s_ab {
            return spectral_floor(s_ab, dims, &self.reference, SPECTRAL_GRID);
        }
        let mut floor = max_root_modulus(&self.reference.l)?;
        let times: Vec<i64> = if self.schedule.is_constant() {
            vec![self.t0]
        } else {
            (self.t0..=self.t_end()).collect()
        };
        for t in times {
            let b = self.schedule.at(t).b_poly();
            if !schur_stable(&b)? {
                return Err(MracError::AssumptionViolated(format!("B(z^-1) at t = {t} is unstable")));
            }
            floor = floor.max(max_root_modulus(&b)?);
        }
        Ok(floor)
    }
}

/// Quantities only the simulator knows: `theta*(t)` and `wbar(t)` for
/// `t` in `[t0 - d + 1, t0 + T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub t_start: i64,
    pub constant: bool,
    pub wbar: Vec<f64>,
    pub theta_star: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// `wbar(t) = sum_{i<d} f_i w(t+d-i)`, where disturbances at or before `t0`
    /// are the equation errors implied by `x0`.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let dims = cfg.dims();
        let Dims { n, m, d } = dims;
        let t0 = cfg.t0;
        let (y_part, u_part) = cfg.x0.split_at(n + d - 1);
        let y_at = |s: i64| -> f64 {
            usize::try_from(t0 - s).ok().and_then(|k| y_part.get(k).copied()).unwrap_or(0.0)
        };
        let u_at = |s: i64| -> f64 {
            usize::try_from(t0 - 1 - s).ok().and_then(|k| u_part.get(k).copied()).unwrap_or(0.0)
        };
        // w(s) = A y(s) - B u(s-d) with coefficients of the step that emitted y(s)
        let w_eff = |s: i64| -> f64 {
            if s > t0 {
                return signal_eval(&cfg.w, s);
            }
            let p = cfg.schedule.at(s - 1);
            let ay: f64 = y_at(s) + (1..=n).map(|i| p.a[i - 1] * y_at(s - i as i64)).sum::<f64>();
            let bu: f64 = (0..=m).map(|i| p.b[i] * u_at(s - d as i64 - i as i64)).sum();
            ay - bu
        };

        let t_start = t0 - d as i64 + 1;
        let mut wbar = Vec::new();
        let mut theta_star = Vec::new();
        for t in t_start..=cfg.t_end() {
            let plant = cfg.schedule.at(t);
            let (f, _) = predictor_split(&cfg.reference.l, &plant.a_poly(), d)?;
            let wb = f
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, fi)| fi * w_eff(t + d as i64 - i as i64))
                .sum();
            wbar.push(wb);
            theta_star.push(cfg.theta_star(t)?);
        }
        Ok(Self {
            t_start,
            constant: cfg.schedule.is_constant(),
            wbar,
            theta_star,
        })
    }

    pub fn wbar_at(&self, t: i64) -> f64 {
        self.wbar[(t - self.t_start) as usize]
    }

    pub fn theta_star_at(&self, t: i64) -> &[f64] {
        &self.theta_star[(t - self.t_start) as usize]
    }
}

/// Runs the adaptive loop for `t = t0..=t0+T`.
///
/// Per step: advance the reference model, compute `u(t)` from
/// `theta_hat(t)`, emit `y(t+1)` with `w(t+1)`, form `ybar(t+1)`, and update
/// the estimator with `phi(t-d+1)`.
pub fn run_closed_loop(cfg: &ExperimentConfig) -> Result<Trace> {
    cfg.validate()?;
    let dims = cfg.dims();
    let (mut controller, mut plant) = init_from_x0(&cfg.x0, dims, &cfg.reference, cfg.beta0_sign())?;
    let mut estimator = EstimatorState::new(cfg.theta0.clone(), cfg.param_box.clone(), cfg.delta)?;

    let mut rows = Vec::with_capacity(cfg.steps + 1);
    for t in cfg.t0..=cfg.t_end() {
        let (y_star, _) = controller.reference_outputs(t, &cfg.r);
        let y_t = controller.regressor().outputs()[0];
        let eps_bar = controller.ybar_now() - controller.ybar_star_now();
        let theta_hat = estimator.theta_hat().to_vec();

        let u = controller.control_input(&theta_hat, t)?;
        if !u.is_finite() {
            return Err(MracError::NumericAbort {
                t,
                what: format!("control input is {u}"),
            });
        }
        let phi = controller.regressor().phi(0);
        let phi_lag = controller.regressor().phi(dims.d - 1);

        let y_next = plant_step(&mut plant, &cfg.schedule, t, u, signal_eval(&cfg.w, t + 1));
        if !y_next.is_finite() {
            return Err(MracError::NumericAbort {
                t,
                what: format!("plant output y(t+1) is {y_next}"),
            });
        }
        plant.push_output(y_next);
        let ybar_next = controller.ybar_next(y_next);
        let rec = estimator_update(&mut estimator, &phi_lag, ybar_next)?;
        controller.push_output(y_next);

        rows.push(TraceRow {
            t,
            y: y_t,
            y_star,
            u,
            eps: y_t - y_star,
            eps_bar,
            e: rec.e_next,
            rho: rec.rho,
            norm_phi: norm(&phi),
            theta_hat,
            r: signal_eval(&cfg.r, t),
            w: signal_eval(&cfg.w, t),
            nu: rec.nu,
        });
    }

    Ok(Trace {
        meta: TraceMeta {
            dims,
            t0: cfg.t0,
            x0: cfg.x0.clone(),
            l: cfg.reference.l.coeffs().to_vec(),
            h: cfg.reference.h.coeffs().to_vec(),
            config_hash: cfg.hash(),
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        },
        rows,
    })
}

/// Runs independent experiments in parallel; results keep the input order.
pub fn run_batch(configs: &[ExperimentConfig]) -> Vec<Result<Trace>> {
    configs.par_iter().map(run_closed_loop).collect()
}
