use serde::{Deserialize, Serialize};

use super::{run_closed_loop, ExperimentConfig, Trace};
use crate::error::Result;
use crate::plant_sim::{CoefFn, CoefficientSchedule, SignalSpec, Varying};
use crate::poly::PolyZ;
use crate::system::{ParamBox, ReferenceModel};

fn cos(offset: f64, amplitude: f64, rate: f64) -> CoefFn {
    CoefFn::Varying(Varying::Cos { offset, amplitude, rate })
}

/// The time-varying second-order example: `d = 1`,
/// `L = 1 - z^-2/2`, `H = 1/2`, `delta = inf`, square-wave reference with
/// period 200 and a `0.1 cos(10 t)` disturbance on `200 < t <= 500`.
pub fn worked_example_config() -> ExperimentConfig {
    let schedule = CoefficientSchedule {
        a: vec![
            cos(0.0, 2.0, 1.0 / 100.0),
            CoefFn::Varying(Varying::Sin {
                offset: 0.0,
                amplitude: -2.0,
                rate: 1.0 / 300.0,
            }),
        ],
        b: vec![cos(13.0 / 4.0, -7.0 / 4.0, 1.0 / 125.0), cos(0.0, -1.0, 1.0 / 50.0)],
        d: 1,
    };
    let reference = ReferenceModel::new(PolyZ::monic(&[0.0, -0.5]), PolyZ::new(vec![0.5]).expect("nonempty"), 1)
        .expect("reference model is valid");
    let param_box = ParamBox::new(vec![-2.0, -2.5, 1.5, -1.0], vec![2.0, 1.5, 5.0, 1.0]).expect("valid box");
    let s_ab = ParamBox::new(vec![-2.0, -2.0, 1.5, -1.0], vec![2.0, 2.0, 5.0, 1.0]).expect("valid box");
    let theta0 = param_box.midpoint();
    ExperimentConfig {
        schedule,
        reference,
        param_box,
        s_ab: Some(s_ab),
        delta: f64::INFINITY,
        t0: 0,
        steps: 1000,
        x0: vec![-1.0, -1.0, 0.0],
        theta0,
        r: SignalSpec::SquareWave {
            period: 200,
            amplitude: 1.0,
            phase: 0,
        },
        w: SignalSpec::WindowedSinusoid {
            start: 200,
            end: 500,
            amplitude: 0.1,
            rate: 10.0,
        },
        seed: 0,
    }
}

/// RMS of `eps` per disturbance regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeRms {
    /// `t <= 200`
    pub before: f64,
    /// `200 < t <= 500`
    pub disturbed: f64,
    /// `500 < t <= 1000`
    pub after: f64,
    /// `600 <= t <= 1000`
    pub recovered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSummary {
    pub rms: RegimeRms,
    /// `(min, max)` of each estimate over the run.
    pub estimate_ranges: Vec<(f64, f64)>,
    pub estimates_in_box: bool,
    pub all_finite: bool,
    pub rows: usize,
}

fn rms(trace: &Trace, keep: impl Fn(i64) -> bool) -> f64 {
    let (sum, count) = trace
        .rows
        .iter()
        .filter(|r| keep(r.t))
        .fold((0.0, 0usize), |(s, c), r| (s + r.eps * r.eps, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

pub fn summarize_example(cfg: &ExperimentConfig, trace: &Trace) -> ExampleSummary {
    let p = cfg.dims().predictor_dim();
    let estimate_ranges = (0..p)
        .map(|i| {
            trace.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.theta_hat[i]), hi.max(r.theta_hat[i]))
            })
        })
        .collect();
    ExampleSummary {
        rms: RegimeRms {
            before: rms(trace, |t| t <= 200),
            disturbed: rms(trace, |t| t > 200 && t <= 500),
            after: rms(trace, |t| t > 500 && t <= 1000),
            recovered: rms(trace, |t| (600..=1000).contains(&t)),
        },
        estimate_ranges,
        estimates_in_box: trace.rows.iter().all(|r| cfg.param_box.contains(&r.theta_hat, 0.0)),
        all_finite: trace.all_finite(),
        rows: trace.rows.len(),
    }
}

pub fn reproduce_example() -> Result<(ExperimentConfig, Trace, ExampleSummary)> {
    let cfg = worked_example_config();
    let trace = run_closed_loop(&cfg)?;
    let summary = summarize_example(&cfg, &trace);
    Ok((cfg, trace, summary))
}
