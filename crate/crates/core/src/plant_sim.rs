//! Plant difference equation, coefficient schedules and exogenous signals.
//!
//! The plant is
//! `y(t+1) = -sum a_i(t) y(t+1-i) + sum b_i(t) u(t+1-d-i) + w(t+1)`,
//! with coefficients sampled at the emission time `t` and the disturbance
//! aligned with the output it enters.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MracError, Result};
use crate::poly::PolyZ;
use crate::system::{Dims, PlantParams};

/// Bounded scalar signal used for the reference `r` and the disturbance `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `+amplitude` on `[kP, kP + P/2)`, `-amplitude` on `[kP + P/2, (k+1)P)`,
    /// evaluated at `t + phase`; times before 0 take the value at 0.
    SquareWave {
        period: u64,
        amplitude: f64,
        #[serde(default)]
        phase: i64,
    },
    /// `amplitude * cos(rate * t)`
    Sinusoid {
        amplitude: f64,
        rate: f64,
    },
    /// `amplitude * cos(rate * t)` for `start < t <= end`, zero elsewhere.
    WindowedSinusoid {
        start: i64,
        end: i64,
        amplitude: f64,
        rate: f64,
    },
    /// `values[t - start]`, zero outside the table.
    Table {
        #[serde(default)]
        start: i64,
        values: Vec<f64>,
    },
    /// Uniform on `[-amplitude, amplitude]`, independent per sample and a
    /// pure function of `(seed, t)`.
    WhiteNoise {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl SignalSpec {
    /// Upper bound on `sup_t |s(t)|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Constant { value } => value.abs(),
            SignalSpec::SquareWave { amplitude, .. }
            | SignalSpec::Sinusoid { amplitude, .. }
            | SignalSpec::WindowedSinusoid { amplitude, .. }
            | SignalSpec::WhiteNoise { amplitude, .. } => amplitude.abs(),
            SignalSpec::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_bound() == 0.0
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let finite = match self {
            SignalSpec::Zero => true,
            SignalSpec::Constant { value } => value.is_finite(),
            SignalSpec::SquareWave { period, amplitude, .. } => {
                if *period == 0 {
                    return Err("square wave period must be positive".into());
                }
                amplitude.is_finite()
            }
            SignalSpec::Sinusoid { amplitude, rate } => amplitude.is_finite() && rate.is_finite(),
            SignalSpec::WindowedSinusoid { amplitude, rate, .. } => amplitude.is_finite() && rate.is_finite(),
            SignalSpec::Table { values, .. } => values.iter().all(|v| v.is_finite()),
            SignalSpec::WhiteNoise { amplitude, .. } => amplitude.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err("signal parameters must be finite".into())
        }
    }
}

pub fn signal_eval(spec: &SignalSpec, t: i64) -> f64 {
    match *spec {
        SignalSpec::Zero => 0.0,
        SignalSpec::Constant { value } => value,
        SignalSpec::SquareWave {
            period,
            amplitude,
            phase,
        } => {
            let period = period as i64;
            let tau = (t.max(0) + phase).rem_euclid(period);
            if 2 * tau < period {
                amplitude
            } else {
                -amplitude
            }
        }
        SignalSpec::Sinusoid { amplitude, rate } => amplitude * (rate * t as f64).cos(),
        SignalSpec::WindowedSinusoid {
            start,
            end,
            amplitude,
            rate,
        } => {
            if t > start && t <= end {
                amplitude * (rate * t as f64).cos()
            } else {
                0.0
            }
        }
        SignalSpec::Table { start, ref values } => usize::try_from(t - start)
            .ok()
            .and_then(|i| values.get(i).copied())
            .unwrap_or(0.0),
        SignalSpec::WhiteNoise { amplitude, seed } => {
            if amplitude == 0.0 {
                return 0.0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            rng.set_stream(t as u64);
            amplitude * rng.random_range(-1.0..=1.0)
        }
    }
}

/// Time function for one plant coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefFn {
    Constant(f64),
    Varying(Varying),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Varying {
    /// `offset + amplitude * cos(rate * t)`
    Cos { offset: f64, amplitude: f64, rate: f64 },
    /// `offset + amplitude * sin(rate * t)`
    Sin { offset: f64, amplitude: f64, rate: f64 },
    /// Holds `value` from `at` until the next break; the first value also
    /// covers earlier times.
    Piecewise { breaks: Vec<Break> },
    /// `values[t - start]`, holding the end values outside the table.
    Table { start: i64, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Break {
    pub at: i64,
    pub value: f64,
}

impl CoefFn {
    pub fn eval(&self, t: i64) -> f64 {
        match self {
            CoefFn::Constant(v) => *v,
            CoefFn::Varying(Varying::Cos { offset, amplitude, rate }) => offset + amplitude * (rate * t as f64).cos(),
            CoefFn::Varying(Varying::Sin { offset, amplitude, rate }) => offset + amplitude * (rate * t as f64).sin(),
            CoefFn::Varying(Varying::Piecewise { breaks }) => breaks
                .iter()
                .take_while(|b| b.at <= t)
                .last()
                .or(breaks.first())
                .map_or(0.0, |b| b.value),
            CoefFn::Varying(Varying::Table { start, values }) => {
                if values.is_empty() {
                    return 0.0;
                }
                let i = (t - start).clamp(0, values.len() as i64 - 1) as usize;
                values[i]
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CoefFn::Constant(_) => true,
            CoefFn::Varying(Varying::Cos { amplitude, rate, .. } | Varying::Sin { amplitude, rate, .. }) => {
                *amplitude == 0.0 || *rate == 0.0
            }
            CoefFn::Varying(Varying::Piecewise { breaks }) => breaks.windows(2).all(|w| w[0].value == w[1].value),
            CoefFn::Varying(Varying::Table { values, .. }) => values.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// Per-coefficient time functions `a_1(t)..a_n(t)`, `b_0(t)..b_m(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSchedule {
    pub a: Vec<CoefFn>,
    pub b: Vec<CoefFn>,
    pub d: usize,
}

impl CoefficientSchedule {
    pub fn constant(theta: &PlantParams) -> Self {
        Self {
            a: theta.a.iter().map(|&v| CoefFn::Constant(v)).collect(),
            b: theta.b.iter().map(|&v| CoefFn::Constant(v)).collect(),
            d: theta.d,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.len(),
            m: self.b.len().saturating_sub(1),
            d: self.d,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().chain(&self.b).all(CoefFn::is_constant)
    }

    /// Plant coefficients in effect at time `t` (not validated).
    pub fn at(&self, t: i64) -> PlantParams {
        PlantParams {
            a: self.a.iter().map(|f| f.eval(t)).collect(),
            b: self.b.iter().map(|f| f.eval(t)).collect(),
            d: self.d,
        }
    }

    /// Checks every sampled instant in `[t_start, t_end]`: nonzero `b_0` of
    /// one sign and a minimum-phase `B`.
    pub fn validate(&self, t_start: i64, t_end: i64) -> Result<()> {
        if self.b.is_empty() {
            return Err(MracError::InvalidPlant("b must hold at least b_0".into()));
        }
        let times: Box<dyn Iterator<Item = i64>> = if self.is_constant() {
            Box::new(std::iter::once(t_start))
        } else {
            Box::new(t_start..=t_end)
        };
        let mut sign = None;
        for t in times {
            let p = self.at(t);
            p.validate().map_err(|e| match e {
                MracError::InvalidPlant(msg) => MracError::InvalidPlant(format!("at t = {t}: {msg}")),
                MracError::AssumptionViolated(msg) => MracError::AssumptionViolated(format!("at t = {t}: {msg}")),
                other => other,
            })?;
            let s = p.b[0].signum();
            if *sign.get_or_insert(s) != s {
                return Err(MracError::InvalidPlant(format!("b_0 changes sign at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Output and input history of the plant, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    dims: Dims,
    y: VecDeque<f64>,
    u: VecDeque<f64>,
}

impl PlantState {
    /// `y_hist = (y(t), y(t-1), ...)` with at least `n` entries;
    /// `u_hist = (u(t-1), u(t-2), ...)` with at least `m + d - 1` entries.
    pub fn new(dims: Dims, y_hist: &[f64], u_hist: &[f64]) -> Result<Self> {
        let u_need = dims.m + dims.d - 1;
        if y_hist.len() < dims.n {
            return Err(MracError::InsufficientHistory {
                need: dims.n,
                have: y_hist.len(),
            });
        }
        if u_hist.len() < u_need {
            return Err(MracError::InsufficientHistory {
                need: u_need,
                have: u_hist.len(),
            });
        }
        Ok(Self {
            dims,
            y: y_hist[..dims.n].iter().copied().collect(),
            u: u_hist[..u_need].iter().copied().collect(),
        })
    }

    pub fn zero(dims: Dims) -> Self {
        Self {
            dims,
            y: VecDeque::from(vec![0.0; dims.n]),
            u: VecDeque::from(vec![0.0; dims.m + dims.d - 1]),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn push_output(&mut self, y: f64) {
        if self.dims.n > 0 {
            self.y.pop_back();
            self.y.push_front(y);
        }
    }

    pub fn outputs(&self) -> &VecDeque<f64> {
        &self.y
    }

    pub fn inputs(&self) -> &VecDeque<f64> {
        &self.u
    }
}

/// Records `u(t)` in the input history and returns `y(t+1)`; the caller
/// pushes the output with [`PlantState::push_output`].
pub fn plant_step(state: &mut PlantState, schedule: &CoefficientSchedule, t: i64, u_t: f64, w_next: f64) -> f64 {
    let Dims { n, m, d } = state.dims;
    state.u.push_front(u_t);
    state.u.truncate(m + d);

    let a: f64 = (0..n).map(|i| schedule.a[i].eval(t) * state.y[i]).sum();
    let b: f64 = (0..=m).map(|i| schedule.b[i].eval(t) * state.u[d - 1 + i]).sum();
    -a + b + w_next
}

/// `wbar(t) = sum_{i<d} f_i w(t + d - i)` for `t` in `[t0, t0 + horizon]`.
pub fn wbar_sequence(f: &PolyZ, w: &SignalSpec, t0: i64, horizon: usize) -> Vec<f64> {
    let d = f.coeffs().len() as i64;
    (t0..=t0 + horizon as i64)
        .map(|t| {
            f.coeffs()
                .iter()
                .enumerate()
                .map(|(i, &fi)| fi * signal_eval(w, t + d - i as i64))
                .sum()
        })
        .collect()
}
