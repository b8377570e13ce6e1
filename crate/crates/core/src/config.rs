//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "plant":     { "a": [..], "b": [..], "d": 1, "schedule": { "a": [..], "b": [..] } },
//!   "reference": { "L": [1, 0, -0.5], "H": [0.5] },
//!   "estimator": { "delta": null, "box": { "lo": [..], "hi": [..] } },
//!   "sim":       { "t0": 0, "steps": 1000, "x0": [..], "theta0": "midpoint", "seed": 0 },
//!   "signals":   { "r": { "kind": "square_wave", .. }, "w": { "kind": "zero" } }
//! }
//! ```
//!
//! `delta: null` (or absent) means an infinite deadzone margin. The estimator
//! takes `box` (the set `S`), `s_ab_box` (the plant box, from which `S` is
//! built when `box` is absent), or both.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MracError, Result};
use crate::harness::ExperimentConfig;
use crate::plant_sim::{CoefFn, CoefficientSchedule, SignalSpec};
use crate::poly::PolyZ;
use crate::system::{build_param_box, ParamBox, ReferenceModel};

const DEFAULT_BOX_SAMPLES: usize = 256;
const R_SEED_SALT: u64 = 0x5eed_0001;
const W_SEED_SALT: u64 = 0x5eed_0002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub plant: PlantSection,
    pub reference: ReferenceSection,
    pub estimator: EstimatorSection,
    pub sim: SimSection,
    pub signals: SignalsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub a: Vec<CoefFn>,
    pub b: Vec<CoefFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub param_box: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_ab_box: Option<BoxSpec>,
    /// Interior samples when building `S` from `s_ab_box`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Per-coordinate inflation when building `S` from `s_ab_box`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta0Spec {
    Explicit(Vec<f64>),
    /// Only `"midpoint"` is accepted.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub t0: i64,
    pub steps: usize,
    pub x0: Vec<f64>,
    pub theta0: Theta0Spec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSection {
    pub r: SignalSpec,
    pub w: SignalSpec,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            MracError::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates and resolves into a runnable experiment.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let d = self.plant.d;
        if d == 0 {
            return Err(MracError::config("plant.d", "delay must be positive"));
        }
        if self.plant.b.is_empty() {
            return Err(MracError::config("plant.b", "must hold at least b_0"));
        }

        let schedule = match &self.plant.schedule {
            None => CoefficientSchedule {
                a: self.plant.a.iter().map(|&v| CoefFn::Constant(v)).collect(),
                b: self.plant.b.iter().map(|&v| CoefFn::Constant(v)).collect(),
                d,
            },
            Some(s) => {
                if s.a.len() != self.plant.a.len() {
                    return Err(MracError::config(
                        "plant.schedule.a",
                        format!("has {} entries but plant.a has {}", s.a.len(), self.plant.a.len()),
                    ));
                }
                if s.b.len() != self.plant.b.len() {
                    return Err(MracError::config(
                        "plant.schedule.b",
                        format!("has {} entries but plant.b has {}", s.b.len(), self.plant.b.len()),
                    ));
                }
                CoefficientSchedule {
                    a: s.a.clone(),
                    b: s.b.clone(),
                    d,
                }
            }
        };
        let dims = schedule.dims();

        let l = PolyZ::new(self.reference.l.clone()).map_err(|e| MracError::config("reference.L", e.to_string()))?;
        let h = PolyZ::new(self.reference.h.clone()).map_err(|e| MracError::config("reference.H", e.to_string()))?;
        let reference = ReferenceModel::new(l, h, d).map_err(|e| MracError::config("reference", e.to_string()))?;

        let to_box = |spec: &BoxSpec, path: &str| {
            ParamBox::new(spec.lo.clone(), spec.hi.clone()).map_err(|e| MracError::config(path, e.to_string()))
        };
        let s_ab = self
            .estimator
            .s_ab_box
            .as_ref()
            .map(|b| to_box(b, "estimator.s_ab_box"))
            .transpose()?;
        let param_box = match (&self.estimator.param_box, &s_ab) {
            (Some(b), _) => to_box(b, "estimator.box")?,
            (None, Some(s_ab)) => {
                if s_ab.dim() != dims.plant_dim() {
                    return Err(MracError::config(
                        "estimator.s_ab_box",
                        format!("has dimension {} but the plant has {}", s_ab.dim(), dims.plant_dim()),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.sim.seed);
                build_param_box(
                    s_ab,
                    dims,
                    &reference,
                    self.estimator.samples.unwrap_or(DEFAULT_BOX_SAMPLES),
                    self.estimator.margin.unwrap_or(0.0),
                    &mut rng,
                )
                .map_err(|e| MracError::config("estimator.s_ab_box", e.to_string()))?
            }
            (None, None) => {
                return Err(MracError::config("estimator", "one of `box` or `s_ab_box` is required"));
            }
        };

        let delta = match self.estimator.delta {
            None => f64::INFINITY,
            Some(v) if v > 0.0 => v,
            Some(v) => return Err(MracError::config("estimator.delta", format!("must be positive, got {v}"))),
        };

        let theta0 = match &self.sim.theta0 {
            Theta0Spec::Explicit(v) => v.clone(),
            Theta0Spec::Named(name) if name == "midpoint" => param_box.midpoint(),
            Theta0Spec::Named(name) => {
                return Err(MracError::config(
                    "sim.theta0",
                    format!("expected a vector or \"midpoint\", got \"{name}\""),
                ))
            }
        };

        let seed_signal = |s: &SignalSpec, salt: u64| match s {
            SignalSpec::WhiteNoise { amplitude, seed: None } => SignalSpec::WhiteNoise {
                amplitude: *amplitude,
                seed: Some(self.sim.seed.wrapping_add(salt)),
            },
            other => other.clone(),
        };

        let cfg = ExperimentConfig {
            schedule,
            reference,
            param_box,
            s_ab,
            delta,
            t0: self.sim.t0,
            steps: self.sim.steps,
            x0: self.sim.x0.clone(),
            theta0,
            r: seed_signal(&self.signals.r, R_SEED_SALT),
            w: seed_signal(&self.signals.w, W_SEED_SALT),
            seed: self.sim.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Config document that resolves back to `self`.
    pub fn to_config_file(&self) -> ConfigFile {
        let p0 = self.schedule.at(self.t0);
        let all_constant = self
            .schedule
            .a
            .iter()
            .chain(&self.schedule.b)
            .all(|f| matches!(f, CoefFn::Constant(_)));
        let as_spec = |b: &ParamBox| BoxSpec {
            lo: b.lo.clone(),
            hi: b.hi.clone(),
        };
        ConfigFile {
            plant: PlantSection {
                a: p0.a,
                b: p0.b,
                d: self.schedule.d,
                schedule: (!all_constant).then(|| ScheduleSection {
                    a: self.schedule.a.clone(),
                    b: self.schedule.b.clone(),
                }),
            },
            reference: ReferenceSection {
                l: self.reference.l.coeffs().to_vec(),
                h: self.reference.h.coeffs().to_vec(),
            },
            estimator: EstimatorSection {
                delta: self.delta.is_finite().then_some(self.delta),
                param_box: Some(as_spec(&self.param_box)),
                s_ab_box: self.s_ab.as_ref().map(as_spec),
                samples: None,
                margin: None,
            },
            sim: SimSection {
                t0: self.t0,
                steps: self.steps,
                x0: self.x0.clone(),
                theta0: Theta0Spec::Explicit(self.theta0.clone()),
                seed: self.seed,
            },
            signals: SignalsSection {
                r: self.r.clone(),
                w: self.w.clone(),
            },
        }
    }
}
