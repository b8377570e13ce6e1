//! Discrete-time model reference adaptive control: plant simulation,
//! projection-based parameter estimation with a deadzone, the
//! certainty-equivalence control law, and a verification harness.

pub mod config;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod plant_sim;
pub mod poly;
pub mod system;

pub use config::ConfigFile;
pub use error::{MracError, Result};
pub use harness::{run_closed_loop, ExperimentConfig, GroundTruth, Trace, VerificationReport};
pub use plant_sim::{CoefFn, CoefficientSchedule, SignalSpec};
pub use poly::PolyZ;
pub use system::{Dims, ParamBox, PlantParams, ReferenceModel};
