//! Randomized experiment generators shared by tests, benches, and the
//! acceptance suite.

use rand::Rng;

use super::ExperimentConfig;
use crate::error::Result;
use crate::plant_sim::{CoefficientSchedule, SignalSpec};
use crate::poly::PolyZ;
use crate::system::{build_param_box, Dims, ParamBox, PlantParams, ReferenceModel};

/// The second-order plant box of the worked example:
/// `a_1, a_2 in [-2, 2]`, `b_0 in [1.5, 5]`, `b_1 in [-1, 1]`.
pub fn example_plant_box() -> ParamBox {
    ParamBox::new(vec![-2.0, -2.0, 1.5, -1.0], vec![2.0, 2.0, 5.0, 1.0]).expect("valid box")
}

/// `L = 1 - z^-2/2`, `H = 1/2`.
pub fn example_reference(d: usize) -> ReferenceModel {
    ReferenceModel::new(PolyZ::monic(&[0.0, -0.5]), PolyZ::new(vec![0.5]).expect("nonempty"), d)
        .expect("valid reference")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub d: usize,
    pub steps: usize,
    /// Amplitude of uniform white noise; 0 disables the disturbance.
    pub noise: f64,
    pub delta: f64,
    /// Unit square wave with this period, or `r = 0` when `None`.
    pub square_period: Option<u64>,
    /// Entries of `x0` are uniform on `[-x0_scale, x0_scale]`.
    pub x0_scale: f64,
    /// Start from a random point of `S` instead of its midpoint.
    pub random_theta0: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            d: 1,
            steps: 500,
            noise: 0.0,
            delta: f64::INFINITY,
            square_period: Some(200),
            x0_scale: 1.0,
            random_theta0: true,
        }
    }
}

/// Estimator box for the example plant box at delay `d`: exact for
/// `d = 1`, sampled and widened by 0.05 otherwise.
pub fn estimator_box<R: Rng + ?Sized>(s_ab: &ParamBox, reference: &ReferenceModel, rng: &mut R) -> Result<ParamBox> {
    let n = 2;
    let m = s_ab.dim() - n - 1;
    let dims = Dims { n, m, d: reference.d };
    let margin = if reference.d == 1 { 0.0 } else { 0.05 };
    build_param_box(s_ab, dims, reference, 512, margin, rng)
}

/// A constant plant drawn uniformly from `s_ab` (second order, `m = 1`)
/// under the example reference model.
pub fn random_constant_config<R: Rng + ?Sized>(
    rng: &mut R,
    s_ab: &ParamBox,
    param_box: &ParamBox,
    sc: &Scenario,
) -> Result<ExperimentConfig> {
    let dims = Dims { n: 2, m: 1, d: sc.d };
    let theta: Vec<f64> = s_ab.lo.iter().zip(&s_ab.hi).map(|(&l, &h)| rng.random_range(l..=h)).collect();
    let plant = PlantParams::from_vector(&theta, dims);
    let theta0 = if sc.random_theta0 {
        param_box.lo.iter().zip(&param_box.hi).map(|(&l, &h)| rng.random_range(l..=h)).collect()
    } else {
        param_box.midpoint()
    };
    let x0 = (0..dims.x0_len())
        .map(|_| rng.random_range(-1.0..=1.0) * sc.x0_scale)
        .collect();
    let w = if sc.noise > 0.0 {
        SignalSpec::WhiteNoise {
            amplitude: sc.noise,
            seed: Some(rng.random()),
        }
    } else {
        SignalSpec::Zero
    };
    let r = match sc.square_period {
        Some(period) => SignalSpec::SquareWave {
            period,
            amplitude: 1.0,
            phase: 0,
        },
        None => SignalSpec::Zero,
    };
    let cfg = ExperimentConfig {
        schedule: CoefficientSchedule::constant(&plant),
        reference: example_reference(sc.d),
        param_box: param_box.clone(),
        s_ab: Some(s_ab.clone()),
        delta: sc.delta,
        t0: 0,
        steps: sc.steps,
        x0,
        theta0,
        r,
        w,
        seed: 0,
    };
    cfg.validate()?;
    Ok(cfg)
}
