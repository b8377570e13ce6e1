//! Plant and reference-model descriptions, the plant-to-predictor parameter
//! map, the admissible box `S` and the spectral floor used to pick decay rates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MracError, Result};
use crate::poly::{max_root_modulus, poly_mul, predictor_split, schur_stable, PolyZ};

/// Plant orders: `n = deg A`, `m = deg B`, `d` the input delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

impl Dims {
    /// Length of the plant vector `(a_1..a_n, b_0..b_m)`.
    pub fn plant_dim(&self) -> usize {
        self.n + self.m + 1
    }

    /// Length of the regressor and of the predictor vector.
    pub fn predictor_dim(&self) -> usize {
        self.n + self.m + self.d
    }

    /// Length of the initial-condition vector: `n + d - 1` outputs followed
    /// by `m + 2d - 2` past inputs.
    pub fn x0_len(&self) -> usize {
        (self.n + self.d - 1) + (self.m + 2 * self.d - 2)
    }

    /// Index of `beta_0` in the predictor vector.
    pub fn beta0_index(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: usize,
}

impl PlantParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>, d: usize) -> Result<Self> {
        let p = Self { a, b, d };
        p.validate()?;
        Ok(p)
    }

    /// Splits a plant vector `(a_1..a_n, b_0..b_m)`; no validation.
    pub fn from_vector(theta: &[f64], dims: Dims) -> Self {
        Self {
            a: theta[..dims.n].to_vec(),
            b: theta[dims.n..dims.n + dims.m + 1].to_vec(),
            d: dims.d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(MracError::InvalidPlant("delay d must be positive".into()));
        }
        if self.b.is_empty() {
            return Err(MracError::InvalidPlant("b must hold at least b_0".into()));
        }
        if self.b[0] == 0.0 {
            return Err(MracError::InvalidPlant("b_0 must be nonzero".into()));
        }
        if !self.a.iter().chain(&self.b).all(|v| v.is_finite()) {
            return Err(MracError::InvalidPlant("coefficients must be finite".into()));
        }
        if !schur_stable(&self.b_poly())? {
            return Err(MracError::AssumptionViolated(format!(
                "B(z^-1) = {} has a root outside the open unit disk",
                self.b_poly()
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.len(),
            m: self.b.len() - 1,
            d: self.d,
        }
    }

    pub fn a_poly(&self) -> PolyZ {
        PolyZ::monic(&self.a)
    }

    pub fn b_poly(&self) -> PolyZ {
        PolyZ::new(self.b.clone()).expect("b is non-empty")
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }
}

/// `L(z^-1) Y*(z) = z^-d H(z^-1) R(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub l: PolyZ,
    pub h: PolyZ,
    pub d: usize,
}

impl ReferenceModel {
    pub fn new(l: PolyZ, h: PolyZ, d: usize) -> Result<Self> {
        if !l.is_monic() {
            return Err(MracError::NonMonic {
                what: "L",
                found: l.coeff(0),
            });
        }
        if d == 0 {
            return Err(MracError::InvalidReference("delay d must be positive".into()));
        }
        if !schur_stable(&l)? {
            return Err(MracError::InvalidReference(format!(
                "L(z^-1) = {l} is not stable"
            )));
        }
        // With L = 1 (n' = 0) the d-step-ahead model needs a constant H, so the
        // degree bound is floored at zero.
        let max_h = l.degree().saturating_sub(d);
        if h.degree() > max_h {
            return Err(MracError::InvalidReference(format!(
                "deg H = {} exceeds max(n' - d, 0) = {max_h}",
                h.degree()
            )));
        }
        Ok(Self { l, h, d })
    }

    /// `n' = deg L`.
    pub fn order(&self) -> usize {
        self.l.degree()
    }

    pub fn check_plant_order(&self, n: usize) -> Result<()> {
        if self.order() > n {
            return Err(MracError::InvalidReference(format!(
                "reference order n' = {} exceeds plant order n = {n}",
                self.order()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl PredictorParams {
    /// `(alpha_0..alpha_{n-1}, beta_0..beta_{m+d-1})`
    pub fn to_vector(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }
}

/// Axis-aligned box `{x : lo <= x <= hi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(MracError::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(MracError::InadmissibleSet(format!(
                "coordinate {i}: [{}, {}] is not a finite interval",
                lo[i], hi[i]
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            lo: x.to_vec(),
            hi: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Corner `k` of the `2^dim` corners; bit `i` of `k` selects `hi[i]`.
    pub fn corner(&self, k: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if (k >> i) & 1 == 1 { self.hi[i] } else { self.lo[i] })
            .collect()
    }

    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..1usize << self.dim()).map(move |k| self.corner(k))
    }

    /// Errors unless the interval at `index` excludes zero.
    pub fn check_sign_definite(&self, index: usize) -> Result<()> {
        let (lo, hi) = (self.lo[index], self.hi[index]);
        if lo > 0.0 || hi < 0.0 {
            Ok(())
        } else {
            Err(MracError::InadmissibleSet(format!(
                "interval [{lo}, {hi}] of coordinate {index} contains 0"
            )))
        }
    }

    fn inflate(&mut self, margin: f64) {
        self.lo.iter_mut().for_each(|v| *v -= margin);
        self.hi.iter_mut().for_each(|v| *v += margin);
    }
}

/// Maps a plant vector to `(alpha, beta)` through `L = F A + z^-d alpha` and
/// `beta = F B`.
pub fn to_predictor_params(theta: &PlantParams, reference: &ReferenceModel) -> Result<PredictorParams> {
    if theta.d != reference.d {
        return Err(MracError::InvalidReference(format!(
            "reference delay {} differs from plant delay {}",
            reference.d, theta.d
        )));
    }
    let n = theta.a.len();
    let (f, alpha) = predictor_split(&reference.l, &theta.a_poly(), theta.d)?;
    let beta = poly_mul(&f, &theta.b_poly());
    Ok(PredictorParams {
        alpha: alpha.coeffs()[..n].to_vec(),
        beta: beta.coeffs().to_vec(),
    })
}

/// Hyperrectangle containing the image of `s_ab` under
/// [`to_predictor_params`], widened by `margin`.
///
/// Candidates are every corner plus `samples` uniform interior points; the
/// best candidate for each bound is then polished by coordinate-wise line
/// searches, since for `d > 1` the map is polynomial and its extremes can
/// sit inside the box.
pub fn build_param_box<R: Rng + ?Sized>(
    s_ab: &ParamBox,
    dims: Dims,
    reference: &ReferenceModel,
    samples: usize,
    margin: f64,
    rng: &mut R,
) -> Result<ParamBox> {
    if s_ab.dim() != dims.plant_dim() {
        return Err(MracError::DimensionMismatch {
            context: "plant box",
            expected: dims.plant_dim(),
            got: s_ab.dim(),
        });
    }
    if !(margin >= 0.0) {
        return Err(MracError::InadmissibleSet(format!("margin {margin} is negative")));
    }
    s_ab.check_sign_definite(dims.n)
        .map_err(|_| MracError::InadmissibleSet("b_0 interval of the plant box contains 0".into()))?;

    let k = dims.predictor_dim();
    let image = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(to_predictor_params(&PlantParams::from_vector(x, dims), reference)?.to_vector())
    };
    // (value, argument) of the current lower and upper bound per coordinate
    let mut lo: Vec<(f64, Vec<f64>)> = vec![(f64::INFINITY, Vec::new()); k];
    let mut hi: Vec<(f64, Vec<f64>)> = vec![(f64::NEG_INFINITY, Vec::new()); k];
    let absorb = |x: Vec<f64>, lo: &mut Vec<(f64, Vec<f64>)>, hi: &mut Vec<(f64, Vec<f64>)>| -> Result<()> {
        for (i, v) in image(&x)?.into_iter().enumerate() {
            if v < lo[i].0 {
                lo[i] = (v, x.clone());
            }
            if v > hi[i].0 {
                hi[i] = (v, x.clone());
            }
        }
        Ok(())
    };

    for corner in s_ab.corners() {
        absorb(corner, &mut lo, &mut hi)?;
    }
    for _ in 0..samples {
        let x: Vec<f64> = s_ab
            .lo
            .iter()
            .zip(&s_ab.hi)
            .map(|(&l, &h)| if l < h { rng.random_range(l..=h) } else { l })
            .collect();
        absorb(x, &mut lo, &mut hi)?;
    }
    if dims.d > 1 {
        for i in 0..k {
            for sign in [-1.0, 1.0] {
                let start = if sign < 0.0 { lo[i].1.clone() } else { hi[i].1.clone() };
                let x = polish(s_ab, start, |x| image(x).map(|v| sign * v[i]))?;
                absorb(x, &mut lo, &mut hi)?;
            }
        }
    }

    let mut out = ParamBox {
        lo: lo.into_iter().map(|(v, _)| v).collect(),
        hi: hi.into_iter().map(|(v, _)| v).collect(),
    };
    out.inflate(margin);
    out.check_sign_definite(dims.beta0_index()).map_err(|_| {
        MracError::InadmissibleSet(format!(
            "beta_0 interval [{}, {}] contains 0",
            out.lo[dims.beta0_index()],
            out.hi[dims.beta0_index()]
        ))
    })?;
    Ok(out)
}

/// Coordinate-wise maximization of `f` over `b`: a grid scan along each axis
/// followed by golden-section refinement around the best grid point.
fn polish(b: &ParamBox, mut x: Vec<f64>, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    const GRID: usize = 32;
    const ROUNDS: usize = 4;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = f(&x)?;
    for _ in 0..ROUNDS {
        for axis in 0..x.len() {
            let (l, h) = (b.lo[axis], b.hi[axis]);
            if !(l < h) {
                continue;
            }
            let step = (h - l) / GRID as f64;
            let at = |v: f64, x: &mut Vec<f64>| -> Result<f64> {
                x[axis] = v;
                f(x)
            };
            let mut arg = x[axis];
            for j in 0..=GRID {
                let v = l + step * j as f64;
                let val = at(v, &mut x)?;
                if val > best {
                    best = val;
                    arg = v;
                }
            }
            let (mut a, mut c) = ((arg - step).max(l), (arg + step).min(h));
            for _ in 0..40 {
                let m1 = c - inv_phi * (c - a);
                let m2 = a + inv_phi * (c - a);
                if at(m1, &mut x)? > at(m2, &mut x)? {
                    c = m2;
                } else {
                    a = m1;
                }
            }
            let v = 0.5 * (a + c);
            let val = at(v, &mut x)?;
            if val > best {
                best = val;
                arg = v;
            }
            x[axis] = arg;
        }
    }
    Ok(x)
}

/// `max_{x in box} ||x||`, attained at the corner of largest magnitude in
/// every coordinate.
pub fn box_norm(b: &ParamBox) -> f64 {
    b.lo
        .iter()
        .zip(&b.hi)
        .map(|(l, h)| {
            let m = l.abs().max(h.abs());
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

/// Largest root modulus of `L` and of `B` over a `grid`-point sweep of each
/// b-coordinate of `s_ab`.
pub fn spectral_floor(s_ab: &ParamBox, dims: Dims, reference: &ReferenceModel, grid: usize) -> Result<f64> {
    if s_ab.dim() != dims.plant_dim() {
        return Err(MracError::DimensionMismatch {
            context: "plant box",
            expected: dims.plant_dim(),
            got: s_ab.dim(),
        });
    }
    let grid = grid.max(1);
    let nb = dims.m + 1;
    let axis = |i: usize, k: usize| -> f64 {
        let (l, h) = (s_ab.lo[dims.n + i], s_ab.hi[dims.n + i]);
        if grid == 1 {
            0.5 * (l + h)
        } else {
            l + (h - l) * k as f64 / (grid - 1) as f64
        }
    };

    let mut floor = max_root_modulus(&reference.l)?;
    let total = grid.pow(nb as u32);
    for idx in 0..total {
        let mut rest = idx;
        let b: Vec<f64> = (0..nb)
            .map(|i| {
                let k = rest % grid;
                rest /= grid;
                axis(i, k)
            })
            .collect();
        let bp = PolyZ::new(b).expect("non-empty");
        if !schur_stable(&bp)? {
            return Err(MracError::AssumptionViolated(format!(
                "B(z^-1) = {bp} from the plant box is not minimum phase"
            )));
        }
        floor = floor.max(max_root_modulus(&bp)?);
    }
    Ok(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example_ref() -> ReferenceModel {
        ReferenceModel::new(PolyZ::monic(&[0.0, -0.5]), PolyZ::new(vec![0.5]).unwrap(), 1).unwrap()
    }

    fn example_s_ab() -> ParamBox {
        ParamBox::new(vec![-2.0, -2.0, 1.5, -1.0], vec![2.0, 2.0, 5.0, 1.0]).unwrap()
    }

    const EXAMPLE_DIMS: Dims = Dims { n: 2, m: 1, d: 1 };

    #[test]
    fn predictor_params_examples() {
        let theta = PlantParams::new(vec![0.3, -0.1], vec![2.0, 1.0], 1).unwrap();
        let star = to_predictor_params(&theta, &example_ref()).unwrap();
        assert_abs_diff_eq!(star.alpha[0], -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(star.alpha[1], -0.4, epsilon = 1e-15);
        assert_eq!(star.beta, vec![2.0, 1.0]);

        let dsa = ReferenceModel::new(PolyZ::one(), PolyZ::one(), 1).unwrap();
        let theta = PlantParams::new(vec![0.5], vec![2.0], 1).unwrap();
        let star = to_predictor_params(&theta, &dsa).unwrap();
        assert_eq!(star.alpha, vec![-0.5]);
        assert_eq!(star.beta, vec![2.0]);
    }

    #[test]
    fn beta0_equals_b0() {
        let r = ReferenceModel::new(PolyZ::monic(&[-0.2, 0.1]), PolyZ::new(vec![1.0]).unwrap(), 2).unwrap();
        let theta = PlantParams::new(vec![0.7, -0.3, 0.2], vec![-1.75, 0.4], 2).unwrap();
        let star = to_predictor_params(&theta, &r).unwrap();
        assert_eq!(star.beta[0], -1.75);
        assert_eq!(star.beta.len(), 1 + 2);
        assert_eq!(star.alpha.len(), 3);
    }

    #[test]
    fn plant_validation() {
        assert!(PlantParams::new(vec![0.1], vec![0.0, 1.0], 1).is_err());
        assert!(matches!(
            PlantParams::new(vec![0.1], vec![1.0, 2.0], 1),
            Err(MracError::AssumptionViolated(_))
        ));
        assert!(PlantParams::new(vec![0.1], vec![1.0], 0).is_err());
    }

    #[test]
    fn reference_validation() {
        assert!(ReferenceModel::new(PolyZ::monic(&[-1.0]), PolyZ::one(), 1).is_err());
        assert!(ReferenceModel::new(PolyZ::new(vec![2.0]).unwrap(), PolyZ::one(), 1).is_err());
        // deg H = 1 > n' - d = 1 - 1
        assert!(ReferenceModel::new(PolyZ::monic(&[0.2]), PolyZ::new(vec![1.0, 1.0]).unwrap(), 1).is_err());
        assert!(example_ref().check_plant_order(1).is_err());
        assert!(example_ref().check_plant_order(2).is_ok());
    }

    #[test]
    fn example_param_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = build_param_box(&example_s_ab(), EXAMPLE_DIMS, &example_ref(), 0, 0.0, &mut rng).unwrap();
        let expect_lo = [-2.0, -2.5, 1.5, -1.0];
        let expect_hi = [2.0, 1.5, 5.0, 1.0];
        for i in 0..4 {
            assert_abs_diff_eq!(s.lo[i], expect_lo[i], epsilon = 1e-12);
            assert_abs_diff_eq!(s.hi[i], expect_hi[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(box_norm(&s), 36.25f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_param_box() {
        let x = [0.3, -0.1, 2.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = build_param_box(&ParamBox::point(&x), EXAMPLE_DIMS, &example_ref(), 10, 0.0, &mut rng).unwrap();
        let star = to_predictor_params(&PlantParams::from_vector(&x, EXAMPLE_DIMS), &example_ref())
            .unwrap()
            .to_vector();
        assert_eq!(s, ParamBox::point(&star));
    }

    #[test]
    fn param_box_rejects_b0_through_zero() {
        let s_ab = ParamBox::new(vec![-1.0, -0.5, -1.0, 0.0], vec![1.0, 0.5, 1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = build_param_box(&s_ab, EXAMPLE_DIMS, &example_ref(), 0, 0.0, &mut rng).unwrap_err();
        assert!(matches!(err, MracError::InadmissibleSet(_)));
        // a margin that pushes beta_0 across zero is also rejected
        let s_ab = ParamBox::new(vec![0.0, 0.0, 0.1, 0.0], vec![0.0, 0.0, 0.2, 0.0]).unwrap();
        let err = build_param_box(&s_ab, EXAMPLE_DIMS, &example_ref(), 0, 0.5, &mut rng).unwrap_err();
        assert!(matches!(err, MracError::InadmissibleSet(_)));
    }

    #[test]
    fn box_norm_examples() {
        let unit = ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(box_norm(&unit), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(box_norm(&ParamBox::point(&[3.0, 4.0])), 5.0);
        // corner enumeration agrees
        let b = ParamBox::new(vec![-2.0, -2.5, 1.5, -1.0], vec![2.0, 1.5, 5.0, 1.0]).unwrap();
        let brute = b
            .corners()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(box_norm(&b), brute, epsilon = 1e-12);
    }

    #[test]
    fn spectral_floor_examples() {
        let floor = spectral_floor(&example_s_ab(), EXAMPLE_DIMS, &example_ref(), 7).unwrap();
        assert_abs_diff_eq!(floor, 0.5f64.sqrt(), epsilon = 1e-6);

        let dims = Dims { n: 1, m: 0, d: 1 };
        let s_ab = ParamBox::new(vec![-1.0, 1.0], vec![1.0, 2.0]).unwrap();
        let r = ReferenceModel::new(PolyZ::monic(&[-0.6]), PolyZ::one(), 1).unwrap();
        assert_abs_diff_eq!(spectral_floor(&s_ab, dims, &r, 7).unwrap(), 0.6, epsilon = 1e-6);
        let dsa = ReferenceModel::new(PolyZ::one(), PolyZ::one(), 1).unwrap();
        assert_eq!(spectral_floor(&s_ab, dims, &dsa, 7).unwrap(), 0.0);
    }

    #[test]
    fn spectral_floor_flags_non_minimum_phase() {
        let s_ab = ParamBox::new(vec![-2.0, -2.0, 1.0, -1.5], vec![2.0, 2.0, 5.0, 1.0]).unwrap();
        let err = spectral_floor(&s_ab, EXAMPLE_DIMS, &example_ref(), 7).unwrap_err();
        assert!(matches!(err, MracError::AssumptionViolated(_)));
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(ParamBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(ParamBox::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(ParamBox::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
