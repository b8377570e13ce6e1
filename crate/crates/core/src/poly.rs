//! Polynomials in the delay operator `z^-1`.
//!
//! Coefficients are stored densely in ascending powers of `z^-1`: `coeffs[i]`
//! multiplies `z^-i`. Trailing zeros are kept so that fixed-length parameter
//! blocks (`f_0..f_{d-1}`, `alpha_0..alpha_{n-1}`) keep their layout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MracError, Result};

/// Roots closer than this to the unit circle are treated as unstable.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolyZ {
    coeffs: Vec<f64>,
}

impl PolyZ {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(MracError::EmptyPolynomial);
        }
        Ok(Self { coeffs })
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    /// `1 + tail[0] z^-1 + tail[1] z^-2 + ...`
    pub fn monic(tail: &[f64]) -> Self {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(tail);
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree, `len - 1`, counting trailing zeros.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    /// Coefficient of `z^-i`, zero beyond the stored length.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Degree once trailing zeros are dropped.
    pub fn effective_degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Evaluates `sum_i coeffs[i] * x^i`, i.e. the polynomial at `z^-1 = x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

impl TryFrom<Vec<f64>> for PolyZ {
    type Error = MracError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        PolyZ::new(coeffs)
    }
}

impl From<PolyZ> for Vec<f64> {
    fn from(p: PolyZ) -> Self {
        p.coeffs
    }
}

impl fmt::Display for PolyZ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.effective_degree();
        let mut first = true;
        for (i, &c) in self.coeffs[..=last].iter().enumerate() {
            if c == 0.0 && !(i == 0 && last == 0) {
                continue;
            }
            if first {
                write!(f, "{c}")?;
            } else if c < 0.0 {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            if i > 0 {
                write!(f, "z^-{i}")?;
            }
            first = false;
        }
        Ok(())
    }
}

pub fn poly_mul(p: &PolyZ, q: &PolyZ) -> PolyZ {
    let mut out = vec![0.0; p.coeffs.len() + q.coeffs.len() - 1];
    for (i, &a) in p.coeffs.iter().enumerate() {
        for (j, &b) in q.coeffs.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    PolyZ { coeffs: out }
}

/// Long division of `l` by `a` to `d` quotient terms.
///
/// Returns `(F, alpha)` with `L = F*A + z^-d * alpha`, where `F` has exactly
/// `d` coefficients and `alpha` has `deg A` coefficients (one zero coefficient
/// when `A` is constant).
pub fn predictor_split(l: &PolyZ, a: &PolyZ, d: usize) -> Result<(PolyZ, PolyZ)> {
    if !a.is_monic() {
        return Err(MracError::NonMonic {
            what: "A",
            found: a.coeffs[0],
        });
    }
    if d == 0 {
        return Err(MracError::InvalidPlant("delay d must be positive".into()));
    }
    let n = a.degree();
    if l.effective_degree() > n + d - 1 {
        return Err(MracError::InvalidReference(format!(
            "deg L = {} exceeds deg A + d - 1 = {}",
            l.effective_degree(),
            n + d - 1
        )));
    }

    let len = d + n;
    let mut rem = vec![0.0; len.max(l.coeffs.len())];
    rem[..l.coeffs.len()].copy_from_slice(&l.coeffs);

    let mut f = vec![0.0; d];
    for k in 0..d {
        let q = rem[k];
        f[k] = q;
        for (j, &aj) in a.coeffs.iter().enumerate() {
            rem[k + j] -= q * aj;
        }
    }

    let alpha = if n == 0 {
        vec![0.0]
    } else {
        rem[d..d + n].to_vec()
    };
    Ok((PolyZ { coeffs: f }, PolyZ { coeffs: alpha }))
}

/// Schur-Cohn step-down test: are all roots of `z^deg p(z^-1)` strictly
/// inside the circle of the given radius?
fn roots_inside(coeffs: &[f64], radius: f64) -> bool {
    let lead = coeffs[0];
    let mut scale = 1.0;
    let mut a: Vec<f64> = coeffs
        .iter()
        .map(|&c| {
            let v = c / (lead * scale);
            scale *= radius;
            v
        })
        .collect();

    while a.len() > 1 {
        let last = a.len() - 1;
        let k = a[last];
        // also rejects NaN and overflow
        if !(k.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..last).map(|i| (a[i] - k * a[last - i]) / denom).collect();
        a = next;
    }
    true
}

/// True iff every root of `z^deg p(z^-1)` lies in the open unit disk, with
/// roots within [`BOUNDARY_TOL`] of the circle counted as unstable.
pub fn schur_stable(p: &PolyZ) -> Result<bool> {
    if p.coeffs[0] == 0.0 {
        return Err(MracError::Degenerate);
    }
    Ok(roots_inside(&p.coeffs, 1.0 - BOUNDARY_TOL))
}

/// Largest root modulus of `z^deg p(z^-1)`, by bisection on the radius of the
/// Schur-Cohn test.
pub fn max_root_modulus(p: &PolyZ) -> Result<f64> {
    if p.coeffs[0] == 0.0 {
        return Err(MracError::Degenerate);
    }
    // roots at z = 0 do not matter
    let coeffs = &p.coeffs[..=p.effective_degree()];
    if coeffs.len() == 1 {
        return Ok(0.0);
    }

    // Cauchy bound
    let lead = coeffs[0].abs();
    let mut hi = 1.0 + coeffs[1..].iter().map(|c| c.abs() / lead).fold(0.0, f64::max);
    let mut lo = 0.0;
    while !roots_inside(coeffs, hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if roots_inside(coeffs, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
