use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MracError, Result};
use crate::estimator::norm;
use crate::system::Dims;

/// One closed-loop step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: i64,
    pub y: f64,
    pub y_star: f64,
    pub u: f64,
    /// `y(t) - y*(t)`
    pub eps: f64,
    /// `ybar(t) - ybar*(t)`
    pub eps_bar: f64,
    /// `e(t+1)`, produced by the update made at step `t`.
    pub e: f64,
    pub rho: u8,
    /// `||phi(t)||`
    pub norm_phi: f64,
    /// `theta_hat(t)`, the estimate used for `u(t)`.
    pub theta_hat: Vec<f64>,
    pub r: f64,
    pub w: f64,
    /// Applied increment `nu(t)`.
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub dims: Dims,
    pub t0: i64,
    pub x0: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub config_hash: String,
    pub conventions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

const META_PREFIX: &str = "# meta: ";

impl Trace {
    pub fn t0(&self) -> i64 {
        self.meta.t0
    }

    pub fn t_end(&self) -> i64 {
        self.meta.t0 + self.rows.len() as i64 - 1
    }

    pub fn row(&self, t: i64) -> &TraceRow {
        &self.rows[(t - self.meta.t0) as usize]
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            [r.y, r.y_star, r.u, r.eps, r.eps_bar, r.e, r.norm_phi, r.r, r.w]
                .iter()
                .chain(&r.theta_hat)
                .chain(&r.nu)
                .all(|v| v.is_finite())
        })
    }

    /// `y(s)` from the rows, from `x0` before `t0`, zero before that.
    pub fn y_at(&self, s: i64) -> f64 {
        let t0 = self.meta.t0;
        if s >= t0 {
            return self.rows.get((s - t0) as usize).map_or(f64::NAN, |r| r.y);
        }
        let Dims { n, d, .. } = self.meta.dims;
        let k = (t0 - s) as usize;
        if k < n + d - 1 {
            self.meta.x0[k]
        } else {
            0.0
        }
    }

    pub fn u_at(&self, s: i64) -> f64 {
        let t0 = self.meta.t0;
        if s >= t0 {
            return self.rows.get((s - t0) as usize).map_or(f64::NAN, |r| r.u);
        }
        let Dims { n, d, .. } = self.meta.dims;
        let k = (t0 - 1 - s) as usize;
        self.meta.x0[n + d - 1..].get(k).copied().unwrap_or(0.0)
    }

    /// `phi(s) = (y(s), .., y(s-n+1), u(s), .., u(s-m-d+1))`, rebuilt from the
    /// recorded signals and `x0`.
    pub fn phi(&self, s: i64) -> Vec<f64> {
        let Dims { n, m, d } = self.meta.dims;
        (0..n as i64)
            .map(|i| self.y_at(s - i))
            .chain((0..(m + d) as i64).map(|i| self.u_at(s - i)))
            .collect()
    }

    /// `ybar(s) = sum_j l_j y(s-j)`
    pub fn ybar(&self, s: i64) -> f64 {
        self.meta.l.iter().enumerate().map(|(j, l)| l * self.y_at(s - j as i64)).sum()
    }

    /// `ybar*(s+d) = sum_i h_i r(s-i)`, with `r = 0` before `t0`.
    pub fn ybar_star_ahead(&self, s: i64) -> f64 {
        self.meta
            .h
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let k = s - i as i64;
                if k < self.meta.t0 {
                    0.0
                } else {
                    h * self.row(k).r
                }
            })
            .sum()
    }

    pub fn header(&self) -> String {
        let p = self.meta.dims.predictor_dim();
        let mut cols: Vec<String> = ["t", "y", "y_star", "u", "eps", "eps_bar", "e", "rho", "norm_phi"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend((0..p).map(|i| format!("theta_hat_{i}")));
        cols.push("r".into());
        cols.push("w".into());
        cols.join(",")
    }

    /// CSV text: a metadata comment line, the header, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::to_string(&self.meta).expect("metadata serializes");
        writeln!(out, "{META_PREFIX}{meta}").unwrap();
        writeln!(out, "{}", self.header()).unwrap();
        for row in &self.rows {
            write!(out, "{}", row.t).unwrap();
            for v in [row.y, row.y_star, row.u, row.eps, row.eps_bar, row.e] {
                write!(out, ",{v:.16e}").unwrap();
            }
            write!(out, ",{},{:.16e}", row.rho, row.norm_phi).unwrap();
            for v in row.theta_hat.iter().chain([&row.r, &row.w]) {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses `to_csv` output; `nu` is recomputed from the rebuilt
    /// regressor.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').ok_or_else(|| MracError::Trace("empty file".into()))?;
        let meta_json = first
            .strip_prefix(META_PREFIX)
            .ok_or_else(|| MracError::Trace("missing metadata line".into()))?;
        let meta: TraceMeta =
            serde_json::from_str(meta_json).map_err(|e| MracError::Trace(format!("metadata: {e}")))?;
        let p = meta.dims.predictor_dim();
        let mut reader = csv::Reader::from_reader(rest.as_bytes());
        let mut trace = Trace { meta, rows: Vec::new() };
        let expected_header = trace.header();
        let header = reader
            .headers()
            .map_err(|e| MracError::Trace(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != expected_header {
            return Err(MracError::Trace(format!("unexpected header {header}")));
        }

        for (k, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| MracError::Trace(e.to_string()))?;
            let bad = |what: &str| MracError::Trace(format!("row {}: bad {what}", k + 1));
            let num = |i: usize| -> Result<f64> { rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad("number")) };
            if rec.len() != 9 + p + 2 {
                return Err(bad("column count"));
            }
            let t: i64 = rec[0].parse().map_err(|_| bad("t"))?;
            if t != trace.meta.t0 + k as i64 {
                return Err(bad("time index"));
            }
            let rho: u8 = match &rec[7] {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("rho")),
            };
            let theta_hat = (9..9 + p).map(num).collect::<Result<Vec<_>>>()?;
            trace.rows.push(TraceRow {
                t,
                y: num(1)?,
                y_star: num(2)?,
                u: num(3)?,
                eps: num(4)?,
                eps_bar: num(5)?,
                e: num(6)?,
                rho,
                norm_phi: num(8)?,
                theta_hat,
                r: num(9 + p)?,
                w: num(10 + p)?,
                nu: Vec::new(),
            });
        }
        if trace.rows.is_empty() {
            return Err(MracError::Trace("no rows".into()));
        }

        let d = trace.meta.dims.d as i64;
        let nus: Vec<Vec<f64>> = trace
            .rows
            .iter()
            .map(|row| {
                let phi = trace.phi(row.t - d + 1);
                let np = norm(&phi);
                if row.rho == 1 && np > 0.0 {
                    phi.iter().map(|v| (v / np) * (row.e / np)).collect()
                } else {
                    vec![0.0; p]
                }
            })
            .collect();
        for (row, nu) in trace.rows.iter_mut().zip(nus) {
            row.nu = nu;
        }
        Ok(trace)
    }

    /// SHA-256 of the CSV text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}
