//! Orthogonal matching pursuit against a precomputed Gram matrix.

use serde::{Deserialize, Serialize};

use crate::dict::Dictionary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    /// Dense coefficient vector of length `d`.
    pub coefficients: Vec<f64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    pub residual_norm: f64,
}

/// Reusable OMP state: the dictionary Gram matrix.
pub struct OmpCoder<'a> {
    dict: &'a Dictionary,
    gram: Vec<f64>,
}

impl<'a> OmpCoder<'a> {
    pub fn new(dict: &'a Dictionary) -> Result<Self> {
        if dict.norms().iter().all(|&n| n == 0.0) {
            return Err(Error::invalid("dictionary has no nonzero atom"));
        }
        Ok(OmpCoder {
            dict,
            gram: dict.gram(),
        })
    }

    /// Codes `y` with at most `t0` atoms, stopping early once the residual
    /// norm drops below `eta`.
    pub fn encode(&self, y: &[f64], t0: usize, eta: f64) -> Result<SparseCode> {
        let trace = self.encode_traced(y, t0, eta)?;
        Ok(trace.0)
    }

    /// As [`OmpCoder::encode`], also returning the residual norm after each
    /// iteration (first entry is `|y|`).
    pub fn encode_traced(&self, y: &[f64], t0: usize, eta: f64) -> Result<(SparseCode, Vec<f64>)> {
        let dict = self.dict;
        let (n, d) = (dict.signal_len(), dict.atom_count());
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "signal",
                expected: n,
                actual: y.len(),
            });
        }
        if t0 == 0 || !(eta >= 0.0) {
            return Err(Error::invalid("OMP needs T0 >= 1 and eta >= 0"));
        }
        let dty = dict.correlate(y);
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let y_norm = yy.sqrt();
        let mut trace = vec![y_norm];
        let mut support: Vec<usize> = Vec::new();
        // Lower Cholesky factor of the support Gram matrix, row-major, grown in place.
        let mut chol: Vec<Vec<f64>> = Vec::new();
        let mut x_s: Vec<f64> = Vec::new();
        let mut alpha = dty.clone();
        let mut selected = vec![false; d];
        let mut res_norm = y_norm;

        while support.len() < t0.min(d) && res_norm > eta && res_norm > 0.0 {
            let mut best = None;
            let mut best_val = 0.0;
            for (j, &a) in alpha.iter().enumerate() {
                if !selected[j] && self.gram[j * d + j] > 0.0 {
                    let score = a.abs() / self.gram[j * d + j].sqrt();
                    if score > best_val {
                        best_val = score;
                        best = Some(j);
                    }
                }
            }
            let Some(j) = best else { break };
            if best_val <= 1e-14 * y_norm {
                break;
            }
            // Extend the Cholesky factor with atom j.
            let g_col: Vec<f64> = support.iter().map(|&s| self.gram[s * d + j]).collect();
            let mut w = vec![0.0; support.len()];
            for r in 0..support.len() {
                let s: f64 = (0..r).map(|c| chol[r][c] * w[c]).sum();
                w[r] = (g_col[r] - s) / chol[r][r];
            }
            let diag2 = self.gram[j * d + j] - w.iter().map(|v| v * v).sum::<f64>();
            if diag2 <= 1e-12 * self.gram[j * d + j] {
                // Atom already in the span of the support.
                selected[j] = true;
                continue;
            }
            w.push(diag2.sqrt());
            chol.push(w);
            support.push(j);
            selected[j] = true;

            let rhs: Vec<f64> = support.iter().map(|&s| dty[s]).collect();
            x_s = cholesky_solve(&chol, &rhs);
            for (k, a) in alpha.iter_mut().enumerate() {
                let gx: f64 = support.iter().zip(&x_s).map(|(&s, x)| self.gram[k * d + s] * x).sum();
                *a = dty[k] - gx;
            }
            // |r|² = |y|² - x_S^T (D^T y)_S at the least-squares optimum.
            let fit: f64 = x_s.iter().zip(&rhs).map(|(x, b)| x * b).sum();
            res_norm = (yy - fit).max(0.0).sqrt();
            trace.push(res_norm);
        }

        let mut coefficients = vec![0.0; d];
        for (&s, &x) in support.iter().zip(&x_s) {
            coefficients[s] = x;
        }
        let recon = dict.decode(&coefficients)?;
        let exact: f64 = y.iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok((
            SparseCode {
                coefficients,
                support,
                residual_norm: exact,
            },
            trace,
        ))
    }
}

/// Solves `L L^T x = b` for a lower-triangular `L` stored by rows.
fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for r in 0..n {
        let s: f64 = (0..r).map(|c| l[r][c] * z[c]).sum();
        z[r] = (b[r] - s) / l[r][r];
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| l[c][r] * x[c]).sum();
        x[r] = (z[r] - s) / l[r][r];
    }
    x
}

/// One-off OMP; use [`OmpCoder`] when coding many signals.
pub fn omp(y: &[f64], dict: &Dictionary, t0: usize, eta: f64) -> Result<SparseCode> {
    OmpCoder::new(dict)?.encode(y, t0, eta)
}
