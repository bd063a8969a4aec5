//! Data misfit, image similarity and their combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalised misfit `sqrt((1/N) sum_k sum_j ((obs - sim) / sigma)^2)`,
/// where `steps[j]` is the time-step index of datum `j` and `N` the number
/// of distinct steps. Data with infinite sigma contribute nothing.
pub fn rmse(obs: &[f64], sim: &[f64], sigma: &[f64], steps: &[usize]) -> Result<f64> {
    let n = obs.len();
    for (what, len) in [("simulated data", sim.len()), ("noise levels", sigma.len()), ("time-step map", steps.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    let mut distinct: Vec<usize> = steps.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..n {
        if !(sigma[i] > 0.0) {
            return Err(Error::invalid(format!("noise level {} of datum {i} is not positive", sigma[i])));
        }
        if sigma[i].is_finite() {
            let r = (obs[i] - sim[i]) / sigma[i];
            sum += r * r;
        }
    }
    Ok((sum / distinct.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn gaussian_window(rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let mut w: Vec<f64> = (0..rows * cols)
        .map(|p| {
            let (r, c) = ((p / cols) as f64 - cr, (p % cols) as f64 - cc);
            (-(r * r + c * c) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean SSIM over all window positions fully inside the image. The window
/// shrinks to the image size along any axis shorter than it.
pub fn ssim(a: &[f64], b: &[f64], rows: usize, cols: usize, dynamic_range: f64, params: &SsimParams) -> Result<f64> {
    if a.len() != rows * cols || b.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            what: "image",
            expected: rows * cols,
            actual: if a.len() != rows * cols { a.len() } else { b.len() },
        });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("images must be non-empty"));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::invalid("dynamic range must be positive"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("images must be finite"));
    }
    let (wr, wc) = (params.window.min(rows).max(1), params.window.min(cols).max(1));
    let w = gaussian_window(wr, wc, params.sigma);
    let c1 = (params.k1 * dynamic_range).powi(2);
    let c2 = (params.k2 * dynamic_range).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=rows - wr {
        for c0 in 0..=cols - wc {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..wr {
                for j in 0..wc {
                    let p = (r0 + i) * cols + c0 + j;
                    let g = w[i * wc + j];
                    ma += g * a[p];
                    mb += g * b[p];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..wr {
                for j in 0..wc {
                    let p = (r0 + i) * cols + c0 + j;
                    let g = w[i * wc + j];
                    let (da, db) = (a[p] - ma, b[p] - mb);
                    va += g * da * da;
                    vb += g * db * db;
                    cov += g * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// `((1 - ssim) + rmse) / 2`
pub fn combined_norm(ssim: f64, rmse: f64) -> f64 {
    ((1.0 - ssim) + rmse) / 2.0
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    /// Production-data RMSE of every member.
    pub member_rmse: Vec<f64>,
    /// Mean of `member_rmse`.
    pub mean_rmse: f64,
    /// RMSE of the simulation of the ensemble-mean field.
    pub mean_field_rmse: f64,
    /// SSIM of the vertically averaged mean lnK map against the truth.
    pub ssim: f64,
    /// Combined norm of `ssim` and `mean_field_rmse`.
    pub norm: f64,
}

impl MetricReport {
    pub fn new(label: &str, member_rmse: Vec<f64>, mean_field_rmse: f64, ssim: f64) -> Self {
        let mean_rmse = if member_rmse.is_empty() {
            f64::NAN
        } else {
            member_rmse.iter().sum::<f64>() / member_rmse.len() as f64
        };
        MetricReport {
            label: label.to_string(),
            member_rmse,
            mean_rmse,
            mean_field_rmse,
            ssim,
            norm: combined_norm(ssim, mean_field_rmse),
        }
    }
}

/// `label,mean_rmse,mean_field_rmse,ssim,norm`
pub fn reports_to_csv(reports: &[MetricReport]) -> String {
    let mut s = String::from("label,mean_rmse,mean_field_rmse,ssim,norm\n");
    for r in reports {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.label, r.mean_rmse, r.mean_field_rmse, r.ssim, r.norm
        ));
    }
    s
}

/// `member,<label>...` with one row per member.
pub fn member_rmse_csv(reports: &[MetricReport]) -> String {
    let mut s = String::from("member");
    for r in reports {
        s.push(',');
        s.push_str(&r.label);
    }
    s.push('\n');
    let n = reports.iter().map(|r| r.member_rmse.len()).max().unwrap_or(0);
    for i in 0..n {
        s.push_str(&i.to_string());
        for r in reports {
            s.push(',');
            if let Some(v) = r.member_rmse.get(i) {
                s.push_str(&format!("{v:.6}"));
            }
        }
        s.push('\n');
    }
    s
}
