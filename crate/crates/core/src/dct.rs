//! Orthonormal 2D DCT-II of impedance images and zigzag truncation.
//!
//! Images and coefficient matrices are row-major `rows × cols` with rows
//! along y (frequency index ω) and columns along x (frequency index Θ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DctCoefficients {
    pub rows: usize,
    pub cols: usize,
    /// Full coefficient matrix; discarded entries are zero.
    pub values: Vec<f64>,
    /// Flat indices of kept coefficients in zigzag order; `None` when dense.
    pub kept: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum TruncationRule {
    KeepK { k: usize },
    /// Shortest zigzag prefix holding at least this fraction of the energy.
    Energy { tau: f64 },
}

/// `C[k][n] = a_k cos(pi (2n + 1) k / 2N)`, row-major `N × N`.
fn cosine_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            c[k * n + i] = a * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf)).cos();
        }
    }
    c
}

/// `left * x * right^T`, or with transposed factors when `inverse`.
fn separable(x: &[f64], rows: usize, cols: usize, inverse: bool) -> Vec<f64> {
    let cr = cosine_matrix(rows);
    let cc = cosine_matrix(cols);
    // Along columns (x direction) first.
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        let src = &x[r * cols..(r + 1) * cols];
        for k in 0..cols {
            let mut s = 0.0;
            for (i, v) in src.iter().enumerate() {
                s += v * if inverse { cc[i * cols + k] } else { cc[k * cols + i] };
            }
            tmp[r * cols + k] = s;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for k in 0..rows {
        for i in 0..rows {
            let w = if inverse { cr[i * rows + k] } else { cr[k * rows + i] };
            if w == 0.0 {
                continue;
            }
            for c in 0..cols {
                out[k * cols + c] += w * tmp[i * cols + c];
            }
        }
    }
    out
}

pub fn dct2_forward(image: &[f64], rows: usize, cols: usize) -> Result<DctCoefficients> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("image must have at least one row and column"));
    }
    if image.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            what: "image",
            expected: rows * cols,
            actual: image.len(),
        });
    }
    if image.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image contains non-finite values"));
    }
    Ok(DctCoefficients {
        rows,
        cols,
        values: separable(image, rows, cols, false),
        kept: None,
    })
}

pub fn dct2_inverse(coeffs: &DctCoefficients) -> Vec<f64> {
    separable(&coeffs.values, coeffs.rows, coeffs.cols, true)
}

/// Flat indices in JPEG zigzag order over anti-diagonals.
pub fn zigzag_order(rows: usize, cols: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(rows * cols);
    for s in 0..rows + cols - 1 {
        let r_lo = s.saturating_sub(cols - 1);
        let r_hi = s.min(rows - 1);
        if s % 2 == 1 {
            for r in r_lo..=r_hi {
                order.push(r * cols + (s - r));
            }
        } else {
            for r in (r_lo..=r_hi).rev() {
                order.push(r * cols + (s - r));
            }
        }
    }
    order
}

/// Cumulative energy fraction along the zigzag order.
pub fn zigzag_energy_fraction(coeffs: &DctCoefficients) -> Vec<f64> {
    let total: f64 = coeffs.values.iter().map(|v| v * v).sum();
    let mut acc = 0.0;
    zigzag_order(coeffs.rows, coeffs.cols)
        .into_iter()
        .map(|i| {
            acc += coeffs.values[i] * coeffs.values[i];
            if total > 0.0 {
                (acc / total).min(1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Zigzag prefix selected by `rule` on `coeffs`.
pub fn select_indices(coeffs: &DctCoefficients, rule: TruncationRule) -> Result<Vec<usize>> {
    let n = coeffs.rows * coeffs.cols;
    let order = zigzag_order(coeffs.rows, coeffs.cols);
    let k = match rule {
        TruncationRule::KeepK { k } => {
            if k == 0 || k > n {
                return Err(Error::invalid(format!("cannot keep {k} of {n} coefficients")));
            }
            k
        }
        TruncationRule::Energy { tau } => {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::invalid(format!("energy threshold {tau} outside (0, 1]")));
            }
            if tau >= 1.0 {
                n
            } else {
                zigzag_energy_fraction(coeffs)
                    .iter()
                    .position(|&f| f >= tau)
                    .map_or(n, |p| p + 1)
            }
        }
    };
    Ok(order[..k].to_vec())
}

/// Zeroes everything outside `indices`.
pub fn apply_indices(coeffs: &DctCoefficients, indices: &[usize]) -> Result<DctCoefficients> {
    let n = coeffs.rows * coeffs.cols;
    let mut seen = vec![false; n];
    let mut values = vec![0.0; n];
    for &i in indices {
        if i >= n || seen[i] {
            return Err(Error::invalid(format!("kept index {i} is out of range or repeated")));
        }
        seen[i] = true;
        values[i] = coeffs.values[i];
    }
    Ok(DctCoefficients {
        rows: coeffs.rows,
        cols: coeffs.cols,
        values,
        kept: Some(indices.to_vec()),
    })
}

pub fn truncate(coeffs: &DctCoefficients, rule: TruncationRule) -> Result<DctCoefficients> {
    let idx = select_indices(coeffs, rule)?;
    apply_indices(coeffs, &idx)
}

impl DctCoefficients {
    /// Kept values in kept-index order; all values when dense.
    pub fn kept_values(&self) -> Vec<f64> {
        match &self.kept {
            Some(idx) => idx.iter().map(|&i| self.values[i]).collect(),
            None => self.values.clone(),
        }
    }

    /// `theta,omega,value` rows for the kept set.
    pub fn kept_to_csv(&self) -> String {
        let all: Vec<usize>;
        let idx = match &self.kept {
            Some(idx) => idx,
            None => {
                all = (0..self.values.len()).collect();
                &all
            }
        };
        let mut s = String::from("theta,omega,value\n");
        for &i in idx {
            s.push_str(&format!("{},{},{}\n", i % self.cols, i / self.cols, self.values[i]));
        }
        s
    }

    pub fn kept_from_csv(text: &str, rows: usize, cols: usize) -> Result<DctCoefficients> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("theta,omega,value") {
            return Err(Error::Format("unexpected DCT CSV header".into()));
        }
        let mut values = vec![0.0; rows * cols];
        let mut kept = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Format(format!("line {}: malformed DCT row", n + 2));
            if f.len() != 3 {
                return Err(bad());
            }
            let t: usize = f[0].parse().map_err(|_| bad())?;
            let w: usize = f[1].parse().map_err(|_| bad())?;
            let v: f64 = f[2].parse().map_err(|_| bad())?;
            if t >= cols || w >= rows {
                return Err(bad());
            }
            values[w * cols + t] = v;
            kept.push(w * cols + t);
        }
        let dense = DctCoefficients {
            rows,
            cols,
            values,
            kept: None,
        };
        apply_indices(&dense, &kept)
    }
}

/// Replaces NaN (masked) pixels by the mean of the finite ones.
pub fn fill_masked(image: &[f64]) -> Vec<f64> {
    let finite: Vec<f64> = image.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    image.iter().map(|&v| if v.is_finite() { v } else { mean }).collect()
}

/// Kept coefficients of an image (masked pixels mean-filled) at fixed indices.
pub fn compress(image: &[f64], rows: usize, cols: usize, indices: &[usize]) -> Result<Vec<f64>> {
    let c = dct2_forward(&fill_masked(image), rows, cols)?;
    Ok(apply_indices(&c, indices)?.kept_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_image(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..rows * cols).map(|_| rng.random_range(-5.0..5.0)).collect()
    }

    #[test]
    fn constant_image_is_dc_only() {
        let c = dct2_forward(&[3.0; 12], 3, 4).unwrap();
        assert_relative_eq!(c.values[0], 3.0 * 12f64.sqrt(), max_relative = 1e-14);
        assert!(c.values[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_pixel() {
        let c = dct2_forward(&[7.5], 1, 1).unwrap();
        assert_eq!(c.values, vec![7.5]);
    }

    #[test]
    fn round_trip_16x16() {
        let img = random_image(16, 16, 3);
        let back = dct2_inverse(&dct2_forward(&img, 16, 16).unwrap());
        for (a, b) in img.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_image() {
        let c = DctCoefficients {
            rows: 4,
            cols: 5,
            values: vec![0.0; 20],
            kept: None,
        };
        assert!(dct2_inverse(&c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_truncation_gives_mean() {
        let img = random_image(6, 9, 11);
        let mean = img.iter().sum::<f64>() / img.len() as f64;
        let c = truncate(&dct2_forward(&img, 6, 9).unwrap(), TruncationRule::KeepK { k: 1 }).unwrap();
        assert!(dct2_inverse(&c).iter().all(|v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn keep_one_reconstructs_constant() {
        let c = truncate(&dct2_forward(&[2.0; 20], 4, 5).unwrap(), TruncationRule::KeepK { k: 1 }).unwrap();
        assert!(dct2_inverse(&c).iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn full_threshold_keeps_everything() {
        let c = dct2_forward(&random_image(5, 7, 1), 5, 7).unwrap();
        assert_eq!(truncate(&c, TruncationRule::Energy { tau: 1.0 }).unwrap().kept.unwrap().len(), 35);
        assert!(truncate(&c, TruncationRule::KeepK { k: 36 }).is_err());
        assert!(truncate(&c, TruncationRule::KeepK { k: 0 }).is_err());
        assert!(truncate(&c, TruncationRule::Energy { tau: 0.0 }).is_err());
    }

    #[test]
    fn zigzag_matches_jpeg_start() {
        // Row-major indices on a 4-wide matrix.
        let z = zigzag_order(4, 4);
        assert_eq!(&z[..10], &[0, 1, 4, 8, 5, 2, 3, 6, 9, 12]);
        for (r, c) in [(3, 7), (7, 3), (1, 1), (1, 6)] {
            let mut z = zigzag_order(r, c);
            z.sort_unstable();
            assert_eq!(z, (0..r * c).collect::<Vec<_>>());
        }
    }

    #[test]
    fn smooth_map_compresses() {
        let (rows, cols) = (28, 19);
        let img: Vec<f64> = (0..rows * cols)
            .map(|p| {
                let (y, x) = ((p / cols) as f64, (p % cols) as f64);
                6.5e6 + 2e5 * (x / 7.0).sin() + 1.5e5 * (y / 9.0).cos() + 5e4 * ((x + y) / 5.0).sin()
            })
            .collect();
        let c = dct2_forward(&img, rows, cols).unwrap();
        let f = zigzag_energy_fraction(&c);
        let tenth = rows * cols / 10;
        assert!(f[tenth - 1] >= 0.98);
    }

    #[test]
    fn csv_round_trip() {
        let c = truncate(&dct2_forward(&random_image(5, 6, 2), 5, 6).unwrap(), TruncationRule::KeepK { k: 8 }).unwrap();
        let back = DctCoefficients::kept_from_csv(&c.kept_to_csv(), 5, 6).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn masked_pixels_take_the_mean() {
        assert_eq!(fill_masked(&[1.0, f64::NAN, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    proptest! {
        #[test]
        fn parseval(seed in 0u64..1000, rows in 1usize..12, cols in 1usize..12) {
            let img = random_image(rows, cols, seed);
            let c = dct2_forward(&img, rows, cols).unwrap();
            let eu: f64 = img.iter().map(|v| v * v).sum();
            let ev: f64 = c.values.iter().map(|v| v * v).sum();
            prop_assert!((eu - ev).abs() <= 1e-10 * eu.max(1e-300));
        }

        #[test]
        fn linearity(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let u1 = random_image(7, 5, seed);
            let u2 = random_image(7, 5, seed + 5000);
            let mix: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
            let v1 = dct2_forward(&u1, 7, 5).unwrap().values;
            let v2 = dct2_forward(&u2, 7, 5).unwrap().values;
            let vm = dct2_forward(&mix, 7, 5).unwrap().values;
            for i in 0..35 {
                prop_assert!((vm[i] - (a * v1[i] + b * v2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn energy_prefix_is_monotone_and_truncation_idempotent(seed in 0u64..1000, k in 1usize..30) {
            let c = dct2_forward(&random_image(6, 5, seed), 6, 5).unwrap();
            let f = zigzag_energy_fraction(&c);
            prop_assert!(f.windows(2).all(|w| w[1] >= w[0]));
            let once = truncate(&c, TruncationRule::KeepK { k }).unwrap();
            let twice = truncate(&once, TruncationRule::KeepK { k }).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
