//! Stationary Gaussian lnK fields by circulant-embedding spectral simulation.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seed::rng_from;

/// Gaussian covariance `sill * exp(-(hx/lx)^2 - (hy/ly)^2)` around `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramSpec {
    pub mean: f64,
    pub sill: f64,
    /// Correlation length along x (m).
    pub range_x: f64,
    /// Correlation length along y (m).
    pub range_y: f64,
}

impl VariogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_x > 0.0 && self.range_y > 0.0) {
            return Err(Error::invalid("correlation lengths must be positive"));
        }
        if !(self.sill >= 0.0 && self.sill.is_finite() && self.mean.is_finite()) {
            return Err(Error::invalid("sill must be non-negative and mean finite"));
        }
        Ok(())
    }
}

/// Precomputed spectrum for one (grid, spec) pair. Layers are drawn
/// independently from the same 2D covariance.
pub struct GaussianFieldGenerator {
    spec: VariogramSpec,
    mx: usize,
    my: usize,
    /// sqrt(max(eigenvalue, 0) / (mx*my)), row-major `my x mx`.
    amplitude: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
}

impl GaussianFieldGenerator {
    pub fn new(grid: &Grid, spec: &VariogramSpec) -> Result<Self> {
        spec.validate()?;
        // Embedding torus at least twice the grid plus a few correlation
        // lengths so wrap-around correlation stays negligible.
        let pad = |n: usize, d: f64, range: f64| {
            let need = 2 * n + (3.0 * range / d).ceil() as usize;
            need.next_power_of_two().max(2)
        };
        let mx = pad(grid.nx(), grid.dx(), spec.range_x);
        let my = pad(grid.ny(), grid.dy(), spec.range_y);
        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(mx);
        let fft_y = planner.plan_fft_forward(my);

        let mut cov = vec![Complex64::new(0.0, 0.0); mx * my];
        for jy in 0..my {
            let hy = jy.min(my - jy) as f64 * grid.dy() / spec.range_y;
            for ix in 0..mx {
                let hx = ix.min(mx - ix) as f64 * grid.dx() / spec.range_x;
                cov[ix + mx * jy] = Complex64::new(spec.sill * (-(hx * hx) - hy * hy).exp(), 0.0);
            }
        }
        fft2(&mut cov, mx, my, &fft_x, &fft_y);
        let scale = (mx * my) as f64;
        let amplitude = cov.iter().map(|c| (c.re.max(0.0) / scale).sqrt()).collect();
        Ok(GaussianFieldGenerator {
            spec: spec.clone(),
            mx,
            my,
            amplitude,
            fft_x,
            fft_y,
        })
    }

    /// Full-grid lnKx field (inactive cells 0).
    pub fn sample(&self, grid: &Grid, seed: u64) -> Vec<f64> {
        let mut field = vec![0.0; grid.cell_count()];
        if self.spec.sill == 0.0 {
            for &c in grid.active_cells() {
                field[c] = self.spec.mean;
            }
            return field;
        }
        let mut rng = rng_from(seed);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.mx * self.my];
        for k in 0..grid.nz() {
            // Real and imaginary parts are independent fields; use the real one.
            for (b, a) in buf.iter_mut().zip(&self.amplitude) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *b = Complex64::new(a * re, a * im);
            }
            fft2(&mut buf, self.mx, self.my, &self.fft_x, &self.fft_y);
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let c = grid.cell(i, j, k);
                    if grid.is_active(c) {
                        field[c] = self.spec.mean + buf[i + self.mx * j].re;
                    }
                }
            }
        }
        field
    }
}

fn fft2(data: &mut [Complex64], mx: usize, my: usize, fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
    for row in data.chunks_mut(mx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); my];
    for ix in 0..mx {
        for jy in 0..my {
            col[jy] = data[ix + mx * jy];
        }
        fy.process(&mut col);
        for jy in 0..my {
            data[ix + mx * jy] = col[jy];
        }
    }
}

/// One-shot convenience wrapper around [`GaussianFieldGenerator`].
pub fn gaussian_field(grid: &Grid, spec: &VariogramSpec, seed: u64) -> Result<Vec<f64>> {
    Ok(GaussianFieldGenerator::new(grid, spec)?.sample(grid, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(12, 10, 2, 50.0, 50.0, vec![4.0, 4.0], None).unwrap()
    }

    fn spec(sill: f64) -> VariogramSpec {
        VariogramSpec {
            mean: 4.0,
            sill,
            range_x: 200.0,
            range_y: 120.0,
        }
    }

    #[test]
    fn zero_sill_gives_the_mean() {
        let f = gaussian_field(&grid(), &spec(0.0), 3).unwrap();
        assert!(f.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let g = grid();
        assert_eq!(
            gaussian_field(&g, &spec(1.0), 11).unwrap(),
            gaussian_field(&g, &spec(1.0), 11).unwrap()
        );
        assert_ne!(
            gaussian_field(&g, &spec(1.0), 11).unwrap(),
            gaussian_field(&g, &spec(1.0), 12).unwrap()
        );
    }

    #[test]
    fn point_variance_matches_sill() {
        let g = grid();
        let sill = 1.7;
        let gen = GaussianFieldGenerator::new(&g, &spec(sill)).unwrap();
        let cell = g.cell(5, 4, 1);
        let draws: Vec<f64> = (0..500).map(|s| gen.sample(&g, 1000 + s)[cell]).collect();
        let mean = draws.iter().sum::<f64>() / 500.0;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 499.0;
        assert!((var - sill).abs() < 0.15 * sill, "variance {var}");
    }

    #[test]
    fn rejects_bad_ranges() {
        let mut s = spec(1.0);
        s.range_x = 0.0;
        assert!(gaussian_field(&grid(), &s, 1).is_err());
    }
}
