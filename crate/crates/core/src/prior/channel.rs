//! Two-level sinuous channel fields.
//!
//! Each channel runs along x with centreline
//! `y(i) = y0 + amplitude * sin(2*pi*(i + 0.5)/period + phase)` (in cells)
//! and occupies exactly `width` rows per column, starting at
//! `round(y(i) - width/2)` and clipped at the grid edge. Every layer gets an
//! independent integer lateral shift in `[-layer_shift, layer_shift]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub count: usize,
    /// Channel width in cells.
    pub width: usize,
    /// Sinuosity amplitude in cells.
    pub amplitude: f64,
    /// Sinuosity wavelength in cells.
    pub period: f64,
    pub channel_level: f64,
    pub background_level: f64,
    #[serde(default)]
    pub layer_shift: usize,
}

impl ChannelSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.width == 0 {
            return Err(Error::invalid("channel width must be at least one cell"));
        }
        if self.width > grid.ny() {
            return Err(Error::invalid(format!(
                "channel width {} exceeds grid extent {} cells",
                self.width,
                grid.ny()
            )));
        }
        if !(self.channel_level.is_finite() && self.background_level.is_finite()) {
            return Err(Error::invalid("channel levels must be finite"));
        }
        if !(self.amplitude >= 0.0 && self.period > 0.0) {
            return Err(Error::invalid("amplitude must be >= 0 and period > 0"));
        }
        Ok(())
    }
}

pub fn channel_field(grid: &Grid, spec: &ChannelSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate(grid)?;
    let mut rng = rng_from(seed);
    let ny = grid.ny() as f64;
    let half = spec.width as f64 / 2.0;

    let mut in_channel = vec![false; grid.nx() * grid.ny()];
    let layer_shifts: Vec<i64> = (0..grid.nz())
        .map(|_| {
            let s = spec.layer_shift as i64;
            if s == 0 {
                0
            } else {
                rng.random_range(-s..=s)
            }
        })
        .collect();
    let mut centrelines = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        // Keep the whole channel inside the grid when possible.
        let (lo, hi) = (half + spec.amplitude, ny - half - spec.amplitude);
        let y0 = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            rng.random_range(0.0..ny)
        };
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        centrelines.push((y0, phase));
    }

    let mut field = vec![0.0; grid.cell_count()];
    for (k, &shift) in layer_shifts.iter().enumerate() {
        in_channel.iter_mut().for_each(|f| *f = false);
        for &(y0, phase) in &centrelines {
            for i in 0..grid.nx() {
                let x = i as f64 + 0.5;
                let yc = y0
                    + spec.amplitude * (std::f64::consts::TAU * x / spec.period + phase).sin();
                let start = (yc - half).round() as i64 + shift;
                for j in start..start + spec.width as i64 {
                    if (0..grid.ny() as i64).contains(&j) {
                        in_channel[i + grid.nx() * j as usize] = true;
                    }
                }
            }
        }
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let c = grid.cell(i, j, k);
                if grid.is_active(c) {
                    field[c] = if in_channel[i + grid.nx() * j] {
                        spec.channel_level
                    } else {
                        spec.background_level
                    };
                }
            }
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(count: usize, width: usize, amplitude: f64) -> ChannelSpec {
        ChannelSpec {
            count,
            width,
            amplitude,
            period: 8.0,
            channel_level: 6.5,
            background_level: 2.0,
            layer_shift: 0,
        }
    }

    #[test]
    fn no_channels_is_uniform_background() {
        let g = Grid::new(10, 10, 2, 1.0, 1.0, vec![1.0, 1.0], None).unwrap();
        let f = channel_field(&g, &spec(0, 2, 1.0), 5).unwrap();
        assert!(f.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn straight_channel_has_width_times_nx_cells_per_layer() {
        let g = Grid::new(10, 10, 3, 1.0, 1.0, vec![1.0; 3], None).unwrap();
        for seed in 0..20 {
            let f = channel_field(&g, &spec(1, 3, 0.0), seed).unwrap();
            for k in 0..3 {
                let n = (0..100).filter(|c| f[c + 100 * k] == 6.5).count();
                assert_eq!(n, 30, "seed {seed} layer {k}");
            }
        }
    }

    #[test]
    fn exactly_two_levels() {
        let g = Grid::new(20, 20, 2, 1.0, 1.0, vec![1.0; 2], None).unwrap();
        let mut s = spec(3, 2, 3.0);
        s.layer_shift = 1;
        let f = channel_field(&g, &s, 9).unwrap();
        let mut levels: Vec<u64> = f.iter().map(|v| v.to_bits()).collect();
        levels.sort_unstable();
        levels.dedup();
        assert_eq!(levels.len(), 2);
    }

    #[test]
    fn width_larger_than_grid_is_rejected() {
        let g = Grid::new(10, 4, 1, 1.0, 1.0, vec![1.0], None).unwrap();
        assert!(channel_field(&g, &spec(1, 5, 0.0), 1).is_err());
    }

    #[test]
    fn deterministic() {
        let g = Grid::new(15, 12, 2, 1.0, 1.0, vec![1.0; 2], None).unwrap();
        let s = spec(2, 2, 2.0);
        assert_eq!(channel_field(&g, &s, 4).unwrap(), channel_field(&g, &s, 4).unwrap());
    }
}
