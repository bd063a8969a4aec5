//! Layered Cartesian grid with an active-cell mask.
//!
//! Cells are numbered x-fastest, then y, then z:
//! `cell = i + nx * (j + ny * k)`. This ordering is fixed for every
//! serialized vector produced by the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
    dx: f64,
    dy: f64,
    dz: Vec<f64>,
    active: Vec<bool>,
    #[serde(skip)]
    active_index: Vec<Option<usize>>,
    #[serde(skip)]
    active_cells: Vec<usize>,
}

impl Grid {
    /// Builds and validates a grid. `active` must hold `nx * ny * nz` flags in
    /// canonical order; `None` means every cell is active.
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        dx: f64,
        dy: f64,
        dz: Vec<f64>,
        active: Option<Vec<bool>>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::invalid(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if dz.len() != nz {
            return Err(Error::DimensionMismatch {
                what: "layer thickness list",
                expected: nz,
                actual: dz.len(),
            });
        }
        if let Some(bad) = dz.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::invalid(format!(
                "layer thickness must be positive, got {bad}"
            )));
        }
        let n = nx * ny * nz;
        let active = active.unwrap_or_else(|| vec![true; n]);
        if active.len() != n {
            return Err(Error::DimensionMismatch {
                what: "active mask",
                expected: n,
                actual: active.len(),
            });
        }
        let mut grid = Grid {
            nx,
            ny,
            nz,
            dx,
            dy,
            dz,
            active,
            active_index: Vec::new(),
            active_cells: Vec::new(),
        };
        grid.index_active()?;
        Ok(grid)
    }

    /// Rebuilds the derived lookup tables (needed after deserialization).
    pub fn index_active(&mut self) -> Result<()> {
        self.active_index = vec![None; self.active.len()];
        self.active_cells.clear();
        for (cell, &on) in self.active.iter().enumerate() {
            if on {
                self.active_index[cell] = Some(self.active_cells.len());
                self.active_cells.push(cell);
            }
        }
        if self.active_cells.is_empty() {
            return Err(Error::invalid("grid has no active cells"));
        }
        Ok(())
    }

    /// 19 x 28 x 5 blocks of 180 m with 1761 active cells.
    ///
    /// The outline is an elliptical approximation of the PUNQ-S3 footprint:
    /// in each layer the cells closest to the centre (normalised distance,
    /// ties by index) are kept so that the total active count is 1761.
    pub fn punq_s3_like() -> Self {
        let (nx, ny, nz) = (19usize, 28usize, 5usize);
        let per_layer = 1761 / nz;
        let extra = 1761 % nz;
        let mut active = vec![false; nx * ny * nz];
        for k in 0..nz {
            let mut scored: Vec<(f64, usize)> = (0..nx * ny)
                .map(|c| {
                    let (i, j) = (c % nx, c / nx);
                    let u = (i as f64 + 0.5) / nx as f64 - 0.5;
                    let v = (j as f64 + 0.5) / ny as f64 - 0.5;
                    (u * u + v * v, c)
                })
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let keep = per_layer + usize::from(k < extra);
            for &(_, c) in scored.iter().take(keep) {
                active[c + nx * ny * k] = true;
            }
        }
        Grid::new(nx, ny, nz, 180.0, 180.0, vec![4.0, 3.0, 5.0, 3.0, 5.0], Some(active))
            .expect("preset grid is valid")
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn dz(&self) -> &[f64] {
        &self.dz
    }
    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn active_count(&self) -> usize {
        self.active_cells.len()
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn ijk(&self, cell: usize) -> (usize, usize, usize) {
        let i = cell % self.nx;
        let j = (cell / self.nx) % self.ny;
        let k = cell / (self.nx * self.ny);
        (i, j, k)
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.active.get(cell).copied().unwrap_or(false)
    }

    /// Position of `cell` in active-cell vectors.
    pub fn active_index(&self, cell: usize) -> Option<usize> {
        self.active_index.get(cell).copied().flatten()
    }

    /// Canonical cell number of every active cell, in state-vector order.
    pub fn active_cells(&self) -> &[usize] {
        &self.active_cells
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.dx * self.dy * self.dz[k]
    }

    /// Depth of the centre of layer `k` below the top of the grid (m).
    pub fn layer_depth(&self, k: usize) -> f64 {
        self.dz[..k].iter().sum::<f64>() + 0.5 * self.dz[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punq_preset_has_1761_active_cells() {
        let g = Grid::punq_s3_like();
        assert_eq!((g.nx(), g.ny(), g.nz()), (19, 28, 5));
        assert_eq!(g.dx(), 180.0);
        assert_eq!(g.dy(), 180.0);
        assert_eq!(g.active_count(), 1761);
    }

    #[test]
    fn single_cell_grid() {
        let g = Grid::new(1, 1, 1, 1.0, 1.0, vec![1.0], None).unwrap();
        assert_eq!(g.active_count(), 1);
        assert_eq!(g.active_cells(), &[0]);
    }

    #[test]
    fn mask_with_five_inactive_cells() {
        let mut mask = vec![true; 24];
        for c in [0, 5, 11, 12, 23] {
            mask[c] = false;
        }
        let g = Grid::new(4, 3, 2, 10.0, 10.0, vec![1.0, 2.0], Some(mask)).unwrap();
        assert_eq!(g.active_count(), 19);
        assert_eq!(g.active_index(0), None);
        assert_eq!(g.active_index(1), Some(0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Grid::new(0, 1, 1, 1.0, 1.0, vec![1.0], None).is_err());
        assert!(Grid::new(2, 1, 1, 1.0, 1.0, vec![1.0, 1.0], None).is_err());
        assert!(Grid::new(2, 1, 1, 1.0, 1.0, vec![1.0], Some(vec![true])).is_err());
        assert!(Grid::new(2, 1, 1, 1.0, 1.0, vec![1.0], Some(vec![false, false])).is_err());
        assert!(Grid::new(2, 1, 1, -1.0, 1.0, vec![1.0], None).is_err());
    }

    #[test]
    fn ordering_is_x_fastest() {
        let g = Grid::new(3, 4, 2, 1.0, 1.0, vec![1.0, 1.0], None).unwrap();
        assert_eq!(g.cell(1, 0, 0), 1);
        assert_eq!(g.cell(0, 1, 0), 3);
        assert_eq!(g.cell(0, 0, 1), 12);
        for c in 0..g.cell_count() {
            let (i, j, k) = g.ijk(c);
            assert_eq!(g.cell(i, j, k), c);
        }
    }
}
