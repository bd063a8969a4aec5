//! Reservoir model, state vectors and ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Static rock properties on every cell of a grid (canonical order).
///
/// Permeabilities are natural logs of millidarcy values. Inactive cells hold
/// zeros and are never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirModel {
    pub lnkx: Vec<f64>,
    pub phi: Vec<f64>,
    pub lnkz: Vec<f64>,
}

impl ReservoirModel {
    pub fn new(grid: &Grid, lnkx: Vec<f64>, phi: Vec<f64>, lnkz: Vec<f64>) -> Result<Self> {
        let n = grid.cell_count();
        for (what, v) in [("lnKx field", &lnkx), ("porosity field", &phi), ("lnKz field", &lnkz)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        let mut model = ReservoirModel { lnkx, phi, lnkz };
        for cell in 0..n {
            if grid.is_active(cell) {
                let (kx, p, kz) = (model.lnkx[cell], model.phi[cell], model.lnkz[cell]);
                if !(kx.is_finite() && kz.is_finite() && p.is_finite()) {
                    return Err(Error::invalid(format!("non-finite property at cell {cell}")));
                }
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::invalid(format!("porosity {p} at cell {cell} outside (0, 1)")));
                }
            } else {
                model.lnkx[cell] = 0.0;
                model.phi[cell] = 0.0;
                model.lnkz[cell] = 0.0;
            }
        }
        Ok(model)
    }

    /// Horizontal permeability of `cell` in mD.
    #[inline]
    pub fn kx(&self, cell: usize) -> f64 {
        self.lnkx[cell].exp()
    }

    #[inline]
    pub fn kz(&self, cell: usize) -> f64 {
        self.lnkz[cell].exp()
    }
}

/// Ordered real vector: lnKx over active cells, or dictionary coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    RawLnK,
    SparseCoefficients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<StateVector>,
    kind: EnsembleKind,
}

impl Ensemble {
    pub fn new(members: Vec<StateVector>, kind: EnsembleKind) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "an ensemble needs at least 2 members, got {}",
                members.len()
            )));
        }
        let len = members[0].len();
        if let Some(bad) = members.iter().find(|m| m.len() != len) {
            return Err(Error::DimensionMismatch {
                what: "ensemble member length",
                expected: len,
                actual: bad.len(),
            });
        }
        Ok(Ensemble { members, kind })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }
    pub fn members(&self) -> &[StateVector] {
        &self.members
    }
    pub fn into_members(self) -> Vec<StateVector> {
        self.members
    }
    pub fn size(&self) -> usize {
        self.members.len()
    }
    pub fn state_len(&self) -> usize {
        self.members[0].len()
    }

    /// Member-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.members.len() as f64;
        let mut mean = vec![0.0; self.state_len()];
        for m in &self.members {
            for (a, b) in mean.iter_mut().zip(&m.0) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n);
        mean
    }
}

/// lnKx over the active cells of `grid`, in canonical order.
pub fn vectorize(model: &ReservoirModel, grid: &Grid) -> Result<StateVector> {
    if model.lnkx.len() != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            what: "model field",
            expected: grid.cell_count(),
            actual: model.lnkx.len(),
        });
    }
    Ok(StateVector(
        grid.active_cells().iter().map(|&c| model.lnkx[c]).collect(),
    ))
}

/// Scatters an active-cell vector back onto the full grid (inactive = 0).
pub fn devectorize(state: &StateVector, grid: &Grid) -> Result<Vec<f64>> {
    scatter(&state.0, grid)
}

pub(crate) fn scatter(values: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    if values.len() != grid.active_count() {
        return Err(Error::DimensionMismatch {
            what: "state vector",
            expected: grid.active_count(),
            actual: values.len(),
        });
    }
    let mut field = vec![0.0; grid.cell_count()];
    for (&cell, &v) in grid.active_cells().iter().zip(values) {
        field[cell] = v;
    }
    Ok(field)
}

/// Thickness-weighted vertical average of a full-grid field over active
/// layers, returned as an `ny x nx` row-major image. Columns without an
/// active layer are `NaN`.
pub fn vertical_average(field: &[f64], grid: &Grid) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut image = vec![f64::NAN; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (mut acc, mut w) = (0.0, 0.0);
            for k in 0..grid.nz() {
                let c = grid.cell(i, j, k);
                if grid.is_active(c) {
                    acc += grid.dz()[k] * field[c];
                    w += grid.dz()[k];
                }
            }
            if w > 0.0 {
                image[i + nx * j] = acc / w;
            }
        }
    }
    image
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;

    fn grid_with_holes() -> Grid {
        let mut mask = vec![true; 4 * 3 * 2];
        mask[2] = false;
        mask[17] = false;
        Grid::new(4, 3, 2, 5.0, 5.0, vec![1.0, 3.0], Some(mask)).unwrap()
    }

    #[test]
    fn constant_field_vectorizes_to_constant() {
        let g = grid_with_holes();
        let n = g.cell_count();
        let m = ReservoirModel::new(&g, vec![2.5; n], vec![0.2; n], vec![1.0; n]).unwrap();
        let v = vectorize(&m, &g).unwrap();
        assert_eq!(v.len(), g.active_count());
        assert!(v.0.iter().all(|&x| x == 2.5));
    }

    #[test]
    fn single_cell() {
        let g = Grid::new(1, 1, 1, 1.0, 1.0, vec![1.0], None).unwrap();
        let m = ReservoirModel::new(&g, vec![3.2], vec![0.2], vec![1.0]).unwrap();
        assert_eq!(vectorize(&m, &g).unwrap().0, vec![3.2]);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let g = grid_with_holes();
        let mut rng = rng_from(99);
        let lnkx: Vec<f64> = (0..g.cell_count()).map(|_| rng.random_range(-3.0..8.0)).collect();
        let n = g.cell_count();
        let m = ReservoirModel::new(&g, lnkx, vec![0.2; n], vec![0.0; n]).unwrap();
        let v = vectorize(&m, &g).unwrap();
        let back = devectorize(&v, &g).unwrap();
        for (a, b) in back.iter().zip(&m.lnkx) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let again = vectorize(&ReservoirModel { lnkx: back, ..m.clone() }, &g).unwrap();
        assert_eq!(again, v);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = grid_with_holes();
        assert!(devectorize(&StateVector(vec![1.0; 3]), &g).is_err());
        assert!(ReservoirModel::new(&g, vec![0.0; 3], vec![0.2; 3], vec![0.0; 3]).is_err());
    }

    #[test]
    fn ensemble_needs_two_equal_members() {
        let one = vec![StateVector(vec![1.0])];
        assert!(Ensemble::new(one, EnsembleKind::RawLnK).is_err());
        let ragged = vec![StateVector(vec![1.0]), StateVector(vec![1.0, 2.0])];
        assert!(Ensemble::new(ragged, EnsembleKind::RawLnK).is_err());
        let ok = vec![StateVector(vec![1.0, 3.0]), StateVector(vec![3.0, 5.0])];
        assert_eq!(Ensemble::new(ok, EnsembleKind::RawLnK).unwrap().mean(), vec![2.0, 4.0]);
    }

    #[test]
    fn vertical_average_weights_by_thickness() {
        let g = Grid::new(1, 1, 2, 1.0, 1.0, vec![1.0, 3.0], None).unwrap();
        let img = vertical_average(&[4.0, 8.0], &g);
        assert_eq!(img, vec![7.0]);
    }
}
