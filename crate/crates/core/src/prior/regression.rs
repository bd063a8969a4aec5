//! Per-layer core regressions from lnKx to porosity and lnKz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `phi = a_phi * lnKx + b_phi`, `lnKz = a_k * lnKx + b_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRegression {
    pub a_phi: f64,
    pub b_phi: f64,
    pub a_k: f64,
    pub b_k: f64,
}

impl LayerRegression {
    pub const fn new(a_phi: f64, b_phi: f64, a_k: f64, b_k: f64) -> Self {
        LayerRegression { a_phi, b_phi, a_k, b_k }
    }
}

/// Core-derived regressions for the five PUNQ-S3 layers.
pub const PUNQ_LAYERS: [LayerRegression; 5] = [
    LayerRegression::new(0.040228, -0.03101, 0.88227, -0.29112),
    LayerRegression::new(0.022608, -0.0066038, 0.89976, -1.1289),
    LayerRegression::new(0.046974, -0.072764, 0.69049, 1.0074),
    LayerRegression::new(0.025312, 0.01088, 0.82778, -0.56077),
    LayerRegression::new(0.039746, -0.038238, 0.88227, -0.29112),
];

pub const PHI_FLOOR: f64 = 0.01;

/// Porosity is clamped into `[0.01, phi_critical - 0.01]`.
pub fn porosity_bounds(phi_critical: f64) -> (f64, f64) {
    (PHI_FLOOR, phi_critical - PHI_FLOOR)
}

/// Returns full-grid `(phi, lnKz)` fields. Inactive cells are left at 0.
pub fn apply_layer_regressions(
    lnkx: &[f64],
    grid: &Grid,
    layers: &[LayerRegression],
    phi_critical: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if layers.len() < grid.nz() {
        return Err(Error::invalid(format!(
            "{} layer regressions given for {} layers",
            layers.len(),
            grid.nz()
        )));
    }
    if lnkx.len() != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            what: "lnKx field",
            expected: grid.cell_count(),
            actual: lnkx.len(),
        });
    }
    let (lo, hi) = porosity_bounds(phi_critical);
    if !(hi > lo) {
        return Err(Error::invalid(format!("critical porosity {phi_critical} too small")));
    }
    let mut phi = vec![0.0; lnkx.len()];
    let mut lnkz = vec![0.0; lnkx.len()];
    for &c in grid.active_cells() {
        let reg = &layers[grid.ijk(c).2];
        phi[c] = (reg.a_phi * lnkx[c] + reg.b_phi).clamp(lo, hi);
        lnkz[c] = reg.a_k * lnkx[c] + reg.b_k;
    }
    Ok((phi, lnkz))
}
