//! Rate-controlled wells with a Peaceman inflow closure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::fluids::FluidProps;
use crate::grid::Grid;
use crate::model::ReservoirModel;

/// 1 mD in m².
pub const MILLIDARCY: f64 = 9.869_233e-16;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const PASCAL_PER_BAR: f64 = 1.0e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum WellControl {
    /// Total liquid production rate (m³/day, reservoir conditions).
    Producer { rate: f64 },
    /// Water injection rate (m³/day).
    Injector { rate: f64 },
}

impl WellControl {
    /// Signed outflow rate in m³/s (positive for producers).
    pub fn outflow(&self) -> f64 {
        match *self {
            WellControl::Producer { rate } => rate / SECONDS_PER_DAY,
            WellControl::Injector { rate } => -rate / SECONDS_PER_DAY,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            WellControl::Producer { rate } | WellControl::Injector { rate } => rate,
        }
    }

    pub fn is_injector(&self) -> bool {
        matches!(self, WellControl::Injector { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub name: String,
    /// Perforated cells as `[i, j, k]`.
    pub perforations: Vec<[usize; 3]>,
    pub control: WellControl,
    /// Wellbore radius (m).
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub skin: f64,
}

fn default_radius() -> f64 {
    0.1
}

impl Well {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.perforations.is_empty() {
            return Err(Error::invalid(format!("well {} has no perforations", self.name)));
        }
        for &[i, j, k] in &self.perforations {
            if i >= grid.nx() || j >= grid.ny() || k >= grid.nz() || !grid.is_active(grid.cell(i, j, k)) {
                return Err(Error::invalid(format!(
                    "well {} perforates cell ({i},{j},{k}) which is outside the grid or inactive",
                    self.name
                )));
            }
        }
        if !(self.control.rate() >= 0.0 && self.control.rate().is_finite()) {
            return Err(Error::invalid(format!("well {} rate must be >= 0", self.name)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid(format!("well {} radius must be positive", self.name)));
        }
        Ok(())
    }

    /// Canonical cell numbers of the perforations.
    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        self.perforations.iter().map(|&[i, j, k]| grid.cell(i, j, k)).collect()
    }

    /// Peaceman well index (m³) of every perforation.
    pub fn well_indices(&self, grid: &Grid, model: &ReservoirModel) -> Vec<f64> {
        self.cells(grid)
            .into_iter()
            .map(|c| {
                let k = grid.ijk(c).2;
                peaceman_index(model.kx(c) * MILLIDARCY, grid.dx(), grid.dy(), grid.dz()[k], self.radius, self.skin)
            })
            .collect()
    }
}

/// Peaceman index for an isotropic horizontal permeability `k` (m²):
/// `WI = 2 pi k h / (ln(r0 / rw) + s)`, `r0 = 0.14 sqrt(dx² + dy²)`.
pub fn peaceman_index(k: f64, dx: f64, dy: f64, h: f64, rw: f64, skin: f64) -> f64 {
    let r0 = 0.14 * (dx * dx + dy * dy).sqrt();
    2.0 * std::f64::consts::PI * k * h / ((r0 / rw).ln() + skin)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellResponse {
    /// Bottom-hole pressure (Pa).
    pub bhp: f64,
    /// Water and oil rates (m³/s); positive out of the reservoir.
    pub q_w: f64,
    pub q_o: f64,
    pub wct: f64,
}

/// Per-perforation inputs for [`well_response_raw`].
#[derive(Debug, Clone, Copy)]
pub struct Perforation {
    pub pressure: f64,
    pub s_w: f64,
    pub index: f64,
}

/// BHP and phase rates consistent with Peaceman inflow at the prescribed
/// total rate, given cell pressures (Pa) and saturations.
pub fn well_response(
    pressures: &[f64],
    saturations: &[f64],
    well: &Well,
    model: &ReservoirModel,
    grid: &Grid,
    fluids: &FluidProps,
) -> Result<WellResponse> {
    let wi = well.well_indices(grid, model);
    if pressures.len() != wi.len() || saturations.len() != wi.len() {
        return Err(Error::DimensionMismatch {
            what: "perforation state",
            expected: wi.len(),
            actual: pressures.len().min(saturations.len()),
        });
    }
    let perfs: Vec<Perforation> = (0..wi.len())
        .map(|n| Perforation {
            pressure: pressures[n],
            s_w: saturations[n],
            index: wi[n],
        })
        .collect();
    well_response_raw(&perfs, well, fluids)
}

pub fn well_response_raw(perfs: &[Perforation], well: &Well, fluids: &FluidProps) -> Result<WellResponse> {
    let conductance: Vec<(f64, f64, f64)> = perfs
        .iter()
        .map(|p| {
            let (lw, lo) = fluids.mobilities(p.s_w);
            (p.index * (lw + lo), p.index * lw, p.index * lo)
        })
        .collect();
    let total: f64 = conductance.iter().map(|c| c.0).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWellMobility(well.name.clone()));
    }
    let q_out = well.control.outflow();
    let weighted: f64 = conductance.iter().zip(perfs).map(|(c, p)| c.0 * p.pressure).sum();
    let bhp = (weighted - q_out) / total;
    let (mut q_w, mut q_o) = (0.0, 0.0);
    for (c, p) in conductance.iter().zip(perfs) {
        let dp = p.pressure - bhp;
        if well.control.is_injector() {
            q_w += c.0 * dp;
        } else {
            q_w += c.1 * dp;
            q_o += c.2 * dp;
        }
    }
    let wct = if well.control.is_injector() {
        1.0
    } else if q_w + q_o > 0.0 {
        (q_w / (q_w + q_o)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(WellResponse { bhp, q_w, q_o, wct })
}
