//! Incompressible two-phase IMPES on a layered Cartesian grid.
//!
//! Pressure: two-point flux finite volumes with harmonic transmissibilities,
//! phase-potential upwinded mobilities, Peaceman wells with the bottom-hole
//! pressure of every rate-controlled well as an extra unknown, and optional
//! constant-pressure (aquifer) faces. The resulting system is symmetric
//! positive definite and solved with IC(0)-preconditioned CG.
//!
//! Saturation: explicit first-order upwind transport of water under a CFL
//! limit built from the maximum fractional-flow slope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::fluids::FluidProps;
use crate::flow::linear::{pcg, TripletBuilder};
use crate::flow::output::{SimDiagnostics, SimOutput, Snapshot, WellSeries};
use crate::flow::wells::{Well, MILLIDARCY, PASCAL_PER_BAR, SECONDS_PER_DAY};
use crate::grid::Grid;
use crate::model::ReservoirModel;

pub const GRAVITY: f64 = 9.806_65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    /// i = 0
    West,
    /// i = nx - 1
    East,
    /// j = 0
    South,
    /// j = ny - 1
    North,
}

/// Constant-pressure faces; water enters through them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    #[serde(default)]
    pub faces: Vec<Face>,
    #[serde(default)]
    pub pressure_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub cfl: f64,
    /// Upper bound on the time step (days).
    pub max_dt: f64,
    /// Smallest step the CFL limit may force (days).
    pub min_dt: f64,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    pub gravity: bool,
    pub initial_pressure_bar: f64,
    pub max_upwind_iterations: usize,
    /// When set (days), one pressure solve serves every saturation step in
    /// the interval: total fluxes are frozen and split by fractional flow.
    /// Ignored with gravity.
    pub pressure_interval: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            cfl: 0.9,
            max_dt: 30.0,
            min_dt: 1e-6,
            cg_tolerance: 1e-10,
            cg_max_iterations: 10_000,
            gravity: false,
            initial_pressure_bar: 250.0,
            max_upwind_iterations: 4,
            pressure_interval: None,
        }
    }
}

/// Report and survey times in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub report_times: Vec<f64>,
    #[serde(default)]
    pub survey_times: Vec<f64>,
    /// End of the history-matching period; later reports are forecasts.
    #[serde(default)]
    pub history_end: Option<f64>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.report_times.is_empty() {
            return Err(Error::invalid("schedule needs at least one report time"));
        }
        if !(self.report_times[0] > 0.0) {
            return Err(Error::invalid("report times must be positive"));
        }
        if self.report_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("report times must be strictly increasing"));
        }
        if self.survey_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("survey times must be strictly increasing"));
        }
        if let Some(t) = self.survey_times.iter().find(|t| !self.report_times.contains(t)) {
            return Err(Error::invalid(format!("survey time {t} is not a report time")));
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        *self.report_times.last().unwrap_or(&0.0)
    }

    pub fn history_end(&self) -> f64 {
        self.history_end.unwrap_or_else(|| self.total_time())
    }

    /// Report times inside the history period.
    pub fn history_times(&self) -> Vec<f64> {
        let end = self.history_end();
        self.report_times.iter().copied().filter(|&t| t <= end).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    #[serde(default)]
    pub fluids: FluidProps,
    pub wells: Vec<Well>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub numerics: Numerics,
}

impl FlowConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.fluids.validate()?;
        for w in &self.wells {
            w.validate(grid)?;
        }
        let n = &self.numerics;
        if !(n.cfl > 0.0 && n.cfl <= 1.0) {
            return Err(Error::invalid("CFL number must be in (0, 1]"));
        }
        if !(n.max_dt > 0.0 && n.min_dt > 0.0 && n.min_dt <= n.max_dt) {
            return Err(Error::invalid("time-step bounds must satisfy 0 < min_dt <= max_dt"));
        }
        if n.pressure_interval.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::invalid("pressure interval must be positive"));
        }
        if !(n.cg_tolerance > 0.0) {
            return Err(Error::invalid("linear-solver tolerance must be positive"));
        }
        if self.boundary.faces.is_empty() {
            let net: f64 = self.wells.iter().map(|w| w.control.outflow()).sum();
            let gross: f64 = self.wells.iter().map(|w| w.control.outflow().abs()).sum();
            if net.abs() > 1e-12 * gross.max(1e-300) {
                return Err(Error::invalid(
                    "closed reservoir without pressure support needs balanced well rates",
                ));
            }
        }
        Ok(())
    }
}

struct InnerFace {
    a: usize,
    b: usize,
    trans: f64,
    /// depth(a) - depth(b)
    ddepth: f64,
}

struct BoundaryFace {
    a: usize,
    trans: f64,
}

struct Perf {
    a: usize,
    wi: f64,
}

/// Upwind selection per face: `true` when cell `a` is upstream.
#[derive(Clone)]
struct Upwind {
    water: Vec<bool>,
    oil: Vec<bool>,
    boundary_inflow: Vec<bool>,
}

/// Runs the forward model from time zero to the last report time.
pub fn simulate(model: &ReservoirModel, grid: &Grid, config: &FlowConfig, schedule: &Schedule) -> Result<SimOutput> {
    config.validate(grid)?;
    schedule.validate()?;
    Simulator::new(model, grid, config)?.run(schedule)
}

struct Simulator<'a> {
    grid: &'a Grid,
    config: &'a FlowConfig,
    fluids: &'a FluidProps,
    na: usize,
    pore_volume: Vec<f64>,
    depth: Vec<f64>,
    faces: Vec<InnerFace>,
    bfaces: Vec<BoundaryFace>,
    perfs: Vec<Vec<Perf>>,
    pin: Option<usize>,
    max_slope: f64,
    boundary_pressure: f64,
}

struct StepFluxes {
    /// Net water volume rate into each cell (m³/s).
    water_in: Vec<f64>,
    /// Gross throughput per cell (m³/s) for the CFL bound.
    throughput: Vec<f64>,
    /// Per well `(bhp, q_w, q_o)` with rates positive out of the reservoir.
    wells: Vec<(f64, f64, f64)>,
    gross_water: f64,
    volume_imbalance: f64,
    gross_volume: f64,
    /// Total volume rate across each inner face, a to b.
    face_total: Vec<f64>,
    /// Total rate out through each boundary face.
    boundary_total: Vec<f64>,
    /// Total rate out of the reservoir at each perforation.
    perf_total: Vec<Vec<f64>>,
}

impl<'a> Simulator<'a> {
    fn new(model: &ReservoirModel, grid: &'a Grid, config: &'a FlowConfig) -> Result<Self> {
        let na = grid.active_count();
        let cells = grid.active_cells();
        let mut pore_volume = Vec::with_capacity(na);
        let mut depth = Vec::with_capacity(na);
        for &c in cells {
            let k = grid.ijk(c).2;
            pore_volume.push(model.phi[c] * grid.cell_volume(k));
            depth.push(grid.layer_depth(k));
        }
        if pore_volume.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("every active cell needs positive pore volume"));
        }
        let kx = |c: usize| model.kx(c) * MILLIDARCY;
        let kz = |c: usize| model.kz(c) * MILLIDARCY;
        let (dx, dy) = (grid.dx(), grid.dy());
        let mut faces = Vec::new();
        for (a, &c) in cells.iter().enumerate() {
            let (i, j, k) = grid.ijk(c);
            let dz = grid.dz()[k];
            if i + 1 < grid.nx() {
                let n = grid.cell(i + 1, j, k);
                if let Some(b) = grid.active_index(n) {
                    let t = dy * dz / (0.5 * dx / kx(c) + 0.5 * dx / kx(n));
                    faces.push(InnerFace { a, b, trans: t, ddepth: 0.0 });
                }
            }
            if j + 1 < grid.ny() {
                let n = grid.cell(i, j + 1, k);
                if let Some(b) = grid.active_index(n) {
                    let t = dx * dz / (0.5 * dy / kx(c) + 0.5 * dy / kx(n));
                    faces.push(InnerFace { a, b, trans: t, ddepth: 0.0 });
                }
            }
            if k + 1 < grid.nz() {
                let n = grid.cell(i, j, k + 1);
                if let Some(b) = grid.active_index(n) {
                    let dz2 = grid.dz()[k + 1];
                    let t = dx * dy / (0.5 * dz / kz(c) + 0.5 * dz2 / kz(n));
                    let dd = grid.layer_depth(k) - grid.layer_depth(k + 1);
                    faces.push(InnerFace { a, b, trans: t, ddepth: dd });
                }
            }
        }
        let mut bfaces = Vec::new();
        for (a, &c) in cells.iter().enumerate() {
            let (i, j, k) = grid.ijk(c);
            let dz = grid.dz()[k];
            for face in &config.boundary.faces {
                let on = match face {
                    Face::West => i == 0,
                    Face::East => i + 1 == grid.nx(),
                    Face::South => j == 0,
                    Face::North => j + 1 == grid.ny(),
                };
                if on {
                    let t = match face {
                        Face::West | Face::East => dy * dz * kx(c) / (0.5 * dx),
                        Face::South | Face::North => dx * dz * kx(c) / (0.5 * dy),
                    };
                    bfaces.push(BoundaryFace { a, trans: t });
                }
            }
        }
        let perfs = config
            .wells
            .iter()
            .map(|w| {
                w.cells(grid)
                    .into_iter()
                    .zip(w.well_indices(grid, model))
                    .map(|(c, wi)| Perf {
                        a: grid.active_index(c).expect("validated perforation"),
                        wi,
                    })
                    .collect()
            })
            .collect();
        let pin = if bfaces.is_empty() { Some(0) } else { None };
        Ok(Simulator {
            grid,
            config,
            fluids: &config.fluids,
            na,
            pore_volume,
            depth,
            faces,
            bfaces,
            perfs,
            pin,
            max_slope: config.fluids.max_fractional_flow_slope(),
            boundary_pressure: config.boundary.pressure_bar * PASCAL_PER_BAR,
        })
    }

    fn gravity(&self) -> f64 {
        if self.config.numerics.gravity {
            GRAVITY
        } else {
            0.0
        }
    }

    fn initial_pressure(&self) -> Vec<f64> {
        let p0 = self.config.numerics.initial_pressure_bar * PASCAL_PER_BAR;
        let g = self.gravity();
        self.depth
            .iter()
            .map(|d| p0 + self.fluids.rho_o * g * d)
            .collect()
    }

    fn upwind_from(&self, p: &[f64]) -> Upwind {
        let g = self.gravity();
        let (rw, ro) = (self.fluids.rho_w, self.fluids.rho_o);
        Upwind {
            water: self
                .faces
                .iter()
                .map(|f| p[f.a] - p[f.b] - rw * g * f.ddepth >= 0.0)
                .collect(),
            oil: self
                .faces
                .iter()
                .map(|f| p[f.a] - p[f.b] - ro * g * f.ddepth >= 0.0)
                .collect(),
            boundary_inflow: self.bfaces.iter().map(|f| self.boundary_pressure > p[f.a]).collect(),
        }
    }

    fn run(&self, schedule: &Schedule) -> Result<SimOutput> {
        let na = self.na;
        let nw = self.config.wells.len();
        let mut p = self.initial_pressure();
        let mut unknowns = p.clone();
        unknowns.extend(self.config.wells.iter().map(|_| p.iter().sum::<f64>() / na as f64));
        let mut sw = vec![self.fluids.s_wr; na];
        let mut upwind = self.upwind_from(&p);

        let mut series: Vec<WellSeries> = self
            .config
            .wells
            .iter()
            .map(|w| WellSeries::new(&w.name, schedule.report_times.len()))
            .collect();
        let mut snapshots = Vec::new();
        let mut diag = SimDiagnostics::default();
        let (s_lo, s_hi) = (self.fluids.s_wr, self.fluids.s_w_max());
        diag.min_sw = s_lo;
        diag.max_sw = s_lo;

        let frozen_mode = self.config.numerics.pressure_interval.filter(|_| self.gravity() == 0.0);
        let mut t = 0.0;
        for (report, &target) in schedule.report_times.iter().enumerate() {
            'pressure: loop {
                let (mobility_w, mobility_o): (Vec<f64>, Vec<f64>) =
                    sw.iter().map(|&s| self.fluids.mobilities(s)).unzip();
                let solved = self.solve_pressure(&mobility_w, &mobility_o, &mut unknowns, &mut upwind, &mut diag)?;
                p.copy_from_slice(&unknowns[..na]);
                let interval_end = frozen_mode.map_or(f64::NEG_INFINITY, |iv| (t + iv).min(target));

                let mut cfl_dt = f64::INFINITY;
                for a in 0..na {
                    if solved.throughput[a] > 0.0 {
                        cfl_dt = cfl_dt.min(self.pore_volume[a] / (self.max_slope * solved.throughput[a]));
                    }
                }
                cfl_dt *= self.config.numerics.cfl;

                loop {
                    let split;
                    let fluxes = if frozen_mode.is_some() {
                        split = self.split_frozen(&solved, &sw);
                        &split
                    } else {
                        &solved
                    };
                    let remaining = target - t;
                    let mut dt = (self.config.numerics.max_dt * SECONDS_PER_DAY).min(remaining * SECONDS_PER_DAY);
                    if cfl_dt < dt {
                        dt = cfl_dt;
                        if dt < self.config.numerics.min_dt * SECONDS_PER_DAY {
                            return Err(Error::TimeStepUnderflow {
                                time: t,
                                dt: dt / SECONDS_PER_DAY,
                            });
                        }
                    }

                    let mut stored = 0.0;
                    for a in 0..na {
                        let mut s = sw[a] + dt * fluxes.water_in[a] / self.pore_volume[a];
                        if !s.is_finite() {
                            return Err(Error::Numerical(format!("non-finite saturation in cell {a}")));
                        }
                        s = s.clamp(s_lo, s_hi);
                        stored += (s - sw[a]) * self.pore_volume[a];
                        sw[a] = s;
                    }
                    let net_water: f64 = fluxes.water_in.iter().sum::<f64>() * dt;
                    if fluxes.gross_water > 0.0 {
                        let err = (stored - net_water).abs() / (fluxes.gross_water * dt);
                        diag.max_water_balance_error = diag.max_water_balance_error.max(err);
                    }
                    if fluxes.gross_volume > 0.0 {
                        let err = fluxes.volume_imbalance.abs() / fluxes.gross_volume;
                        diag.max_volume_balance_error = diag.max_volume_balance_error.max(err);
                    }
                    for &s in &sw {
                        diag.min_sw = diag.min_sw.min(s);
                        diag.max_sw = diag.max_sw.max(s);
                    }
                    diag.steps += 1;

                    t += dt / SECONDS_PER_DAY;
                    if target - t <= 1e-9 * target.max(1.0) {
                        t = target;
                        for (w, &(bhp, q_w, q_o)) in fluxes.wells.iter().enumerate() {
                            let is_inj = self.config.wells[w].control.is_injector();
                            let wct = if is_inj {
                                1.0
                            } else if q_w + q_o > 0.0 {
                                (q_w / (q_w + q_o)).clamp(0.0, 1.0)
                            } else {
                                0.0
                            };
                            series[w].record(report, bhp / PASCAL_PER_BAR, wct, q_w * SECONDS_PER_DAY, q_o * SECONDS_PER_DAY);
                        }
                        if schedule.survey_times.contains(&target) {
                            snapshots.push(self.snapshot(target, &p, &sw));
                        }
                        break 'pressure;
                    }
                    if interval_end - t <= 1e-9 * target.max(1.0) || frozen_mode.is_none() {
                        continue 'pressure;
                    }
                }
            }
        }
        debug_assert_eq!(series.len(), nw);
        Ok(SimOutput {
            times: schedule.report_times.clone(),
            wells: series,
            snapshots,
            diagnostics: diag,
        })
    }

    fn snapshot(&self, time: f64, p: &[f64], sw: &[f64]) -> Snapshot {
        let n = self.grid.cell_count();
        let mut pressure = vec![0.0; n];
        let mut s_w = vec![0.0; n];
        for (a, &c) in self.grid.active_cells().iter().enumerate() {
            pressure[c] = p[a] / PASCAL_PER_BAR;
            s_w[c] = sw[a];
        }
        Snapshot { time, pressure, s_w }
    }

    /// Assembles and solves the pressure system, re-upwinding until the
    /// mobility choice agrees with the computed potentials, then evaluates
    /// the phase fluxes with the mobilities used in the final solve.
    fn solve_pressure(
        &self,
        lw: &[f64],
        lo: &[f64],
        unknowns: &mut [f64],
        upwind: &mut Upwind,
        diag: &mut SimDiagnostics,
    ) -> Result<StepFluxes> {
        let na = self.na;
        let nw = self.config.wells.len();
        let n = na + nw;
        let g = self.gravity();
        let (rw, ro) = (self.fluids.rho_w, self.fluids.rho_o);
        let (aq_w, _) = self.fluids.mobilities(self.fluids.s_w_max());

        for (w, perfs) in self.perfs.iter().enumerate() {
            if perfs.iter().all(|pf| pf.wi * (lw[pf.a] + lo[pf.a]) <= 0.0) {
                return Err(Error::ZeroWellMobility(self.config.wells[w].name.clone()));
            }
        }

        let max_iter = self.config.numerics.max_upwind_iterations.max(1);
        for attempt in 0..max_iter {
            let mut builder = TripletBuilder::new(n);
            let mut rhs = vec![0.0; n];
            let pin = self.pin.map(|a| (a, unknowns[a]));
            let couple = |builder: &mut TripletBuilder, rhs: &mut [f64], a: usize, b: usize, c: f64| match pin {
                Some((q, pq)) if a == q => {
                    builder.add(b, b, c);
                    rhs[b] += c * pq;
                }
                Some((q, pq)) if b == q => {
                    builder.add(a, a, c);
                    rhs[a] += c * pq;
                }
                _ => builder.add_coupling(a, b, c),
            };

            for (f, face) in self.faces.iter().enumerate() {
                let mw = if upwind.water[f] { lw[face.a] } else { lw[face.b] };
                let mo = if upwind.oil[f] { lo[face.a] } else { lo[face.b] };
                couple(&mut builder, &mut rhs, face.a, face.b, face.trans * (mw + mo));
                if g != 0.0 && face.ddepth != 0.0 {
                    let gterm = face.trans * g * (mw * rw + mo * ro) * face.ddepth;
                    rhs[face.a] += gterm;
                    rhs[face.b] -= gterm;
                }
            }
            for (f, bf) in self.bfaces.iter().enumerate() {
                let m = if upwind.boundary_inflow[f] { aq_w } else { lw[bf.a] + lo[bf.a] };
                builder.add(bf.a, bf.a, bf.trans * m);
                rhs[bf.a] += bf.trans * m * self.boundary_pressure;
            }
            for (w, perfs) in self.perfs.iter().enumerate() {
                let row = na + w;
                for pf in perfs {
                    let c = pf.wi * (lw[pf.a] + lo[pf.a]);
                    couple(&mut builder, &mut rhs, pf.a, row, c);
                }
                rhs[row] += -self.config.wells[w].control.outflow();
            }
            if let Some((q, pq)) = pin {
                builder.add(q, q, 1.0);
                rhs[q] = pq;
            }
            let a = builder.build();
            // Solve for the correction so the tolerance is measured against
            // flux imbalances rather than the absolute pressure level.
            let mut residual = vec![0.0; n];
            a.mul(unknowns, &mut residual);
            for (r, b) in residual.iter_mut().zip(&rhs) {
                *r = b - *r;
            }
            let mut delta = vec![0.0; n];
            let stats = pcg(
                &a,
                &residual,
                &mut delta,
                self.config.numerics.cg_tolerance,
                self.config.numerics.cg_max_iterations,
            )?;
            for (u, d) in unknowns.iter_mut().zip(&delta) {
                *u += d;
            }
            diag.linear_iterations += stats.iterations;
            diag.pressure_solves += 1;

            let fresh = self.upwind_from(&unknowns[..na]);
            let consistent = fresh.water == upwind.water
                && fresh.oil == upwind.oil
                && fresh.boundary_inflow == upwind.boundary_inflow;
            if consistent || attempt + 1 == max_iter {
                return Ok(self.fluxes(lw, lo, unknowns, upwind));
            }
            *upwind = fresh;
        }
        unreachable!("loop returns on its last attempt")
    }

    fn fluxes(&self, lw: &[f64], lo: &[f64], unknowns: &[f64], upwind: &Upwind) -> StepFluxes {
        let na = self.na;
        let p = &unknowns[..na];
        let g = self.gravity();
        let (rw, ro) = (self.fluids.rho_w, self.fluids.rho_o);
        let (aq_w, _) = self.fluids.mobilities(self.fluids.s_w_max());
        let mut water_in = vec![0.0; na];
        let mut total_in = vec![0.0; na];
        let mut total_out = vec![0.0; na];
        let mut phase_abs = vec![0.0; na];
        let mut gross_water = 0.0;
        let mut gross_volume = 0.0;
        let mut imbalance = 0.0;
        let mut face_total = Vec::with_capacity(self.faces.len());
        let mut boundary_total = Vec::with_capacity(self.bfaces.len());
        let mut perf_total = Vec::with_capacity(self.perfs.len());

        let mut account = |a: usize, fw_out: f64, fo_out: f64, water_in: &mut [f64]| {
            water_in[a] -= fw_out;
            let tot = fw_out + fo_out;
            if tot > 0.0 {
                total_out[a] += tot;
            } else {
                total_in[a] -= tot;
            }
            phase_abs[a] += fw_out.abs() + fo_out.abs();
        };

        for (f, face) in self.faces.iter().enumerate() {
            let mw = if upwind.water[f] { lw[face.a] } else { lw[face.b] };
            let mo = if upwind.oil[f] { lo[face.a] } else { lo[face.b] };
            let dp = p[face.a] - p[face.b];
            let fw = face.trans * mw * (dp - rw * g * face.ddepth);
            let fo = face.trans * mo * (dp - ro * g * face.ddepth);
            account(face.a, fw, fo, &mut water_in);
            account(face.b, -fw, -fo, &mut water_in);
            face_total.push(fw + fo);
        }
        for (f, bf) in self.bfaces.iter().enumerate() {
            let (fw, fo) = if upwind.boundary_inflow[f] {
                (bf.trans * aq_w * (p[bf.a] - self.boundary_pressure), 0.0)
            } else {
                let dp = p[bf.a] - self.boundary_pressure;
                (bf.trans * lw[bf.a] * dp, bf.trans * lo[bf.a] * dp)
            };
            account(bf.a, fw, fo, &mut water_in);
            boundary_total.push(fw + fo);
            gross_water += fw.abs();
            gross_volume += (fw + fo).abs();
            imbalance += fw + fo;
        }
        let mut wells = Vec::with_capacity(self.perfs.len());
        for (w, perfs) in self.perfs.iter().enumerate() {
            let bhp = unknowns[na + w];
            let injector = self.config.wells[w].control.is_injector();
            let (mut q_w, mut q_o) = (0.0, 0.0);
            let mut totals = Vec::with_capacity(perfs.len());
            for pf in perfs {
                let (mw, mo) = (lw[pf.a], lo[pf.a]);
                let q = pf.wi * (mw + mo) * (p[pf.a] - bhp);
                let (fw, fo) = if injector {
                    (q, 0.0)
                } else {
                    (pf.wi * mw * (p[pf.a] - bhp), pf.wi * mo * (p[pf.a] - bhp))
                };
                account(pf.a, fw, fo, &mut water_in);
                totals.push(fw + fo);
                q_w += fw;
                q_o += fo;
                gross_water += fw.abs();
                gross_volume += (fw + fo).abs();
                imbalance += fw + fo;
            }
            wells.push((bhp, q_w, q_o));
            perf_total.push(totals);
        }
        let throughput = if g != 0.0 {
            phase_abs
        } else {
            total_in.iter().zip(&total_out).map(|(a, b)| a.max(*b)).collect()
        };
        StepFluxes {
            water_in,
            throughput,
            wells,
            gross_water,
            volume_imbalance: imbalance,
            gross_volume,
            face_total,
            boundary_total,
            perf_total,
        }
    }

    /// Re-splits frozen total fluxes into water and oil with the
    /// fractional flow of the upstream saturation. Only the fields the
    /// transport step reads are filled in.
    fn split_frozen(&self, frozen: &StepFluxes, sw: &[f64]) -> StepFluxes {
        let f: Vec<f64> = sw.iter().map(|&s| self.fluids.fractional_flow(s)).collect();
        let fw = |a: usize| f[a];
        let mut water_in = vec![0.0; self.na];
        let mut gross_water = 0.0;
        for (face, &q) in self.faces.iter().zip(&frozen.face_total) {
            let w = q * if q >= 0.0 { fw(face.a) } else { fw(face.b) };
            water_in[face.a] -= w;
            water_in[face.b] += w;
        }
        for (bf, &q) in self.bfaces.iter().zip(&frozen.boundary_total) {
            let w = if q < 0.0 { q } else { q * fw(bf.a) };
            water_in[bf.a] -= w;
            gross_water += w.abs();
        }
        let mut wells = Vec::with_capacity(self.perfs.len());
        for (w, perfs) in self.perfs.iter().enumerate() {
            let injector = self.config.wells[w].control.is_injector();
            let (mut q_w, mut q_o) = (0.0, 0.0);
            for (pf, &q) in perfs.iter().zip(&frozen.perf_total[w]) {
                let qw = if injector { q } else { q * fw(pf.a) };
                water_in[pf.a] -= qw;
                q_w += qw;
                q_o += q - qw;
                gross_water += qw.abs();
            }
            wells.push((frozen.wells[w].0, q_w, q_o));
        }
        StepFluxes {
            water_in,
            throughput: Vec::new(),
            wells,
            gross_water,
            volume_imbalance: frozen.volume_imbalance,
            gross_volume: frozen.gross_volume,
            face_total: Vec::new(),
            boundary_total: Vec::new(),
            perf_total: Vec::new(),
        }
    }
}
