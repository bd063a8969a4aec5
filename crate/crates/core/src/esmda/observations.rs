use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dct::compress;
use crate::error::{Error, Result};
use crate::flow::SimOutput;
use crate::grid::Grid;
use crate::model::ReservoirModel;
use crate::pem::{impedance_map, FluidModuli, RockPhysicsParams};
use crate::seed::{derive_seed, rng_from, STREAM_OBS_NOISE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Datum {
    /// Bottom-hole pressure (bar) of `well` at report `step`.
    Bhp { step: usize, time: f64, well: String },
    Wct { step: usize, time: f64, well: String },
    /// Kept DCT coefficient `index` (flat, row-major) of the impedance map at `survey`.
    Impedance { survey: usize, time: f64, index: usize },
}

impl Datum {
    pub fn is_production(&self) -> bool {
        !matches!(self, Datum::Impedance { .. })
    }
}

/// Ordering of the stacked data vector: for every history time, BHP then
/// WCT of each well; then the kept coefficients of every survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub entries: Vec<Datum>,
    pub times: Vec<f64>,
    pub wells: Vec<String>,
    pub surveys: Vec<f64>,
    pub kept: Vec<usize>,
}

impl ObservationLayout {
    pub fn production(times: &[f64], wells: &[String]) -> Self {
        let mut entries = Vec::with_capacity(2 * times.len() * wells.len());
        for (step, &time) in times.iter().enumerate() {
            for w in wells {
                entries.push(Datum::Bhp {
                    step,
                    time,
                    well: w.clone(),
                });
                entries.push(Datum::Wct {
                    step,
                    time,
                    well: w.clone(),
                });
            }
        }
        ObservationLayout {
            entries,
            times: times.to_vec(),
            wells: wells.to_vec(),
            surveys: Vec::new(),
            kept: Vec::new(),
        }
    }

    pub fn with_impedance(mut self, surveys: &[f64], kept: &[usize]) -> Self {
        for (survey, &time) in surveys.iter().enumerate() {
            for &index in kept {
                self.entries.push(Datum::Impedance { survey, time, index });
            }
        }
        self.surveys = surveys.to_vec();
        self.kept = kept.to_vec();
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_impedance(&self) -> bool {
        !self.surveys.is_empty() && !self.kept.is_empty()
    }

    /// Positions of the production data.
    pub fn production_rows(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&r| self.entries[r].is_production()).collect()
    }

    /// Report step of every production datum, aligned with [`Self::production_rows`].
    pub fn production_steps(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Datum::Bhp { step, .. } | Datum::Wct { step, .. } => Some(*step),
                Datum::Impedance { .. } => None,
            })
            .collect()
    }

    /// `row,kind,time,well,index`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,kind,time,well,index\n");
        for (r, e) in self.entries.iter().enumerate() {
            match e {
                Datum::Bhp { time, well, .. } => s.push_str(&format!("{r},bhp,{time},{well},\n")),
                Datum::Wct { time, well, .. } => s.push_str(&format!("{r},wct,{time},{well},\n")),
                Datum::Impedance { time, index, .. } => s.push_str(&format!("{r},impedance,{time},,{index}\n")),
            }
        }
        s
    }
}

/// Everything needed to turn a simulation snapshot into an impedance map.
#[derive(Debug, Clone, PartialEq)]
pub struct SeismicOperator {
    pub grid: Grid,
    pub rock: RockPhysicsParams,
    pub fluids: FluidModuli,
}

impl SeismicOperator {
    pub fn rows(&self) -> usize {
        self.grid.ny()
    }

    pub fn cols(&self) -> usize {
        self.grid.nx()
    }

    /// `ny × nx` impedance image at `time` (a survey snapshot of `sim`).
    pub fn map_at(&self, model: &ReservoirModel, sim: &SimOutput, time: f64) -> Result<Vec<f64>> {
        let snap = sim
            .snapshot_at(time)
            .ok_or_else(|| Error::invalid(format!("simulation has no snapshot at survey time {time}")))?;
        impedance_map(model, &self.grid, &snap.pressure, &snap.s_w, &self.rock, &self.fluids)
    }
}

/// Stacks the simulated counterpart of every datum in `layout`.
pub fn assemble_observations(
    sim: &SimOutput,
    model: &ReservoirModel,
    layout: &ObservationLayout,
    seismic: Option<&SeismicOperator>,
) -> Result<Vec<f64>> {
    let steps: Vec<usize> = layout
        .times
        .iter()
        .map(|t| {
            sim.times
                .iter()
                .position(|s| s == t)
                .ok_or_else(|| Error::invalid(format!("simulation has no report at time {t}")))
        })
        .collect::<Result<_>>()?;
    let wells = layout
        .wells
        .iter()
        .map(|w| sim.well(w).ok_or_else(|| Error::invalid(format!("simulation has no well {w}"))))
        .collect::<Result<Vec<_>>>()?;
    let coefficients: Vec<Vec<f64>> = if layout.has_impedance() {
        let op = seismic.ok_or_else(|| Error::invalid("layout contains impedance data but no seismic operator given"))?;
        layout
            .surveys
            .iter()
            .map(|&t| compress(&op.map_at(model, sim, t)?, op.rows(), op.cols(), &layout.kept))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let well_pos = |name: &str| layout.wells.iter().position(|w| w == name).unwrap_or(usize::MAX);
    let mut out = Vec::with_capacity(layout.len());
    for e in &layout.entries {
        let v = match e {
            Datum::Bhp { step, well, .. } => wells.get(well_pos(well)).map(|w| w.bhp[steps[*step]]),
            Datum::Wct { step, well, .. } => wells.get(well_pos(well)).map(|w| w.wct[steps[*step]]),
            Datum::Impedance { survey, index, .. } => layout
                .kept
                .iter()
                .position(|k| k == index)
                .and_then(|p| coefficients.get(*survey).map(|c| c[p])),
        };
        out.push(v.ok_or_else(|| Error::invalid(format!("layout entry {e:?} does not match the layout header")))?);
    }
    Ok(out)
}

/// Measurement-noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// BHP noise (bar) while the well flows.
    pub bhp_flowing: f64,
    pub bhp_shut_in: f64,
    pub wct_before_breakthrough: f64,
    pub wct_after_breakthrough: f64,
    /// Truth WCT above which a well counts as broken through.
    pub breakthrough_wct: f64,
    /// Impedance coefficient noise as a fraction of its magnitude.
    pub impedance_relative: f64,
    /// Floor as a fraction of the RMS of the kept non-DC truth coefficients.
    pub impedance_floor: f64,
    /// Multiplies every impedance noise level.
    pub impedance_scale: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            bhp_flowing: 3.0,
            bhp_shut_in: 1.0,
            wct_before_breakthrough: 0.02,
            wct_after_breakthrough: 0.05,
            breakthrough_wct: 0.01,
            impedance_relative: 0.05,
            impedance_floor: 0.05,
            impedance_scale: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.bhp_flowing,
            self.bhp_shut_in,
            self.wct_before_breakthrough,
            self.wct_after_breakthrough,
            self.impedance_relative,
            self.impedance_floor,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("noise levels must be positive and finite"));
        }
        if !(self.impedance_scale > 0.0) {
            return Err(Error::invalid("impedance noise scale must be positive"));
        }
        Ok(())
    }

    /// Noise level of every datum given the noise-free truth data.
    /// `rates` holds each layout well's control rate (0 for a shut-in well).
    pub fn sigmas(&self, layout: &ObservationLayout, truth: &[f64], rates: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if truth.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                what: "truth data",
                expected: layout.len(),
                actual: truth.len(),
            });
        }
        let mut broken = vec![f64::INFINITY; layout.wells.len()];
        for (e, &v) in layout.entries.iter().zip(truth) {
            if let Datum::Wct { time, well, .. } = e {
                let w = layout.wells.iter().position(|x| x == well).unwrap();
                if v > self.breakthrough_wct && *time < broken[w] {
                    broken[w] = *time;
                }
            }
        }
        let non_dc: Vec<f64> = layout
            .entries
            .iter()
            .zip(truth)
            .filter(|(e, _)| matches!(e, Datum::Impedance { index, .. } if *index != 0))
            .map(|(_, &v)| v)
            .collect();
        let rms = if non_dc.is_empty() {
            0.0
        } else {
            (non_dc.iter().map(|v| v * v).sum::<f64>() / non_dc.len() as f64).sqrt()
        };
        let floor = (self.impedance_floor * rms).max(f64::MIN_POSITIVE);
        layout
            .entries
            .iter()
            .zip(truth)
            .map(|(e, &v)| {
                Ok(match e {
                    Datum::Bhp { well, .. } => {
                        let w = layout.wells.iter().position(|x| x == well).unwrap();
                        if rates.get(w).copied().unwrap_or(1.0) == 0.0 {
                            self.bhp_shut_in
                        } else {
                            self.bhp_flowing
                        }
                    }
                    Datum::Wct { time, well, .. } => {
                        let w = layout.wells.iter().position(|x| x == well).unwrap();
                        if *time >= broken[w] {
                            self.wct_after_breakthrough
                        } else {
                            self.wct_before_breakthrough
                        }
                    }
                    Datum::Impedance { .. } => self.impedance_scale * (self.impedance_relative * v.abs()).max(floor),
                })
            })
            .collect()
    }
}

/// Observed data with their noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub layout: ObservationLayout,
    /// Noise-free truth response.
    pub truth: Vec<f64>,
    pub d_obs: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ObservationSet {
    /// Adds `sigma * z` to the truth; `z` is drawn datum by datum from the
    /// observation-noise stream of `seed`, so a layout that extends another
    /// shares its noisy prefix. Data with infinite sigma stay noise free.
    pub fn new(layout: ObservationLayout, truth: Vec<f64>, sigma: Vec<f64>, seed: u64) -> Result<Self> {
        if truth.len() != layout.len() || sigma.len() != layout.len() {
            return Err(Error::invalid("observation layout, truth and noise levels must have equal length"));
        }
        if let Some(r) = sigma.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::invalid(format!("noise level of datum {r} must be positive")));
        }
        let mut rng = rng_from(derive_seed(seed, STREAM_OBS_NOISE, 0));
        let d_obs = truth
            .iter()
            .zip(&sigma)
            .map(|(&t, &s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if s.is_finite() {
                    t + s * z
                } else {
                    t
                }
            })
            .collect();
        Ok(ObservationSet {
            layout,
            truth,
            d_obs,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.d_obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_obs.is_empty()
    }

    /// `row,kind,time,well,index,truth,observed,sigma`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,kind,time,well,index,truth,observed,sigma\n");
        for (line, r) in self.layout.to_csv().lines().skip(1).zip(0..) {
            s.push_str(&format!("{line},{},{},{}\n", self.truth[r], self.d_obs[r], self.sigma[r]));
        }
        s
    }
}
