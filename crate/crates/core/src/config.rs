//! JSON run configuration for the twin experiment.

use serde::{Deserialize, Serialize};

use crate::dct::TruncationRule;
use crate::dict::KsvdParams;
use crate::error::{Error, Result};
use crate::esmda::{validate_schedule, AssimilationSettings, Experiment, MdaSchedule, NoiseModel, Resparsify, SparseSettings, DEFAULT_ENERGY};
use crate::flow::FlowConfig;
use crate::flow::Schedule;
use crate::grid::Grid;
use crate::pem::{FluidModuli, RockPhysicsParams};
use crate::prior::{LayerRegression, PriorSpec, PUNQ_LAYERS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cell size along x and y (m).
    pub dx: f64,
    pub dy: f64,
    /// Layer thicknesses, top first (m).
    pub dz: Vec<f64>,
    /// Optional active flags in canonical order.
    #[serde(default)]
    pub active: Option<Vec<bool>>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.nz, self.dx, self.dy, self.dz.clone(), self.active.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    /// Atom count; defaults to four times the ensemble size.
    #[serde(default)]
    pub atoms: Option<usize>,
    /// OMP sparsity; defaults to 2% of the state length, rounded up.
    #[serde(default)]
    pub sparsity: Option<usize>,
    pub sweeps: usize,
    /// OMP residual tolerance.
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default)]
    pub resparsify: Resparsify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssimilationConfig {
    pub mda: MdaSchedule,
    #[serde(default = "default_energy")]
    pub energy: f64,
}

fn default_energy() -> f64 {
    DEFAULT_ENERGY
}

fn default_layers() -> Vec<LayerRegression> {
    PUNQ_LAYERS.to_vec()
}

fn default_bounds() -> [f64; 2] {
    [0.0, 9.0]
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Directory receiving every artifact, relative to the config file.
    #[serde(default = "default_output")]
    pub output_dir: String,
    pub grid: GridSpec,
    pub prior: PriorSpec,
    pub library_size: usize,
    pub ensemble_size: usize,
    #[serde(default = "default_layers")]
    pub layers: Vec<LayerRegression>,
    /// Clamp applied to lnKx before any simulation.
    #[serde(default = "default_bounds")]
    pub lnk_bounds: [f64; 2],
    pub flow: FlowConfig,
    pub schedule: Schedule,
    #[serde(default)]
    pub rock: RockPhysicsParams,
    #[serde(default)]
    pub fluid_moduli: FluidModuli,
    pub assimilation: AssimilationConfig,
    pub dictionary: DictionaryConfig,
    pub dct: TruncationRule,
    #[serde(default)]
    pub noise: NoiseModel,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Every problem found, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                out.push(e.to_string());
            }
        };
        match self.grid.build() {
            Ok(grid) => {
                push(self.prior.validate(&grid));
                push(self.flow.validate(&grid));
                if self.layers.len() < grid.nz() {
                    push(Err(Error::invalid(format!(
                        "{} layer regressions given for {} layers",
                        self.layers.len(),
                        grid.nz()
                    ))));
                }
                if let Some(t0) = self.dictionary.sparsity {
                    if t0 == 0 || t0 > self.atoms() {
                        push(Err(Error::invalid(format!("sparsity {t0} must be in [1, atoms]"))));
                    }
                }
            }
            Err(e) => push(Err(e)),
        }
        push(self.schedule.validate());
        if self.schedule.survey_times.is_empty() {
            push(Err(Error::invalid("schedule needs at least one survey time")));
        }
        if self.schedule.survey_times.iter().any(|&t| t > self.schedule.history_end()) {
            push(Err(Error::invalid("survey times must lie inside the history period")));
        }
        push(validate_schedule(&self.assimilation.mda));
        if !(self.assimilation.energy > 0.0 && self.assimilation.energy <= 1.0) {
            push(Err(Error::invalid("TSVD energy must be in (0, 1]")));
        }
        if self.ensemble_size < 2 || self.ensemble_size > self.library_size {
            push(Err(Error::invalid(format!(
                "ensemble size {} must be in [2, library size {}]",
                self.ensemble_size, self.library_size
            ))));
        }
        if self.dictionary.sweeps == 0 {
            push(Err(Error::invalid("dictionary learning needs at least one sweep")));
        }
        if !(self.lnk_bounds[0] < self.lnk_bounds[1]) {
            push(Err(Error::invalid("lnk_bounds must be increasing")));
        }
        push(self.rock.validate());
        push(self.fluid_moduli.validate());
        push(self.noise.validate());
        match self.dct {
            TruncationRule::KeepK { k } if k == 0 => push(Err(Error::invalid("DCT must keep at least one coefficient"))),
            TruncationRule::Energy { tau } if !(tau > 0.0 && tau <= 1.0) => {
                push(Err(Error::invalid("DCT energy threshold must be in (0, 1]")))
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(p.join("; ")))
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let exp = Experiment {
            grid: self.grid.build()?,
            flow: self.flow.clone(),
            schedule: self.schedule.clone(),
            layers: self.layers.clone(),
            rock: self.rock.clone(),
            fluid_moduli: self.fluid_moduli.clone(),
            lnk_bounds: (self.lnk_bounds[0], self.lnk_bounds[1]),
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn atoms(&self) -> usize {
        self.dictionary.atoms.unwrap_or(4 * self.ensemble_size)
    }

    /// Sparsity for a state of `state_len` entries.
    pub fn sparsity(&self, state_len: usize) -> usize {
        self.dictionary
            .sparsity
            .unwrap_or_else(|| (0.02 * state_len as f64).ceil().max(1.0) as usize)
    }

    pub fn ksvd_params(&self, state_len: usize) -> KsvdParams {
        let mut p = KsvdParams::new(self.atoms(), self.sparsity(state_len), self.dictionary.sweeps, self.seed);
        p.tolerance = self.dictionary.tolerance;
        p
    }

    pub fn sparse_settings(&self, state_len: usize) -> SparseSettings {
        SparseSettings {
            sparsity: self.sparsity(state_len),
            tolerance: self.dictionary.tolerance,
            resparsify: self.dictionary.resparsify,
        }
    }

    pub fn assimilation_settings(&self) -> AssimilationSettings {
        AssimilationSettings {
            mda: self.assimilation.mda.clone(),
            energy: self.assimilation.energy,
            seed: self.seed,
        }
    }
}
