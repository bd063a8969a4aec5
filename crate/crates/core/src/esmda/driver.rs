use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dict::{decode_ensemble, encode_ensemble, Dictionary};
use crate::error::{Error, Result};
use crate::esmda::observations::{assemble_observations, ObservationLayout, ObservationSet, SeismicOperator};
use crate::esmda::schedule::{validate_schedule, MdaSchedule};
use crate::esmda::update::{esmda_update, DEFAULT_ENERGY};
use crate::flow::{simulate, FlowConfig, Schedule, SimOutput};
use crate::grid::Grid;
use crate::metrics::rmse;
use crate::model::{Ensemble, EnsembleKind, ReservoirModel, StateVector};
use crate::pem::{FluidModuli, RockPhysicsParams};
use crate::prior::{model_from_lnk, LayerRegression};
use crate::seed::{derive_seed, STREAM_PERTURB};

/// Static description of the forward problem shared by both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub grid: Grid,
    pub flow: FlowConfig,
    pub schedule: Schedule,
    pub layers: Vec<LayerRegression>,
    pub rock: RockPhysicsParams,
    pub fluid_moduli: FluidModuli,
    /// lnKx is clamped into this range before building a model.
    pub lnk_bounds: (f64, f64),
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate(&self.grid)?;
        self.schedule.validate()?;
        self.rock.validate()?;
        self.fluid_moduli.validate()?;
        if !(self.lnk_bounds.0 < self.lnk_bounds.1) {
            return Err(Error::invalid("lnK bounds must satisfy lower < upper"));
        }
        Ok(())
    }

    pub fn model(&self, lnk_active: &[f64]) -> Result<ReservoirModel> {
        let (lo, hi) = self.lnk_bounds;
        let clamped: Vec<f64> = lnk_active.iter().map(|v| v.clamp(lo, hi)).collect();
        model_from_lnk(&clamped, &self.grid, &self.layers, self.rock.phi_critical)
    }

    pub fn simulate(&self, lnk_active: &[f64]) -> Result<(ReservoirModel, SimOutput)> {
        let model = self.model(lnk_active)?;
        let out = simulate(&model, &self.grid, &self.flow, &self.schedule)?;
        Ok((model, out))
    }

    pub fn seismic(&self) -> SeismicOperator {
        SeismicOperator {
            grid: self.grid.clone(),
            rock: self.rock.clone(),
            fluids: self.fluid_moduli.clone(),
        }
    }

    /// Control rate of every well named in `wells`.
    pub fn well_rates(&self, wells: &[String]) -> Vec<f64> {
        wells
            .iter()
            .map(|n| {
                self.flow
                    .wells
                    .iter()
                    .find(|w| &w.name == n)
                    .map_or(0.0, |w| w.control.rate())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssimilationSettings {
    pub mda: MdaSchedule,
    #[serde(default = "default_energy")]
    pub energy: f64,
    pub seed: u64,
}

fn default_energy() -> f64 {
    DEFAULT_ENERGY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resparsify {
    /// Coefficients are updated freely.
    #[default]
    Never,
    /// Updated coefficients are decoded and re-coded by OMP after every update.
    Every,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSettings {
    pub sparsity: usize,
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default)]
    pub resparsify: Resparsify,
}

/// Simulation results stored per member without snapshots.
fn strip(mut out: SimOutput) -> SimOutput {
    out.snapshots.clear();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssimilationResult {
    pub method: String,
    /// States before the first update and after each one (`N_a + 1` entries).
    pub states: Vec<Vec<Vec<f64>>>,
    /// Simulated data of every member at every stage.
    pub simulated: Vec<Vec<Vec<f64>>>,
    /// Production-data RMSE of every member at every stage.
    pub member_rmse: Vec<Vec<f64>>,
    /// Production-data RMSE of the simulated ensemble-mean field per stage.
    pub mean_field_rmse: Vec<f64>,
    /// Final lnKx of every member over active cells.
    pub final_fields: Vec<Vec<f64>>,
    /// Final impedance map (`ny × nx`) of every member at every survey.
    pub final_impedance: Vec<Vec<Vec<f64>>>,
    pub initial_outputs: Vec<SimOutput>,
    pub final_outputs: Vec<SimOutput>,
}

impl AssimilationResult {
    pub fn stages(&self) -> usize {
        self.member_rmse.len()
    }

    /// Mean of the member RMSEs at each stage.
    pub fn mean_rmse_trace(&self) -> Vec<f64> {
        self.member_rmse
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Ensemble mean of the final lnKx fields.
    pub fn final_mean_field(&self) -> Vec<f64> {
        let n = self.final_fields.len() as f64;
        let mut mean = vec![0.0; self.final_fields[0].len()];
        for f in &self.final_fields {
            for (a, b) in mean.iter_mut().zip(f) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n);
        mean
    }

    /// `stage,member,rmse` rows followed by nothing else.
    pub fn rmse_csv(&self) -> String {
        let mut s = String::from("stage,member,rmse\n");
        for (p, row) in self.member_rmse.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                s.push_str(&format!("{p},{i},{v}\n"));
            }
        }
        s
    }
}

/// Production RMSE of one simulated data vector against the observations.
pub fn production_rmse(obs: &ObservationSet, simulated: &[f64]) -> Result<f64> {
    let rows = obs.layout.production_rows();
    let steps = obs.layout.production_steps();
    let o: Vec<f64> = rows.iter().map(|&r| obs.d_obs[r]).collect();
    let s: Vec<f64> = rows.iter().map(|&r| simulated[r]).collect();
    let sig: Vec<f64> = rows.iter().map(|&r| obs.sigma[r]).collect();
    rmse(&o, &s, &sig, &steps)
}

struct StageRun {
    data: Vec<Vec<f64>>,
    outputs: Vec<SimOutput>,
    impedance: Vec<Vec<Vec<f64>>>,
}

fn run_stage(exp: &Experiment, fields: &[Vec<f64>], obs: &ObservationSet, keep_impedance: bool) -> Result<StageRun> {
    let seismic = exp.seismic();
    let runs = fields
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let member = |source: Error| Error::MemberFailed {
                member: i,
                source: Box::new(source),
            };
            let (model, out) = exp.simulate(f).map_err(member)?;
            let data = assemble_observations(&out, &model, &obs.layout, Some(&seismic)).map_err(member)?;
            let maps = if keep_impedance {
                exp.schedule
                    .survey_times
                    .iter()
                    .map(|&t| seismic.map_at(&model, &out, t))
                    .collect::<Result<Vec<_>>>()
                    .map_err(member)?
            } else {
                Vec::new()
            };
            Ok((data, strip(out), maps))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stage = StageRun {
        data: Vec::with_capacity(runs.len()),
        outputs: Vec::with_capacity(runs.len()),
        impedance: Vec::with_capacity(runs.len()),
    };
    for (d, o, m) in runs {
        stage.data.push(d);
        stage.outputs.push(o);
        stage.impedance.push(m);
    }
    Ok(stage)
}

fn mean_of(fields: &[Vec<f64>]) -> Vec<f64> {
    let n = fields.len() as f64;
    let mut mean = vec![0.0; fields[0].len()];
    for f in fields {
        for (a, b) in mean.iter_mut().zip(f) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

fn mean_field_rmse(exp: &Experiment, fields: &[Vec<f64>], obs: &ObservationSet) -> Result<f64> {
    let (model, out) = exp.simulate(&mean_of(fields))?;
    let data = assemble_observations(&out, &model, &obs.layout, Some(&exp.seismic()))?;
    production_rmse(obs, &data)
}

/// Generic smoother loop: `decode` maps states to lnKx fields and
/// `recode` may rewrite states after an update.
fn run_loop(
    method: &str,
    exp: &Experiment,
    initial: Ensemble,
    obs: &ObservationSet,
    settings: &AssimilationSettings,
    decode: &dyn Fn(&Ensemble) -> Result<Vec<Vec<f64>>>,
    recode: &dyn Fn(Ensemble) -> Result<Ensemble>,
) -> Result<AssimilationResult> {
    validate_schedule(&settings.mda)?;
    exp.validate()?;
    let n_a = settings.mda.len();
    let mut states = initial;
    let mut result = AssimilationResult {
        method: method.to_string(),
        states: Vec::with_capacity(n_a + 1),
        simulated: Vec::with_capacity(n_a + 1),
        member_rmse: Vec::with_capacity(n_a + 1),
        mean_field_rmse: Vec::with_capacity(n_a + 1),
        final_fields: Vec::new(),
        final_impedance: Vec::new(),
        initial_outputs: Vec::new(),
        final_outputs: Vec::new(),
    };
    for p in 0..=n_a {
        let fields = decode(&states)?;
        let last = p == n_a;
        let stage = run_stage(exp, &fields, obs, last)?;
        result
            .member_rmse
            .push(stage.data.iter().map(|d| production_rmse(obs, d)).collect::<Result<_>>()?);
        result.mean_field_rmse.push(mean_field_rmse(exp, &fields, obs)?);
        result.states.push(states.members().iter().map(|m| m.0.clone()).collect());
        if p == 0 {
            result.initial_outputs = stage.outputs.clone();
        }
        if last {
            result.final_fields = fields;
            result.final_impedance = stage.impedance;
            result.final_outputs = stage.outputs;
            result.simulated.push(stage.data);
            break;
        }
        let updated = esmda_update(
            &states,
            &stage.data,
            &obs.d_obs,
            &obs.sigma,
            settings.mda.alphas[p],
            settings.energy,
            derive_seed(settings.seed, STREAM_PERTURB, p as u64),
        )?;
        result.simulated.push(stage.data);
        states = recode(updated)?;
    }
    Ok(result)
}

/// ES-MDA on raw lnKx. Only the production part of `obs` is used.
pub fn run_baseline_esmda(
    exp: &Experiment,
    initial: &[Vec<f64>],
    obs: &ObservationSet,
    settings: &AssimilationSettings,
) -> Result<AssimilationResult> {
    let production = obs.layout.production_rows();
    let layout = ObservationLayout::production(&obs.layout.times, &obs.layout.wells);
    let prod_obs = ObservationSet {
        layout,
        truth: production.iter().map(|&r| obs.truth[r]).collect(),
        d_obs: production.iter().map(|&r| obs.d_obs[r]).collect(),
        sigma: production.iter().map(|&r| obs.sigma[r]).collect(),
    };
    check_fields(exp, initial)?;
    let ens = Ensemble::new(initial.iter().cloned().map(StateVector).collect(), EnsembleKind::RawLnK)?;
    run_loop(
        "esmda",
        exp,
        ens,
        &prod_obs,
        settings,
        &|e: &Ensemble| Ok(e.members().iter().map(|m| m.0.clone()).collect()),
        &|e: Ensemble| Ok(e),
    )
}

fn check_fields(exp: &Experiment, fields: &[Vec<f64>]) -> Result<()> {
    let n = exp.grid.active_count();
    if let Some(f) = fields.iter().find(|f| f.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "initial lnKx field",
            expected: n,
            actual: f.len(),
        });
    }
    Ok(())
}

/// ES-MDA on OMP coefficients of lnKx with every datum in `obs`.
pub fn run_shm_ked(
    exp: &Experiment,
    initial: &[Vec<f64>],
    obs: &ObservationSet,
    dict: &Dictionary,
    sparse: &SparseSettings,
    settings: &AssimilationSettings,
) -> Result<AssimilationResult> {
    check_fields(exp, initial)?;
    if dict.signal_len() != exp.grid.active_count() {
        return Err(Error::DimensionMismatch {
            what: "dictionary signal length",
            expected: exp.grid.active_count(),
            actual: dict.signal_len(),
        });
    }
    let raw = Ensemble::new(initial.iter().cloned().map(StateVector).collect(), EnsembleKind::RawLnK)?;
    let coded = encode_ensemble(&raw, dict, sparse.sparsity, sparse.tolerance)?;
    let decode = |e: &Ensemble| -> Result<Vec<Vec<f64>>> { Ok(decode_ensemble(e, dict)?.into_members().into_iter().map(|m| m.0).collect()) };
    let recode = |e: Ensemble| -> Result<Ensemble> {
        match sparse.resparsify {
            Resparsify::Never => Ok(e),
            Resparsify::Every => encode_ensemble(&decode_ensemble(&e, dict)?, dict, sparse.sparsity, sparse.tolerance),
        }
    };
    run_loop("shm-ked", exp, coded, obs, settings, &decode, &recode)
}
