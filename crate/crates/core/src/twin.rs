//! In-memory twin experiment: prior library, dictionary, truth, both arms
//! and their scores.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dct::{dct2_forward, fill_masked, select_indices, zigzag_energy_fraction};
use crate::dict::{ksvd_train, Dictionary, KsvdReport};
use crate::error::{Error, Result};
use crate::esmda::{
    assemble_observations, run_baseline_esmda, run_shm_ked, AssimilationResult, Experiment, ObservationLayout,
    ObservationSet,
};
use crate::flow::SimOutput;
use crate::grid::Grid;
use crate::metrics::{ssim, MetricReport, SsimParams};
use crate::model::{scatter, vertical_average, ReservoirModel};
use crate::prior::{draw_field, generate_prior_library, ModelLibrary};
use crate::seed::{derive_seed, STREAM_TRUTH};

pub fn prior_library(cfg: &RunConfig) -> Result<ModelLibrary> {
    let grid = cfg.grid.build()?;
    generate_prior_library(&grid, &cfg.prior, cfg.library_size, cfg.seed)
}

pub fn learn_dictionary(cfg: &RunConfig, library: &ModelLibrary) -> Result<(Dictionary, KsvdReport)> {
    let n = library.fields.first().map_or(0, |f| f.len());
    ksvd_train(&library.fields, &cfg.ksvd_params(n))
}

/// Truth lnKx over active cells, drawn from the prior on its own stream.
pub fn truth_field(cfg: &RunConfig, grid: &Grid) -> Result<Vec<f64>> {
    let full = draw_field(grid, &cfg.prior, derive_seed(cfg.seed, STREAM_TRUTH, 0))?;
    Ok(grid.active_cells().iter().map(|&c| full[c]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRun {
    pub field: Vec<f64>,
    pub model: ReservoirModel,
    pub output: SimOutput,
    /// Truth impedance map at every survey (`ny × nx`).
    pub impedance: Vec<Vec<f64>>,
    /// Energy captured by the kept coefficients at every survey.
    pub kept_energy: Vec<f64>,
    pub observations: ObservationSet,
}

/// Simulates the truth and builds the noisy observations. The kept DCT
/// indices are chosen on the first survey map and reused for all surveys.
pub fn run_truth(cfg: &RunConfig, exp: &Experiment) -> Result<TruthRun> {
    let field = truth_field(cfg, &exp.grid)?;
    let (model, output) = exp.simulate(&field)?;
    let seismic = exp.seismic();
    let impedance = exp
        .schedule
        .survey_times
        .iter()
        .map(|&t| seismic.map_at(&model, &output, t))
        .collect::<Result<Vec<_>>>()?;
    let (rows, cols) = (exp.grid.ny(), exp.grid.nx());
    let first = impedance
        .first()
        .ok_or_else(|| Error::invalid("the twin experiment needs at least one survey"))?;
    let kept = select_indices(&dct2_forward(&fill_masked(first), rows, cols)?, cfg.dct)?;
    let kept_energy = impedance
        .iter()
        .map(|img| {
            let c = dct2_forward(&fill_masked(img), rows, cols)?;
            let total: f64 = c.values.iter().map(|v| v * v).sum();
            let part: f64 = kept.iter().map(|&i| c.values[i] * c.values[i]).sum();
            Ok(if total > 0.0 { part / total } else { 1.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    let wells: Vec<String> = exp.flow.wells.iter().map(|w| w.name.clone()).collect();
    let layout = ObservationLayout::production(&exp.schedule.history_times(), &wells)
        .with_impedance(&exp.schedule.survey_times, &kept);
    let clean = assemble_observations(&output, &model, &layout, Some(&seismic))?;
    let sigma = cfg.noise.sigmas(&layout, &clean, &exp.well_rates(&wells))?;
    let observations = ObservationSet::new(layout, clean, sigma, cfg.seed)?;
    let mut output = output;
    output.snapshots.clear();
    Ok(TruthRun {
        field,
        model,
        output,
        impedance,
        kept_energy,
        observations,
    })
}

/// Fraction of energy in the shortest zigzag prefix of `fraction` of the
/// coefficients of `image`.
pub fn zigzag_prefix_energy(image: &[f64], rows: usize, cols: usize, fraction: f64) -> Result<f64> {
    let c = dct2_forward(&fill_masked(image), rows, cols)?;
    let cum = zigzag_energy_fraction(&c);
    let k = ((fraction * cum.len() as f64).floor() as usize).clamp(1, cum.len());
    Ok(cum[k - 1])
}

/// SSIM of the vertically averaged maps of two active-cell fields; the
/// dynamic range is that of the reference map.
pub fn field_ssim(grid: &Grid, reference: &[f64], field: &[f64]) -> Result<f64> {
    let a = vertical_average(&scatter(reference, grid)?, grid);
    let b = vertical_average(&scatter(field, grid)?, grid);
    let (a, b) = (fill_masked(&a), fill_masked(&b));
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    ssim(&a, &b, grid.ny(), grid.nx(), range, &SsimParams::default())
}

fn mean_field(fields: &[Vec<f64>]) -> Vec<f64> {
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

/// Scores stage `stage` of an arm against the truth. `fields` are the lnKx
/// fields of that stage (after decoding for the sparse arm).
pub fn score(label: &str, grid: &Grid, truth: &[f64], result: &AssimilationResult, stage: usize, fields: &[Vec<f64>]) -> Result<MetricReport> {
    let ssim = field_ssim(grid, truth, &mean_field(fields))?;
    Ok(MetricReport::new(
        label,
        result.member_rmse[stage].clone(),
        result.mean_field_rmse[stage],
        ssim,
    ))
}

/// Everything the twin experiment produces.
#[derive(Debug, Clone)]
pub struct TwinOutcome {
    pub library: ModelLibrary,
    pub dictionary: Dictionary,
    pub ksvd: KsvdReport,
    pub truth: TruthRun,
    pub baseline: AssimilationResult,
    pub sparse: AssimilationResult,
    /// Initial, ES-MDA and SHM-KED rows.
    pub reports: Vec<MetricReport>,
}

/// The initial, ES-MDA and SHM-KED rows of the comparison table.
pub fn comparison(
    grid: &Grid,
    truth: &[f64],
    initial: &[Vec<f64>],
    baseline: &AssimilationResult,
    sparse: &AssimilationResult,
) -> Result<Vec<MetricReport>> {
    Ok(vec![
        score("initial", grid, truth, baseline, 0, initial)?,
        score("esmda", grid, truth, baseline, baseline.stages() - 1, &baseline.final_fields)?,
        score("shm-ked", grid, truth, sparse, sparse.stages() - 1, &sparse.final_fields)?,
    ])
}

pub fn run_twin(cfg: &RunConfig) -> Result<TwinOutcome> {
    cfg.validate()?;
    let exp = cfg.experiment()?;
    let library = prior_library(cfg)?;
    let (dictionary, ksvd) = learn_dictionary(cfg, &library)?;
    let truth = run_truth(cfg, &exp)?;
    let initial: Vec<Vec<f64>> = library.fields[..cfg.ensemble_size].to_vec();
    let settings = cfg.assimilation_settings();
    let baseline = run_baseline_esmda(&exp, &initial, &truth.observations, &settings)?;
    let sparse = run_shm_ked(
        &exp,
        &initial,
        &truth.observations,
        &dictionary,
        &cfg.sparse_settings(exp.grid.active_count()),
        &settings,
    )?;
    let reports = comparison(&exp.grid, &truth.field, &initial, &baseline, &sparse)?;
    Ok(TwinOutcome {
        library,
        dictionary,
        ksvd,
        truth,
        baseline,
        sparse,
        reports,
    })
}
