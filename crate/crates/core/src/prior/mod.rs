//! Prior model library: lnKx generators and rock-property regressions.

mod channel;
mod gaussian;
mod regression;

pub use channel::{channel_field, ChannelSpec};
pub use gaussian::{gaussian_field, GaussianFieldGenerator, VariogramSpec};
pub use regression::{apply_layer_regressions, porosity_bounds, LayerRegression, PUNQ_LAYERS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{scatter, ReservoirModel, StateVector};
use crate::seed::{derive_seed, STREAM_LIBRARY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorSpec {
    Gaussian(VariogramSpec),
    Channel(ChannelSpec),
}

impl PriorSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PriorSpec::Gaussian(_) => "gaussian",
            PriorSpec::Channel(_) => "channel",
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            PriorSpec::Gaussian(s) => s.validate(),
            PriorSpec::Channel(s) => s.validate(grid),
        }
    }
}

/// Draws one full-grid lnKx field. For repeated Gaussian draws prefer
/// [`generate_prior_library`], which reuses the spectrum.
pub fn draw_field(grid: &Grid, spec: &PriorSpec, seed: u64) -> Result<Vec<f64>> {
    match spec {
        PriorSpec::Gaussian(s) => gaussian_field(grid, s, seed),
        PriorSpec::Channel(s) => channel_field(grid, s, seed),
    }
}

/// Library of lnKx realisations stored as active-cell vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLibrary {
    pub fields: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub kind: String,
}

impl ModelLibrary {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The first `n_ens` realisations.
    pub fn initial_ensemble(&self, n_ens: usize) -> Result<Vec<StateVector>> {
        if n_ens < 2 || n_ens > self.fields.len() {
            return Err(Error::invalid(format!(
                "ensemble size {n_ens} must be in [2, {}]",
                self.fields.len()
            )));
        }
        Ok(self.fields[..n_ens].iter().cloned().map(StateVector).collect())
    }

    /// `model_id,seed,generator` rows.
    pub fn manifest_csv(&self) -> String {
        let mut s = String::from("model_id,seed,generator\n");
        for (id, seed) in self.seeds.iter().enumerate() {
            s.push_str(&format!("{id},{seed},{}\n", self.kind));
        }
        s
    }
}

/// `n_models` independent realisations; model `m` uses sub-seed
/// `derive_seed(seed, STREAM_LIBRARY, m)`.
pub fn generate_prior_library(
    grid: &Grid,
    spec: &PriorSpec,
    n_models: usize,
    seed: u64,
) -> Result<ModelLibrary> {
    if n_models < 2 {
        return Err(Error::invalid(format!("library needs at least 2 models, got {n_models}")));
    }
    spec.validate(grid)?;
    let seeds: Vec<u64> = (0..n_models as u64)
        .map(|m| derive_seed(seed, STREAM_LIBRARY, m))
        .collect();
    let gaussian = match spec {
        PriorSpec::Gaussian(s) => Some(GaussianFieldGenerator::new(grid, s)?),
        PriorSpec::Channel(_) => None,
    };
    let fields = seeds
        .par_iter()
        .map(|&s| {
            let full = match (&gaussian, spec) {
                (Some(gen), _) => gen.sample(grid, s),
                (None, PriorSpec::Channel(c)) => channel_field(grid, c, s)?,
                (None, PriorSpec::Gaussian(_)) => unreachable!(),
            };
            Ok(grid.active_cells().iter().map(|&c| full[c]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ModelLibrary {
        fields,
        seeds,
        kind: spec.kind_name().to_string(),
    })
}

/// Builds a full reservoir model from an active-cell lnKx vector.
pub fn model_from_lnk(
    lnkx_active: &[f64],
    grid: &Grid,
    layers: &[LayerRegression],
    phi_critical: f64,
) -> Result<ReservoirModel> {
    let lnkx = scatter(lnkx_active, grid)?;
    let (phi, lnkz) = apply_layer_regressions(&lnkx, grid, layers, phi_critical)?;
    ReservoirModel::new(grid, lnkx, phi, lnkz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(8, 6, 2, 10.0, 10.0, vec![1.0; 2], None).unwrap()
    }

    fn channels() -> PriorSpec {
        PriorSpec::Channel(ChannelSpec {
            count: 1,
            width: 2,
            amplitude: 1.0,
            period: 6.0,
            channel_level: 6.0,
            background_level: 2.0,
            layer_shift: 1,
        })
    }

    #[test]
    fn library_designates_leading_members_as_ensemble() {
        let lib = generate_prior_library(&grid(), &channels(), 20, 1).unwrap();
        assert_eq!(lib.len(), 20);
        let ens = lib.initial_ensemble(5).unwrap();
        assert_eq!(ens.len(), 5);
        assert_eq!(ens[3].0, lib.fields[3]);
        assert!(lib.initial_ensemble(21).is_err());
    }

    #[test]
    fn minimal_library_and_rejection() {
        assert_eq!(generate_prior_library(&grid(), &channels(), 2, 1).unwrap().len(), 2);
        assert!(generate_prior_library(&grid(), &channels(), 1, 1).is_err());
    }

    #[test]
    fn seeds_change_the_library() {
        let spec = PriorSpec::Gaussian(VariogramSpec {
            mean: 4.0,
            sill: 1.0,
            range_x: 30.0,
            range_y: 30.0,
        });
        let a = generate_prior_library(&grid(), &spec, 3, 1).unwrap();
        let b = generate_prior_library(&grid(), &spec, 3, 2).unwrap();
        let c = generate_prior_library(&grid(), &spec, 3, 1).unwrap();
        assert_eq!(a, c);
        assert!(a.fields.iter().flatten().zip(b.fields.iter().flatten()).any(|(x, y)| x != y));
    }

    #[test]
    fn manifest_lists_every_model() {
        let lib = generate_prior_library(&grid(), &channels(), 3, 8).unwrap();
        let m = lib.manifest_csv();
        assert_eq!(m.lines().count(), 4);
        assert!(m.lines().nth(1).unwrap().ends_with(",channel"));
    }
}
