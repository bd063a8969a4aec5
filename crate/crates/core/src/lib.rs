//! Sparse-coded ensemble seismic history matching.

pub mod config;
pub mod dct;
pub mod dict;
pub mod error;
pub mod esmda;
pub mod flow;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pem;
pub mod prior;
pub mod seed;
pub mod twin;

pub use error::{Error, Result};
pub use grid::Grid;
pub use model::{devectorize, vectorize, Ensemble, EnsembleKind, ReservoirModel, StateVector};
