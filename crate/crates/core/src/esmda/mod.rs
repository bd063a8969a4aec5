//! Ensemble smoother with multiple data assimilation and its two drivers.

mod driver;
mod observations;
mod schedule;
mod update;

pub use driver::{
    production_rmse, run_baseline_esmda, run_shm_ked, AssimilationResult, AssimilationSettings, Experiment,
    Resparsify, SparseSettings,
};
pub use observations::{assemble_observations, Datum, NoiseModel, ObservationLayout, ObservationSet, SeismicOperator};
pub use schedule::{validate_schedule, MdaSchedule, SCHEDULE_TOLERANCE};
pub use update::{
    esmda_update, esmda_update_with_seeds, member_seed, perturb_observations, perturb_one, DEFAULT_ENERGY,
};
