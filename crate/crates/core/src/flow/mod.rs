//! Two-phase oil-water forward model.

mod fluids;
mod linear;
mod output;
mod simulator;
mod wells;

pub use fluids::FluidProps;
pub use linear::{pcg, CsrMatrix, SolveStats, TripletBuilder};
pub use output::{SimDiagnostics, SimOutput, Snapshot, WellSeries};
pub use simulator::{simulate, Boundary, Face, FlowConfig, Numerics, Schedule, GRAVITY};
pub use wells::{
    peaceman_index, well_response, well_response_raw, Perforation, Well, WellControl, WellResponse,
    MILLIDARCY, PASCAL_PER_BAR, SECONDS_PER_DAY,
};
