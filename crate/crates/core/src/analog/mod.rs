//! Behavioral current-mode circuit: mirrors, KCL layers, bistable cells,
//! the compiler from trained networks and a frame-by-frame simulator.

mod cell;
mod fc;
mod mirror;
mod netlist;
mod perturb;
mod sim;

#[cfg(test)]
mod tests;

pub use cell::{cell_response, BistableCellModel, CellCalibration, CellState};
pub use fc::{fc_stage, NodeCurrents};
pub use mirror::{mirror_out, synthetic_relative_error, Branch, CalibrationTable, MirrorMode, MirrorSpec};
pub use netlist::{compile, Activation, CircuitNetlist, Stage, NETLIST_VERSION};
pub use perturb::{Corner, Instance, PerturbationSpec, CORNER_SHIFT, DEFAULT_LEAKAGE_PA};
pub use sim::{
    measure_suppression, simulate, to_currents, write_trace_csv, CandidateNoise, SimOptions, SimTrace,
    SuppressionReport,
};

/// Current standing for a software value of 1.
pub const PA_PER_UNIT: f64 = 1000.0;
