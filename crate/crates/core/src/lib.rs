//! Prediction-correction convolution-thresholding topology optimization for
//! steady heat conduction.

pub mod cases;
pub mod energy;
pub mod error;
pub mod fem;
pub mod grid;
pub mod io;
pub mod optimizer;
pub mod spectral;
#[cfg(test)]
mod test_support;
pub mod threshold;

pub use cases::{initial_guess, target_ones, CaseKind, InitKind, Materials, ProblemCase};
pub use energy::{compute_phi, evaluate_energy, EnergyBreakdown, EnergyParams, Model, StateEval};
pub use error::{IctmError, Result};
pub use fem::{BoundarySpec, HeatSolver, Preconditioner, SolverSettings};
pub use grid::{discrete_volume, field_diff_norm, GridSpec, IndicatorField, ScalarField};
pub use optimizer::{
    correction_step, run_classical, run_prediction_correction, IctmConfig, IterationRecord,
    Optimizer, RunResult, Termination, Variant,
};
pub use spectral::{
    blend_materials, convolve, perimeter_estimate, Convolver, Extension, KernelParams,
};
pub use threshold::{prediction_sets, volume_threshold, PredictionSets, ThresholdResult};
