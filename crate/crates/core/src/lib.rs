//! Localization of passive drifters in gridded current fields.
//!
//! The pipeline builds a deterministic cell map from the current field, adds
//! motion uncertainty to get a finite Markov chain, splits the grid into
//! attractors and transient groups, and decodes the most likely drifter path
//! from a compass history with a hidden Markov model.

pub mod error;
pub mod flow;
pub mod gcm;
pub mod grid;
pub mod hmm;
pub mod ingest;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
pub use flow::{build_cell_map, euler_endpoint, mapped_cell, CellMap, EulerStep, VectorField};
pub use gcm::{
    build_stochastic_map, decompose, find_persistent_groups, find_transient_groups, reachability,
    strongly_connected_components, transition_matrix, FlowDecomposition, Reachability, Region, StochasticCellMap,
    TransitionMatrix,
};
pub use grid::{CellIndex, Direction, Workspace};
pub use hmm::{
    emission_matrix, initial_distribution, viterbi, viterbi_final_state, Decoded, EmissionMatrix, HmmModel,
    ObservationHistory, PriorMode,
};
pub use ingest::{load_field, save_field, synthesize_field, SyntheticField};
pub use model::FlowModel;
pub use sim::{error_report, run_experiment, sample_trajectory, ErrorReport, ExperimentConfig, ExperimentReport};
