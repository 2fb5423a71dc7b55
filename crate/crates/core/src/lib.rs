//! Idealized MIMO channel-sounder model with multipath component
//! extraction and ground-truth association.
//!
//! The pipeline is: [`synthesize_response`] turns a path list into a
//! space-frequency response, [`beamspace_transform`] maps it onto an
//! oversampled angle-angle-delay grid, [`greedy_ls`] extracts path
//! estimates, and [`associate`] scores them against the truth.
//!
//! Angles are spatial frequencies in cycles, `[-0.5, 0.5)`; delays are in
//! seconds. With the `parallel` feature (on by default) the heavy loops run
//! on rayon; without it everything is sequential and produces identical
//! results.

pub mod assignment;
pub mod association;
pub mod beamspace;
mod dft;
pub mod error;
pub mod extract;
pub mod parallel;
pub mod pathio;
pub mod scenario;
pub mod synth;
pub mod tensor;

pub use assignment::{assign, Assignment};
pub use association::{associate, AssociatedPair, AssociationResult, ResolutionSpec};
pub use beamspace::{beamspace_transform, single_path_grid, BeamspaceGrid, GridSpec};
pub use dft::cis_turns;
pub use error::{Error, Result};
pub use extract::{
    greedy_extract, greedy_ls, reconstruct, reconstruction_error, sage_refine, ExtractionConfig, ExtractionTrace,
};
pub use scenario::{Scenario, ScenarioSpec};
pub use synth::{add_awgn, synthesize_response, FrequencyResponse, PathParams, SounderConfig};
pub use tensor::Tensor3;
