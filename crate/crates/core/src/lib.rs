//! Self-calibration of circular sensor rings from pairwise time-of-flight data.
//!
//! Sensors sit on an annulus of central radius `r0` and width `a`. Their
//! squared distance matrix has rank at most four, so the missing and delayed
//! measurements can be filled in by low-rank completion (OptSpace) and the
//! positions read back with classical multidimensional scaling.
//!
//! The pipeline, in order:
//!
//! - [`geometry`]: ring layouts, distance matrices, rank certificates.
//! - [`observation`]: structured/random masks, noise, delay, diagnostics.
//! - [`completion`]: trimming, rank-q projection, manifold descent.
//! - [`embedding`]: centering, classical MDS, the rigid-invariant metric.
//! - [`delay`]: grid search over the unknown constant delay.
//! - [`baselines`]: MDS-MAP and the scaled zero-fill spectral method.
//!
//! Everything here is `no_std` (with `alloc`) and deterministic given a seed.
//! File formats, the experiment harness and the CLI live in the `ringcal`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod completion;
pub mod delay;
pub mod embedding;
pub mod geometry;
pub mod linalg;
pub mod mask;
pub mod observation;
pub mod seed;

pub use nalgebra;
pub use nalgebra::DMatrix;

pub use baselines::{mds_map, svd_reconstruct, BaselineError, BaselineOutput, BaselineTag};
pub use completion::{
    estimate_sampling_rate, optspace_complete, rank_q_projection, trim, CompletionError,
    CompletionOptions, CompletionResult, DescentMetric, SamplingRate,
};
pub use delay::{delay_cost, estimate_delay, DelayError, DelaySearchConfig, DelaySearchResult};
pub use embedding::{
    centering_matrix, classical_mds, position_distance, procrustes_align, EmbeddingError,
    MdsOutput, PositionEstimate, Source,
};
pub use geometry::{
    generate_ring_layout, pairwise_distance_matrix, rank_certificate, squared_distance_matrix,
    DistanceMatrix, GeometryError, RankCertificate, SensorLayout, SquaredDistanceMatrix,
};
pub use mask::PairSet;
pub use observation::{
    effective_noise_norm, random_mask, structured_mask, structured_noise_norm,
    synthesize_observation, MaskPair, ObservationError, ObservationParams, ObservationSet,
    StructuredMode,
};
